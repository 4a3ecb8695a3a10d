use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use varexp_core::verify::{replay, run_suites, Failure, Suite, SuiteReport, VerifyConfig};
use varexp_core::{
    build_embedding, conjugate, embed_isometry_check, extended_norm, holder_check, mixed_norm, nakano_norm,
    norming_pairing, phi_ladder, phi_stabilized, seq_norm, seq_norm_left, special_variation,
    transpose_contraction_check, weight_isometry_check, weighted_norm, witness_pairing, Density, Error, Exponent,
    ModularKind, NonnegMatrix, SmoothExponent, SolveConfig, StepFunction, VarExpSequence, WeightedSpec,
};

use crate::{Cli, Command, FunctionInputs, RunConfig};

pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(
                Error::NotConverged { .. } | Error::BracketFailure { .. } | Error::MaximizerNotConverged { .. },
            ) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub struct Output {
    pub stdout: String,
    pub code: u8,
}

impl Output {
    fn json(value: &impl Serialize, code: u8) -> Result<Self, CliError> {
        let mut stdout = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
        stdout.push('\n');
        Ok(Output { stdout, code })
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid input in {}: {e}", path.display())))
}

fn solve_config(run: &RunConfig) -> Result<SolveConfig, CliError> {
    if run.grid == 0 {
        return Err(CliError::Usage("--grid must be at least 1".into()));
    }
    if run.cases == 0 {
        return Err(CliError::Usage("--cases must be at least 1".into()));
    }
    let cfg = SolveConfig { abs_tol: run.tol, ladder_base: run.ladder_base, ..SolveConfig::default() };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn load_pair(inputs: &FunctionInputs) -> Result<(StepFunction, Exponent), CliError> {
    Ok((read_json(&inputs.f)?, read_json(&inputs.p)?))
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum Orientation {
    Left,
    Right,
}

#[derive(Deserialize)]
struct SequenceInput {
    #[serde(flatten)]
    sequence: VarExpSequence,
    orientation: Option<Orientation>,
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let cfg = solve_config(&cli.run)?;
    if cli.run.replay.is_some() && !matches!(cli.command, Command::Verify { .. }) {
        return Err(CliError::Usage("--replay applies to verify only".into()));
    }
    match &cli.command {
        Command::Norm(inputs) => {
            let (f, p) = load_pair(inputs)?;
            match phi_stabilized(&f, &p, &cfg) {
                Ok(s) => Output::json(
                    &json!({ "norm": s.curve.terminal(), "ladder_steps": s.ladder_steps, "converged": true }),
                    0,
                ),
                Err(Error::NotConverged { .. }) => {
                    let trace = phi_ladder(&f, &p, &cfg)?;
                    let last = trace.curves.last().and_then(|c| c.last()).copied();
                    Output::json(
                        &json!({
                            "norm": last,
                            "ladder_steps": trace.curves.len(),
                            "converged": false,
                            "gap": trace.gap,
                        }),
                        3,
                    )
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Curve(inputs) => {
            let (f, p) = load_pair(inputs)?;
            let s = phi_stabilized(&f, &p, &cfg)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Usage(e.to_string());
            w.write_record(["t", "phi"]).map_err(io)?;
            for (t, phi) in s.curve.rows() {
                w.serialize((t, phi)).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(Output { stdout: String::from_utf8(bytes).expect("csv output is utf-8"), code: 0 })
        }
        Command::Nakano { inputs, kind, nakano_tol } => {
            let (f, p) = load_pair(inputs)?;
            let kind: ModularKind = kind.parse()?;
            let n = nakano_norm(&f, &p, kind, *nakano_tol)?;
            Output::json(&json!({ "kind": kind, "lambda": n.lambda, "modular_at_lambda": n.modular_at_lambda }), 0)
        }
        Command::Holder { inputs, g } => {
            let (f, p) = load_pair(inputs)?;
            let g: StepFunction = read_json(g)?;
            Output::json(&holder_check(&f, &g, &conjugate(&p)?, &cfg)?, 0)
        }
        Command::Pair { x, p } => {
            let x: StepFunction = read_json(x)?;
            let p: Exponent = read_json(p)?;
            let pointwise = norming_pairing(&x, &p, &cfg)?;
            let witness = witness_pairing(&x, &p, &cfg)?;
            Output::json(&json!({ "pointwise": pointwise, "witness": witness }), 0)
        }
        Command::Seqnorm { input } => {
            let input: SequenceInput = read_json(input)?;
            let (norm, orientation) = match input.orientation.unwrap_or(Orientation::Left) {
                Orientation::Left => (seq_norm(&input.sequence), "left"),
                Orientation::Right => (seq_norm_left(&input.sequence), "right"),
            };
            Output::json(&json!({ "norm": norm, "orientation": orientation }), 0)
        }
        Command::Mixed { matrix, p, r } => {
            let a: NonnegMatrix = read_json(matrix)?;
            if !(*p >= 1.0 && *r >= 1.0) {
                return Err(CliError::Usage(format!("p and r must be >= 1, got p = {p}, r = {r}")));
            }
            let mut out = json!({ "norm": mixed_norm(&a, *p, *r) });
            if p <= r {
                let (lhs, rhs) = transpose_contraction_check(&a, *p, *r)?;
                out["transpose"] = json!({ "lhs": lhs, "rhs": rhs, "slack": rhs - lhs });
            }
            Output::json(&out, 0)
        }
        Command::Variation { g_prime, p } => {
            let g: StepFunction = read_json(g_prime)?;
            let p: Exponent = read_json(p)?;
            let report = special_variation(&g, &conjugate(&p)?, &cfg)?;
            Output::json(&report, if report.oracle_converged { 0 } else { 3 })
        }
        Command::Extnorm(inputs) => {
            let (f, p) = load_pair(inputs)?;
            Output::json(&extended_norm(&f, &p, &cfg)?, 0)
        }
        Command::Weighted { inputs, w } => {
            let (f, p) = load_pair(inputs)?;
            let w: Density = read_json(w)?;
            let spec = WeightedSpec { p, w };
            let value = weighted_norm(&f, &spec, &cfg)?;
            let isometry = weight_isometry_check(&f, &spec, &cfg)?;
            Output::json(&json!({ "weighted_norm": value, "isometry": isometry }), 0)
        }
        Command::EmbedDemo { exponent } => {
            let source = SmoothExponent::builtin(exponent)
                .ok_or_else(|| CliError::Usage(format!("unknown exponent {exponent:?}; use affine or sine")))?;
            let map = build_embedding(&source, cli.run.grid)?;
            let one = StepFunction::constant(1.0)?;
            let report = embed_isometry_check(&one, &map, &cfg)?;
            let pieces: Vec<Value> = map
                .pieces
                .iter()
                .map(|piece| {
                    json!({
                        "source": [piece.source.0, piece.source.1],
                        "target": [piece.target.lo, piece.target.hi],
                        "direction": piece.target.direction,
                        "target_range": [piece.target.range.0, piece.target.range.1],
                        "max_residual": piece.max_residual,
                    })
                })
                .collect();
            Output::json(&json!({ "exponent": exponent, "nodes": cli.run.grid, "pieces": pieces, "report": report }), 0)
        }
        Command::Verify { suite } => {
            if let Some(path) = &cli.run.replay {
                return replay_file(path, &cfg);
            }
            let suites = Suite::parse_selection(suite).map_err(|e| CliError::Usage(e.to_string()))?;
            let report = run_suites(&suites, &VerifyConfig { seed: cli.run.seed, cases: cli.run.cases, solve: cfg })?;
            let code = if report.passed() { 0 } else { 1 };
            Output::json(&report, code)
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ReplayInput {
    Report(SuiteReport),
    Failures(Vec<Failure>),
    Single(Failure),
}

fn replay_file(path: &Path, cfg: &SolveConfig) -> Result<Output, CliError> {
    let failures = match read_json::<ReplayInput>(path)? {
        ReplayInput::Report(r) => r.failures,
        ReplayInput::Failures(f) => f,
        ReplayInput::Single(f) => vec![f],
    };
    let outcomes = replay(&failures, cfg)?;
    let reproduced = outcomes.iter().filter(|o| o.reproduced).count();
    let code = if reproduced > 0 { 1 } else { 0 };
    Output::json(&json!({ "replayed": outcomes.len(), "reproduced": reproduced, "outcomes": outcomes }), code)
}
