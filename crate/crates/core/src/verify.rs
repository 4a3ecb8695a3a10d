//! Seeded random instances and the property suites run by `verify`.
//!
//! Instances: partitions with 1 to 32 cells, values log-uniform in
//! `[1e-3, 1e3]` with random sign, exponents uniform in `[1.05, 8]` for the
//! duality suites and `[1, 10]` otherwise. Matrices have 1 to 8 rows and
//! columns with entries uniform in `[0, 1)`, a fifth of them zero. Each case
//! draws from its own ChaCha8 stream keyed by `(seed, suite, index)`, so a
//! case can be regenerated or replayed on its own.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duality::{conjugate, holder_check, norming_pairing, witness_pairing};
use crate::error::{Error, Result};
use crate::function_model::{validate_exponent, Density, Exponent, Partition, StepFunction};
use crate::nakano::equivalence_ratio;
use crate::phi_solver::{disjoint_estimates_check, sup_bound_check, SolveConfig};
use crate::sequence_space::{
    disjoint_matrix_sum_check, nesting_inequality_check, transpose_contraction_check, NonnegMatrix,
};
use crate::weighted_embedding::{weight_isometry_check, WeightedSpec};

pub const HOLDER_SLACK: f64 = 1e-9;
pub const PAIRING_TOL: f64 = 1e-8;
pub const BAND_TOL: f64 = 1e-9;
pub const MIXED_SLACK: f64 = 1e-12;
pub const ISOMETRY_TOL: f64 = 1e-9;
pub const ESTIMATE_SLACK: f64 = 1e-9;
pub const SUP_BOUND_SLACK: f64 = 1e-9;

pub const DUALITY_EXPONENTS: (f64, f64) = (1.05, 8.0);
pub const GENERAL_EXPONENTS: (f64, f64) = (1.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Holder,
    Pairing,
    NakanoBand,
    Estimates,
    Mixed,
    Isometry,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Holder, Suite::Pairing, Suite::NakanoBand, Suite::Estimates, Suite::Mixed, Suite::Isometry];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Holder => "holder",
            Suite::Pairing => "pairing",
            Suite::NakanoBand => "nakano-band",
            Suite::Estimates => "estimates",
            Suite::Mixed => "mixed",
            Suite::Isometry => "isometry",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }

    /// The suites selected by `name`, where `all` selects every suite.
    pub fn parse_selection(name: &str) -> Result<Vec<Suite>> {
        if name == "all" {
            Ok(Suite::ALL.to_vec())
        } else {
            Ok(vec![name.parse()?])
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random instance source for one case.
pub struct CaseGenerator {
    rng: ChaCha8Rng,
}

impl CaseGenerator {
    pub fn new(seed: u64, stream: u64, index: u64) -> Self {
        let key = splitmix(splitmix(splitmix(seed) ^ stream) ^ index);
        Self { rng: ChaCha8Rng::seed_from_u64(key) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn partition(&mut self) -> Partition {
        let cells = self.rng.gen_range(1..=32usize);
        loop {
            let mut inner: Vec<f64> = (1..cells).map(|_| self.rng.gen_range(0.0..1.0)).collect();
            inner.sort_by(f64::total_cmp);
            let mut bps = Vec::with_capacity(cells + 1);
            bps.push(0.0);
            bps.extend(inner);
            bps.push(1.0);
            if bps.windows(2).all(|w| w[1] - w[0] > 1e-9) {
                return Partition::new(bps).expect("sorted breakpoints");
            }
        }
    }

    /// `±10^u` with `u` uniform in `[-3, 3]`.
    pub fn value(&mut self) -> f64 {
        let magnitude = 10f64.powf(self.rng.gen_range(-3.0..=3.0));
        if self.rng.gen_bool(0.5) {
            magnitude
        } else {
            -magnitude
        }
    }

    pub fn step_function(&mut self, partition: &Partition) -> StepFunction {
        let values = (0..partition.cell_count()).map(|_| self.value()).collect();
        StepFunction::new(partition.clone(), values).expect("finite values")
    }

    pub fn exponent(&mut self, partition: &Partition, range: (f64, f64)) -> Exponent {
        let values = (0..partition.cell_count()).map(|_| self.rng.gen_range(range.0..=range.1)).collect();
        validate_exponent(StepFunction::new(partition.clone(), values).expect("finite values")).expect("values >= 1")
    }

    /// Density log-uniform in `[0.1, 10]`.
    pub fn density(&mut self, partition: &Partition) -> Density {
        let values = (0..partition.cell_count()).map(|_| 10f64.powf(self.rng.gen_range(-1.0..=1.0))).collect();
        Density::new(StepFunction::new(partition.clone(), values).expect("finite values")).expect("positive")
    }

    /// Up to 8 functions supported on disjoint sets of cells.
    #[allow(clippy::needless_range_loop)]
    pub fn disjoint_family(&mut self, partition: &Partition) -> Vec<StepFunction> {
        let count = self.rng.gen_range(1..=8usize);
        let mut values = vec![vec![0.0; partition.cell_count()]; count];
        for k in 0..partition.cell_count() {
            let owner = self.rng.gen_range(0..=count);
            if owner < count {
                values[owner][k] = self.value();
            }
        }
        values.into_iter().map(|v| StepFunction::new(partition.clone(), v).expect("finite values")).collect()
    }

    pub fn matrix(&mut self) -> NonnegMatrix {
        let (rows, cols) = (self.rng.gen_range(1..=8usize), self.rng.gen_range(1..=8usize));
        let rows = (0..rows)
            .map(|_| {
                (0..cols).map(|_| if self.rng.gen_bool(0.2) { 0.0 } else { self.rng.gen_range(0.0..1.0) }).collect()
            })
            .collect();
        NonnegMatrix::new(rows).expect("non-negative entries")
    }

    /// Splits the entries of `a` among up to 4 matrices of the same shape.
    #[allow(clippy::needless_range_loop)]
    pub fn split(&mut self, a: &NonnegMatrix) -> Vec<NonnegMatrix> {
        let count = self.rng.gen_range(1..=4usize);
        let (rows, cols) = a.shape();
        let mut parts = vec![vec![vec![0.0; cols]; rows]; count];
        for i in 0..rows {
            for j in 0..cols {
                parts[self.rng.gen_range(0..count)][i][j] = a.get(i, j);
            }
        }
        parts.into_iter().map(|m| NonnegMatrix::new(m).expect("non-negative entries")).collect()
    }

    /// `p <= r`, both uniform in `[1, 6]`.
    pub fn ordered_pair(&mut self) -> (f64, f64) {
        let (a, b): (f64, f64) = (self.rng.gen_range(1.0..=6.0), self.rng.gen_range(1.0..=6.0));
        (a.min(b), a.max(b))
    }

    pub fn case(&mut self, suite: Suite) -> CaseInput {
        match suite {
            Suite::Holder => {
                let part = self.partition();
                let p = self.exponent(&part, DUALITY_EXPONENTS);
                let f = self.step_function(&part);
                let g_part = self.partition();
                let g = self.step_function(&g_part);
                CaseInput::Holder { f, g, p }
            }
            Suite::Pairing => {
                let part = self.partition();
                let p = self.exponent(&part, DUALITY_EXPONENTS);
                CaseInput::Pairing { x: self.step_function(&part), p }
            }
            Suite::NakanoBand => {
                let part = self.partition();
                let p = self.exponent(&part, GENERAL_EXPONENTS);
                CaseInput::NakanoBand { f: self.step_function(&part), p }
            }
            Suite::Estimates => {
                let part = self.partition();
                let p = self.exponent(&part, GENERAL_EXPONENTS);
                CaseInput::Estimates { fs: self.disjoint_family(&part), p }
            }
            Suite::Mixed => {
                let matrix = self.matrix();
                let parts = self.split(&matrix);
                let scalars =
                    [self.rng.gen_range(0.0..1.0), self.rng.gen_range(0.0..1.0), self.rng.gen_range(0.0..1.0)];
                let (p, r) = self.ordered_pair();
                CaseInput::Mixed { matrix, parts, scalars, p, r }
            }
            Suite::Isometry => {
                let part = self.partition();
                let p = self.exponent(&part, GENERAL_EXPONENTS);
                let w = self.density(&part);
                CaseInput::Isometry { f: self.step_function(&part), spec: WeightedSpec { p, w } }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CaseInput {
    Holder { f: StepFunction, g: StepFunction, p: Exponent },
    Pairing { x: StepFunction, p: Exponent },
    NakanoBand { f: StepFunction, p: Exponent },
    Estimates { fs: Vec<StepFunction>, p: Exponent },
    Mixed { matrix: NonnegMatrix, parts: Vec<NonnegMatrix>, scalars: [f64; 3], p: f64, r: f64 },
    Isometry { f: StepFunction, spec: WeightedSpec },
}

impl CaseInput {
    pub fn suite(&self) -> Suite {
        match self {
            CaseInput::Holder { .. } => Suite::Holder,
            CaseInput::Pairing { .. } => Suite::Pairing,
            CaseInput::NakanoBand { .. } => Suite::NakanoBand,
            CaseInput::Estimates { .. } => Suite::Estimates,
            CaseInput::Mixed { .. } => Suite::Mixed,
            CaseInput::Isometry { .. } => Suite::Isometry,
        }
    }
}

/// Named measurements of one case plus the first violated property.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub metrics: Vec<(&'static str, f64)>,
    pub violation: Option<String>,
}

impl Outcome {
    fn record(&mut self, name: &'static str, value: f64) {
        self.metrics.push((name, value));
    }

    fn require(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if !ok && self.violation.is_none() {
            self.violation = Some(detail());
        }
    }

    fn sup_bound(&mut self, f: &StepFunction, p: &Exponent, cfg: &SolveConfig) -> Result<()> {
        let relaxed = SolveConfig { abs_tol: cfg.abs_tol.max(SUP_BOUND_SLACK), ..*cfg };
        match sup_bound_check(f, p, &relaxed) {
            Ok((norm, bound)) => {
                self.record("sup_bound_slack", bound - norm);
                Ok(())
            }
            Err(Error::SupBoundViolated { norm, bound }) => {
                self.record("sup_bound_slack", bound - norm);
                self.require(false, || format!("sup bound violated: norm {norm} > e * sup|f| = {bound}"));
                Ok(())
            }
            Err(e) => Err(e),
        }
    }
}

/// `max(1, |a|)` for relative tolerances.
fn scale(a: f64) -> f64 {
    a.abs().max(1.0)
}

/// Evaluates every property attached to `input`.
pub fn check_case(input: &CaseInput, cfg: &SolveConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    match input {
        CaseInput::Holder { f, g, p } => {
            let pair = conjugate(p)?;
            let r = holder_check(f, g, &pair, cfg)?;
            out.record("holder_slack", r.slack);
            out.require(r.slack >= -HOLDER_SLACK, || format!("Hölder: {} > {} + {HOLDER_SLACK}", r.lhs, r.rhs));
            out.sup_bound(f, p, cfg)?;
            out.sup_bound(g, &pair.p_star, cfg)?;
        }
        CaseInput::Pairing { x, p } => {
            let w = witness_pairing(x, p, cfg)?;
            let w_scale = scale(w.norm_x);
            out.record("witness_defect", w.defect / w_scale);
            out.record("witness_norm_error", (w.norm_jx - 1.0).abs());
            out.require(w.defect <= PAIRING_TOL * w_scale && (w.norm_jx - 1.0).abs() <= PAIRING_TOL, || {
                format!("witness: pairing {} vs norm {} with witness norm {}", w.pairing, w.norm_x, w.norm_jx)
            });
            let j = norming_pairing(x, p, cfg)?;
            out.record("pointwise_j_defect", j.defect / scale(j.norm_x * j.norm_jx));
            out.sup_bound(x, p, cfg)?;
        }
        CaseInput::NakanoBand { f, p } => {
            let ratio = equivalence_ratio(f, p, cfg)?;
            out.record("ratio", ratio);
            out.require((0.5 - BAND_TOL..=2.0 + BAND_TOL).contains(&ratio), || {
                format!("ratio {ratio} outside [1/2, 2]")
            });
            out.sup_bound(f, p, cfg)?;
        }
        CaseInput::Estimates { fs, p } => {
            let r = disjoint_estimates_check(fs, p, cfg)?;
            out.record("upper_slack", r.upper_bound - r.sum_norm);
            out.record("lower_slack", r.sum_norm - r.lower_bound);
            out.require(r.sum_norm <= r.upper_bound + ESTIMATE_SLACK, || {
                format!("upper estimate: {} > {}", r.sum_norm, r.upper_bound)
            });
            out.require(r.lower_bound <= r.sum_norm + ESTIMATE_SLACK, || {
                format!("lower estimate: {} > {}", r.lower_bound, r.sum_norm)
            });
            for f in fs {
                out.sup_bound(f, p, cfg)?;
            }
        }
        CaseInput::Mixed { matrix, parts, scalars, p, r } => {
            let (lhs, rhs) = disjoint_matrix_sum_check(parts, *p, *r)?;
            out.record("disjoint_sum_slack", rhs - lhs);
            out.require(rhs - lhs >= -MIXED_SLACK, || format!("disjoint sum: {lhs} > {rhs}"));
            let (lhs, rhs) = transpose_contraction_check(matrix, *p, *r)?;
            out.record("transpose_slack", rhs - lhs);
            out.require(rhs - lhs >= -MIXED_SLACK, || format!("transpose: {lhs} > {rhs}"));
            let [a, b, c] = *scalars;
            let (lhs, rhs) = nesting_inequality_check(a, b, c, *p, *r)?;
            out.record("nesting_slack", rhs - lhs);
            out.require(rhs - lhs >= -MIXED_SLACK, || format!("nesting: {lhs} > {rhs}"));
        }
        CaseInput::Isometry { f, spec } => {
            let r = weight_isometry_check(f, spec, cfg)?;
            out.record("isometry_defect", r.defect);
            out.require(r.defect <= ISOMETRY_TOL, || format!("isometry: {} vs {}", r.norm_m, r.norm_mu));
            out.sup_bound(f, &spec.p, cfg)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub suite: Suite,
    pub index: u64,
    pub detail: String,
    pub input: CaseInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: u64,
    pub failures: Vec<Failure>,
    /// `suite.metric -> (min, max)` over all cases.
    pub stats: BTreeMap<String, MetricSummary>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub cases: u64,
    pub solve: SolveConfig,
}

/// The `index`-th case of `suite`.
pub fn generate(seed: u64, suite: Suite, index: u64) -> CaseInput {
    CaseGenerator::new(seed, suite.tag(), index).case(suite)
}

/// Runs each selected suite over `cfg.cases` cases in parallel; results are
/// merged in case order.
pub fn run_suites(suites: &[Suite], cfg: &VerifyConfig) -> Result<SuiteReport> {
    cfg.solve.validate()?;
    let mut report = SuiteReport {
        suite: if suites.len() == 1 { suites[0].name().into() } else { "all".into() },
        cases: 0,
        failures: Vec::new(),
        stats: BTreeMap::new(),
    };
    for &suite in suites {
        let outcomes: Vec<Result<(CaseInput, Outcome)>> = (0..cfg.cases)
            .into_par_iter()
            .map(|index| {
                let input = generate(cfg.seed, suite, index);
                let outcome = check_case(&input, &cfg.solve)?;
                Ok((input, outcome))
            })
            .collect();
        for (index, item) in (0..cfg.cases).zip(outcomes) {
            let (input, outcome) = item?;
            merge_metrics(&mut report.stats, suite, &outcome.metrics);
            if let Some(detail) = outcome.violation {
                report.failures.push(Failure { suite, index, detail, input });
            }
        }
        report.cases += cfg.cases;
    }
    Ok(report)
}

fn merge_metrics(stats: &mut BTreeMap<String, MetricSummary>, suite: Suite, metrics: &[(&'static str, f64)]) {
    for &(name, value) in metrics {
        stats
            .entry(format!("{suite}.{name}"))
            .and_modify(|s| {
                s.min = s.min.min(value);
                s.max = s.max.max(value);
            })
            .or_insert(MetricSummary { min: value, max: value });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub suite: Suite,
    pub index: u64,
    pub reproduced: bool,
    pub detail: Option<String>,
}

/// Re-checks recorded failures from their stored inputs.
pub fn replay(failures: &[Failure], cfg: &SolveConfig) -> Result<Vec<ReplayOutcome>> {
    failures
        .iter()
        .map(|f| {
            let outcome = check_case(&f.input, cfg)?;
            Ok(ReplayOutcome {
                suite: f.suite,
                index: f.index,
                reproduced: outcome.violation.is_some(),
                detail: outcome.violation,
            })
        })
        .collect()
}
