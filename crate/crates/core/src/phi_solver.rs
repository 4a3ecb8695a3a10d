//! The norm-accumulation function `φ_f` and the norm `‖f‖ = φ_f(1)`.
//!
//! `φ` solves `φ' = |f|^p / p · φ^{1-p}`. On a cell where `f` and `p` are
//! constant this integrates in closed form to
//! `φ(t_{k+1})^p = φ(t_k)^p + Δ_k |f_k|^p`, so step data is propagated
//! exactly and general data is first sampled to steps. The degenerate start
//! `φ(0) = 0` is handled by the stabilization ladder: solve from
//! `a_k = base^k` and stop once successive curves agree to `abs_tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_model::{
    refine_all, sample_to_step, validate_exponent, Density, Exponent, Partition, StepFunction,
};
use crate::sequence_space::lp_sum;

const LOG_DOMAIN_THRESHOLD: f64 = 500.0;

/// `φ` sampled at the breakpoints of a partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormCurve {
    pub partition: Partition,
    pub phi: Vec<f64>,
    pub initial_value: f64,
}

impl NormCurve {
    /// `φ(1)`.
    pub fn terminal(&self) -> f64 {
        *self.phi.last().unwrap()
    }

    /// `(t, φ(t))` at each breakpoint.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.partition.breakpoints().iter().copied().zip(self.phi.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Stop the ladder once successive curves differ by less than this (sup norm).
    pub abs_tol: f64,
    /// Initial values are `ladder_base^k`, `k = 0, 1, ...`.
    pub ladder_base: f64,
    pub max_ladder_steps: usize,
    /// Sampling levels beyond `base_cells` used by [`norm_general`].
    pub grid_doublings: usize,
    pub base_cells: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, ladder_base: 0.5, max_ladder_steps: 60, grid_doublings: 6, base_cells: 64 }
    }
}

impl SolveConfig {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self { abs_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if !(self.ladder_base > 0.0 && self.ladder_base < 1.0) {
            return Err(Error::InvalidArgument(format!("ladder_base must lie in (0, 1), got {}", self.ladder_base)));
        }
        if self.max_ladder_steps < 2 {
            return Err(Error::InvalidArgument("max_ladder_steps must be at least 2".into()));
        }
        if self.base_cells == 0 {
            return Err(Error::InvalidArgument("base_cells must be at least 1".into()));
        }
        Ok(())
    }
}

/// Exact one-cell update `(φ^p + mass·|f|^p)^{1/p}` with `mass = w·Δ`.
pub(crate) fn cell_update(phi: f64, mass: f64, f_abs: f64, p: f64) -> f64 {
    if f_abs == 0.0 || mass == 0.0 {
        return phi;
    }
    if p == 1.0 {
        return phi + mass * f_abs;
    }
    let lb = mass.ln() + p * f_abs.ln();
    if phi == 0.0 {
        return (lb / p).exp();
    }
    let la = p * phi.ln();
    if la.abs() < LOG_DOMAIN_THRESHOLD && lb.abs() < LOG_DOMAIN_THRESHOLD {
        (phi.powf(p) + mass * f_abs.powf(p)).powf(p.recip()).max(phi)
    } else {
        let (hi, lo) = if la >= lb { (la, lb) } else { (lb, la) };
        ((hi + (lo - hi).exp().ln_1p()) / p).exp().max(phi)
    }
}

/// Step data aligned on one partition, ready for propagation.
pub(crate) struct Aligned {
    pub partition: Partition,
    pub f: Vec<f64>,
    pub p: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Aligned {
    pub fn new(f: &StepFunction, p: &Exponent, w: Option<&Density>) -> Self {
        let mut parts = vec![f, p.body()];
        if let Some(w) = w {
            parts.push(w.body());
        }
        let refined = refine_all(&parts);
        let partition = refined[0].partition().clone();
        let mass = match w {
            Some(_) => partition.widths().zip(refined[2].values()).map(|(d, w)| d * w).collect(),
            None => partition.widths().collect(),
        };
        Self { f: refined[0].values().to_vec(), p: refined[1].values().to_vec(), mass, partition }
    }

    pub fn accumulate(&self, a: f64) -> Vec<f64> {
        let mut phi = Vec::with_capacity(self.f.len() + 1);
        let mut cur = a;
        phi.push(cur);
        for ((&f, &p), &m) in self.f.iter().zip(&self.p).zip(&self.mass) {
            cur = cell_update(cur, m, f.abs(), p);
            phi.push(cur);
        }
        phi
    }
}

fn check_initial(a: f64) -> Result<()> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("initial value must be finite and >= 0, got {a}")));
    }
    Ok(())
}

/// `φ` from the initial value `a`, propagated exactly cell by cell.
pub fn phi_step_exact(f: &StepFunction, p: &Exponent, a: f64) -> Result<NormCurve> {
    check_initial(a)?;
    let aligned = Aligned::new(f, p, None);
    let phi = aligned.accumulate(a);
    Ok(NormCurve { partition: aligned.partition, phi, initial_value: a })
}

/// Every curve computed along the initial-value ladder.
#[derive(Debug, Clone)]
pub struct LadderTrace {
    pub partition: Partition,
    pub initial_values: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
    /// Sup-norm gap between the last two curves.
    pub gap: f64,
    pub converged: bool,
}

/// A converged ladder limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stabilized {
    pub curve: NormCurve,
    pub ladder_steps: usize,
    pub gap: f64,
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

struct LadderEnd {
    before: Vec<f64>,
    last: Vec<f64>,
    steps: usize,
    gap: f64,
    converged: bool,
}

/// Runs the ladder, handing every curve to `visit`.
fn run_ladder(aligned: &Aligned, cfg: &SolveConfig, mut visit: impl FnMut(f64, &[f64])) -> Result<LadderEnd> {
    cfg.validate()?;
    let mut a = 1.0;
    let mut before = aligned.accumulate(a);
    visit(a, &before);
    let mut last = before.clone();
    let mut gap = f64::INFINITY;
    let mut steps = 1;
    while steps < cfg.max_ladder_steps {
        steps += 1;
        a *= cfg.ladder_base;
        let cur = aligned.accumulate(a);
        visit(a, &cur);
        gap = sup_gap(&last, &cur);
        before = std::mem::replace(&mut last, cur);
        if gap < cfg.abs_tol {
            return Ok(LadderEnd { before, last, steps, gap, converged: true });
        }
    }
    Ok(LadderEnd { before, last, steps, gap, converged: false })
}

/// The last two ladder curves extrapolated linearly to `a = 0`. Since
/// `a ↦ φ_a(t)` is convex, non-decreasing and 1-Lipschitz, the limit lies
/// between the extrapolation and the last curve.
pub(crate) fn stabilize(aligned: Aligned, cfg: &SolveConfig) -> Result<Stabilized> {
    let LadderEnd { before, last, steps, gap, converged } = run_ladder(&aligned, cfg, |_, _| {})?;
    if !converged {
        return Err(Error::NotConverged { steps, gap });
    }
    let r = cfg.ladder_base / (1.0 - cfg.ladder_base);
    let mut phi = Vec::with_capacity(last.len());
    let mut floor: f64 = 0.0;
    for (&b, &c) in before.iter().zip(&last).skip(1) {
        floor = floor.max((c - r * (b - c)).max(0.0));
        phi.push(floor);
    }
    phi.insert(0, 0.0);
    Ok(Stabilized {
        curve: NormCurve { partition: aligned.partition, phi, initial_value: 0.0 },
        ladder_steps: steps,
        gap,
    })
}

/// All ladder curves for `(f, p)`, without failing on non-convergence.
pub fn phi_ladder(f: &StepFunction, p: &Exponent, cfg: &SolveConfig) -> Result<LadderTrace> {
    let aligned = Aligned::new(f, p, None);
    let mut initial_values = Vec::new();
    let mut curves = Vec::new();
    let LadderEnd { gap, converged, .. } = run_ladder(&aligned, cfg, |a, c| {
        initial_values.push(a);
        curves.push(c.to_vec());
    })?;
    Ok(LadderTrace { partition: aligned.partition, initial_values, curves, gap, converged })
}

/// The stabilized solution started from `0⁺`.
pub fn phi_stabilized(f: &StepFunction, p: &Exponent, cfg: &SolveConfig) -> Result<Stabilized> {
    stabilize(Aligned::new(f, p, None), cfg)
}

/// `‖f‖_{p(·)} = φ_f(1)`.
pub fn norm(f: &StepFunction, p: &Exponent, cfg: &SolveConfig) -> Result<f64> {
    Ok(phi_stabilized(f, p, cfg)?.curve.terminal())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralNorm {
    pub value: f64,
    /// Gap between the last two sampling levels; not a rigorous bound.
    pub error_estimate: f64,
    pub cells: usize,
}

/// Norm of general evaluators via midpoint sampling at `n, 2n, 4n, ...` cells.
pub fn norm_general(f: impl Fn(f64) -> f64, p: impl Fn(f64) -> f64, cfg: &SolveConfig) -> Result<GeneralNorm> {
    cfg.validate()?;
    let mut prev: Option<f64> = None;
    let mut result = GeneralNorm { value: 0.0, error_estimate: f64::INFINITY, cells: 0 };
    for level in 0..=cfg.grid_doublings {
        let cells = cfg.base_cells << level;
        let fs = sample_to_step(&f, cells)?;
        let ps = validate_exponent(sample_to_step(&p, cells)?)?;
        let value = norm(&fs, &ps, cfg)?;
        result = GeneralNorm { value, error_estimate: prev.map_or(f64::INFINITY, |v| (v - value).abs()), cells };
        prev = Some(value);
    }
    Ok(result)
}

/// Both sides of the upper `p`- and lower `q`-estimates for disjointly
/// supported functions, `p = ess inf`, `q = ess sup`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    pub sum_norm: f64,
    /// `⊕^{ess inf p} ‖f_i‖`
    pub upper_bound: f64,
    /// `⊕^{ess sup p} ‖f_i‖`
    pub lower_bound: f64,
}

pub fn disjoint_estimates_check(fs: &[StepFunction], p: &Exponent, cfg: &SolveConfig) -> Result<EstimateReport> {
    if fs.is_empty() {
        return Err(Error::InvalidArgument("need at least one function".into()));
    }
    let refs: Vec<&StepFunction> = fs.iter().collect();
    let refined = refine_all(&refs);
    let n = refined[0].values().len();
    let mut sum = vec![0.0; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (i, g) in refined.iter().enumerate() {
        for (k, &v) in g.values().iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            if let Some(first) = owner[k] {
                return Err(Error::OverlappingSupports { first, second: i });
            }
            owner[k] = Some(i);
            sum[k] = v;
        }
    }
    let total = StepFunction::new(refined[0].partition().clone(), sum)?;
    let norms = fs.iter().map(|g| norm(g, p, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport {
        sum_norm: norm(&total, p, cfg)?,
        upper_bound: lp_sum(norms.iter().copied(), p.ess_inf()),
        lower_bound: lp_sum(norms.iter().copied(), p.ess_sup()),
    })
}

/// `(‖f‖, e·sup|f|)`; errors if the bound fails by more than `abs_tol`.
pub fn sup_bound_check(f: &StepFunction, p: &Exponent, cfg: &SolveConfig) -> Result<(f64, f64)> {
    let value = norm(f, p, cfg)?;
    let bound = std::f64::consts::E * f.sup_abs();
    if value > bound + cfg.abs_tol {
        return Err(Error::SupBoundViolated { norm: value, bound });
    }
    Ok((value, bound))
}
