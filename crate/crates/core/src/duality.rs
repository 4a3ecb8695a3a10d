//! Conjugate exponents, the duality map, Hölder and norming-pairing checks,
//! truncation projections, the extended norm and the variation norm of
//! absolutely continuous Lebesgue–Stieltjes measures.
//!
//! The pointwise duality map `J(x) = sign(x)|x|^{p-1}` norms `x` only where
//! `p` is constant. For a varying step exponent the attaining functional
//! must also carry the accumulated norm at each cell; [`norming_witness`]
//! builds it from the nested direct-sum structure
//! `(...(L^{p_1} ⊕_{p_2} L^{p_2}) ⊕_{p_3} ...)` that step data induces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_model::{refine_all, refine_common, validate_exponent, Exponent, StepFunction};
use crate::phi_solver::{cell_update, norm, Aligned, SolveConfig};

/// `p` together with `p* = p / (p - 1)` on the same partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePair {
    pub p: Exponent,
    pub p_star: Exponent,
}

pub fn conjugate(p: &Exponent) -> Result<ConjugatePair> {
    if let Some(cell) = p.values().iter().position(|&v| v == 1.0) {
        return Err(Error::ExponentIsOne { cell });
    }
    let p_star = validate_exponent(p.body().map(|v| v / (v - 1.0))?)?;
    Ok(ConjugatePair { p: p.clone(), p_star })
}

/// `J(x)[t] = sign(x(t)) |x(t)|^{p(t) - 1}`.
pub fn duality_map(x: &StepFunction, p: &Exponent) -> Result<StepFunction> {
    let (x, p) = refine_common(x, p.body());
    x.zip_with(&p, |v, q| v.signum() * v.abs().powf(q - 1.0))
}

/// The unique `g` with `‖g‖_{p*} = 1` and `∫ x g = ‖x‖_p` for step data.
///
/// On cell `k`,
/// `g_k = J(x)_k / φ_{k+1}^{p_k - 1} · Π_{j > k} (φ_j / φ_{j+1})^{p_j - 1}`
/// where `φ_k` is the exact accumulated norm at breakpoint `k`.
pub fn norming_witness(x: &StepFunction, p: &Exponent) -> Result<StepFunction> {
    let aligned = Aligned::new(x, p, None);
    let phi = aligned.accumulate(0.0);
    let n = aligned.f.len();
    let mut g = vec![0.0; n];
    let mut carry = 1.0;
    for k in (0..n).rev() {
        let (v, q) = (aligned.f[k], aligned.p[k]);
        if phi[k + 1] == 0.0 {
            break;
        }
        if v != 0.0 {
            g[k] = carry * v.signum() * ((q - 1.0) * (v.abs().ln() - phi[k + 1].ln())).exp();
        }
        carry *= if phi[k] == 0.0 { 0.0 } else { (phi[k] / phi[k + 1]).powf(q - 1.0) };
    }
    StepFunction::new(aligned.partition, g)
}

fn integral_of_product(a: &StepFunction, b: &StepFunction) -> f64 {
    let (a, b) = refine_common(a, b);
    a.values().iter().zip(b.values()).zip(a.partition().widths()).map(|((x, y), w)| w * x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    /// `∫ |f g| dm`
    pub lhs: f64,
    /// `‖f‖_{p} ‖g‖_{p*}`
    pub rhs: f64,
    pub slack: f64,
}

pub fn holder_check(
    f: &StepFunction,
    g: &StepFunction,
    pair: &ConjugatePair,
    cfg: &SolveConfig,
) -> Result<HolderReport> {
    let lhs = integral_of_product(&f.map(f64::abs)?, &g.map(f64::abs)?);
    let rhs = norm(f, &pair.p, cfg)? * norm(g, &pair.p_star, cfg)?;
    Ok(HolderReport { lhs, rhs, slack: rhs - lhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    /// `∫ x J(x) dm`
    pub pairing: f64,
    pub norm_x: f64,
    pub norm_jx: f64,
    /// `|pairing - norm_x · norm_jx|`
    pub defect: f64,
}

/// Both sides of `∫ x J_p(x) = ‖x‖_p ‖J_p(x)‖_{p*}` with the pointwise map.
pub fn norming_pairing(x: &StepFunction, p: &Exponent, cfg: &SolveConfig) -> Result<PairingReport> {
    let pair = conjugate(p)?;
    let jx = duality_map(x, p)?;
    let pairing = integral_of_product(x, &jx);
    let norm_x = norm(x, &pair.p, cfg)?;
    let norm_jx = norm(&jx, &pair.p_star, cfg)?;
    Ok(PairingReport { pairing, norm_x, norm_jx, defect: (pairing - norm_x * norm_jx).abs() })
}

/// [`PairingReport`] for the exact witness of [`norming_witness`]: here
/// `norm_jx` is `‖g‖_{p*}` (ideally 1) and `pairing` is `∫ x g`.
pub fn witness_pairing(x: &StepFunction, p: &Exponent, cfg: &SolveConfig) -> Result<PairingReport> {
    let pair = conjugate(p)?;
    let g = norming_witness(x, p)?;
    let pairing = integral_of_product(x, &g);
    let norm_x = norm(x, &pair.p, cfg)?;
    let norm_jx = if g.is_zero() { 0.0 } else { norm(&g, &pair.p_star, cfg)? };
    Ok(PairingReport { pairing, norm_x, norm_jx, defect: (pairing - norm_x * norm_jx).abs() })
}

/// `P_n f = 1_{1 + 1/n <= p <= n} f`.
pub fn truncation_projection(f: &StepFunction, p: &Exponent, n: u32) -> Result<StepFunction> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("truncation level must be >= 2, got {n}")));
    }
    let (lo, hi) = (1.0 + 1.0 / f64::from(n), f64::from(n));
    let (f, p) = refine_common(f, p.body());
    f.zip_with(&p, |v, q| if (lo..=hi).contains(&q) { v } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendedNorm {
    pub value: f64,
    /// `(n, ‖1_{p <= n} f‖)` for `n = 2, 4, 8, ...`
    pub ladder: Vec<(u64, f64)>,
}

/// `N(f) = sup_n ‖1_{p <= n} f‖`, evaluated on `n = 2, 4, 8, ...` until the
/// whole support is covered.
pub fn extended_norm(f: &StepFunction, p: &Exponent, cfg: &SolveConfig) -> Result<ExtendedNorm> {
    let (f, q) = refine_common(f, p.body());
    let mut ladder = Vec::new();
    let mut n: u64 = 2;
    loop {
        let cut = n as f64;
        let head = f.zip_with(&q, |v, e| if e <= cut { v } else { 0.0 })?;
        ladder.push((n, norm(&head, p, cfg)?));
        if cut >= p.ess_sup() {
            break;
        }
        n = n.checked_mul(2).ok_or_else(|| Error::InvalidArgument("exponent too large for the ladder".into()))?;
    }
    let value = ladder.iter().map(|&(_, v)| v).fold(0.0, f64::max);
    Ok(ExtendedNorm { value, ladder })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationReport {
    /// `∫ x* g' dm` for the norming witness `x*` of `g'` in `L^{p*}`.
    pub value: f64,
    /// Best `∫ f g' dm` found by direct maximization over the unit ball.
    pub oracle_value: f64,
    pub oracle_sweeps: usize,
    pub oracle_converged: bool,
}

const ORACLE_MAX_SWEEPS: usize = 20_000;

/// Variation norm `sup{∫ f g' dm : ‖f‖_{p} <= 1}` of the measure with
/// density `g'`.
pub fn special_variation(g_prime: &StepFunction, pair: &ConjugatePair, _cfg: &SolveConfig) -> Result<VariationReport> {
    let witness = norming_witness(g_prime, &pair.p_star)?;
    let value = integral_of_product(&witness, g_prime);
    let (oracle_value, oracle_sweeps, oracle_converged) = maximize_pairing(g_prime, &pair.p);
    Ok(VariationReport { value, oracle_value, oracle_sweeps, oracle_converged })
}

/// Coordinate ascent on `R(y) = Σ c_k y_k / ‖y‖_p` over `y >= 0`, with
/// `c_k = Δ_k |g'_k|`. Each coordinate is maximized by golden-section search
/// in `ln y_k`; `R` is quasi-concave along every coordinate.
fn maximize_pairing(g_prime: &StepFunction, p: &Exponent) -> (f64, usize, bool) {
    let parts = refine_all(&[g_prime, p.body()]);
    let widths: Vec<f64> = parts[0].partition().widths().collect();
    let c: Vec<f64> = parts[0].values().iter().zip(&widths).map(|(g, w)| w * g.abs()).collect();
    let q = parts[1].values();
    let active: Vec<usize> = (0..c.len()).filter(|&k| c[k] > 0.0).collect();
    if active.is_empty() {
        return (0.0, 0, true);
    }

    let mut y: Vec<f64> = c.iter().map(|&ck| if ck > 0.0 { 1.0 } else { 0.0 }).collect();
    let suffix_norm = |y: &[f64], from: usize, phi0: f64| -> f64 {
        (from..y.len()).fold(phi0, |phi, k| cell_update(phi, widths[k], y[k], q[k]))
    };
    let ratio = |y: &[f64]| -> f64 {
        let dot: f64 = y.iter().zip(&c).map(|(a, b)| a * b).sum();
        dot / suffix_norm(y, 0, 0.0)
    };

    let mut best = ratio(&y);
    let mut quiet = 0;
    for sweep in 1..=ORACLE_MAX_SWEEPS {
        for &k in &active {
            let prefix = suffix_norm(&y[..k], 0, 0.0);
            let rest_dot: f64 = (0..y.len()).filter(|&j| j != k).map(|j| y[j] * c[j]).sum();
            let mut trial = y.clone();
            let mut objective = |s: f64| {
                trial[k] = s.exp();
                (rest_dot + trial[k] * c[k]) / suffix_norm(&trial, k, prefix)
            };
            let s = golden_max(&mut objective, y[k].ln());
            y[k] = s.exp();
        }
        let next = ratio(&y);
        if next - best <= 1e-15 * next {
            quiet += 1;
        } else {
            quiet = 0;
        }
        best = best.max(next);
        if quiet >= 3 {
            return (best, sweep, true);
        }
    }
    (best, ORACLE_MAX_SWEEPS, false)
}

/// Maximizer of a unimodal function, bracketed outward from `s0`.
fn golden_max(f: &mut impl FnMut(f64) -> f64, s0: f64) -> f64 {
    let f0 = f(s0);
    let mut step = 0.5;
    let dir = if f(s0 + step) >= f0 { 1.0 } else { -1.0 };
    let (mut a, mut b) = (s0 - dir * step, s0 + dir * step);
    let mut fb = f(b);
    let mut mid_val = f0;
    while fb > mid_val && step < 700.0 {
        a = b - dir * step;
        step *= 2.0;
        let next = b + dir * step;
        mid_val = fb;
        fb = f(next);
        b = next;
    }
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-10 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    if f(mid) >= f0 {
        mid
    } else {
        s0
    }
}
