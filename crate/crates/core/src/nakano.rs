//! Luxemburg-type norms `inf{λ > 0 : ∫ ψ(|f|/λ, t) dm <= 1}` used as the
//! comparison norm for the ODE-determined one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_model::{refine_all, Exponent, StepFunction};
use crate::phi_solver::{norm, SolveConfig};

const MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModularKind {
    /// `ψ(s, t) = s^{p(t)} / p(t)`, the Nakano modular.
    Psi,
    /// `φ(s, t) = s^{p(t)}`.
    Plain,
}

impl std::str::FromStr for ModularKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psi" => Ok(Self::Psi),
            "plain" => Ok(Self::Plain),
            other => Err(Error::InvalidArgument(format!("unknown modular kind {other:?}"))),
        }
    }
}

fn aligned(f: &StepFunction, p: &Exponent) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let r = refine_all(&[f, p.body()]);
    (r[0].partition().widths().collect(), r[0].values().to_vec(), r[1].values().to_vec())
}

fn modular_aligned(widths: &[f64], f: &[f64], p: &[f64], lambda: f64, kind: ModularKind) -> f64 {
    let ln_lambda = lambda.ln();
    widths
        .iter()
        .zip(f)
        .zip(p)
        .filter(|((_, &v), _)| v != 0.0)
        .map(|((&w, &v), &q)| {
            let mut log = q * (v.abs().ln() - ln_lambda) + w.ln();
            if kind == ModularKind::Psi {
                log -= q.ln();
            }
            log.exp()
        })
        .sum()
}

/// `Σ_k Δ_k · ψ(|f_k| / λ, p_k)`.
pub fn modular(f: &StepFunction, p: &Exponent, lambda: f64, kind: ModularKind) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let (w, v, q) = aligned(f, p);
    Ok(modular_aligned(&w, &v, &q, lambda, kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NakanoNorm {
    pub lambda: f64,
    pub modular_at_lambda: f64,
}

/// Bisection on `λ` down to relative bracket width `tol`; the returned `λ`
/// is the feasible end of the final bracket.
pub fn nakano_norm(f: &StepFunction, p: &Exponent, kind: ModularKind, tol: f64) -> Result<NakanoNorm> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let (w, v, q) = aligned(f, p);
    let sup = v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if sup == 0.0 {
        return Ok(NakanoNorm { lambda: 0.0, modular_at_lambda: 0.0 });
    }
    let m = |lambda: f64| modular_aligned(&w, &v, &q, lambda, kind);

    let mut hi = sup;
    let mut steps = 0;
    while m(hi) > 1.0 {
        hi *= 2.0;
        steps += 1;
        if steps > MAX_DOUBLINGS {
            return Err(Error::BracketFailure { doublings: steps });
        }
    }
    let mut lo = hi * 0.5;
    steps = 0;
    while m(lo) <= 1.0 {
        hi = lo;
        lo *= 0.5;
        steps += 1;
        if steps > MAX_DOUBLINGS {
            return Err(Error::BracketFailure { doublings: steps });
        }
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if m(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(NakanoNorm { lambda: hi, modular_at_lambda: m(hi) })
}

/// Bisection width used by [`equivalence_ratio`].
pub const NAKANO_TOL: f64 = 1e-12;

/// `‖f‖_{ODE} / ‖f‖_{ψ-Nakano}`; lies in `[1/2, 2]`.
pub fn equivalence_ratio(f: &StepFunction, p: &Exponent, cfg: &SolveConfig) -> Result<f64> {
    if f.is_zero() {
        return Err(Error::InvalidArgument("equivalence ratio undefined for f = 0".into()));
    }
    let ode = norm(f, p, cfg)?;
    let nak = nakano_norm(f, p, ModularKind::Psi, NAKANO_TOL)?;
    Ok(ode / nak.lambda)
}
