//! Weighted spaces `L^{p(·)}(μ)` for `μ ≪ m` with step density, the
//! density-change isometry, and the embedding into the universal exponent.

mod universal;

pub use universal::{
    build_embedding, embed_isometry_check, find_monotone_pieces, p0_derivative, p0_eval, Direction, EmbedReport,
    EmbeddedPiece, EmbeddingMap, MonotonePiece, SmoothExponent, DEFAULT_P_MAX,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::function_model::{refine_all, Density, Exponent, StepFunction};
use crate::phi_solver::{norm, stabilize, Aligned, SolveConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSpec {
    pub p: Exponent,
    /// `dμ/dm`
    pub w: Density,
}

/// Stabilized norm for `φ' = w |f|^p / p · φ^{1-p}`.
pub fn weighted_norm(f: &StepFunction, spec: &WeightedSpec, cfg: &SolveConfig) -> Result<f64> {
    Ok(stabilize(Aligned::new(f, &spec.p, Some(&spec.w)), cfg)?.curve.terminal())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsometryReport {
    /// `‖f‖` in `L^{p}(m)`
    pub norm_m: f64,
    /// `‖w^{-1/p} f‖` in `L^{p}(μ)`
    pub norm_mu: f64,
    pub defect: f64,
}

/// `T f = w^{-1/p} f`.
pub fn weight_transform(f: &StepFunction, spec: &WeightedSpec) -> Result<StepFunction> {
    let r = refine_all(&[f, spec.p.body(), spec.w.body()]);
    let values = r[0]
        .values()
        .iter()
        .zip(r[1].values())
        .zip(r[2].values())
        .map(|((&v, &q), &w)| v * (-w.ln() / q).exp())
        .collect();
    StepFunction::new(r[0].partition().clone(), values)
}

pub fn weight_isometry_check(f: &StepFunction, spec: &WeightedSpec, cfg: &SolveConfig) -> Result<IsometryReport> {
    let norm_m = norm(f, &spec.p, cfg)?;
    let norm_mu = weighted_norm(&weight_transform(f, spec)?, spec, cfg)?;
    Ok(IsometryReport { norm_m, norm_mu, defect: (norm_m - norm_mu).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_model::{validate_exponent, Partition};
    use proptest::prelude::*;

    fn cfg() -> SolveConfig {
        SolveConfig::default()
    }

    fn spec(p: f64, w: f64) -> WeightedSpec {
        WeightedSpec { p: Exponent::constant(p).unwrap(), w: Density::constant(w).unwrap() }
    }

    #[test]
    fn weighted_norm_examples() {
        let one = StepFunction::constant(1.0).unwrap();
        assert!((weighted_norm(&one, &spec(2.0, 2.0), &cfg()).unwrap() - 2f64.sqrt()).abs() < 1e-11);
        let f = StepFunction::from_parts(vec![0.0, 0.4, 1.0], vec![3.0, -2.0]).unwrap();
        let p = Exponent::from_parts(vec![0.0, 0.7, 1.0], vec![1.5, 6.0]).unwrap();
        let unit = WeightedSpec { p: p.clone(), w: Density::constant(1.0).unwrap() };
        assert!((weighted_norm(&f, &unit, &cfg()).unwrap() - norm(&f, &p, &cfg()).unwrap()).abs() < 1e-12);
        let zero = StepFunction::constant(0.0).unwrap();
        assert!(weighted_norm(&zero, &spec(3.0, 5.0), &cfg()).unwrap() < 1e-12);
    }

    #[test]
    fn isometry_examples() {
        let one = StepFunction::constant(1.0).unwrap();
        let s = spec(2.0, 2.0);
        let tf = weight_transform(&one, &s).unwrap();
        assert!((tf.values()[0] - 0.5f64.sqrt()).abs() < 1e-15);
        let r = weight_isometry_check(&one, &s, &cfg()).unwrap();
        assert!((r.norm_m - 1.0).abs() < 1e-11 && r.defect < 1e-11);
        let f = StepFunction::from_parts(vec![0.0, 0.4, 1.0], vec![3.0, -2.0]).unwrap();
        let r = weight_isometry_check(&f, &spec(4.0, 1.0), &cfg()).unwrap();
        assert_eq!(r.norm_m, r.norm_mu);
    }

    fn arb_case() -> impl Strategy<Value = (StepFunction, WeightedSpec)> {
        (1usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(-50.0f64..50.0, n),
                proptest::collection::vec(1.0f64..6.0, n),
                proptest::collection::vec(0.1f64..10.0, n),
            )
                .prop_map(move |(v, q, w)| {
                    let part = Partition::uniform(n);
                    (
                        StepFunction::new(part.clone(), v).unwrap(),
                        WeightedSpec {
                            p: validate_exponent(StepFunction::new(part.clone(), q).unwrap()).unwrap(),
                            w: Density::new(StepFunction::new(part, w).unwrap()).unwrap(),
                        },
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn isometry_holds((f, s) in arb_case()) {
            let r = weight_isometry_check(&f, &s, &cfg()).unwrap();
            prop_assert!(r.defect <= 1e-9, "{:?}", r);
        }

        #[test]
        fn unit_weight_is_same_code_path((f, s) in arb_case()) {
            let unit = WeightedSpec { p: s.p.clone(), w: Density::constant(1.0).unwrap() };
            let a = weighted_norm(&f, &unit, &cfg()).unwrap();
            let b = norm(&f, &s.p, &cfg()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
