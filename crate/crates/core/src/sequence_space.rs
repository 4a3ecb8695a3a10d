//! The `⊞_p` calculus, varying exponent sequence norms and mixed
//! `ℓ^r(ℓ^p)` matrix norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this magnitude of `p * ln(x)` powers are combined in the log domain.
const LOG_DOMAIN_THRESHOLD: f64 = 500.0;

/// `a ⊞_p b = (a^p + b^p)^{1/p}` for `a, b >= 0`, `p >= 1`.
pub fn boxplus(a: f64, b: f64, p: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0 && p >= 1.0);
    if a == 0.0 {
        return b;
    }
    if b == 0.0 {
        return a;
    }
    if p == 1.0 {
        return a + b;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if p * hi.ln().abs() < LOG_DOMAIN_THRESHOLD && p * lo.ln().abs() < LOG_DOMAIN_THRESHOLD {
        (a.powf(p) + b.powf(p)).powf(p.recip())
    } else {
        hi * ((lo / hi).powf(p).ln_1p() / p).exp()
    }
}

/// `(Σ x_i^p)^{1/p}` over non-negative entries, factoring out the maximum.
pub fn lp_sum(xs: impl IntoIterator<Item = f64>, p: f64) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    if p == 1.0 {
        return xs.iter().sum();
    }
    let max = xs.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let s: f64 = xs.iter().map(|&x| (x / max).powf(p)).sum();
    max * s.powf(p.recip())
}

/// Finite sequence `x_1..x_{n+1}` with exponents `p(1)..p(n)`; `p(k)` joins
/// the running accumulation with `x_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence")]
pub struct VarExpSequence {
    values: Vec<f64>,
    exponents: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSequence {
    values: Vec<f64>,
    exponents: Vec<f64>,
}

impl TryFrom<RawSequence> for VarExpSequence {
    type Error = Error;

    fn try_from(raw: RawSequence) -> Result<Self> {
        VarExpSequence::new(raw.values, raw.exponents)
    }
}

impl VarExpSequence {
    pub fn new(values: Vec<f64>, exponents: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("sequence must have at least one value".into()));
        }
        if exponents.len() + 1 != values.len() {
            return Err(Error::LengthMismatch { expected: values.len() - 1, found: exponents.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "sequence value", index: i });
        }
        if let Some((cell, &value)) = exponents.iter().enumerate().find(|(_, &p)| !(p >= 1.0) || !p.is_finite()) {
            return Err(Error::ExponentBelowOne { cell, value });
        }
        Ok(Self { values, exponents })
    }

    /// Constant exponent `p` between every pair of neighbours.
    pub fn constant(values: Vec<f64>, p: f64) -> Result<Self> {
        let n = values.len().saturating_sub(1);
        Self::new(values, vec![p; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }
}

/// `((|x_1| ⊞_{p(1)} |x_2|) ⊞_{p(2)} |x_3|) ...`, folded from the left.
pub fn seq_norm(x: &VarExpSequence) -> f64 {
    x.values[1..].iter().zip(&x.exponents).fold(x.values[0].abs(), |acc, (&v, &p)| boxplus(acc, v.abs(), p))
}

/// `|x_1| ⊞_{p(1)} (|x_2| ⊞_{p(2)} (...))`, the left-handed variant.
pub fn seq_norm_left(x: &VarExpSequence) -> f64 {
    let n = x.values.len();
    x.values[..n - 1]
        .iter()
        .zip(&x.exponents)
        .rev()
        .fold(x.values[n - 1].abs(), |acc, (&v, &p)| boxplus(v.abs(), acc, p))
}

/// Rectangular matrix of finite non-negative reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct NonnegMatrix {
    rows: Vec<Vec<f64>>,
}

impl NonnegMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || ncols == 0 {
            return Err(Error::InvalidArgument("matrix must be non-empty".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::LengthMismatch { expected: ncols, found: row.len() });
            }
            if let Some(j) = row.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i}, {j}) = {} is not a finite non-negative number",
                    row[j]
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { rows: vec![vec![0.0; ncols]; nrows] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.rows[i][i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.rows[0].len())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn transpose(&self) -> Self {
        let (m, n) = self.shape();
        Self { rows: (0..n).map(|j| (0..m).map(|i| self.rows[i][j]).collect()).collect() }
    }

    fn checked_sum(items: &[NonnegMatrix]) -> Result<NonnegMatrix> {
        let first = items.first().ok_or_else(|| Error::InvalidArgument("need at least one matrix".into()))?;
        let shape = first.shape();
        let mut sum = NonnegMatrix::zeros(shape.0, shape.1);
        let mut owner = vec![vec![None::<usize>; shape.1]; shape.0];
        for (k, a) in items.iter().enumerate() {
            if a.shape() != shape {
                return Err(Error::InvalidArgument(format!(
                    "matrix {k} has shape {:?}, expected {:?}",
                    a.shape(),
                    shape
                )));
            }
            for (i, row) in a.rows.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    if let Some(prev) = owner[i][j] {
                        return Err(Error::OverlappingSupports { first: prev, second: k });
                    }
                    owner[i][j] = Some(k);
                    sum.rows[i][j] = v;
                }
            }
        }
        Ok(sum)
    }
}

impl TryFrom<Vec<Vec<f64>>> for NonnegMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        NonnegMatrix::new(rows)
    }
}

impl From<NonnegMatrix> for Vec<Vec<f64>> {
    fn from(m: NonnegMatrix) -> Self {
        m.rows
    }
}

/// `‖A‖_{ℓ^r(ℓ^p)}`: `ℓ^p` across each row (column index `j`), then `ℓ^r`
/// across rows (index `i`).
pub fn mixed_norm(a: &NonnegMatrix, p: f64, r: f64) -> f64 {
    lp_sum(a.rows.iter().map(|row| lp_sum(row.iter().copied(), p)), r)
}

fn check_order(p: f64, r: f64) -> Result<()> {
    if !(p >= 1.0 && r >= p) {
        return Err(Error::InvalidArgument(format!("require 1 <= p <= r, got p = {p}, r = {r}")));
    }
    Ok(())
}

/// Transposition `ℓ^p(ℓ^r) → ℓ^r(ℓ^p)` is a contraction.
///
/// `lhs` combines over `i` with `p` first and then over `j` with `r`; `rhs`
/// combines over `j` with `r` first and then over `i` with `p`.
pub fn transpose_contraction_check(a: &NonnegMatrix, p: f64, r: f64) -> Result<(f64, f64)> {
    check_order(p, r)?;
    Ok((mixed_norm(&a.transpose(), p, r), mixed_norm(a, r, p)))
}

/// For disjointly supported `A_k`: `‖Σ A_k‖_{ℓ^r(ℓ^p)} <= ⊕^p_k ‖A_k‖_{ℓ^r(ℓ^p)}`.
pub fn disjoint_matrix_sum_check(items: &[NonnegMatrix], p: f64, r: f64) -> Result<(f64, f64)> {
    check_order(p, r)?;
    let sum = NonnegMatrix::checked_sum(items)?;
    let rhs = lp_sum(items.iter().map(|a| mixed_norm(a, p, r)), p);
    Ok((mixed_norm(&sum, p, r), rhs))
}

/// `a ⊞_r (b ⊞_p c) <= (a ⊞_r b) ⊞_p c` for `1 <= p <= r`.
pub fn nesting_inequality_check(a: f64, b: f64, c: f64, p: f64, r: f64) -> Result<(f64, f64)> {
    check_order(p, r)?;
    if !(a >= 0.0 && b >= 0.0 && c >= 0.0) {
        return Err(Error::InvalidArgument("a, b, c must be non-negative".into()));
    }
    Ok((boxplus(a, boxplus(b, c, p), r), boxplus(boxplus(a, b, r), c, p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn boxplus_examples() {
        assert!(close(boxplus(3.0, 4.0, 2.0), 5.0, 1e-15));
        assert_eq!(boxplus(2.5, 0.0, 7.0), 2.5);
        assert_eq!(boxplus(0.0, 2.5, 7.0), 2.5);
        // 2^{1/1000} = exp(ln 2 / 1000) = 1.000693387...
        assert!(close(boxplus(1.0, 1.0, 1000.0), 1.000_693_387_462_580_7, 1e-14));
    }

    #[test]
    fn boxplus_log_domain_matches_direct_where_both_apply() {
        // p ln(1e-3) ~ -600 forces the factored branch
        let v = boxplus(1e-3, 2e-3, 90.0);
        let direct = 2e-3 * (1.0 + 0.5f64.powf(90.0)).powf(1.0 / 90.0);
        assert!(close(v, direct, 1e-15));
        assert!(boxplus(1e-200, 1e-200, 500.0).is_finite());
        assert!(boxplus(1e200, 1e200, 500.0).is_finite());
    }

    #[test]
    fn seq_norm_examples() {
        let x = VarExpSequence::new(vec![1.0, 1.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!(close(seq_norm(&x), 5f64.sqrt(), 1e-15));
        assert!(close(seq_norm_left(&x), 1.0 + 2f64.sqrt(), 1e-15));
        let y = VarExpSequence::constant(vec![3.0, -4.0], 2.0).unwrap();
        assert!(close(seq_norm(&y), 5.0, 1e-15));
        let single = VarExpSequence::new(vec![-2.5], vec![]).unwrap();
        assert_eq!(seq_norm(&single), 2.5);
        assert_eq!(seq_norm_left(&single), 2.5);
    }

    #[test]
    fn sequence_validation() {
        assert!(VarExpSequence::new(vec![], vec![]).is_err());
        assert!(VarExpSequence::new(vec![1.0, 2.0], vec![]).is_err());
        assert!(VarExpSequence::new(vec![1.0, 2.0], vec![0.5]).is_err());
        assert!(VarExpSequence::new(vec![1.0, 2.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn mixed_norm_examples() {
        let id = NonnegMatrix::identity(2);
        assert!(close(mixed_norm(&id, 1.0, 2.0), 2f64.sqrt(), 1e-15));
        let ones = NonnegMatrix::new(vec![vec![1.0; 2]; 2]).unwrap();
        assert!(close(mixed_norm(&ones, 2.0, 2.0), 2.0, 1e-15));
        let a = NonnegMatrix::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(close(mixed_norm(&a, 1.0, 2.0), 58f64.sqrt(), 1e-15));
        assert!(close(58f64.sqrt(), 7.615_773_105_9, 1e-11));
    }

    #[test]
    fn transpose_contraction_examples() {
        let (lhs, rhs) = transpose_contraction_check(&NonnegMatrix::identity(2), 1.0, 2.0).unwrap();
        assert!(close(lhs, 2f64.sqrt(), 1e-15));
        assert!(close(rhs, 2.0, 1e-15));
        let a = NonnegMatrix::new(vec![vec![0.3, 2.0, 1.0], vec![4.0, 0.0, 0.5]]).unwrap();
        let (lhs, rhs) = transpose_contraction_check(&a, 2.5, 2.5).unwrap();
        assert!(close(lhs, rhs, 1e-14));
        assert!(matches!(transpose_contraction_check(&a, 3.0, 2.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn disjoint_sum_examples() {
        let a1 = NonnegMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let a2 = NonnegMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let (lhs, rhs) = disjoint_matrix_sum_check(&[a1.clone(), a2], 1.0, 2.0).unwrap();
        assert!(close(lhs, 2f64.sqrt(), 1e-15));
        assert!(close(rhs, 2.0, 1e-15));
        let (lhs, rhs) = disjoint_matrix_sum_check(std::slice::from_ref(&a1), 1.5, 4.0).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(
            disjoint_matrix_sum_check(&[a1.clone(), a1], 1.0, 2.0).unwrap_err(),
            Error::OverlappingSupports { first: 0, second: 1 }
        );
    }

    #[test]
    fn nesting_examples() {
        let (lhs, rhs) = nesting_inequality_check(1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(close(lhs, 5f64.sqrt(), 1e-15));
        assert!(close(rhs, 2f64.sqrt() + 1.0, 1e-15));
        let (lhs, rhs) = nesting_inequality_check(0.0, 2.0, 3.0, 1.5, 4.0).unwrap();
        assert_eq!(lhs, rhs);
        let (lhs, rhs) = nesting_inequality_check(0.7, 2.0, 3.0, 2.5, 2.5).unwrap();
        assert!(close(lhs, rhs, 1e-14));
    }

    #[test]
    fn matrix_validation() {
        assert!(NonnegMatrix::new(vec![]).is_err());
        assert!(NonnegMatrix::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(NonnegMatrix::new(vec![vec![-1.0]]).is_err());
        assert!(NonnegMatrix::new(vec![vec![f64::INFINITY]]).is_err());
    }

    proptest! {
        #[test]
        fn boxplus_commutative_and_associative(a in 0.0f64..100.0, b in 0.0f64..100.0, c in 0.0f64..100.0, p in 1.0f64..20.0) {
            prop_assert_eq!(boxplus(a, b, p), boxplus(b, a, p));
            let l = boxplus(boxplus(a, b, p), c, p);
            let r = boxplus(a, boxplus(b, c, p), p);
            prop_assert!(close(l, r, 1e-12));
        }

        #[test]
        fn boxplus_non_increasing_in_p(a in 1e-3f64..100.0, b in 1e-3f64..100.0, p in 1.0f64..20.0, dp in 0.0f64..20.0) {
            prop_assert!(boxplus(a, b, p + dp) <= boxplus(a, b, p) * (1.0 + 1e-14));
        }

        #[test]
        fn boxplus_tends_to_max(a in 1e-3f64..100.0, b in 1e-3f64..100.0) {
            prop_assert!(close(boxplus(a, b, 1e4), a.max(b), 1e-3));
        }

        #[test]
        fn constant_exponent_matches_classical_lp(xs in proptest::collection::vec(-50.0f64..50.0, 1..30), p in 1.0f64..12.0) {
            let classical = xs.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p);
            let seq = VarExpSequence::constant(xs, p).unwrap();
            prop_assert!(close(seq_norm(&seq), classical, 1e-12));
            prop_assert!(close(seq_norm_left(&seq), classical, 1e-12));
        }

        #[test]
        fn seq_norm_monotone_and_homogeneous(
            xs in proptest::collection::vec(-50.0f64..50.0, 2..20),
            ps in proptest::collection::vec(1.0f64..10.0, 19),
            idx in 0usize..20,
            bump in 0.0f64..5.0,
            c in -10.0f64..10.0,
        ) {
            let n = xs.len();
            let seq = VarExpSequence::new(xs.clone(), ps[..n - 1].to_vec()).unwrap();
            let mut bigger = xs.clone();
            let i = idx % n;
            bigger[i] = bigger[i].signum() * (bigger[i].abs() + bump);
            let big = VarExpSequence::new(bigger, ps[..n - 1].to_vec()).unwrap();
            prop_assert!(seq_norm(&seq) <= seq_norm(&big) * (1.0 + 1e-14));
            let scaled = VarExpSequence::new(xs.iter().map(|x| c * x).collect(), ps[..n - 1].to_vec()).unwrap();
            prop_assert!(close(seq_norm(&scaled), c.abs() * seq_norm(&seq), 1e-12));
        }

        #[test]
        fn nesting_inequality_holds(a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.0f64..10.0, p in 1.0f64..6.0, dr in 0.0f64..6.0) {
            let (lhs, rhs) = nesting_inequality_check(a, b, c, p, p + dr).unwrap();
            prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
        }
    }
}
