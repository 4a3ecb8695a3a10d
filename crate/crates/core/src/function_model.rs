//! Step functions on the unit interval and the validated wrappers used for
//! exponents and densities.
//!
//! Cells are left-closed and right-open, except the last one which also
//! contains `t = 1`. All values are immutable after construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Breakpoints closer than this are treated as the same point when merging.
pub const BREAKPOINT_EPS: f64 = 1e-15;

/// A finite partition `0 = t_0 < t_1 < ... < t_m = 1` of the unit interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Partition {
    breakpoints: Vec<f64>,
}

impl Partition {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidPartition(format!("need at least two breakpoints, got {}", breakpoints.len())));
        }
        if let Some(i) = breakpoints.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFinite { what: "breakpoint", index: i });
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidPartition("first breakpoint must be 0 and last must be 1".into()));
        }
        if let Some(i) = breakpoints.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition(format!("breakpoints not strictly increasing at index {}", i + 1)));
        }
        Ok(Self { breakpoints })
    }

    /// The trivial partition `{0, 1}`.
    pub fn unit() -> Self {
        Self { breakpoints: vec![0.0, 1.0] }
    }

    /// `n` cells of equal width. Panics if `n == 0`.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "a partition needs at least one cell");
        let mut breakpoints: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
        breakpoints.push(1.0);
        Self { breakpoints }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn cell_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn width(&self, cell: usize) -> f64 {
        self.breakpoints[cell + 1] - self.breakpoints[cell]
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints.windows(2).map(|w| w[1] - w[0])
    }

    pub fn midpoint(&self, cell: usize) -> f64 {
        0.5 * (self.breakpoints[cell] + self.breakpoints[cell + 1])
    }

    /// Index of the cell containing `t`, or `None` outside `[0, 1]`.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if !(0.0..=1.0).contains(&t) {
            return None;
        }
        let k = self.breakpoints.partition_point(|&b| b <= t);
        Some((k - 1).min(self.cell_count() - 1))
    }

    /// Union of both breakpoint sets, with near-duplicates coalesced.
    pub fn merge(&self, other: &Partition) -> Partition {
        if self == other {
            return self.clone();
        }
        let (a, b) = (&self.breakpoints, &other.breakpoints);
        let mut merged = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) if x <= y => {
                    i += 1;
                    x
                }
                (Some(_), Some(&y)) => {
                    j += 1;
                    y
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (None, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            match merged.last() {
                Some(&last) if next - last <= BREAKPOINT_EPS => {}
                _ => merged.push(next),
            }
        }
        // coalescing may have dropped the exact 1.0 in favour of a neighbour
        *merged.last_mut().unwrap() = 1.0;
        Partition { breakpoints: merged }
    }
}

impl TryFrom<Vec<f64>> for Partition {
    type Error = Error;

    fn try_from(breakpoints: Vec<f64>) -> Result<Self> {
        Partition::new(breakpoints)
    }
}

impl From<Partition> for Vec<f64> {
    fn from(p: Partition) -> Self {
        p.breakpoints
    }
}

#[derive(Deserialize)]
struct RawStepFunction {
    partition: Partition,
    values: Vec<f64>,
}

/// Piecewise-constant real function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepFunction")]
pub struct StepFunction {
    partition: Partition,
    values: Vec<f64>,
}

impl TryFrom<RawStepFunction> for StepFunction {
    type Error = Error;

    fn try_from(raw: RawStepFunction) -> Result<Self> {
        StepFunction::new(raw.partition, raw.values)
    }
}

impl StepFunction {
    pub fn new(partition: Partition, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.cell_count() {
            return Err(Error::LengthMismatch { expected: partition.cell_count(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "value", index: i });
        }
        Ok(Self { partition, values })
    }

    pub fn from_parts(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(Partition::new(breakpoints)?, values)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(Partition::unit(), vec![c])
    }

    /// `c` on `[lo, hi)` and zero elsewhere.
    pub fn indicator(lo: f64, hi: f64, c: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidArgument(format!("indicator interval [{lo}, {hi}) not inside [0, 1]")));
        }
        let mut bps = vec![0.0];
        let mut vals = Vec::new();
        if lo > 0.0 {
            bps.push(lo);
            vals.push(0.0);
        }
        vals.push(c);
        if hi < 1.0 {
            bps.push(hi);
            vals.push(0.0);
        }
        bps.push(1.0);
        Self::from_parts(bps, vals)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> Option<f64> {
        self.partition.locate(t).map(|k| self.values[k])
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Re-express on a finer partition. Each target cell takes the value at
    /// its midpoint, which is exact when `target` refines `self.partition()`.
    pub fn refine_to(&self, target: &Partition) -> StepFunction {
        if *target == self.partition {
            return self.clone();
        }
        let values =
            (0..target.cell_count()).map(|k| self.eval(target.midpoint(k)).expect("midpoint lies in [0, 1]")).collect();
        StepFunction { partition: target.clone(), values }
    }

    /// Cellwise map; fails if `op` produces a non-finite value.
    pub fn map(&self, op: impl Fn(f64) -> f64) -> Result<StepFunction> {
        StepFunction::new(self.partition.clone(), self.values.iter().map(|&v| op(v)).collect())
    }

    /// Cellwise combination on the common refinement.
    pub fn zip_with(&self, other: &StepFunction, op: impl Fn(f64, f64) -> f64) -> Result<StepFunction> {
        let (a, b) = refine_common(self, other);
        let values = a.values.iter().zip(&b.values).map(|(&x, &y)| op(x, y)).collect();
        StepFunction::new(a.partition, values)
    }

    pub fn scale(&self, c: f64) -> Result<StepFunction> {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &StepFunction) -> Result<StepFunction> {
        self.zip_with(other, |x, y| x + y)
    }

    /// `∫ |self| dm`.
    pub fn l1(&self) -> f64 {
        self.values.iter().zip(self.partition.widths()).map(|(v, w)| v.abs() * w).sum()
    }
}

/// Put both functions on the merged partition. Values are copied cellwise, so
/// each output equals its input at every point.
pub fn refine_common(a: &StepFunction, b: &StepFunction) -> (StepFunction, StepFunction) {
    if a.partition == b.partition {
        return (a.clone(), b.clone());
    }
    let merged = a.partition.merge(&b.partition);
    (a.refine_to(&merged), b.refine_to(&merged))
}

/// Common refinement of any number of step functions.
pub fn refine_all(fs: &[&StepFunction]) -> Vec<StepFunction> {
    let Some(first) = fs.first() else {
        return Vec::new();
    };
    let merged = fs[1..].iter().fold(first.partition.clone(), |acc, f| acc.merge(&f.partition));
    fs.iter().map(|f| f.refine_to(&merged)).collect()
}

/// Sample `h` at the midpoints of `n_cells` uniform cells.
pub fn sample_to_step(h: impl Fn(f64) -> f64, n_cells: usize) -> Result<StepFunction> {
    if n_cells == 0 {
        return Err(Error::InvalidArgument("n_cells must be at least 1".into()));
    }
    let partition = Partition::uniform(n_cells);
    let mut values = Vec::with_capacity(n_cells);
    for k in 0..n_cells {
        let t = partition.midpoint(k);
        let v = h(t);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { t, value: v });
        }
        values.push(v);
    }
    StepFunction::new(partition, values)
}

/// A step function with all values `>= 1`, with cached essential bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFunction", into = "StepFunction")]
pub struct Exponent {
    body: StepFunction,
    ess_inf: f64,
    ess_sup: f64,
}

/// Checks `s >= 1` cellwise and records its bounds.
pub fn validate_exponent(s: StepFunction) -> Result<Exponent> {
    if let Some((cell, &value)) = s.values.iter().enumerate().find(|(_, &v)| v < 1.0) {
        return Err(Error::ExponentBelowOne { cell, value });
    }
    let ess_inf = s.values.iter().copied().fold(f64::INFINITY, f64::min);
    let ess_sup = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Exponent { body: s, ess_inf, ess_sup })
}

impl Exponent {
    pub fn constant(q: f64) -> Result<Self> {
        validate_exponent(StepFunction::constant(q)?)
    }

    pub fn from_parts(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_exponent(StepFunction::from_parts(breakpoints, values)?)
    }

    /// Midpoint samples of a general exponent on `n_cells` uniform cells.
    pub fn sampled(h: impl Fn(f64) -> f64, n_cells: usize) -> Result<Self> {
        validate_exponent(sample_to_step(h, n_cells)?)
    }

    pub fn body(&self) -> &StepFunction {
        &self.body
    }

    pub fn values(&self) -> &[f64] {
        self.body.values()
    }

    pub fn partition(&self) -> &Partition {
        self.body.partition()
    }

    pub fn ess_inf(&self) -> f64 {
        self.ess_inf
    }

    pub fn ess_sup(&self) -> f64 {
        self.ess_sup
    }

    pub fn eval(&self, t: f64) -> Option<f64> {
        self.body.eval(t)
    }

    pub fn refine_to(&self, target: &Partition) -> Exponent {
        Exponent { body: self.body.refine_to(target), ..*self }
    }

    pub fn is_constant(&self) -> bool {
        self.ess_inf == self.ess_sup
    }
}

impl TryFrom<StepFunction> for Exponent {
    type Error = Error;

    fn try_from(s: StepFunction) -> Result<Self> {
        validate_exponent(s)
    }
}

impl From<Exponent> for StepFunction {
    fn from(e: Exponent) -> Self {
        e.body
    }
}

/// Strictly positive step density `dμ/dm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFunction", into = "StepFunction")]
pub struct Density {
    body: StepFunction,
}

impl Density {
    pub fn new(body: StepFunction) -> Result<Self> {
        if let Some((cell, &value)) = body.values.iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(Error::NonPositiveDensity { cell, value });
        }
        Ok(Self { body })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(StepFunction::constant(c)?)
    }

    pub fn body(&self) -> &StepFunction {
        &self.body
    }

    pub fn values(&self) -> &[f64] {
        self.body.values()
    }

    pub fn refine_to(&self, target: &Partition) -> Density {
        Density { body: self.body.refine_to(target) }
    }
}

impl TryFrom<StepFunction> for Density {
    type Error = Error;

    fn try_from(s: StepFunction) -> Result<Self> {
        Density::new(s)
    }
}

impl From<Density> for StepFunction {
    fn from(d: Density) -> Self {
        d.body
    }
}
