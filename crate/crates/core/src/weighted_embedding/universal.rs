//! The universal exponent `p₀(t) = u sin u + u + 1`, `u = 1/(1 - t)`, and
//! order-preserving embeddings of smooth exponents into it.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{weighted_norm, WeightedSpec};
use crate::error::{Error, Result};
use crate::function_model::{validate_exponent, Density, Partition, StepFunction};
use crate::phi_solver::{norm, SolveConfig};

/// Largest exponent value a source may reach.
pub const DEFAULT_P_MAX: f64 = 1e3;

const SCAN_STEP: f64 = 0.05;
const SCAN_WINDOWS: f64 = 1e4;
const SOURCE_SCAN_POINTS: usize = 4096;

fn p0_u(u: f64) -> f64 {
    u * u.sin() + u + 1.0
}

/// `dp₀/du`
fn p0_du(u: f64) -> f64 {
    u.sin() + u * u.cos() + 1.0
}

fn check_domain(t: f64) -> Result<f64> {
    if (0.0..1.0).contains(&t) {
        Ok(1.0 / (1.0 - t))
    } else {
        Err(Error::OutsideDomain(t))
    }
}

pub fn p0_eval(t: f64) -> Result<f64> {
    Ok(p0_u(check_domain(t)?))
}

/// `dp₀/dt = u² (sin u + u cos u + 1)`.
pub fn p0_derivative(t: f64) -> Result<f64> {
    let u = check_domain(t)?;
    Ok(u * u * p0_du(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    fn of(slope: f64) -> Self {
        if slope > 0.0 {
            Self::Increasing
        } else {
            Self::Decreasing
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonePiece {
    pub lo: f64,
    pub hi: f64,
    pub direction: Direction,
    /// `(min, max)` of `p₀` on the piece.
    pub range: (f64, f64),
    u_lo: f64,
    u_hi: f64,
}

impl MonotonePiece {
    fn new(u_lo: f64, u_hi: f64) -> Self {
        let (a, b) = (p0_u(u_lo), p0_u(u_hi));
        Self {
            lo: 1.0 - 1.0 / u_lo,
            hi: 1.0 - 1.0 / u_hi,
            direction: Direction::of(b - a),
            range: (a.min(b), a.max(b)),
            u_lo,
            u_hi,
        }
    }

    fn covers(&self, lo: f64, hi: f64) -> bool {
        self.range.0 <= lo && hi <= self.range.1
    }

    /// `t` in the piece with `p₀(t) = target`.
    fn invert(&self, target: f64) -> f64 {
        let rising = self.direction == Direction::Increasing;
        let (mut lo, mut hi) = (self.u_lo, self.u_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (p0_u(mid) < target) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = if (p0_u(lo) - target).abs() <= (p0_u(hi) - target).abs() { lo } else { hi };
        1.0 - 1.0 / u
    }
}

fn bisect_root(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let lo_sign = g(lo) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Monotone pieces of `p₀` in increasing order of `t`.
struct PieceScanner {
    u: f64,
    start: f64,
    limit: f64,
}

impl PieceScanner {
    fn new() -> Self {
        Self { u: 1.0, start: 1.0, limit: 1.0 + SCAN_WINDOWS * std::f64::consts::TAU }
    }
}

impl Iterator for PieceScanner {
    type Item = MonotonePiece;

    fn next(&mut self) -> Option<MonotonePiece> {
        while self.u < self.limit {
            let next = self.u + SCAN_STEP;
            if (p0_du(self.u) > 0.0) != (p0_du(next) > 0.0) {
                let root = bisect_root(p0_du, self.u, next);
                let piece = MonotonePiece::new(self.start, root);
                self.start = root;
                self.u = next;
                return Some(piece);
            }
            self.u = next;
        }
        None
    }
}

/// The first `count` pieces of `p₀` that sweep at least `[p_lo, p_hi]`,
/// optionally restricted to one direction.
pub fn find_monotone_pieces(
    range: (f64, f64),
    count: usize,
    direction: Option<Direction>,
) -> Result<Vec<MonotonePiece>> {
    let (p_lo, p_hi) = range;
    if !(p_lo > 1.0 && p_lo < p_hi && p_hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target range must satisfy 1 < p_lo < p_hi < inf, got ({p_lo}, {p_hi})"
        )));
    }
    let found: Vec<MonotonePiece> = PieceScanner::new()
        .filter(|piece| piece.covers(p_lo, p_hi) && direction.map_or(true, |d| d == piece.direction))
        .take(count)
        .collect();
    if found.len() < count {
        return Err(Error::InsufficientPieces { found: found.len(), requested: count });
    }
    Ok(found)
}

type Curve = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A C¹ exponent on a sub-interval of `[0, 1]`, given with its derivative.
#[derive(Clone)]
pub struct SmoothExponent {
    pub name: String,
    value: Curve,
    derivative: Curve,
    domain: (f64, f64),
}

impl fmt::Debug for SmoothExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothExponent").field("name", &self.name).field("domain", &self.domain).finish()
    }
}

impl SmoothExponent {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = domain;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "domain must be a proper sub-interval of [0, 1], got ({lo}, {hi})"
            )));
        }
        Ok(Self { name: name.into(), value: Arc::new(value), derivative: Arc::new(derivative), domain })
    }

    /// `p(t) = 2 + t`
    pub fn affine() -> Self {
        Self::new("affine", |t| 2.0 + t, |_| 1.0, (0.0, 1.0)).unwrap()
    }

    /// `p(t) = 2 + sin(3t)`
    pub fn sine() -> Self {
        Self::new("sine", |t| 2.0 + (3.0 * t).sin(), |t| 3.0 * (3.0 * t).cos(), (0.0, 1.0)).unwrap()
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "affine" => Some(Self::affine()),
            "sine" => Some(Self::sine()),
            _ => None,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (self.derivative)(t)
    }

    fn sample(&self, t: f64, p_max: f64) -> Result<(f64, f64)> {
        let (v, d) = (self.value(t), self.derivative(t));
        for x in [v, d] {
            if !x.is_finite() {
                return Err(Error::NonFiniteSample { t, value: x });
            }
        }
        if !(v > 1.0 && v <= p_max) {
            return Err(Error::InvalidArgument(format!("exponent {v} at t = {t} is outside (1, {p_max}]")));
        }
        Ok((v, d))
    }

    /// Breakpoints of the strictly monotone pieces, found from sign changes
    /// of the derivative.
    fn monotone_breaks(&self, p_max: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.domain;
        let step = (hi - lo) / SOURCE_SCAN_POINTS as f64;
        let mut breaks = vec![lo];
        let mut last: Option<(f64, f64)> = None;
        let mut prev_zero = false;
        for i in 0..=SOURCE_SCAN_POINTS {
            let x = if i == SOURCE_SCAN_POINTS { hi } else { lo + i as f64 * step };
            let (_, d) = self.sample(x, p_max)?;
            if d == 0.0 {
                if prev_zero {
                    return Err(Error::NotPiecewiseMonotone(x));
                }
                prev_zero = true;
                continue;
            }
            prev_zero = false;
            if let Some((x0, d0)) = last {
                if (d0 > 0.0) != (d > 0.0) {
                    breaks.push(bisect_root(|t| self.derivative(t), x0, x));
                }
            }
            last = Some((x, d));
        }
        if last.is_none() {
            return Err(Error::NotPiecewiseMonotone(lo));
        }
        breaks.push(hi);
        Ok(breaks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddedPiece {
    pub source: (f64, f64),
    pub target: MonotonePiece,
    /// Source cells `first_cell..end_cell` of the map's partition.
    pub first_cell: usize,
    pub end_cell: usize,
    /// `T` at the source breakpoints of the piece.
    pub images: Vec<f64>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingMap {
    pub source_name: String,
    pub source_partition: Partition,
    pub pieces: Vec<EmbeddedPiece>,
    /// `p` and `|p'|` at the source cell midpoints.
    source_exponent: Vec<f64>,
    source_slope: Vec<f64>,
    pub max_residual: f64,
}

fn strictly_increasing(points: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for x in points {
        if out.last().map_or(true, |&l| x > l + 1e-14) {
            out.push(x);
        }
    }
    out
}

/// Tabulates `T` with `p₀ ∘ T = p` on every monotone piece of `source`,
/// over a uniform grid of `nodes` cells refined by the piece breakpoints.
/// Each source piece is sent, in order, to the next piece of `p₀` with the
/// same direction whose range covers it.
pub fn build_embedding(source: &SmoothExponent, nodes: usize) -> Result<EmbeddingMap> {
    if nodes == 0 {
        return Err(Error::InvalidArgument("nodes must be at least 1".into()));
    }
    let breaks = source.monotone_breaks(DEFAULT_P_MAX)?;
    let mut points = breaks.clone();
    points.extend([0.0, 1.0]);
    points.extend((0..=nodes).map(|i| i as f64 / nodes as f64));
    points.sort_by(f64::total_cmp);
    let mut points = strictly_increasing(points);
    *points.last_mut().unwrap() = 1.0;
    let partition = Partition::new(points)?;

    let n = partition.cell_count();
    let mut source_exponent = vec![2.0; n];
    let mut source_slope = vec![1.0; n];
    let mut scanner = PieceScanner::new();
    let mut pieces = Vec::new();
    for (index, w) in breaks.windows(2).enumerate() {
        let (x_lo, x_hi) = (w[0], w[1]);
        if x_hi - x_lo <= 1e-14 {
            continue;
        }
        let (a, b) = (source.value(x_lo), source.value(x_hi));
        let direction = Direction::of(b - a);
        let (lo, hi) = (a.min(b), a.max(b));
        let target = scanner
            .by_ref()
            .find(|piece| piece.direction == direction && piece.covers(lo, hi))
            .ok_or(Error::NoCoveringPiece { piece: index, lo, hi })?;

        let bps = partition.breakpoints();
        let first_cell = bps.partition_point(|&x| x < x_lo - 1e-14);
        let end_cell = bps.partition_point(|&x| x < x_hi - 1e-14);
        let mut images = Vec::with_capacity(end_cell - first_cell + 1);
        let mut max_residual: f64 = 0.0;
        for &x in &bps[first_cell..=end_cell] {
            let want = source.value(x);
            let t = target.invert(want);
            max_residual = max_residual.max((p0_eval(t)? - want).abs());
            images.push(t);
        }
        for k in first_cell..end_cell {
            let (v, d) = source.sample(partition.midpoint(k), DEFAULT_P_MAX)?;
            source_exponent[k] = v;
            source_slope[k] = d.abs();
        }
        pieces.push(EmbeddedPiece { source: (x_lo, x_hi), target, first_cell, end_cell, images, max_residual });
    }
    let max_residual = pieces.iter().map(|p| p.max_residual).fold(0.0, f64::max);
    Ok(EmbeddingMap {
        source_name: source.name.clone(),
        source_partition: partition,
        pieces,
        source_exponent,
        source_slope,
        max_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbedReport {
    /// `‖f‖` in `L^{p}(m)`
    pub source_norm: f64,
    /// `‖G f‖` in `L^{p₀}(m)`
    pub target_norm: f64,
    pub defect: f64,
    /// `‖f‖` in `L^{p}(ν)`, `dν = |p'| dm`
    pub weighted_source_norm: f64,
    /// `‖f ∘ T⁻¹‖` in `L^{p₀}(μ)`, `dμ = |p₀'| dm`
    pub weighted_target_norm: f64,
    pub weighted_defect: f64,
    pub max_residual: f64,
}

struct Side {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    exponent: Vec<f64>,
    density: Vec<f64>,
}

impl Side {
    fn new() -> Self {
        Self { breakpoints: vec![0.0], values: Vec::new(), exponent: Vec::new(), density: Vec::new() }
    }

    fn push(&mut self, right: f64, value: f64, exponent: f64, density: f64) {
        self.breakpoints.push(right);
        self.values.push(value);
        self.exponent.push(exponent);
        self.density.push(density);
    }

    fn gap_to(&mut self, right: f64) {
        if right > *self.breakpoints.last().unwrap() {
            self.push(right, 0.0, 2.0, 1.0);
        }
    }

    fn norms(self, cfg: &SolveConfig) -> Result<(f64, f64)> {
        let partition = Partition::new(self.breakpoints)?;
        let f = StepFunction::new(partition.clone(), self.values)?;
        let p = validate_exponent(StepFunction::new(partition.clone(), self.exponent)?)?;
        let plain = norm(&f, &p, cfg)?;
        let w = Density::new(StepFunction::new(partition, self.density)?)?;
        Ok((plain, weighted_norm(&f, &WeightedSpec { p, w }, cfg)?))
    }
}

/// Compares `‖f‖_{p}` with `‖G f‖_{p₀}` for
/// `G f (t) = (|p₀'(t)| / |p'(T⁻¹t)|)^{1/p₀(t)} f(T⁻¹t)`, and the
/// `ν`/`μ`-weighted norms of `f` and `f ∘ T⁻¹`. `f` is sampled at the
/// midpoints of the map's source cells.
pub fn embed_isometry_check(f: &StepFunction, map: &EmbeddingMap, cfg: &SolveConfig) -> Result<EmbedReport> {
    let sampled = f.refine_to(&map.source_partition);
    let values = sampled.values();
    let mut covered = vec![false; values.len()];
    for piece in &map.pieces {
        covered[piece.first_cell..piece.end_cell].iter_mut().for_each(|c| *c = true);
    }
    if let Some(k) = (0..values.len()).find(|&k| values[k] != 0.0 && !covered[k]) {
        return Err(Error::InvalidArgument(format!(
            "f is supported off the source pieces near t = {}",
            map.source_partition.midpoint(k)
        )));
    }

    let mut source = Side::new();
    let mut target = Side::new();
    let bps = map.source_partition.breakpoints();
    let mut unit_target = Side::new();
    for (k, &v) in values.iter().enumerate() {
        source.push(bps[k + 1], v, map.source_exponent[k], map.source_slope[k]);
    }
    for piece in &map.pieces {
        for (j, k) in (piece.first_cell..piece.end_cell).enumerate() {
            let (t_a, t_b) = (piece.images[j], piece.images[j + 1]);
            let mid = 0.5 * (t_a + t_b);
            let q = p0_eval(mid)?;
            let dq = p0_derivative(mid)?.abs();
            let v = values[k];
            let g = v * ((dq.ln() - map.source_slope[k].ln()) / q).exp();
            target.gap_to(t_a);
            target.push(t_b, g, q, dq);
            unit_target.gap_to(t_a);
            unit_target.push(t_b, v, q, dq);
        }
    }
    target.gap_to(1.0);
    unit_target.gap_to(1.0);

    let (source_norm, weighted_source_norm) = source.norms(cfg)?;
    let (target_norm, _) = target.norms(cfg)?;
    let (_, weighted_target_norm) = unit_target.norms(cfg)?;
    Ok(EmbedReport {
        source_norm,
        target_norm,
        defect: (source_norm - target_norm).abs(),
        weighted_source_norm,
        weighted_target_norm,
        weighted_defect: (weighted_source_norm - weighted_target_norm).abs(),
        max_residual: map.max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> SolveConfig {
        SolveConfig::default()
    }

    #[test]
    fn p0_examples() {
        assert!((p0_eval(0.0).unwrap() - (1f64.sin() + 2.0)).abs() < 1e-15);
        assert!((p0_eval(0.0).unwrap() - 2.841_470_984_8).abs() < 1e-10);
        assert!((p0_eval(1.0 - 1.0 / PI).unwrap() - 4.141_592_653_6).abs() < 1e-9);
        assert!((p0_eval(1.0 - 1.0 / (1.5 * PI)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(p0_eval(1.0).unwrap_err(), Error::OutsideDomain(1.0));
        assert!(p0_eval(-0.1).is_err());
    }

    #[test]
    fn p0_never_below_one_and_derivative_matches() {
        for i in 0..200_000 {
            let t = i as f64 / 200_000.0 * 0.999;
            assert!(p0_eval(t).unwrap() >= 1.0 - 1e-12);
        }
        for &t in &[0.1, 0.2, 0.55, 0.8, 0.93] {
            let h = 1e-7;
            let fd = (p0_eval(t + h).unwrap() - p0_eval(t - h).unwrap()) / (2.0 * h);
            let d = p0_derivative(t).unwrap();
            assert!((fd - d).abs() <= 1e-5 * d.abs().max(1.0), "t = {t}: {fd} vs {d}");
        }
    }

    #[test]
    fn monotone_piece_examples() {
        let pieces = find_monotone_pieces((2.0, 3.0), 1, None).unwrap();
        let p = pieces[0];
        assert!(p.lo < p.hi && p.hi < 1.0);
        assert!(p.range.0 <= 2.0 && p.range.1 >= 3.0);
        // the first sweep through [2, 3] falls from the maximum near u = 2.378 to 1 at u = 3π/2
        assert_eq!(p.direction, Direction::Decreasing);
        assert!((p.u_hi - 1.5 * PI).abs() < 1e-12);

        let inc = find_monotone_pieces((2.0, 3.0), 1, Some(Direction::Increasing)).unwrap()[0];
        assert_eq!(inc.direction, Direction::Increasing);
        assert!((inc.u_lo - 1.5 * PI).abs() < 1e-12);
        assert!((p0_u(inc.u_hi) - 16.96).abs() < 0.01);

        let three = find_monotone_pieces((2.0, 3.0), 3, None).unwrap();
        for w in three.windows(2) {
            assert!(w[0].hi <= w[1].lo);
        }
        for piece in &three {
            let a = p0_eval(piece.lo).unwrap();
            let b = p0_eval(piece.hi - 1e-12).unwrap();
            assert!((a.min(b) - piece.range.0).abs() < 1e-6);
        }

        assert!(find_monotone_pieces((2.0, 2.0), 1, None).is_err());
        assert!(find_monotone_pieces((0.5, 2.0), 1, None).is_err());
    }

    #[test]
    fn pieces_are_strictly_monotone() {
        for piece in PieceScanner::new().take(8) {
            let mut prev = p0_u(piece.u_lo);
            for i in 1..=400 {
                let u = piece.u_lo + (piece.u_hi - piece.u_lo) * i as f64 / 400.0;
                let cur = p0_u(u);
                match piece.direction {
                    Direction::Increasing => assert!(cur > prev),
                    Direction::Decreasing => assert!(cur < prev),
                }
                prev = cur;
            }
        }
    }

    #[test]
    fn affine_embedding_examples() {
        let map = build_embedding(&SmoothExponent::affine(), 256).unwrap();
        assert_eq!(map.pieces.len(), 1);
        let piece = &map.pieces[0];
        assert_eq!(piece.target.direction, Direction::Increasing);
        assert!(map.max_residual <= 1e-10);
        for w in piece.images.windows(2) {
            assert!(w[1] > w[0]);
        }

        let one = StepFunction::constant(1.0).unwrap();
        let r = embed_isometry_check(&one, &map, &cfg()).unwrap();
        assert!(r.defect < 1e-6, "{r:?}");
        assert!(r.weighted_defect < 1e-6, "{r:?}");

        let zero = StepFunction::constant(0.0).unwrap();
        let r = embed_isometry_check(&zero, &map, &cfg()).unwrap();
        assert!(r.source_norm < 1e-12 && r.target_norm < 1e-12);

        let half = StepFunction::indicator(0.0, 0.5, 1.0).unwrap();
        let r = embed_isometry_check(&half, &map, &cfg()).unwrap();
        assert!(r.defect < 1e-6, "{r:?}");
    }

    #[test]
    fn defect_shrinks_under_refinement() {
        let one = StepFunction::constant(1.0).unwrap();
        let defects: Vec<f64> = [64, 256, 1024]
            .iter()
            .map(|&n| {
                embed_isometry_check(&one, &build_embedding(&SmoothExponent::affine(), n).unwrap(), &cfg())
                    .unwrap()
                    .defect
            })
            .collect();
        assert!(defects[1] < defects[0] / 4.0 && defects[2] < defects[1] / 4.0, "{defects:?}");
    }

    #[test]
    fn sine_embedding_is_multi_piece() {
        let source = SmoothExponent::sine();
        let one = StepFunction::constant(1.0).unwrap();
        let mut prev = f64::INFINITY;
        for n in [128, 512, 2048] {
            let map = build_embedding(&source, n).unwrap();
            assert_eq!(map.pieces.len(), 2);
            assert!((map.pieces[0].source.1 - PI / 6.0).abs() < 1e-12);
            assert!(map.pieces[0].target.hi <= map.pieces[1].target.lo);
            assert_eq!(map.pieces[1].target.direction, Direction::Decreasing);
            assert!(map.max_residual <= 1e-10);
            let r = embed_isometry_check(&one, &map, &cfg()).unwrap();
            assert!(r.defect < prev && r.weighted_defect < 1e-3, "{r:?}");
            prev = r.defect;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn constant_and_out_of_range_sources_are_rejected() {
        let flat = SmoothExponent::new("flat", |_| 2.0, |_| 0.0, (0.0, 1.0)).unwrap();
        assert!(matches!(build_embedding(&flat, 64).unwrap_err(), Error::NotPiecewiseMonotone(_)));
        let low = SmoothExponent::new("low", |t| 0.5 + t, |_| 1.0, (0.0, 1.0)).unwrap();
        assert!(build_embedding(&low, 64).is_err());
        assert!(SmoothExponent::new("bad", |t| t, |_| 1.0, (0.5, 0.2)).is_err());
    }

    #[test]
    fn support_outside_pieces_is_rejected() {
        let part = SmoothExponent::new("part", |t| 2.0 + t, |_| 1.0, (0.0, 0.5)).unwrap();
        let map = build_embedding(&part, 64).unwrap();
        let one = StepFunction::constant(1.0).unwrap();
        assert!(embed_isometry_check(&one, &map, &cfg()).is_err());
        let inside = StepFunction::indicator(0.0, 0.5, 1.0).unwrap();
        let r = embed_isometry_check(&inside, &map, &cfg()).unwrap();
        assert!(r.defect < 1e-4, "{r:?}");
    }
}
