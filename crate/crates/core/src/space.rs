//! Finite metric measure spaces.
//!
//! A space is a finite list of points with either ambient coordinates and a
//! Minkowski metric, or an explicit distance matrix, plus a strictly positive
//! weight per point. Everything is immutable after [`build_space`] validates it.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Spaces at or below this size get an exhaustive triangle check.
pub const FULL_VALIDATION_LIMIT: usize = 500;
/// Number of sampled triples above [`FULL_VALIDATION_LIMIT`].
pub const SAMPLED_TRIPLES: usize = 1_000_000;
/// Seed of the triple sampler, recorded in every [`ValidationReport`].
pub const VALIDATION_SEED: u64 = 0x5eed_7121;

/// Relative slack on the triangle inequality, absorbing rounding in computed distances.
const TRIANGLE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    /// ℓ_q distance on coordinates, `q ∈ [1, ∞]` (`f64::INFINITY` for ℓ∞).
    Minkowski(f64),
    /// Explicit symmetric distance matrix, row-major.
    Matrix(Vec<Vec<f64>>),
}

impl Metric {
    pub fn l1() -> Self {
        Metric::Minkowski(1.0)
    }

    pub fn l2() -> Self {
        Metric::Minkowski(2.0)
    }

    pub fn linf() -> Self {
        Metric::Minkowski(f64::INFINITY)
    }

    pub fn label(&self) -> String {
        match self {
            Metric::Minkowski(q) if *q == 1.0 => "l1".into(),
            Metric::Minkowski(q) if *q == 2.0 => "l2".into(),
            Metric::Minkowski(q) if q.is_infinite() => "linf".into(),
            Metric::Minkowski(q) => format!("minkowski({q})"),
            Metric::Matrix(_) => "matrix".into(),
        }
    }
}

/// ℓ_q distance between two coordinate vectors of equal length.
pub fn minkowski_distance(a: &[f64], b: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    } else if q == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else if q == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs().powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    Full,
    Sampled,
}

/// Outcome of the metric-axiom check performed at construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub metric: String,
    pub mode: ValidationMode,
    pub triples_checked: usize,
    /// Present only for sampled validation.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct MetricMeasureSpace {
    coords: Option<Vec<Vec<f64>>>,
    metric: Metric,
    measure: Vec<f64>,
    report: ValidationReport,
}

/// Build and validate a space.
///
/// For [`Metric::Minkowski`] the points come from `coords`. For
/// [`Metric::Matrix`] the size comes from the matrix and `coords` must be empty.
pub fn build_space(
    coords: Vec<Vec<f64>>,
    metric: Metric,
    measure: Vec<f64>,
) -> Result<MetricMeasureSpace> {
    let n = match &metric {
        Metric::Minkowski(q) => {
            if !(*q >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "Minkowski exponent must be >= 1, got {q}"
                )));
            }
            coords.len()
        }
        Metric::Matrix(rows) => {
            if !coords.is_empty() {
                return Err(Error::InvalidParameter(
                    "explicit-matrix spaces take no coordinates".into(),
                ));
            }
            rows.len()
        }
    };
    if n == 0 {
        return Err(Error::EmptySet);
    }
    if measure.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: measure.len(),
        });
    }
    for (index, &value) in measure.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveMeasure { index, value });
        }
    }

    let coords = match &metric {
        Metric::Minkowski(_) => {
            let dim = coords[0].len();
            for c in &coords {
                if c.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: c.len(),
                    });
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite coordinate".into()));
                }
            }
            Some(coords)
        }
        Metric::Matrix(rows) => {
            for row in rows {
                if row.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: row.len(),
                    });
                }
            }
            None
        }
    };

    let mut space = MetricMeasureSpace {
        coords,
        report: ValidationReport {
            n,
            metric: metric.label(),
            mode: ValidationMode::Full,
            triples_checked: 0,
            seed: None,
        },
        metric,
        measure,
    };
    space.validate()?;
    Ok(space)
}

fn violation(i: usize, j: usize, k: usize, reason: impl Into<String>) -> Error {
    Error::MetricViolation {
        i,
        j,
        k,
        reason: reason.into(),
    }
}

fn triangle_holds(dik: f64, dij: f64, djk: f64) -> bool {
    let bound = dij + djk;
    dik <= bound + TRIANGLE_RTOL * bound
}

impl MetricMeasureSpace {
    fn validate(&mut self) -> Result<()> {
        let n = self.len();
        if let Metric::Matrix(rows) = &self.metric {
            for i in 0..n {
                for j in 0..n {
                    let d = rows[i][j];
                    if !d.is_finite() {
                        return Err(violation(i, j, j, "non-finite distance"));
                    }
                    if i == j && d != 0.0 {
                        return Err(violation(i, i, i, "nonzero self-distance"));
                    }
                    if i != j && !(d > 0.0) {
                        return Err(violation(i, j, j, "non-positive distance between distinct points"));
                    }
                    if d != rows[j][i] {
                        return Err(violation(i, j, j, "asymmetric distance"));
                    }
                }
            }
        } else {
            // Minkowski on finite coordinates is symmetric by construction;
            // separation reduces to distinct coordinates.
            let coords = self.coords.as_ref().expect("coordinate space");
            let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(n);
            for (i, c) in coords.iter().enumerate() {
                // +0.0 and -0.0 are the same point.
                let key: Vec<u64> = c.iter().map(|v| (v + 0.0).to_bits()).collect();
                if let Some(&j) = seen.get(&key) {
                    return Err(violation(j, i, i, "duplicate point (zero distance)"));
                }
                seen.insert(key, i);
            }
        }

        if n <= FULL_VALIDATION_LIMIT {
            let dist: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| self.d(i, j)).collect())
                .collect();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if !triangle_holds(dist[i][k], dist[i][j], dist[j][k]) {
                            return Err(violation(i, j, k, "triangle inequality"));
                        }
                    }
                }
            }
            self.report.mode = ValidationMode::Full;
            self.report.triples_checked = n * n * n;
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
            for _ in 0..SAMPLED_TRIPLES {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                let k = rng.gen_range(0..n);
                if !triangle_holds(self.d(i, k), self.d(i, j), self.d(j, k)) {
                    return Err(violation(i, j, k, "triangle inequality"));
                }
            }
            self.report.mode = ValidationMode::Sampled;
            self.report.triples_checked = SAMPLED_TRIPLES;
            self.report.seed = Some(VALIDATION_SEED);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn coord(&self, i: usize) -> Option<&[f64]> {
        self.coords.as_ref().map(|c| c[i].as_slice())
    }

    pub fn validation_report(&self) -> &ValidationReport {
        &self.report
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        match &self.metric {
            Metric::Matrix(rows) => rows[i][j],
            Metric::Minkowski(q) => {
                let c = self.coords.as_ref().expect("coordinate space");
                minkowski_distance(&c[i], &c[j], *q)
            }
        }
    }

    /// `B(center, r)`; always contains `center`.
    ///
    /// Panics if `r` is not positive.
    pub fn ball(&self, center: usize, r: f64, openness: Openness) -> PointSet {
        assert!(r > 0.0, "ball radius must be positive, got {r}");
        let indices = (0..self.len())
            .filter(|&y| {
                let d = self.d(center, y);
                match openness {
                    Openness::Open => d < r,
                    Openness::Closed => d <= r,
                }
            })
            .collect();
        PointSet {
            indices,
            role: SetRole::Ball,
        }
    }

    pub fn distance_to_set(&self, x: usize, set: &PointSet) -> Result<f64> {
        set.indices
            .iter()
            .map(|&a| self.d(x, a))
            .reduce(f64::min)
            .ok_or(Error::EmptySet)
    }

    /// μ(S), summed in index order.
    pub fn measure_of(&self, set: &PointSet) -> f64 {
        crate::sum::kahan_sum(set.indices.iter().map(|&i| self.measure[i]))
    }

    pub fn total_measure(&self) -> f64 {
        crate::sum::kahan_sum(self.measure.iter().copied())
    }

    pub fn all_points(&self, role: SetRole) -> PointSet {
        PointSet {
            indices: (0..self.len()).collect(),
            role,
        }
    }

    /// For every point, the other points within closed distance `delta`, sorted by index.
    ///
    /// Coordinate spaces of dimension at most 3 are bucketed on a grid of cell
    /// size `delta`; any Minkowski distance dominates the ℓ∞ distance, so the
    /// 3^dim surrounding cells contain every candidate.
    pub fn neighbors_within(&self, delta: f64) -> Vec<Vec<(usize, f64)>> {
        assert!(delta > 0.0, "neighborhood radius must be positive");
        let n = self.len();
        let bucketed = match &self.coords {
            Some(c) if n > 64 && (1..=3).contains(&c[0].len()) => Some(c),
            _ => None,
        };
        match bucketed {
            None => (0..n)
                .into_par_iter()
                .map(|u| {
                    (0..n)
                        .filter(|&v| v != u)
                        .filter_map(|v| {
                            let d = self.d(u, v);
                            (d <= delta).then_some((v, d))
                        })
                        .collect()
                })
                .collect(),
            Some(coords) => {
                let dim = coords[0].len();
                let cell = |c: &[f64]| -> Vec<i64> {
                    c.iter().map(|v| (v / delta).floor() as i64).collect()
                };
                let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
                for (i, c) in coords.iter().enumerate() {
                    grid.entry(cell(c)).or_default().push(i);
                }
                let offsets: Vec<Vec<i64>> = (0..3usize.pow(dim as u32))
                    .map(|mut code| {
                        (0..dim)
                            .map(|_| {
                                let o = (code % 3) as i64 - 1;
                                code /= 3;
                                o
                            })
                            .collect()
                    })
                    .collect();
                (0..n)
                    .into_par_iter()
                    .map(|u| {
                        let base = cell(&coords[u]);
                        let mut out: Vec<(usize, f64)> = Vec::new();
                        for off in &offsets {
                            let key: Vec<i64> = base.iter().zip(off).map(|(b, o)| b + o).collect();
                            if let Some(bucket) = grid.get(&key) {
                                for &v in bucket {
                                    if v == u {
                                        continue;
                                    }
                                    let d = self.d(u, v);
                                    if d <= delta {
                                        out.push((v, d));
                                    }
                                }
                            }
                        }
                        out.sort_unstable_by_key(|&(v, _)| v);
                        out
                    })
                    .collect()
            }
        }
    }

    /// Smallest distance between distinct points (`None` for a singleton).
    pub fn min_positive_distance(&self) -> Option<f64> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.d(i, j))
            .reduce(f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Openness {
    #[default]
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetRole {
    /// Start set of admissible paths.
    A,
    /// Level `n` of a compact nest.
    Compact(usize),
    Ball,
    Support,
}

/// Sorted, duplicate-free set of point indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    indices: Vec<usize>,
    role: SetRole,
}

impl PointSet {
    /// Sorts and deduplicates `indices`; fails on an index outside `0..n`.
    pub fn new(mut indices: Vec<usize>, role: SetRole, n: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&index) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index, n });
        }
        Ok(PointSet { indices, role })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn role(&self) -> SetRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &PointSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    /// Membership mask of length `n`.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }
}

/// Nondecreasing sequence of nonempty sets K₁ ⊆ K₂ ⊆ ….
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactNest {
    levels: Vec<PointSet>,
}

impl CompactNest {
    pub fn new(levels: Vec<PointSet>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptyCompact { level: 1 });
        }
        for (k, level) in levels.iter().enumerate() {
            if level.is_empty() {
                return Err(Error::EmptyCompact { level: k + 1 });
            }
            if k > 0 && !levels[k - 1].is_subset_of(level) {
                return Err(Error::NonIncreasingNest { level: k + 1 });
            }
        }
        let levels = levels
            .into_iter()
            .enumerate()
            .map(|(k, s)| PointSet {
                indices: s.indices,
                role: SetRole::Compact(k + 1),
            })
            .collect();
        Ok(CompactNest { levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `K_k`, one-based.
    pub fn level(&self, k: usize) -> Result<&PointSet> {
        k.checked_sub(1)
            .and_then(|i| self.levels.get(i))
            .ok_or(Error::EmptyCompact { level: k })
    }

    pub fn levels(&self) -> &[PointSet] {
        &self.levels
    }
}

/// Uniform grid helper: `n` points `(i + 0.5)/n` on the unit interval with weights `1/n`.
pub fn unit_interval(n: usize) -> Result<MetricMeasureSpace> {
    let coords = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect();
    build_space(coords, Metric::l2(), vec![1.0 / n as f64; n])
}

/// `m × m` cell-centre grid of the unit square, point `i*m + j` at
/// `((i+0.5)/m, (j+0.5)/m)`, weights `1/m²`.
pub fn unit_square_grid(m: usize, metric: Metric) -> Result<MetricMeasureSpace> {
    let h = 1.0 / m as f64;
    let coords = (0..m)
        .flat_map(|i| (0..m).map(move |j| vec![(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]))
        .collect();
    build_space(coords, metric, vec![h * h; m * m])
}

pub(crate) fn check_index(index: usize, n: usize) -> Result<()> {
    if index < n {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index, n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> MetricMeasureSpace {
        build_space(
            xs.iter().map(|&x| vec![x]).collect(),
            Metric::l2(),
            vec![1.0; xs.len()],
        )
        .unwrap()
    }

    #[test]
    fn two_point_line() {
        let s = line(&[0.0, 1.0]);
        assert_eq!(s.d(0, 1), 1.0);
        assert_eq!(s.validation_report().mode, ValidationMode::Full);
    }

    #[test]
    fn l1_triangle_corner() {
        let s = build_space(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            Metric::l1(),
            vec![1.0; 3],
        )
        .unwrap();
        assert_eq!(s.d(1, 2), 2.0);
    }

    #[test]
    fn matrix_triangle_violation_reported() {
        let m = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        match build_space(vec![], Metric::Matrix(m), vec![1.0; 3]) {
            Err(Error::MetricViolation { i, k, .. }) => {
                assert_eq!((i.min(k), i.max(k)), (0, 2));
            }
            other => panic!("expected MetricViolation, got {other:?}"),
        }
    }

    #[test]
    fn bad_measure_and_dimensions() {
        assert!(matches!(
            build_space(vec![vec![0.0], vec![1.0]], Metric::l2(), vec![1.0, 0.0]),
            Err(Error::NonPositiveMeasure { index: 1, .. })
        ));
        assert!(matches!(
            build_space(vec![vec![0.0], vec![1.0, 2.0]], Metric::l2(), vec![1.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            build_space(vec![vec![0.0], vec![0.0]], Metric::l2(), vec![1.0, 1.0]),
            Err(Error::MetricViolation { .. })
        ));
        assert!(matches!(
            build_space(
                vec![],
                Metric::Matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]]),
                vec![1.0, 1.0]
            ),
            Err(Error::MetricViolation { .. })
        ));
    }

    #[test]
    fn balls_on_unit_line() {
        let s = line(&[0.0, 1.0, 2.0]);
        assert_eq!(s.ball(1, 1.0, Openness::Open).indices(), &[1]);
        assert_eq!(s.ball(1, 1.0, Openness::Closed).indices(), &[0, 1, 2]);
        assert_eq!(s.ball(0, 1.5, Openness::Open).indices(), &[0, 1]);
    }

    #[test]
    fn distance_to_sets() {
        let s = line(&[0.0, 0.4, 0.8]);
        let zero = PointSet::new(vec![0], SetRole::A, 3).unwrap();
        assert_eq!(s.distance_to_set(0, &zero).unwrap(), 0.0);
        assert_eq!(s.distance_to_set(2, &zero).unwrap(), 0.8);
        let all = s.all_points(SetRole::Support);
        assert!((0..3).all(|x| s.distance_to_set(x, &all).unwrap() == 0.0));
        let empty = PointSet::new(vec![], SetRole::A, 3).unwrap();
        assert!(matches!(s.distance_to_set(0, &empty), Err(Error::EmptySet)));
    }

    #[test]
    fn point_set_normalizes_and_checks_range() {
        let s = PointSet::new(vec![3, 1, 3], SetRole::A, 4).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        assert!(PointSet::new(vec![4], SetRole::A, 4).is_err());
    }

    #[test]
    fn nest_must_increase() {
        let a = PointSet::new(vec![0], SetRole::Support, 3).unwrap();
        let b = PointSet::new(vec![1], SetRole::Support, 3).unwrap();
        assert!(matches!(
            CompactNest::new(vec![a.clone(), b]),
            Err(Error::NonIncreasingNest { level: 2 })
        ));
        let ab = PointSet::new(vec![0, 1], SetRole::Support, 3).unwrap();
        let nest = CompactNest::new(vec![a, ab]).unwrap();
        assert_eq!(nest.level(2).unwrap().role(), SetRole::Compact(2));
        assert!(nest.level(0).is_err());
    }

    #[test]
    fn large_space_uses_sampled_validation() {
        let s = unit_interval(600).unwrap();
        let r = s.validation_report();
        assert_eq!(r.mode, ValidationMode::Sampled);
        assert_eq!(r.seed, Some(VALIDATION_SEED));
        assert_eq!(r.triples_checked, SAMPLED_TRIPLES);
    }

    #[test]
    fn bucketed_neighbors_match_full_scan() {
        let s = unit_square_grid(12, Metric::l2()).unwrap();
        let delta = 0.19;
        let fast = s.neighbors_within(delta);
        for u in 0..s.len() {
            let slow: Vec<(usize, f64)> = (0..s.len())
                .filter(|&v| v != u && s.d(u, v) <= delta)
                .map(|v| (v, s.d(u, v)))
                .collect();
            assert_eq!(fast[u], slow);
        }
    }
}
