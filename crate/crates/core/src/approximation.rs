//! The approximating function f̃ with data `(f, g, A, M, δ)`.
//!
//! f̃(x) is the cheapest way to reach `x` from the start set `A` by steps of
//! length at most δ, where starting at `a` costs `f(a)` and a step `u → v`
//! costs `g(u)·d(u, v)`, capped at `M`. All step costs are nonnegative, so a
//! multi-source label-setting pass computes the minimum exactly. Floating-point
//! addition is monotone, which keeps the label-setting value identical to the
//! minimum over explicitly enumerated paths summed in path order; the
//! brute-force oracle in this module relies on that.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::analysis::discrete_gradient;
use crate::error::{Error, Result};
use crate::fields::{cutoff_psi, lp_norm, sign_split, truncate, Exponent, ScalarField};
use crate::paths::{riemann_sum, DiscretePath};
use crate::space::{MetricMeasureSpace, Openness, PointSet};

/// Absolute tolerance of the property checks.
pub const PROPERTY_TOL: f64 = 1e-9;

/// Largest space accepted by [`brute_force_f_tilde`].
pub const BRUTE_FORCE_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationData {
    /// Values in `[0, M]`.
    pub f: ScalarField,
    /// Nonnegative.
    pub g: ScalarField,
    pub start_set: PointSet,
    pub cap: f64,
    pub delta: f64,
}

impl ApproximationData {
    pub fn validate(&self, space: &MetricMeasureSpace) -> Result<()> {
        self.f.check_len(space)?;
        self.g.check_len(space)?;
        if !(self.cap > 0.0 && self.cap.is_finite()) {
            return Err(Error::InvalidParameter(format!("M must be positive, got {}", self.cap)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.start_set.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Some(&index) = self.start_set.indices().iter().find(|&&i| i >= space.len()) {
            return Err(Error::IndexOutOfRange {
                index,
                n: space.len(),
            });
        }
        for (index, &v) in self.f.values.iter().enumerate() {
            if !(0.0..=self.cap).contains(&v) {
                return Err(Error::InvalidData {
                    index,
                    reason: format!("f = {v} outside [0, {}]", self.cap),
                });
            }
        }
        for (index, &v) in self.g.values.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidData {
                    index,
                    reason: format!("g = {v} must be finite and nonnegative"),
                });
            }
        }
        Ok(())
    }
}

/// Directed δ-neighborhood graph; the step `u → v` costs `g(u)·d(u, v)`.
#[derive(Debug, Clone)]
pub struct NeighborhoodGraph {
    edges: Vec<Vec<(usize, f64)>>,
}

impl NeighborhoodGraph {
    pub fn build(space: &MetricMeasureSpace, g: &ScalarField, delta: f64) -> Self {
        let mut edges = space.neighbors_within(delta);
        for (u, out) in edges.iter_mut().enumerate() {
            for (_, w) in out.iter_mut() {
                *w *= g.values[u];
            }
        }
        NeighborhoodGraph { edges }
    }

    pub fn out_edges(&self, u: usize) -> &[(usize, f64)] {
        &self.edges[u]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }
}

/// Negative control for the property suite. `Negated` subtracts step costs
/// instead of adding them, which breaks the construction on purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostMode {
    #[default]
    Faithful,
    Negated,
}

#[derive(Copy, Clone, PartialEq)]
struct Label {
    cost: f64,
    node: usize,
}

impl Eq for Label {}

impl Ord for Label {
    // BinaryHeap is a max-heap; smallest (cost, node) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Compute f̃ exactly.
pub fn approximate(space: &MetricMeasureSpace, data: &ApproximationData) -> Result<ScalarField> {
    approximate_with(space, data, CostMode::Faithful)
}

pub fn approximate_with(
    space: &MetricMeasureSpace,
    data: &ApproximationData,
    mode: CostMode,
) -> Result<ScalarField> {
    data.validate(space)?;
    let graph = NeighborhoodGraph::build(space, &data.g, data.delta);
    Ok(approximate_on_graph(&graph, data, mode))
}

/// Label-setting pass over a prebuilt graph; `data` is assumed valid.
pub fn approximate_on_graph(
    graph: &NeighborhoodGraph,
    data: &ApproximationData,
    mode: CostMode,
) -> ScalarField {
    let n = graph.edges.len();
    let mut labels = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &a in data.start_set.indices() {
        let cost = data.f.values[a];
        if cost < labels[a] {
            labels[a] = cost;
            heap.push(Label { cost, node: a });
        }
    }
    while let Some(Label { cost, node }) = heap.pop() {
        if settled[node] || cost > labels[node] {
            continue;
        }
        settled[node] = true;
        for &(next, w) in graph.out_edges(node) {
            if settled[next] {
                continue;
            }
            let candidate = match mode {
                CostMode::Faithful => cost + w,
                CostMode::Negated => cost - w,
            };
            if candidate < labels[next] {
                labels[next] = candidate;
                heap.push(Label {
                    cost: candidate,
                    node: next,
                });
            }
        }
    }
    let cap = data.cap;
    ScalarField::new(
        "f_tilde",
        labels.into_iter().map(|l| cap.min(l)).collect(),
    )
}

/// Exact f̃ by enumerating every simple admissible path with at most
/// `max_len` vertices. Independent of [`approximate`]: no graph, no heap.
pub fn brute_force_f_tilde(
    space: &MetricMeasureSpace,
    data: &ApproximationData,
    max_len: usize,
) -> Result<ScalarField> {
    let n = space.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { n });
    }
    if max_len < n {
        return Err(Error::InvalidParameter(format!(
            "max_len {max_len} must be at least the number of points {n}"
        )));
    }
    data.validate(space)?;

    struct Search<'a> {
        space: &'a MetricMeasureSpace,
        data: &'a ApproximationData,
        max_len: usize,
        best: Vec<f64>,
        on_path: Vec<bool>,
    }

    impl Search<'_> {
        fn extend(&mut self, at: usize, cost: f64, vertices: usize) {
            if cost < self.best[at] {
                self.best[at] = cost;
            }
            if vertices == self.max_len {
                return;
            }
            for next in 0..self.space.len() {
                if self.on_path[next] {
                    continue;
                }
                let d = self.space.d(at, next);
                if d > self.data.delta {
                    continue;
                }
                self.on_path[next] = true;
                self.extend(next, cost + self.data.g.values[at] * d, vertices + 1);
                self.on_path[next] = false;
            }
        }
    }

    let mut search = Search {
        space,
        data,
        max_len,
        best: vec![f64::INFINITY; n],
        on_path: vec![false; n],
    };
    for &a in data.start_set.indices() {
        // the stationary path (a, a)
        let stay = data.f.values[a] + data.g.values[a] * space.d(a, a);
        if stay < search.best[a] {
            search.best[a] = stay;
        }
        search.on_path[a] = true;
        search.extend(a, data.f.values[a], 1);
        search.on_path[a] = false;
    }
    Ok(ScalarField::new(
        "f_tilde_brute",
        search.best.into_iter().map(|b| data.cap.min(b)).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// One nonnegative, bounded, boundedly supported sub-problem.
#[derive(Debug, Clone)]
pub struct SubProblem {
    pub sign: Sign,
    pub data: ApproximationData,
    /// g restricted to {f± > M}: gradient of the truncation remainder f± − min{f±, M}.
    pub truncation_gradient: ScalarField,
    /// 1_{X∖B(x₀,R−1)}·g + f_M·1_{B(x₀,R+1)∖B(x₀,R)}: gradient of the cutoff remainder.
    pub cutoff_gradient: ScalarField,
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub plus: SubProblem,
    pub minus: SubProblem,
    /// ψ_R used for the cutoff.
    pub cutoff: ScalarField,
}

/// Split a signed, unbounded `f` into two problems `min{f±, M}·ψ_R`.
///
/// The gradient handed to each sub-problem is the Leibniz bound
/// `g + min{f±, M}·1_{R−1 ≤ d(x₀,·) ≤ R}` for the product with the 1-Lipschitz cutoff.
#[allow(clippy::too_many_arguments)]
pub fn reduction_pipeline(
    space: &MetricMeasureSpace,
    f: &ScalarField,
    g: &ScalarField,
    x0: usize,
    radius: f64,
    cap: f64,
    start_set: &PointSet,
    delta: f64,
) -> Result<Reduction> {
    f.check_len(space)?;
    g.check_len(space)?;
    crate::space::check_index(x0, space.len())?;
    if !(radius >= 4.0) {
        return Err(Error::InvalidRadius {
            radius,
            reason: "cutoff radius must be at least 4".into(),
        });
    }
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!("M must be positive, got {cap}")));
    }
    let psi = cutoff_psi(space, x0, radius);
    let inner = space.ball(x0, radius - 1.0, Openness::Open);
    let ball = space.ball(x0, radius, Openness::Open);
    let outer = space.ball(x0, radius + 1.0, Openness::Open);

    let (plus, minus) = sign_split(f);
    let build = |part: ScalarField, sign: Sign| -> SubProblem {
        let truncated = truncate(&part, cap);
        let localized = truncated.zip_map(&psi, format!("{}_R", part.name), |v, p| v * p);
        let sub_g = ScalarField::from_fn(format!("{}_g", part.name), space.len(), |x| {
            let d = space.d(x0, x);
            let annulus = d >= radius - 1.0 && d <= radius;
            g.values[x] + if annulus { truncated.values[x] } else { 0.0 }
        });
        let truncation_gradient =
            ScalarField::from_fn("g_M", space.len(), |x| if part.values[x] > cap { g.values[x] } else { 0.0 });
        let cutoff_gradient = ScalarField::from_fn("g_R", space.len(), |x| {
            let far = if inner.contains(x) { 0.0 } else { g.values[x] };
            let shell = if outer.contains(x) && !ball.contains(x) {
                truncated.values[x]
            } else {
                0.0
            };
            far + shell
        });
        SubProblem {
            sign,
            data: ApproximationData {
                f: localized,
                g: sub_g,
                start_set: start_set.clone(),
                cap,
                delta,
            },
            truncation_gradient,
            cutoff_gradient,
        }
    };
    Ok(Reduction {
        plus: build(plus, Sign::Plus),
        minus: build(minus, Sign::Minus),
        cutoff: psi,
    })
}

/// `f̃₊ − f̃₋` for both sub-problems of a reduction.
pub fn approximate_signed(space: &MetricMeasureSpace, reduction: &Reduction) -> Result<ScalarField> {
    let plus = approximate(space, &reduction.plus.data)?;
    let minus = approximate(space, &reduction.minus.data)?;
    Ok(recombine(&plus, &minus))
}

pub fn recombine(plus: &ScalarField, minus: &ScalarField) -> ScalarField {
    plus.zip_map(minus, "f_tilde_signed", |a, b| a - b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    /// sup over A of |f̃_δ − f|.
    pub sup_error_on_start_set: f64,
    /// ‖f̃_δ − f‖_{Lᵖ}.
    pub lp_error: f64,
    /// Points where f̃_δ fell below the previous row's field (beyond [`PROPERTY_TOL`]).
    pub monotone_violations: usize,
}

#[derive(Debug, Clone)]
pub struct DeltaSweep {
    pub fields: Vec<ScalarField>,
    pub rows: Vec<SweepRow>,
}

/// Run [`approximate`] for each δ in a non-increasing schedule.
///
/// `gradients`, when given, supplies one g per δ (intended nondecreasing);
/// otherwise `data.g` is reused.
pub fn delta_sweep(
    space: &MetricMeasureSpace,
    data: &ApproximationData,
    deltas: &[f64],
    gradients: Option<&[ScalarField]>,
    p: Exponent,
) -> Result<DeltaSweep> {
    for (position, &d) in deltas.iter().enumerate() {
        if !(d > 0.0) || (position > 0 && d > deltas[position - 1]) {
            return Err(Error::NonMonotoneDeltas { position });
        }
    }
    if let Some(gs) = gradients {
        if gs.len() != deltas.len() {
            return Err(Error::DimensionMismatch {
                expected: deltas.len(),
                got: gs.len(),
            });
        }
    }
    let mut fields: Vec<ScalarField> = Vec::with_capacity(deltas.len());
    let mut rows = Vec::with_capacity(deltas.len());
    for (k, &delta) in deltas.iter().enumerate() {
        let step = ApproximationData {
            g: gradients.map_or_else(|| data.g.clone(), |gs| gs[k].clone()),
            delta,
            ..data.clone()
        };
        let field = approximate(space, &step)?;
        let sup_error_on_start_set = data
            .start_set
            .indices()
            .iter()
            .map(|&a| (field.values[a] - data.f.values[a]).abs())
            .fold(0.0, f64::max);
        let lp_error = lp_norm(space, &field.sub(&data.f), p);
        let monotone_violations = fields.last().map_or(0, |prev: &ScalarField| {
            field
                .values
                .iter()
                .zip(&prev.values)
                .filter(|(now, before)| **now < **before - PROPERTY_TOL)
                .count()
        });
        rows.push(SweepRow {
            delta,
            sup_error_on_start_set,
            lp_error,
            monotone_violations,
        });
        fields.push(field);
    }
    Ok(DeltaSweep { fields, rows })
}

/// Which item of the property suite a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    /// 0 ≤ f̃ ≤ M.
    Range,
    /// f̃ ≤ f on A.
    BelowDataOnStartSet,
    /// f̃ = 0 where x ∈ A and f(x) = 0.
    ZeroPreserved,
    /// |f̃(x) − f̃(y)| ≤ max{g(x), g(y)}·d(x,y) when d(x,y) ≤ δ.
    LocalLipschitz,
    /// Scale-δ discrete gradient of f̃ ≤ max of g over the closed δ-ball.
    ScaleGradient,
    /// f̃ is max{M/δ, sup g}-Lipschitz.
    GlobalLipschitz,
    /// f̃(end) ≤ f(start) + Σ g(pₖ)·d(pₖ,pₖ₊₁) along sampled admissible paths.
    UpperGradient,
}

impl Property {
    pub const ALL: [Property; 7] = [
        Property::Range,
        Property::BelowDataOnStartSet,
        Property::ZeroPreserved,
        Property::LocalLipschitz,
        Property::ScaleGradient,
        Property::GlobalLipschitz,
        Property::UpperGradient,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Property::Range => "A_range",
            Property::BelowDataOnStartSet => "B_below_f_on_A",
            Property::ZeroPreserved => "C_zero_on_A",
            Property::LocalLipschitz => "D_local_lipschitz",
            Property::ScaleGradient => "E_scale_gradient",
            Property::GlobalLipschitz => "F_global_lipschitz",
            Property::UpperGradient => "upper_gradient_paths",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PropertyTally {
    pub checked: usize,
    pub violations: usize,
}

/// Per-property check counts for one or more instances.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PropertyReport {
    tallies: [PropertyTally; 7],
}

impl PropertyReport {
    fn record(&mut self, p: Property, ok: bool) {
        let t = &mut self.tallies[p as usize];
        t.checked += 1;
        if !ok {
            t.violations += 1;
        }
    }

    pub fn tally(&self, p: Property) -> PropertyTally {
        self.tallies[p as usize]
    }

    pub fn merge(&mut self, other: &PropertyReport) {
        for (a, b) in self.tallies.iter_mut().zip(&other.tallies) {
            a.checked += b.checked;
            a.violations += b.violations;
        }
    }

    pub fn all_pass(&self) -> bool {
        self.tallies.iter().all(|t| t.violations == 0)
    }
}

/// Check the full property suite of `f_tilde` against its data. `path_samples`
/// random admissible paths are drawn for the upper-gradient check.
pub fn verify_properties<R: Rng>(
    space: &MetricMeasureSpace,
    data: &ApproximationData,
    f_tilde: &ScalarField,
    path_samples: usize,
    rng: &mut R,
) -> PropertyReport {
    let tol = PROPERTY_TOL;
    let n = space.len();
    let mut report = PropertyReport::default();
    let ft = &f_tilde.values;
    let g = &data.g.values;

    for &v in ft {
        report.record(Property::Range, v >= -tol && v <= data.cap + tol);
    }
    for &a in data.start_set.indices() {
        report.record(Property::BelowDataOnStartSet, ft[a] <= data.f.values[a] + tol);
        if data.f.values[a] == 0.0 {
            report.record(Property::ZeroPreserved, ft[a].abs() <= tol);
        }
    }
    let global = (data.cap / data.delta).max(data.g.max());
    for x in 0..n {
        for y in x + 1..n {
            let d = space.d(x, y);
            let diff = (ft[x] - ft[y]).abs();
            if d <= data.delta {
                report.record(Property::LocalLipschitz, diff <= g[x].max(g[y]) * d + tol);
            }
            report.record(Property::GlobalLipschitz, diff <= global * d + tol);
        }
    }
    let grad = discrete_gradient(space, f_tilde, data.delta);
    for x in 0..n {
        let ball = space.ball(x, data.delta, Openness::Closed);
        let g_max = ball.indices().iter().map(|&y| g[y]).fold(0.0, f64::max);
        report.record(Property::ScaleGradient, grad.values[x] <= g_max + tol);
    }

    let neighbors = space.neighbors_within(data.delta);
    let starts = data.start_set.indices();
    for _ in 0..path_samples {
        let mut walk = vec![starts[rng.gen_range(0..starts.len())]];
        let steps = rng.gen_range(1..=n.max(2));
        for _ in 0..steps {
            let at = *walk.last().expect("nonempty walk");
            let options = &neighbors[at];
            // stay put when isolated or on a coin flip
            if options.is_empty() || rng.gen_bool(0.1) {
                walk.push(at);
            } else {
                walk.push(options[rng.gen_range(0..options.len())].0);
            }
        }
        let path = DiscretePath::new(space, walk).expect("walk has at least two entries");
        let bound = data.f.values[path.first()] + riemann_sum(space, &path, &data.g);
        report.record(Property::UpperGradient, ft[path.last()] <= bound + tol);
    }
    report
}
