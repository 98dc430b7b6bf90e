//! Discrete paths and their geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::space::{minkowski_distance, Metric, MetricMeasureSpace, PointSet};
use crate::sum::Kahan;

/// `(p₀, …, pₙ)` with `n ≥ 1`; entries may repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscretePath {
    indices: Vec<usize>,
}

impl DiscretePath {
    pub fn new(space: &MetricMeasureSpace, indices: Vec<usize>) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "a path needs at least two entries, got {}",
                indices.len()
            )));
        }
        for &i in &indices {
            crate::space::check_index(i, space.len())?;
        }
        Ok(DiscretePath { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn first(&self) -> usize {
        self.indices[0]
    }

    pub fn last(&self) -> usize {
        *self.indices.last().expect("nonempty path")
    }

    /// `P ⊕ Q`.
    pub fn concat(&self, other: &DiscretePath) -> DiscretePath {
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        DiscretePath { indices }
    }

    fn steps(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Largest single step.
pub fn mesh(space: &MetricMeasureSpace, path: &DiscretePath) -> f64 {
    path.steps().map(|(a, b)| space.d(a, b)).fold(0.0, f64::max)
}

/// Sum of step lengths.
pub fn len(space: &MetricMeasureSpace, path: &DiscretePath) -> f64 {
    let mut acc = Kahan::default();
    for (a, b) in path.steps() {
        acc.add(space.d(a, b));
    }
    acc.value()
}

/// Largest distance between any two entries.
pub fn diam(space: &MetricMeasureSpace, path: &DiscretePath) -> f64 {
    let ix = path.indices();
    let mut best = 0.0f64;
    for (k, &a) in ix.iter().enumerate() {
        for &b in &ix[k + 1..] {
            best = best.max(space.d(a, b));
        }
    }
    best
}

/// Mesh ≤ δ, p₀ ∈ A and pₙ = x.
pub fn is_admissible(
    space: &MetricMeasureSpace,
    path: &DiscretePath,
    delta: f64,
    start_set: &PointSet,
    x: usize,
) -> bool {
    mesh(space, path) <= delta && start_set.contains(path.first()) && path.last() == x
}

/// Left-endpoint sum Σ g(pₖ)·d(pₖ, pₖ₊₁).
pub fn riemann_sum(space: &MetricMeasureSpace, path: &DiscretePath, g: &ScalarField) -> f64 {
    let mut acc = Kahan::default();
    for (a, b) in path.steps() {
        acc.add(g.values[a] * space.d(a, b));
    }
    acc.value()
}

/// Piecewise-linear interpolant of a path in ambient coordinates, on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedCurve {
    times: Vec<f64>,
    anchors: Vec<Vec<f64>>,
    length: f64,
    q: f64,
}

impl InterpolatedCurve {
    /// Interpolating times `T_P`; all zero when the path has zero length.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `γ_P(t)`; `t` is clamped to `[0, 1]`.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, 1.0);
        if self.length == 0.0 {
            return self.anchors[0].clone();
        }
        // first segment whose end time reaches t
        let k = match self.times[1..].iter().position(|&tk1| t <= tk1) {
            Some(k) => k,
            None => self.times.len() - 2,
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        if t1 == t0 {
            return self.anchors[k].clone();
        }
        let s = (t - t0) / (t1 - t0);
        self.anchors[k]
            .iter()
            .zip(&self.anchors[k + 1])
            .map(|(a, b)| (1.0 - s) * a + s * b)
            .collect()
    }

    /// Distance from `γ_P(t)` to the nearest anchor in the ambient metric.
    pub fn anchor_gap(&self, t: f64) -> f64 {
        let y = self.evaluate(t);
        self.anchors
            .iter()
            .map(|a| minkowski_distance(a, &y, self.q))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn interpolate(space: &MetricMeasureSpace, path: &DiscretePath) -> Result<InterpolatedCurve> {
    let q = match space.metric() {
        Metric::Minkowski(q) => *q,
        Metric::Matrix(_) => return Err(Error::NoCoordinates),
    };
    let coords = space.coords().ok_or(Error::NoCoordinates)?;
    let anchors: Vec<Vec<f64>> = path.indices().iter().map(|&i| coords[i].clone()).collect();
    let length = len(space, path);
    let mut times = Vec::with_capacity(anchors.len());
    times.push(0.0);
    let mut acc = Kahan::default();
    for (a, b) in path.steps() {
        acc.add(space.d(a, b));
        times.push(if length > 0.0 { acc.value() / length } else { 0.0 });
    }
    if length > 0.0 {
        *times.last_mut().expect("nonempty") = 1.0;
    }
    Ok(InterpolatedCurve {
        times,
        anchors,
        length,
        q,
    })
}

/// Analytic curves on `[0, 1]` in the Euclidean plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CurveSpec {
    Segment { from: [f64; 2], to: [f64; 2] },
    /// `revolutions` full turns around `center`.
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "one")]
        revolutions: f64,
    },
    /// Graph of `amplitude·sin(frequency·s)` for `s ∈ [0, 1]`.
    Sine { amplitude: f64, frequency: f64 },
}

fn one() -> f64 {
    1.0
}

impl CurveSpec {
    pub fn point(&self, t: f64) -> [f64; 2] {
        match *self {
            CurveSpec::Segment { from, to } => [
                from[0] + t * (to[0] - from[0]),
                from[1] + t * (to[1] - from[1]),
            ],
            CurveSpec::Circle {
                center,
                radius,
                revolutions,
            } => {
                let a = std::f64::consts::TAU * revolutions * t;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
            CurveSpec::Sine {
                amplitude,
                frequency,
            } => [t, amplitude * (frequency * t).sin()],
        }
    }

    /// Euclidean speed |γ′(t)|.
    pub fn speed(&self, t: f64) -> f64 {
        match *self {
            CurveSpec::Segment { from, to } => (to[0] - from[0]).hypot(to[1] - from[1]),
            CurveSpec::Circle {
                radius,
                revolutions,
                ..
            } => std::f64::consts::TAU * revolutions.abs() * radius.abs(),
            CurveSpec::Sine {
                amplitude,
                frequency,
            } => 1f64.hypot(amplitude * frequency * (frequency * t).cos()),
        }
    }

    /// `n` samples γ(k/n), `k = 0..n` (inclusive), as coordinate vectors.
    pub fn sample(&self, n: usize) -> Vec<Vec<f64>> {
        (0..=n)
            .map(|k| self.point(k as f64 / n as f64).to_vec())
            .collect()
    }
}

/// Analytic integrands on the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlaneFunction {
    Constant { value: f64 },
    /// `a·x + b·y + c`.
    Affine { a: f64, b: f64, c: f64 },
    /// `scale·(1 + x²)`.
    OnePlusXSquared { scale: f64 },
}

impl PlaneFunction {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match *self {
            PlaneFunction::Constant { value } => value,
            PlaneFunction::Affine { a, b, c } => a * p[0] + b * p[1] + c,
            PlaneFunction::OnePlusXSquared { scale } => scale * (1.0 + p[0] * p[0]),
        }
    }
}

/// ∫_γ g ds by the composite midpoint rule on `n` parameter segments.
pub fn curve_integral(curve: &CurveSpec, g: &PlaneFunction, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "curve quadrature needs at least 2 nodes, got {n}"
        )));
    }
    let h = 1.0 / n as f64;
    let mut acc = Kahan::default();
    for k in 0..n {
        let t = (k as f64 + 0.5) * h;
        acc.add(g.eval(curve.point(t)) * curve.speed(t) * h);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, SetRole};

    fn line(xs: &[f64]) -> MetricMeasureSpace {
        build_space(
            xs.iter().map(|&x| vec![x]).collect(),
            Metric::l2(),
            vec![1.0; xs.len()],
        )
        .unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn path_needs_two_entries() {
        let s = line(&[0.0, 1.0]);
        assert!(DiscretePath::new(&s, vec![0]).is_err());
        assert!(DiscretePath::new(&s, vec![0, 2]).is_err());
    }

    #[test]
    fn geometry_examples() {
        let s = line(&[0.0, 0.4, 0.8]);
        let p = DiscretePath::new(&s, vec![1, 1]).unwrap();
        assert_eq!((mesh(&s, &p), len(&s, &p), diam(&s, &p)), (0.0, 0.0, 0.0));

        let p = DiscretePath::new(&s, vec![0, 1, 2]).unwrap();
        assert!(close(mesh(&s, &p), 0.4));
        assert!(close(len(&s, &p), 0.8));
        assert!(close(diam(&s, &p), 0.8));

        let p = DiscretePath::new(&s, vec![0, 2, 1]).unwrap();
        assert!(close(mesh(&s, &p), 0.8));
        assert!(close(len(&s, &p), 1.2));
        assert!(close(diam(&s, &p), 0.8));
    }

    #[test]
    fn admissibility() {
        let s = line(&[0.0, 0.4, 0.8]);
        let a = PointSet::new(vec![0], SetRole::A, 3).unwrap();
        let p = DiscretePath::new(&s, vec![0, 1]).unwrap();
        assert!(is_admissible(&s, &p, 0.5, &a, 1));
        let stay = DiscretePath::new(&s, vec![0, 0]).unwrap();
        assert!(is_admissible(&s, &stay, 0.01, &a, 0));
        let wrong_start = DiscretePath::new(&s, vec![1, 2]).unwrap();
        assert!(!is_admissible(&s, &wrong_start, 0.5, &a, 2));
        let long_hop = DiscretePath::new(&s, vec![0, 2]).unwrap();
        assert!(!is_admissible(&s, &long_hop, 0.5, &a, 2));
    }

    #[test]
    fn riemann_examples() {
        let s = line(&[0.0, 0.4, 0.8]);
        let p = DiscretePath::new(&s, vec![0, 1, 2]).unwrap();
        assert_eq!(riemann_sum(&s, &p, &ScalarField::zeros("g", 3)), 0.0);
        assert_eq!(
            riemann_sum(&s, &p, &ScalarField::constant("g", 3, 1.0)),
            len(&s, &p)
        );
        let g = ScalarField::new("g", vec![2.0, 3.0, 5.0]);
        assert!(close(riemann_sum(&s, &p, &g), 2.0));
    }

    #[test]
    fn interpolation_examples() {
        let s = line(&[0.0, 0.4, 0.8]);
        let p = DiscretePath::new(&s, vec![0, 1, 2]).unwrap();
        let c = interpolate(&s, &p).unwrap();
        assert!(close(c.times()[1], 0.5));
        assert_eq!(c.times()[0], 0.0);
        assert_eq!(c.times()[2], 1.0);
        assert!(close(c.evaluate(0.25)[0], 0.2));
        assert_eq!(c.evaluate(0.0), vec![0.0]);
        assert_eq!(c.evaluate(1.0), vec![0.8]);

        let still = DiscretePath::new(&s, vec![1, 1, 1]).unwrap();
        let c = interpolate(&s, &still).unwrap();
        assert_eq!(c.length(), 0.0);
        assert_eq!(c.evaluate(0.7), vec![0.4]);
    }

    #[test]
    fn matrix_spaces_do_not_interpolate() {
        let s = build_space(
            vec![],
            Metric::Matrix(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
            vec![1.0, 1.0],
        )
        .unwrap();
        let p = DiscretePath::new(&s, vec![0, 1]).unwrap();
        assert!(matches!(interpolate(&s, &p), Err(Error::NoCoordinates)));
    }

    #[test]
    fn curve_integral_examples() {
        let seg = CurveSpec::Segment {
            from: [0.0, 0.0],
            to: [1.0, 0.0],
        };
        let one = PlaneFunction::Constant { value: 1.0 };
        assert!(close(curve_integral(&seg, &one, 10).unwrap(), 1.0));
        let x = PlaneFunction::Affine { a: 1.0, b: 0.0, c: 0.0 };
        assert!(close(curve_integral(&seg, &x, 10).unwrap(), 0.5));
        let circle = CurveSpec::Circle {
            center: [0.0, 0.0],
            radius: 1.0,
            revolutions: 1.0,
        };
        let l = curve_integral(&circle, &one, 10_000).unwrap();
        assert!((l - std::f64::consts::TAU).abs() < 1e-6);
        assert!(curve_integral(&seg, &one, 1).is_err());
    }
}
