//! Scale-indexed Lipschitz constants, discrete gradients and the Poincaré checker.
//!
//! Finite spaces have no limits as r → 0, so every pointwise quantity here
//! carries its scale explicitly.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ball_average, lp_norm, Exponent, ScalarField};
use crate::space::{MetricMeasureSpace, Openness, PointSet};

/// sup over distinct pairs of `S` of |f(x) − f(y)| / d(x, y); 0 on fewer than two points.
pub fn lip_over_set(space: &MetricMeasureSpace, f: &ScalarField, set: &PointSet) -> f64 {
    let ix = set.indices();
    let mut best = 0.0f64;
    for (k, &x) in ix.iter().enumerate() {
        for &y in &ix[k + 1..] {
            best = best.max((f.values[x] - f.values[y]).abs() / space.d(x, y));
        }
    }
    best
}

/// LIP of `f` over the open ball `B(x, r)`.
pub fn lip_a_at_scale(space: &MetricMeasureSpace, f: &ScalarField, x: usize, r: f64) -> f64 {
    lip_over_set(space, f, &space.ball(x, r, Openness::Open))
}

/// Smallest ratio |f(x) − f(y)| / d(x, y) over `0 < d(x, y) < r`; 0 when none.
pub fn lip_at_scale(space: &MetricMeasureSpace, f: &ScalarField, x: usize, r: f64) -> f64 {
    assert!(r > 0.0, "scale must be positive");
    (0..space.len())
        .filter(|&y| y != x)
        .filter_map(|y| {
            let d = space.d(x, y);
            (d < r).then(|| (f.values[x] - f.values[y]).abs() / d)
        })
        .reduce(f64::min)
        .unwrap_or(0.0)
}

/// g_δ[f](x) = max over `0 < d(x, y) ≤ δ` of |f(x) − f(y)| / d(x, y).
pub fn discrete_gradient(space: &MetricMeasureSpace, f: &ScalarField, delta: f64) -> ScalarField {
    let neighbors = space.neighbors_within(delta);
    let values = neighbors
        .par_iter()
        .enumerate()
        .map(|(x, out)| {
            out.iter()
                .map(|&(y, d)| (f.values[x] - f.values[y]).abs() / d)
                .fold(0.0, f64::max)
        })
        .collect();
    ScalarField::new(format!("grad_{}", f.name), values)
}

/// ‖a − b‖_{Lᵖ}.
pub fn energy_gap(
    space: &MetricMeasureSpace,
    reference: &ScalarField,
    candidate: &ScalarField,
    p: Exponent,
) -> Result<f64> {
    reference.check_len(space)?;
    candidate.check_len(space)?;
    Ok(lp_norm(space, &reference.sub(candidate), p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareParams {
    pub p: Exponent,
    pub c: f64,
    pub lambda: f64,
}

impl PoincareParams {
    pub fn new(p: f64, c: f64, lambda: f64) -> Result<Self> {
        let p = Exponent::new(p)?;
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
        }
        if !(lambda >= 1.0) {
            return Err(Error::InvalidParameter(format!("Lambda must be >= 1, got {lambda}")));
        }
        Ok(PoincareParams { p, c, lambda })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GradientNotion {
    /// `lip_a_at_scale(·, r)` at every point.
    LipAScale(f64),
    /// `lip_at_scale(·, r)` at every point.
    LipScale(f64),
    Supplied(ScalarField),
}

impl GradientNotion {
    pub fn label(&self) -> String {
        match self {
            GradientNotion::LipAScale(r) => format!("lip_a_scale({r})"),
            GradientNotion::LipScale(r) => format!("lip_scale({r})"),
            GradientNotion::Supplied(g) => format!("supplied({})", g.name),
        }
    }

    /// Evaluate the notion into a field for `u`.
    pub fn field(&self, space: &MetricMeasureSpace, u: &ScalarField) -> Result<ScalarField> {
        match self {
            GradientNotion::LipAScale(r) | GradientNotion::LipScale(r) if !(*r > 0.0) => {
                Err(Error::InvalidParameter(format!("gradient scale must be positive, got {r}")))
            }
            GradientNotion::LipAScale(r) => Ok(ScalarField::new(
                self.label(),
                (0..space.len())
                    .into_par_iter()
                    .map(|x| lip_a_at_scale(space, u, x, *r))
                    .collect(),
            )),
            GradientNotion::LipScale(r) => Ok(ScalarField::new(
                self.label(),
                (0..space.len())
                    .into_par_iter()
                    .map(|x| lip_at_scale(space, u, x, *r))
                    .collect(),
            )),
            GradientNotion::Supplied(g) => {
                g.check_len(space)?;
                Ok(g.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallRow {
    pub center: usize,
    pub radius: f64,
    /// ⨍_B |u − u_B| dμ.
    pub lhs: f64,
    /// C·r·(⨍_{ΛB} gᵖ dμ)^{1/p} for the supplied C.
    pub rhs: f64,
    pub slack: f64,
    /// Smallest C for which this ball satisfies the inequality; +∞ when the
    /// gradient vanishes on ΛB while u oscillates on B.
    pub minimal_c: f64,
    pub zero_gradient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareReport {
    pub notion: String,
    pub p: f64,
    pub c: f64,
    pub lambda: f64,
    pub rows: Vec<BallRow>,
    /// max over balls of the per-ball minimal C.
    pub minimal_c: f64,
    pub holds: bool,
}

/// Check ⨍_B |u − u_B| ≤ C·r·(⨍_{B(x,Λr)} gᵖ)^{1/p} on each listed ball.
pub fn poincare_check(
    space: &MetricMeasureSpace,
    u: &ScalarField,
    notion: &GradientNotion,
    params: PoincareParams,
    balls: &[(usize, f64)],
) -> Result<PoincareReport> {
    u.check_len(space)?;
    let grad = notion.field(space, u)?;
    poincare_with_field(space, u, &grad, &notion.label(), params, balls)
}

/// [`poincare_check`] with the gradient already evaluated to a field.
pub fn poincare_with_field(
    space: &MetricMeasureSpace,
    u: &ScalarField,
    grad: &ScalarField,
    notion: &str,
    params: PoincareParams,
    balls: &[(usize, f64)],
) -> Result<PoincareReport> {
    let p = params.p.get();
    let grad_p = grad.map("grad_p", |g| g.powf(p));
    let rows = balls
        .iter()
        .map(|&(center, radius)| {
            crate::space::check_index(center, space.len())?;
            if !(radius > 0.0) {
                return Err(Error::InvalidRadius {
                    radius,
                    reason: "ball radius must be positive".into(),
                });
            }
            let ball = space.ball(center, radius, Openness::Open);
            let wide = space.ball(center, params.lambda * radius, Openness::Open);
            let mean = ball_average(space, u, &ball)?;
            let osc = u.map("osc", |v| (v - mean).abs());
            let lhs = ball_average(space, &osc, &ball)?;
            let grad_mean = ball_average(space, &grad_p, &wide)?.powf(1.0 / p);
            let scale = radius * grad_mean;
            let rhs = params.c * scale;
            let zero_gradient = scale == 0.0;
            let minimal_c = if lhs == 0.0 {
                0.0
            } else if zero_gradient {
                f64::INFINITY
            } else {
                lhs / scale
            };
            Ok(BallRow {
                center,
                radius,
                lhs,
                rhs,
                slack: rhs - lhs,
                minimal_c,
                zero_gradient,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let minimal_c = rows.iter().map(|r| r.minimal_c).fold(0.0, f64::max);
    Ok(PoincareReport {
        notion: notion.to_string(),
        p,
        c: params.c,
        lambda: params.lambda,
        holds: minimal_c <= params.c,
        rows,
        minimal_c,
    })
}

/// All `(center, r)` with centers every `stride` points and radii `r0·ratioᵏ`, `k < count`.
pub fn geometric_ball_grid(
    n: usize,
    stride: usize,
    r0: f64,
    ratio: f64,
    count: usize,
) -> Vec<(usize, f64)> {
    let stride = stride.max(1);
    (0..n)
        .step_by(stride)
        .flat_map(|c| (0..count).map(move |k| (c, r0 * ratio.powi(k as i32))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, unit_interval, unit_square_grid, Metric, SetRole};

    fn line(xs: &[f64]) -> MetricMeasureSpace {
        build_space(
            xs.iter().map(|&x| vec![x]).collect(),
            Metric::l2(),
            vec![1.0; xs.len()],
        )
        .unwrap()
    }

    #[test]
    fn lip_over_set_examples() {
        let s = line(&[0.0, 0.5, 1.0]);
        let all = s.all_points(SetRole::Support);
        assert_eq!(lip_over_set(&s, &ScalarField::constant("c", 3, 2.0), &all), 0.0);
        let f = ScalarField::new("f", vec![0.0, 1.0, 1.2]);
        let single = PointSet::new(vec![1], SetRole::Ball, 3).unwrap();
        assert_eq!(lip_over_set(&s, &f, &single), 0.0);
        assert!((lip_over_set(&s, &f, &all) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scale_lipschitz_examples() {
        let s = line(&[0.0, 1.0, 2.0, 10.0]);
        let f = ScalarField::new("f", vec![0.0, 1.0, 2.0, 10.0]);
        assert_eq!(lip_a_at_scale(&s, &f, 3, 1.0), 0.0);
        assert_eq!(lip_at_scale(&s, &f, 3, 1.0), 0.0);
        assert_eq!(lip_a_at_scale(&s, &f, 1, 2.5), 1.0);
        assert_eq!(lip_at_scale(&s, &f, 1, 2.5), 1.0);
        let dist = ScalarField::from_fn("d", 4, |y| s.d(2, y));
        assert_eq!(lip_at_scale(&s, &dist, 2, 20.0), 1.0);
    }

    #[test]
    fn discrete_gradient_on_l1_grid() {
        let m = 10;
        let s = unit_square_grid(m, Metric::l1()).unwrap();
        let f = ScalarField::from_fn("x", s.len(), |i| s.coord(i).unwrap()[0]);
        let g = discrete_gradient(&s, &f, 1.5 / m as f64);
        for (i, &v) in g.values.iter().enumerate() {
            assert!((v - 1.0).abs() < 1e-9, "point {i}: {v}");
        }
        let c = ScalarField::constant("c", s.len(), 4.0);
        assert!(discrete_gradient(&s, &c, 0.2).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_gap_examples() {
        let s = line(&[0.0]);
        let one = ScalarField::constant("one", 1, 1.0);
        let zero = ScalarField::zeros("zero", 1);
        assert_eq!(energy_gap(&s, &one, &one, Exponent::one()).unwrap(), 0.0);
        assert_eq!(energy_gap(&s, &one, &zero, Exponent::one()).unwrap(), 1.0);
    }

    #[test]
    fn poincare_constant_field() {
        let s = unit_interval(50).unwrap();
        let u = ScalarField::constant("u", 50, 3.0);
        let params = PoincareParams::new(1.0, 1.0, 1.0).unwrap();
        let rep = poincare_check(&s, &u, &GradientNotion::LipAScale(0.1), params, &[(10, 0.2), (25, 0.5)]).unwrap();
        assert_eq!(rep.minimal_c, 0.0);
        assert!(rep.holds);
    }

    #[test]
    fn poincare_interval_identity() {
        let n = 1000;
        let s = unit_interval(n).unwrap();
        let u = ScalarField::from_fn("x", n, |i| s.coord(i).unwrap()[0]);
        let one = GradientNotion::Supplied(ScalarField::constant("one", n, 1.0));
        let params = PoincareParams::new(1.0, 1.0, 1.0).unwrap();
        let rep = poincare_check(&s, &u, &one, params, &[(n / 2, 0.5 + 1.0 / n as f64)]).unwrap();
        assert!((rep.minimal_c - 0.5).abs() < 0.01, "{}", rep.minimal_c);
    }

    #[test]
    fn poincare_zero_gradient_is_infinite() {
        let s = line(&[0.0, 0.1, 5.0, 5.1]);
        let u = ScalarField::new("u", vec![0.0, 0.0, 1.0, 1.0]);
        let params = PoincareParams::new(1.0, 1.0, 1.0).unwrap();
        let rep = poincare_check(&s, &u, &GradientNotion::LipAScale(0.5), params, &[(0, 6.0)]).unwrap();
        assert!(rep.minimal_c.is_infinite());
        assert!(rep.rows[0].zero_gradient);
        assert!(!rep.holds);
    }

    #[test]
    fn poincare_params_validated() {
        assert!(PoincareParams::new(1.0, 1.0, 0.5).is_err());
        assert!(PoincareParams::new(1.0, 0.0, 1.0).is_err());
        assert!(PoincareParams::new(f64::INFINITY, 1.0, 1.0).is_err());
    }
}
