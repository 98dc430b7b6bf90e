//! Scalar fields and the field-level constructions used by the approximation
//! scheme: Lᵖ norms, ball averages, cutoffs, sign splits, truncations, the
//! penalty sequence hₙ and the assembled gradient bound g_ε.

use crate::error::{Error, Result};
use crate::space::{CompactNest, MetricMeasureSpace, Openness, PointSet};
use crate::sum::kahan_sum;

/// One real value per point of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub name: String,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        ScalarField {
            name: name.into(),
            values,
        }
    }

    pub fn constant(name: impl Into<String>, n: usize, c: f64) -> Self {
        Self::new(name, vec![c; n])
    }

    pub fn zeros(name: impl Into<String>, n: usize) -> Self {
        Self::constant(name, n, 0.0)
    }

    pub fn from_fn(name: impl Into<String>, n: usize, f: impl Fn(usize) -> f64) -> Self {
        Self::new(name, (0..n).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, name: impl Into<String>, f: impl Fn(f64) -> f64) -> Self {
        Self::new(name, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(
        &self,
        other: &ScalarField,
        name: impl Into<String>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        Self::new(
            name,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, format!("{}-{}", self.name, other.name), |a, b| a - b)
    }

    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.zip_map(other, "", |a, b| (a - b).abs()).max().max(0.0)
    }

    pub(crate) fn check_len(&self, space: &MetricMeasureSpace) -> Result<()> {
        if self.len() == space.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: space.len(),
                got: self.len(),
            })
        }
    }
}

/// Integrability exponent `p ∈ [1, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p >= 1.0 && p.is_finite() {
            Ok(Exponent(p))
        } else {
            Err(Error::InvalidExponent(p))
        }
    }

    pub fn one() -> Self {
        Exponent(1.0)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `(Σ |fᵢ|ᵖ μᵢ)^(1/p)`, compensated, in index order.
pub fn lp_norm(space: &MetricMeasureSpace, field: &ScalarField, p: Exponent) -> f64 {
    let p = p.get();
    let mu = space.measure();
    let s = kahan_sum(
        field
            .values
            .iter()
            .zip(mu)
            .map(|(&f, &m)| if p == 1.0 { f.abs() * m } else { f.abs().powf(p) * m }),
    );
    if p == 1.0 {
        s
    } else {
        s.powf(1.0 / p)
    }
}

/// Measure-weighted mean of `field` over `set`.
pub fn ball_average(space: &MetricMeasureSpace, field: &ScalarField, set: &PointSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mu = space.measure();
    let mass = space.measure_of(set);
    let integral = kahan_sum(set.indices().iter().map(|&i| field.values[i] * mu[i]));
    Ok(integral / mass)
}

/// ψ_R(x) = max{0, min{1, R − d(x₀, x)}}.
pub fn cutoff_psi(space: &MetricMeasureSpace, x0: usize, radius: f64) -> ScalarField {
    assert!(radius > 0.0, "cutoff radius must be positive");
    ScalarField::from_fn(format!("psi_{radius}"), space.len(), |x| {
        (radius - space.d(x0, x)).clamp(0.0, 1.0)
    })
}

/// `(f₊, f₋)` with `f = f₊ − f₋`.
pub fn sign_split(field: &ScalarField) -> (ScalarField, ScalarField) {
    let plus = field.map(format!("{}_plus", field.name), |v| v.max(0.0));
    let minus = field.map(format!("{}_minus", field.name), |v| (-v).max(0.0));
    (plus, minus)
}

/// Pointwise `min{f, M}`.
pub fn truncate(field: &ScalarField, cap: f64) -> ScalarField {
    assert!(cap > 0.0, "truncation level must be positive");
    field.map(format!("{}_M", field.name), |v| v.min(cap))
}

/// hₙ(x) = Σ_{k=1}^{n} min{n·d(x, K_k), 1}.
pub fn good_sequence_h(
    space: &MetricMeasureSpace,
    nest: &CompactNest,
    n: usize,
) -> Result<ScalarField> {
    if n > nest.depth() {
        return Err(Error::EmptyCompact { level: n });
    }
    let scale = n as f64;
    let mut values = vec![0.0; space.len()];
    for k in 1..=n {
        let level = nest.level(k)?;
        for (x, v) in values.iter_mut().enumerate() {
            *v += (scale * space.distance_to_set(x, level)?).min(1.0);
        }
    }
    Ok(ScalarField::new(format!("h_{n}"), values))
}

/// g_ε = g₁ + σ·ψ_{2R} + Σ_{n=1}^{N_max} 1_{B(x₀,2R) ∖ K_n}, the infinite sum truncated at `n_max`.
pub fn assemble_g_eps(
    space: &MetricMeasureSpace,
    g1: &ScalarField,
    sigma: f64,
    x0: usize,
    radius: f64,
    nest: &CompactNest,
    n_max: usize,
) -> Result<ScalarField> {
    g1.check_len(space)?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidRadius {
            radius,
            reason: "must be positive".into(),
        });
    }
    if let Some(i) = g1.values.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidData {
            index: i,
            reason: "g1 must be nonnegative".into(),
        });
    }
    if n_max > nest.depth() {
        return Err(Error::EmptyCompact { level: n_max });
    }
    let psi = cutoff_psi(space, x0, 2.0 * radius);
    let ball = space.ball(x0, 2.0 * radius, Openness::Open);
    let values = (0..space.len())
        .map(|x| {
            let misses = if ball.contains(x) {
                nest.levels()[..n_max]
                    .iter()
                    .filter(|k| !k.contains(x))
                    .count()
            } else {
                0
            };
            g1.values[x] + sigma * psi.values[x] + misses as f64
        })
        .collect();
    Ok(ScalarField::new("g_eps", values))
}

/// gₙ = g̃ₙ + σ·ψ_{2R} + Σ_{k=1}^{n} min{n·d(x,K_k), 1_{B(x₀,2R)}(x)}.
///
/// With the minorants of [`monotone_continuous_minorants`] this is
/// nondecreasing in `n` and bounded by [`assemble_g_eps`] at `N_max ≥ n`.
pub fn penalty_gradient_n(
    space: &MetricMeasureSpace,
    g1: &ScalarField,
    sigma: f64,
    x0: usize,
    radius: f64,
    nest: &CompactNest,
    n: usize,
) -> Result<ScalarField> {
    let minorant = monotone_continuous_minorants(space, g1, n)?;
    let psi = cutoff_psi(space, x0, 2.0 * radius);
    let ball = space.ball(x0, 2.0 * radius, Openness::Open);
    let h = good_sequence_h(space, nest, n)?;
    let values = (0..space.len())
        .map(|x| {
            let penalty = if ball.contains(x) { h.values[x] } else { 0.0 };
            minorant.values[x] + sigma * psi.values[x] + penalty
        })
        .collect();
    Ok(ScalarField::new(format!("g_{n}"), values))
}

/// g̃ₙ(x) = min_y (g₁(y) + n·d(x,y)), capped at max g₁.
///
/// Each g̃ₙ is n-Lipschitz, g̃ₙ ≤ g̃ₙ₊₁ ≤ g₁, and they coincide with g₁ once
/// n·(min positive distance) ≥ max g₁ − min g₁.
pub fn monotone_continuous_minorants(
    space: &MetricMeasureSpace,
    g1: &ScalarField,
    n: usize,
) -> Result<ScalarField> {
    g1.check_len(space)?;
    if n == 0 {
        return Err(Error::InvalidParameter("minorant index must be >= 1".into()));
    }
    let slope = n as f64;
    let cap = g1.max();
    let len = space.len();
    let values = (0..len)
        .map(|x| {
            (0..len)
                .map(|y| g1.values[y] + slope * space.d(x, y))
                .fold(f64::INFINITY, f64::min)
                .min(cap)
        })
        .collect();
    Ok(ScalarField::new(format!("{}_tilde_{n}", g1.name), values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, Metric, SetRole};

    fn line(xs: &[f64], w: &[f64]) -> MetricMeasureSpace {
        build_space(xs.iter().map(|&x| vec![x]).collect(), Metric::l2(), w.to_vec()).unwrap()
    }

    fn set(ix: &[usize], n: usize) -> PointSet {
        PointSet::new(ix.to_vec(), SetRole::Support, n).unwrap()
    }

    #[test]
    fn exponent_rejects_infinity_and_small() {
        assert!(Exponent::new(f64::INFINITY).is_err());
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(1.0).is_ok());
    }

    #[test]
    fn lp_norm_examples() {
        let s = line(&[0.0, 1.0], &[1.0, 1.0]);
        let p2 = Exponent::new(2.0).unwrap();
        assert_eq!(lp_norm(&s, &ScalarField::zeros("z", 2), p2), 0.0);
        let one = ScalarField::constant("one", 2, 1.0);
        assert!((lp_norm(&s, &one, p2) - 2f64.sqrt()).abs() < 1e-15);
        let f = ScalarField::new("f", vec![1.0, -1.0]);
        assert_eq!(lp_norm(&s, &f, Exponent::one()), 2.0);
    }

    #[test]
    fn ball_average_examples() {
        let s = line(&[0.0, 1.0], &[1.0, 1.0]);
        let f = ScalarField::new("f", vec![0.0, 1.0]);
        let all = s.all_points(SetRole::Ball);
        assert_eq!(ball_average(&s, &f, &all).unwrap(), 0.5);
        let c = ScalarField::constant("c", 2, 3.25);
        assert_eq!(ball_average(&s, &c, &set(&[1], 2)).unwrap(), 3.25);
        let weighted = line(&[0.0, 1.0], &[3.0, 1.0]);
        assert_eq!(ball_average(&weighted, &f, &all).unwrap(), 0.25);
        assert!(matches!(
            ball_average(&s, &f, &set(&[], 2)),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn cutoff_examples() {
        let s = line(&[0.0, 1.5, 3.0], &[1.0; 3]);
        let psi = cutoff_psi(&s, 0, 2.0);
        assert_eq!(psi.values, vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn sign_split_and_truncate() {
        let (p, m) = sign_split(&ScalarField::new("f", vec![2.0, -3.0]));
        assert_eq!(p.values, vec![2.0, 0.0]);
        assert_eq!(m.values, vec![0.0, 3.0]);
        let (p, m) = sign_split(&ScalarField::new("f", vec![0.5, 1.0]));
        assert_eq!(p.values, vec![0.5, 1.0]);
        assert_eq!(m.values, vec![0.0, 0.0]);
        let (p, m) = sign_split(&ScalarField::zeros("f", 2));
        assert_eq!((p.values, m.values), (vec![0.0; 2], vec![0.0; 2]));

        assert_eq!(truncate(&ScalarField::new("f", vec![1.0, 5.0]), 3.0).values, vec![1.0, 3.0]);
        assert_eq!(truncate(&ScalarField::new("f", vec![1.0, 5.0]), 9.0).values, vec![1.0, 5.0]);
        assert_eq!(truncate(&ScalarField::new("f", vec![-1.0, 4.0]), 2.0).values, vec![-1.0, 2.0]);
    }

    #[test]
    fn good_sequence_examples() {
        let s = line(&[0.0, 1.0, 2.0], &[1.0; 3]);
        let k = set(&[0], 3);
        let nest = CompactNest::new(vec![k.clone(), k]).unwrap();
        let h2 = good_sequence_h(&s, &nest, 2).unwrap();
        assert_eq!(h2.values[0], 0.0);
        assert_eq!(h2.values[1], 2.0);
        assert!(matches!(good_sequence_h(&s, &nest, 3), Err(Error::EmptyCompact { level: 3 })));
    }

    #[test]
    fn g_eps_examples() {
        // x0 = 0, R = 1: B(x0, 2) is open, cutoff ψ₂ is 1 on d ≤ 1.
        let s = line(&[0.0, 0.5, 1.0, 1.9, 3.0], &[1.0; 5]);
        let g1 = ScalarField::zeros("g1", 5);
        let nest = CompactNest::new(vec![
            set(&[0, 1], 5),
            set(&[0, 1, 2], 5),
            set(&[0, 1, 2], 5),
        ])
        .unwrap();
        let g = assemble_g_eps(&s, &g1, 0.25, 0, 1.0, &nest, 3).unwrap();
        // outside the ball
        assert_eq!(g.values[4], 0.0);
        // in every K_n with cutoff 1
        assert_eq!(g.values[0], 0.25);
        assert_eq!(g.values[1], 0.25);
        // in K_2, K_3 but not K_1
        assert_eq!(g.values[2], 0.25 + 1.0);
        // in the ball, in no K_n, cutoff 0.1
        assert!((g.values[3] - (0.25 * (2.0 - 1.9) + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn penalty_gradient_bounded_by_g_eps() {
        let s = line(&[0.0, 0.3, 0.7, 1.2, 2.5], &[1.0; 5]);
        let g1 = ScalarField::new("g1", vec![0.0, 2.0, 0.5, 3.0, 0.0]);
        let nest = CompactNest::new(vec![set(&[0], 5), set(&[0, 1], 5), set(&[0, 1, 2], 5)]).unwrap();
        let ge = assemble_g_eps(&s, &g1, 0.1, 0, 1.0, &nest, 3).unwrap();
        let mut prev = ScalarField::zeros("", 5);
        for n in 1..=3 {
            let gn = penalty_gradient_n(&s, &g1, 0.1, 0, 1.0, &nest, n).unwrap();
            for x in 0..5 {
                assert!(gn.values[x] <= ge.values[x] + 1e-12);
                assert!(gn.values[x] >= prev.values[x] - 1e-12);
            }
            prev = gn;
        }
    }

    #[test]
    fn minorant_examples() {
        let s = line(&[0.0, 1.0], &[1.0, 1.0]);
        let c = ScalarField::constant("g", 2, 4.0);
        assert_eq!(monotone_continuous_minorants(&s, &c, 3).unwrap().values, c.values);
        let g = ScalarField::new("g", vec![0.0, 1.0]);
        assert_eq!(monotone_continuous_minorants(&s, &g, 1).unwrap().values, vec![0.0, 1.0]);
        let g = ScalarField::new("g", vec![0.0, 10.0]);
        assert_eq!(monotone_continuous_minorants(&s, &g, 2).unwrap().values, vec![0.0, 2.0]);
    }
}
