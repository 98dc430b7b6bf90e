//! Config-driven experiments behind the CLI.
//!
//! Each experiment reads one section of an [`ExperimentConfig`], falls back
//! to built-in defaults when the section is absent, and returns a plain
//! result struct plus a writer for its fixed-column CSV. All randomness comes
//! from ChaCha streams derived from the config seed, one stream per instance,
//! so parallel evaluation does not change any output.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    discrete_gradient, energy_gap, geometric_ball_grid, poincare_with_field, GradientNotion,
    PoincareParams, PoincareReport,
};
use crate::approximation::{
    approximate_with, brute_force_f_tilde, delta_sweep, verify_properties,
    ApproximationData, CostMode, Property, PropertyReport,
};
use crate::error::{Error, Result};
use crate::fields::{lp_norm, Exponent, ScalarField};
use crate::io::{fmt_f64, json_f64, load_space_json, write_csv, LoadedSpace, OutputMeta};
use crate::space::{
    build_space, unit_interval, unit_square_grid, Metric, MetricMeasureSpace, PointSet, SetRole,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Lᵖ exponent for error columns.
    #[serde(default = "default_p")]
    pub p: f64,
    /// Target for ∫|f − f̃|ᵖ dμ in the convergence experiment.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub converge: Option<ConvergeConfig>,
    #[serde(default)]
    pub counterexample: Option<CounterexampleConfig>,
    #[serde(default)]
    pub lemma_suite: Option<LemmaSuiteConfig>,
    #[serde(default)]
    pub poincare: Option<PoincareConfig>,
}

fn default_p() -> f64 {
    1.0
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: String::new(),
            seed: 0,
            p: default_p(),
            epsilon: None,
            converge: None,
            counterexample: None,
            lemma_suite: None,
            poincare: None,
        }
    }
}

impl ExperimentConfig {
    /// Parse JSON; errors report line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn meta(&self) -> Result<OutputMeta> {
        OutputMeta::for_config(self, Some(self.seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSource {
    /// `n` cell centres of `[0, 1]`, weights `1/n`.
    Interval { n: usize },
    /// `m × m` cell centres of `[0, 1]²`, weights `1/m²`.
    Grid { m: usize, metric: String },
    File { path: String },
}

impl SpaceSource {
    pub fn load(&self) -> Result<LoadedSpace> {
        let space = match self {
            SpaceSource::Interval { n } => unit_interval(*n)?,
            SpaceSource::Grid { m, metric } => {
                let metric = crate::io::MetricSpec::Named(metric.clone()).to_metric()?;
                unit_square_grid(*m, metric)?
            }
            SpaceSource::File { path } => return load_space_json(path.as_ref()),
        };
        Ok(LoadedSpace {
            space,
            fields: BTreeMap::new(),
            sets: BTreeMap::new(),
        })
    }
}

/// Fields given by formula in the point coordinates, or by name from a space file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldExpr {
    Constant {
        value: f64,
    },
    /// `Σ coeffs[i]·xᵢ + offset`.
    Linear {
        coeffs: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `scale·x_axis^exponent + offset`.
    Power {
        #[serde(default)]
        axis: usize,
        exponent: f64,
        #[serde(default = "default_one")]
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
    Named {
        name: String,
    },
}

fn default_one() -> f64 {
    1.0
}

impl FieldExpr {
    pub fn evaluate(&self, loaded: &LoadedSpace, name: &str) -> Result<ScalarField> {
        let space = &loaded.space;
        if let FieldExpr::Named { name } = self {
            return loaded.field(name).cloned();
        }
        if let FieldExpr::Constant { value } = self {
            return Ok(ScalarField::constant(name, space.len(), *value));
        }
        let coords = space.coords().ok_or(Error::NoCoordinates)?;
        let dim = coords[0].len();
        let values = match self {
            FieldExpr::Linear { coeffs, offset } => {
                if coeffs.len() > dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: coeffs.len(),
                    });
                }
                coords
                    .iter()
                    .map(|c| coeffs.iter().zip(c).map(|(a, x)| a * x).sum::<f64>() + offset)
                    .collect()
            }
            FieldExpr::Power {
                axis,
                exponent,
                scale,
                offset,
            } => {
                if *axis >= dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: axis + 1,
                    });
                }
                coords
                    .iter()
                    .map(|c| scale * c[*axis].powf(*exponent) + offset)
                    .collect()
            }
            FieldExpr::Constant { .. } | FieldExpr::Named { .. } => unreachable!(),
        };
        Ok(ScalarField::new(name, values))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    All,
    Named(String),
    Indices(Vec<usize>),
}

impl SetSpec {
    pub fn resolve(&self, loaded: &LoadedSpace) -> Result<PointSet> {
        match self {
            SetSpec::All => Ok(loaded.space.all_points(SetRole::A)),
            SetSpec::Named(name) => loaded.set(name, SetRole::A),
            SetSpec::Indices(ix) => PointSet::new(ix.clone(), SetRole::A, loaded.space.len()),
        }
    }
}

// ---------------------------------------------------------------------------
// converge

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub space: SpaceSource,
    pub field: FieldExpr,
    pub gradient: FieldExpr,
    #[serde(default = "default_all")]
    pub start_set: SetSpec,
    pub cap: f64,
    pub deltas: Vec<f64>,
}

fn default_all() -> SetSpec {
    SetSpec::All
}

impl Default for ConvergeConfig {
    /// f(x) = x² on 2000 samples of [0, 1], g = 2x + 0.01, A = X, M = 1.5.
    fn default() -> Self {
        ConvergeConfig {
            space: SpaceSource::Interval { n: 2000 },
            field: FieldExpr::Power {
                axis: 0,
                exponent: 2.0,
                scale: 1.0,
                offset: 0.0,
            },
            gradient: FieldExpr::Linear {
                coeffs: vec![2.0],
                offset: 0.01,
            },
            start_set: SetSpec::All,
            cap: 1.5,
            deltas: vec![0.1, 0.05, 0.025, 0.0125],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeRow {
    pub delta: f64,
    pub sup_error_on_a: f64,
    pub lp_error: f64,
    /// ‖discrete_gradient(f̃, δ) − g‖_{Lᵖ}.
    pub energy_gap: f64,
    pub monotone_violations: usize,
    /// ∫|f − f̃|ᵖ dμ ≤ ε, when ε is configured.
    pub meets_epsilon: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeResult {
    pub rows: Vec<ConvergeRow>,
    /// Fields monotone in δ and sup error on A nonincreasing.
    pub passed: bool,
}

pub const CONVERGE_COLUMNS: [&str; 6] = [
    "delta",
    "sup_error_on_A",
    "lp_error",
    "energy_gap",
    "monotone_violations",
    "meets_epsilon",
];

pub fn run_converge(config: &ExperimentConfig) -> Result<ConvergeResult> {
    let cc = config.converge.clone().unwrap_or_default();
    let p = Exponent::new(config.p)?;
    let loaded = cc.space.load()?;
    let space = &loaded.space;
    let f = cc.field.evaluate(&loaded, "f")?;
    let g = cc.gradient.evaluate(&loaded, "g")?;
    let data = ApproximationData {
        f,
        g: g.clone(),
        start_set: cc.start_set.resolve(&loaded)?,
        cap: cc.cap,
        delta: *cc.deltas.first().ok_or(Error::NonMonotoneDeltas { position: 0 })?,
    };
    let sweep = delta_sweep(space, &data, &cc.deltas, None, p)?;
    let rows: Vec<ConvergeRow> = sweep
        .rows
        .iter()
        .zip(&sweep.fields)
        .map(|(row, field)| {
            let grad = discrete_gradient(space, field, row.delta);
            Ok(ConvergeRow {
                delta: row.delta,
                sup_error_on_a: row.sup_error_on_start_set,
                lp_error: row.lp_error,
                energy_gap: energy_gap(space, &g, &grad, p)?,
                monotone_violations: row.monotone_violations,
                meets_epsilon: config.epsilon.map(|eps| row.lp_error.powf(p.get()) <= eps),
            })
        })
        .collect::<Result<_>>()?;
    let passed = rows.iter().all(|r| r.monotone_violations == 0)
        && rows
            .windows(2)
            .all(|w| w[1].sup_error_on_a <= w[0].sup_error_on_a);
    Ok(ConvergeResult { rows, passed })
}

pub fn write_converge<W: Write>(w: W, meta: &OutputMeta, result: &ConvergeResult) -> Result<()> {
    write_csv(
        w,
        meta,
        &CONVERGE_COLUMNS,
        result.rows.iter().map(|r| {
            vec![
                fmt_f64(r.delta),
                fmt_f64(r.sup_error_on_a),
                fmt_f64(r.lp_error),
                fmt_f64(r.energy_gap),
                r.monotone_violations.to_string(),
                r.meets_epsilon.map_or("".into(), |b| b.to_string()),
            ]
        }),
    )
}

// ---------------------------------------------------------------------------
// counterexample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    /// Grid points per axis.
    pub m: usize,
    pub frequencies: Vec<u32>,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            m: 300,
            frequencies: vec![5, 10, 20],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub n: u32,
    /// ‖fₙ − f‖_{L¹}.
    pub l1_fn_minus_f: f64,
    /// ‖g_δ[fₙ] − 1‖_{L¹}.
    pub l1_grad_fn_minus_one: f64,
    /// ‖g_δ[fₙ − f]‖_{L¹}.
    pub l1_grad_fn_minus_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleResult {
    pub delta: f64,
    pub rows: Vec<CounterexampleRow>,
    /// ‖fₙ − f‖ decreasing in n, g_δ[fₙ] within 0.05 of 1, and g_δ[fₙ − f] at least 0.5.
    pub passed: bool,
}

pub const COUNTEREXAMPLE_COLUMNS: [&str; 4] = [
    "n",
    "l1_fn_minus_f",
    "l1_grad_fn_minus_one",
    "l1_grad_fn_minus_f",
];

/// f(x, y) = x against fₙ = x + sin(ny)/n on an ℓ¹ grid of the unit square.
///
/// The gradient scale is 1.5 grid steps: it keeps the four axis neighbours at
/// distance h and excludes the diagonals at 2h, without sitting on a realized distance.
pub fn run_counterexample(config: &ExperimentConfig) -> Result<CounterexampleResult> {
    let cc = config.counterexample.clone().unwrap_or_default();
    let m = cc.m;
    for &n in &cc.frequencies {
        if m < 100 || m < 10 * n as usize {
            return Err(Error::ResolutionTooLow { m, n });
        }
    }
    let space = unit_square_grid(m, Metric::l1())?;
    let delta = 1.5 / m as f64;
    let coords = space.coords().expect("grid has coordinates");
    let p = Exponent::one();
    let f = ScalarField::from_fn("f", space.len(), |i| coords[i][0]);
    let one = ScalarField::constant("one", space.len(), 1.0);
    let rows: Vec<CounterexampleRow> = cc
        .frequencies
        .iter()
        .map(|&n| {
            let k = n as f64;
            let fn_ = ScalarField::from_fn("f_n", space.len(), |i| {
                coords[i][0] + (k * coords[i][1]).sin() / k
            });
            let diff = fn_.sub(&f);
            CounterexampleRow {
                n,
                l1_fn_minus_f: lp_norm(&space, &diff, p),
                l1_grad_fn_minus_one: lp_norm(&space, &discrete_gradient(&space, &fn_, delta).sub(&one), p),
                l1_grad_fn_minus_f: lp_norm(&space, &discrete_gradient(&space, &diff, delta), p),
            }
        })
        .collect();
    let passed = rows.windows(2).all(|w| w[1].l1_fn_minus_f < w[0].l1_fn_minus_f)
        && rows
            .iter()
            .all(|r| r.l1_grad_fn_minus_one <= 0.05 && r.l1_grad_fn_minus_f >= 0.5);
    Ok(CounterexampleResult {
        delta,
        rows,
        passed,
    })
}

pub fn write_counterexample<W: Write>(
    w: W,
    meta: &OutputMeta,
    result: &CounterexampleResult,
) -> Result<()> {
    write_csv(
        w,
        meta,
        &COUNTEREXAMPLE_COLUMNS,
        result.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.l1_fn_minus_f),
                fmt_f64(r.l1_grad_fn_minus_one),
                fmt_f64(r.l1_grad_fn_minus_f),
            ]
        }),
    )
}

// ---------------------------------------------------------------------------
// lemma suite

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSuiteConfig {
    pub instances: usize,
    pub max_n: usize,
    pub oracle_instances: usize,
    pub oracle_max_n: usize,
    pub monotone_pairs: usize,
    pub path_samples: usize,
    /// Negative control: run the suite against the sign-flipped cost.
    pub negate_cost: bool,
}

impl Default for LemmaSuiteConfig {
    fn default() -> Self {
        LemmaSuiteConfig {
            instances: 500,
            max_n: 60,
            oracle_instances: 500,
            oracle_max_n: 8,
            monotone_pairs: 200,
            path_samples: 20,
            negate_cost: false,
        }
    }
}

/// Monotonicity directions of f̃ in its data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Perturbation {
    SmallerDelta,
    LargerGradient,
    LargerCap,
    LargerDataOnStartSet,
    SmallerStartSet,
}

impl Perturbation {
    pub const ALL: [Perturbation; 5] = [
        Perturbation::SmallerDelta,
        Perturbation::LargerGradient,
        Perturbation::LargerCap,
        Perturbation::LargerDataOnStartSet,
        Perturbation::SmallerStartSet,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Perturbation::SmallerDelta => "monotone_delta_decrease",
            Perturbation::LargerGradient => "monotone_g_increase",
            Perturbation::LargerCap => "monotone_M_increase",
            Perturbation::LargerDataOnStartSet => "monotone_f_increase_on_A",
            Perturbation::SmallerStartSet => "monotone_A_shrink",
        }
    }

    /// A perturbed copy of `data` under which f̃ can only grow.
    pub fn apply<R: Rng>(self, data: &ApproximationData, rng: &mut R) -> ApproximationData {
        let mut out = data.clone();
        match self {
            Perturbation::SmallerDelta => out.delta *= rng.gen_range(0.2..0.95),
            Perturbation::LargerGradient => {
                for v in &mut out.g.values {
                    if rng.gen_bool(0.5) {
                        *v += rng.gen_range(0.0..2.0);
                    }
                }
            }
            Perturbation::LargerCap => out.cap *= rng.gen_range(1.05..3.0),
            Perturbation::LargerDataOnStartSet => {
                for &a in data.start_set.indices() {
                    let bump = rng.gen_range(0.0..1.0);
                    out.f.values[a] = (out.f.values[a] + bump).min(out.cap);
                }
            }
            Perturbation::SmallerStartSet => {
                let ix = data.start_set.indices();
                let mut keep: Vec<usize> = ix.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                if keep.is_empty() {
                    keep.push(ix[rng.gen_range(0..ix.len())]);
                }
                out.start_set = PointSet::new(keep, SetRole::A, data.f.len()).expect("subset of valid set");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CheckTally {
    pub checked: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSuiteResult {
    pub properties: PropertyReport,
    pub instances: usize,
    /// Points compared between label-setting and enumeration; violations are bitwise mismatches.
    pub oracle: CheckTally,
    pub oracle_instances: usize,
    pub monotone: BTreeMap<Perturbation, CheckTally>,
    pub monotone_pairs: usize,
}

impl LemmaSuiteResult {
    pub fn passed(&self) -> bool {
        self.properties.all_pass()
            && self.oracle.violations == 0
            && self.monotone.values().all(|t| t.violations == 0)
    }

    /// `(check, checked, violations)` in report order.
    pub fn lines(&self) -> Vec<(String, usize, usize)> {
        let mut out: Vec<(String, usize, usize)> = Property::ALL
            .iter()
            .map(|&p| {
                let t = self.properties.tally(p);
                (p.label().to_string(), t.checked, t.violations)
            })
            .collect();
        out.push(("oracle_equivalence".into(), self.oracle.checked, self.oracle.violations));
        for (k, t) in &self.monotone {
            out.push((k.label().to_string(), t.checked, t.violations));
        }
        out
    }
}

pub const LEMMA_COLUMNS: [&str; 4] = ["check", "checked", "violations", "status"];

/// Independent ChaCha stream for instance `index` of a check family.
pub fn instance_rng(seed: u64, family: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((family << 32) | index as u64);
    rng
}

/// Random instance: `n ∈ [1, max_n]` points in `[0,1]^dim` (`dim ≤ 3`),
/// q ∈ {1, 2, ∞}, random positive weights, and random `(f, g, A, M, δ)` with
/// exact zeros mixed into f and g.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize) -> (MetricMeasureSpace, ApproximationData) {
    let n = rng.gen_range(1..=max_n.max(1));
    let dim = rng.gen_range(1..=3);
    let metric = match rng.gen_range(0..3) {
        0 => Metric::l1(),
        1 => Metric::l2(),
        _ => Metric::linf(),
    };
    let coords: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let measure: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    let space = build_space(coords, metric, measure).expect("random coordinates are distinct");
    let cap = rng.gen_range(0.5..3.0);
    let f: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..cap) })
        .collect();
    let g: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.0..3.0) })
        .collect();
    let mut a: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
    if a.is_empty() {
        a.push(rng.gen_range(0..n));
    }
    let data = ApproximationData {
        f: ScalarField::new("f", f),
        g: ScalarField::new("g", g),
        start_set: PointSet::new(a, SetRole::A, n).expect("indices in range"),
        cap,
        delta: rng.gen_range(0.05..0.7),
    };
    (space, data)
}

const PROPERTY_STREAM: u64 = 1;
const ORACLE_STREAM: u64 = 2;
const MONOTONE_STREAM: u64 = 3;

pub fn run_lemma_suite(config: &ExperimentConfig) -> Result<LemmaSuiteResult> {
    let lc = config.lemma_suite.clone().unwrap_or_default();
    let mode = if lc.negate_cost {
        CostMode::Negated
    } else {
        CostMode::Faithful
    };
    let seed = config.seed;

    let reports: Vec<PropertyReport> = (0..lc.instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, PROPERTY_STREAM, i);
            let (space, data) = random_instance(&mut rng, lc.max_n);
            let ft = approximate_with(&space, &data, mode)?;
            Ok(verify_properties(&space, &data, &ft, lc.path_samples, &mut rng))
        })
        .collect::<Result<_>>()?;
    let mut properties = PropertyReport::default();
    for r in &reports {
        properties.merge(r);
    }

    let oracle_counts: Vec<CheckTally> = (0..lc.oracle_instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, ORACLE_STREAM, i);
            let (space, data) = random_instance(&mut rng, lc.oracle_max_n);
            let fast = approximate_with(&space, &data, mode)?;
            let slow = brute_force_f_tilde(&space, &data, space.len())?;
            Ok(CheckTally {
                checked: space.len(),
                violations: fast
                    .values
                    .iter()
                    .zip(&slow.values)
                    .filter(|(a, b)| a.to_bits() != b.to_bits())
                    .count(),
            })
        })
        .collect::<Result<_>>()?;
    let oracle = oracle_counts.iter().fold(CheckTally::default(), |acc, t| CheckTally {
        checked: acc.checked + t.checked,
        violations: acc.violations + t.violations,
    });

    let pair_counts: Vec<Vec<CheckTally>> = (0..lc.monotone_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, MONOTONE_STREAM, i);
            let (space, data) = random_instance(&mut rng, lc.max_n);
            let base = approximate_with(&space, &data, mode)?;
            Perturbation::ALL
                .iter()
                .map(|&pert| {
                    let moved = pert.apply(&data, &mut rng);
                    let ft = approximate_with(&space, &moved, mode)?;
                    Ok(CheckTally {
                        checked: space.len(),
                        violations: ft
                            .values
                            .iter()
                            .zip(&base.values)
                            .filter(|(after, before)| after < before)
                            .count(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut monotone: BTreeMap<Perturbation, CheckTally> = BTreeMap::new();
    for per_pair in &pair_counts {
        for (&pert, t) in Perturbation::ALL.iter().zip(per_pair) {
            let e = monotone.entry(pert).or_default();
            e.checked += t.checked;
            e.violations += t.violations;
        }
    }

    Ok(LemmaSuiteResult {
        properties,
        instances: lc.instances,
        oracle,
        oracle_instances: lc.oracle_instances,
        monotone,
        monotone_pairs: lc.monotone_pairs,
    })
}

pub fn write_lemma_suite<W: Write>(w: W, meta: &OutputMeta, result: &LemmaSuiteResult) -> Result<()> {
    write_csv(
        w,
        meta,
        &LEMMA_COLUMNS,
        result.lines().into_iter().map(|(name, checked, violations)| {
            vec![
                name,
                checked.to_string(),
                violations.to_string(),
                if violations == 0 { "pass" } else { "fail" }.to_string(),
            ]
        }),
    )
}

// ---------------------------------------------------------------------------
// poincare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NotionSpec {
    LipAScale(f64),
    LipScale(f64),
    Supplied(FieldExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BallSpec {
    List { balls: Vec<(usize, f64)> },
    /// Centres every `stride` points, radii `r0·ratioᵏ` for `k < count`.
    Grid {
        stride: usize,
        r0: f64,
        ratio: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareConfig {
    pub space: SpaceSource,
    pub field: FieldExpr,
    pub notions: Vec<NotionSpec>,
    pub lambdas: Vec<f64>,
    #[serde(default = "default_one")]
    pub c: f64,
    pub balls: BallSpec,
}

impl Default for PoincareConfig {
    /// u(x) = x on 5000 samples of [0, 1], one ball covering the interval.
    fn default() -> Self {
        let n = 5000;
        PoincareConfig {
            space: SpaceSource::Interval { n },
            field: FieldExpr::Linear {
                coeffs: vec![1.0],
                offset: 0.0,
            },
            notions: vec![
                NotionSpec::Supplied(FieldExpr::Constant { value: 1.0 }),
                NotionSpec::LipAScale(3.0 / n as f64),
                NotionSpec::LipScale(3.0 / n as f64),
            ],
            lambdas: vec![1.0, 2.0],
            c: 1.0,
            balls: BallSpec::List {
                balls: vec![(n / 2, 0.5 + 1.0 / n as f64)],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareResult {
    pub reports: Vec<PoincareReport>,
    /// `(Λ, r, minimal C for lip_a at r, minimal C for lip at r)` for each scale carried by both notions.
    pub ordering: Vec<(f64, f64, f64, f64)>,
}

impl PoincareResult {
    pub fn ordering_holds(&self) -> bool {
        self.ordering.iter().all(|&(_, _, a, l)| a <= l)
    }

    pub fn summary_json(&self, meta: &OutputMeta) -> serde_json::Value {
        serde_json::json!({
            "meta": meta.to_json(),
            "minimal_c": self.reports.iter().map(|r| serde_json::json!({
                "notion": r.notion,
                "lambda": r.lambda,
                "p": r.p,
                "minimal_c": json_f64(r.minimal_c),
                "holds_for_c": r.holds,
            })).collect::<Vec<_>>(),
            "ordering": self.ordering.iter().map(|&(lambda, r, a, l)| serde_json::json!({
                "lambda": lambda,
                "scale": r,
                "lip_a_minimal_c": json_f64(a),
                "lip_minimal_c": json_f64(l),
                "holds": a <= l,
            })).collect::<Vec<_>>(),
        })
    }
}

pub const POINCARE_COLUMNS: [&str; 8] = [
    "notion",
    "lambda",
    "ball_center",
    "radius",
    "lhs",
    "rhs",
    "slack",
    "minimal_C",
];

pub fn run_poincare(config: &ExperimentConfig) -> Result<PoincareResult> {
    let pc = config.poincare.clone().unwrap_or_default();
    let loaded = pc.space.load()?;
    let space = &loaded.space;
    let u = pc.field.evaluate(&loaded, "u")?;
    let balls = match &pc.balls {
        BallSpec::List { balls } => balls.clone(),
        BallSpec::Grid {
            stride,
            r0,
            ratio,
            count,
        } => geometric_ball_grid(space.len(), *stride, *r0, *ratio, *count),
    };
    let notions: Vec<GradientNotion> = pc
        .notions
        .iter()
        .map(|spec| {
            Ok(match spec {
                NotionSpec::LipAScale(r) => GradientNotion::LipAScale(*r),
                NotionSpec::LipScale(r) => GradientNotion::LipScale(*r),
                NotionSpec::Supplied(expr) => GradientNotion::Supplied(expr.evaluate(&loaded, "g")?),
            })
        })
        .collect::<Result<_>>()?;
    let grads: Vec<ScalarField> = notions
        .iter()
        .map(|n| n.field(space, &u))
        .collect::<Result<_>>()?;

    let mut reports = Vec::new();
    for &lambda in &pc.lambdas {
        let params = PoincareParams::new(config.p, pc.c, lambda)?;
        for (notion, grad) in notions.iter().zip(&grads) {
            reports.push(poincare_with_field(space, &u, grad, &notion.label(), params, &balls)?);
        }
    }

    let mut ordering = Vec::new();
    for &lambda in &pc.lambdas {
        for na in &notions {
            let GradientNotion::LipAScale(r) = na else { continue };
            let find = |label: String| {
                reports
                    .iter()
                    .find(|rep| rep.lambda == lambda && rep.notion == label)
                    .map(|rep| rep.minimal_c)
            };
            if let (Some(a), Some(l)) = (
                find(na.label()),
                find(GradientNotion::LipScale(*r).label()),
            ) {
                ordering.push((lambda, *r, a, l));
            }
        }
    }
    Ok(PoincareResult { reports, ordering })
}

pub fn write_poincare<W: Write>(w: W, meta: &OutputMeta, result: &PoincareResult) -> Result<()> {
    write_csv(
        w,
        meta,
        &POINCARE_COLUMNS,
        result.reports.iter().flat_map(|rep| {
            rep.rows.iter().map(move |row| {
                vec![
                    rep.notion.clone(),
                    fmt_f64(rep.lambda),
                    row.center.to_string(),
                    fmt_f64(row.radius),
                    fmt_f64(row.lhs),
                    fmt_f64(row.rhs),
                    fmt_f64(row.slack),
                    fmt_f64(row.minimal_c),
                ]
            })
        }),
    )
}
