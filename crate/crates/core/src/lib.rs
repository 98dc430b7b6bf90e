//! # sobolev-lip
//!
//! Lipschitz approximation of Sobolev-type functions on finite metric
//! measure spaces through generalized shortest paths.
//!
//! Given data `(f, g, A, M, δ)` the approximating function is
//!
//! ```text
//! f̃(x) = min{ M, inf over δ-admissible paths (p₀ ∈ A, …, pₙ = x) of f(p₀) + Σ g(pₖ)·d(pₖ, pₖ₊₁) }
//! ```
//!
//! On a finite space the infimum is a minimum and is computed exactly by a
//! multi-source label-setting pass over the δ-neighborhood graph
//! ([`approximation::approximate`]). The rest of the crate supplies what is
//! needed to check the resulting function:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`space`] | finite metric measure spaces, balls, point sets, compact nests |
//! | [`fields`] | scalar fields, Lᵖ norms, cutoffs, penalty sequences |
//! | [`paths`] | discrete paths, Riemann sums, interpolating curves, curve integrals |
//! | [`approximation`] | f̃, brute-force oracle, sign/truncation/cutoff reductions, δ sweeps |
//! | [`analysis`] | scale-indexed Lipschitz constants, discrete gradients, Poincaré checks |
//! | [`experiments`] | config-driven experiment drivers behind the CLI |

// `!(x > 0.0)` is the NaN-rejecting form used throughout input validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod approximation;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod io;
pub mod paths;
pub mod space;
mod sum;

pub use error::{Error, Result};
pub use fields::{Exponent, ScalarField};
pub use paths::DiscretePath;
pub use space::{CompactNest, Metric, MetricMeasureSpace, Openness, PointSet, SetRole};
