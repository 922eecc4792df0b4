//! Gerber-Shiu risk functionals for spectrally negative Lévy surplus processes.
//!
//! The surplus is modelled as `X_t = x + μt + σB_t − Σ Z_n` with compound
//! Poisson claims. When the claim law is phase-type (in particular
//! hyperexponential) the scale function `W^(q)` is a finite exponential sum,
//! and the discounted joint law of the deficit at ruin and the surplus prior
//! to ruin has a closed form. A first-passage Monte Carlo engine provides an
//! independent check and handles claim laws without a rational exponent
//! (Weibull, Pareto).
//!
//! Module map:
//! - [`model`]: claim laws, the surplus process and its Laplace exponent `ψ`.
//! - [`roots`]: solves `ψ(s) = q` and builds the [`ScaleBasis`].
//! - [`scale`]: `W^(q)`, `Z^(q)`, exit identities and the killed resolvent.
//! - [`gerbershiu`]: the Gerber-Shiu measure, marginal densities and costs.
//! - [`montecarlo`]: reproducible path simulation to ruin.
//! - [`compare`]: binned analytic-versus-simulation comparison.
//! - [`fixtures`]: the shipped hyperexponential fits and reference models.

// `!(a > b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod error;
pub mod fixtures;
pub mod gerbershiu;
pub mod model;
pub mod montecarlo;
mod poly;
pub mod quadrature;
pub mod roots;
pub mod scale;

pub use error::{Error, Result};
pub use gerbershiu::{CostFamily, CostFunction, DeficitWindow, GerberShiu, GerberShiuQuery, GsEstimate, PreRuinWindow};
pub use model::{HyperExpParams, JumpLaw, LevyModel, ModelConfig, PhaseTypeParams, Variation};
pub use montecarlo::{DensityEstimate, RuinRecord, SimConfig};
pub use roots::{NegativeRoot, ScaleBasis};
pub use scale::ScaleFunction;

pub use num_complex::Complex64;
