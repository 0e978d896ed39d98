//! Bayesian inference for a discrete-time SIR model with undocumented
//! infections.
//!
//! Daily confirmed cases drive a deterministic compartment recursion; the log
//! transmission rate gets a Gaussian-process prior and the link-scale
//! diagnosis rates a normal regression. [`sampler::run_sampler`] explores the
//! posterior with parallel tempering, [`forecast::forecast`] projects it
//! forward and [`diagnostics`] checks convergence and fit.

pub mod data;
pub mod design;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod forecast;
pub mod gp;
pub mod link;
pub mod model;
pub mod priors;
pub mod sampler;
pub mod state;
pub mod stats;

pub use data::Dataset;
pub use design::{Design, DesignKind};
pub use error::{Error, Result};
pub use forecast::{ForecastConfig, ForecastDraws};
pub use link::Link;
pub use model::{CompartmentState, EpidemicParams, Observations, Population, Trajectory};
pub use priors::PriorConfig;
pub use sampler::{fit_observations, PosteriorDraws, SamplerConfig, TemperatureLadder};
pub use state::ParameterState;
