//! Parallel-tempering Metropolis-within-Gibbs sampler.

mod chain;
mod config;
mod latent;
mod output;
mod run;

pub use chain::{initial_state, tempered_log_target, BlockScales, ChainState, SweepAccepts, Target};
pub use config::{ProposalScales, SamplerConfig, TemperatureLadder};
pub use latent::{EpidemicLatent, FixedLogits, LatentModel, Workspace};
pub use output::{AcceptanceRates, ParamSummary, PosteriorDraws, PosteriorSummary, ReBand};
pub use run::{pt_swap, stream_rng, run_plain, run_sampler, swap_log_acceptance, swap_probability};


use crate::error::Result;
use crate::model::Observations;
use crate::priors::PriorConfig;

/// Fits the epidemic model to `obs` with the given prior and sampler settings.
pub fn fit_observations(obs: &Observations, prior: &PriorConfig, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    let n = obs.n_days();
    let model = EpidemicLatent::new(obs.clone(), prior.link);
    let prepared = prior.prepare()?;
    let gp = prior.gp_design.build(0, n);
    let diag = prior.diagnosis_design.build(0, n);
    let target = Target::new(&model, &prepared, &gp, &diag)?;
    run_sampler(&target, cfg)
}
