//! Shared fixtures for the benchmarks.

use episir::data::{generate_scenario, ScenarioId, ScenarioSpec};
use episir::priors::{default_prior_config, PreparedPrior};
use episir::sampler::{stream_rng, EpidemicLatent};
use episir::{Design, Observations};

/// Scenario-1 observations, fixed seed.
pub fn scenario_obs() -> Observations {
    let spec = ScenarioSpec::new(ScenarioId::Scn1);
    generate_scenario(&spec, &mut stream_rng(1, 0)).expect("scenario 1 generates").obs
}

pub struct Problem {
    pub model: EpidemicLatent,
    pub prior: PreparedPrior,
    pub gp: Design,
    pub diag: Design,
}

pub fn problem() -> Problem {
    let cfg = default_prior_config();
    let obs = scenario_obs();
    let n = obs.n_days();
    Problem {
        model: EpidemicLatent::new(obs, cfg.link),
        prior: cfg.prepare().expect("default prior is valid"),
        gp: cfg.gp_design.build(0, n),
        diag: cfg.diagnosis_design.build(0, n),
    }
}
