//! Compartment dynamics with undocumented infections and the observation likelihood.
//!
//! Day `t` carries four real-valued compartments: susceptible `S`, undocumented
//! infectious `I_U`, documented infectious `I_D` and removed `R`. Given the
//! transmission rates `beta_t`, the removal rate `alpha` and the observed
//! number of new confirmed cases `B_t`, one day of dynamics is
//!
//! ```text
//! new  = beta_{t-1} * S_{t-1} * (I_U_{t-1} + I_D_{t-1}) / N
//! S_t   = S_{t-1} - new
//! I_U_t = (1 - alpha) * I_U_{t-1} + new - B_{t-1}
//! I_D_t = (1 - alpha) * I_D_{t-1} + B_{t-1}
//! R_t   = R_{t-1} + alpha * (I_U_{t-1} + I_D_{t-1})
//! ```
//!
//! The observation model ties `B_t` to the latent state through the diagnosis
//! rate `gamma_t = B_t / ((1 - alpha) * I_U_t)`, whose link-transform is normal
//! around `y_t' eta` with variance `sigma_gamma^2`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::dist::normal_ln_pdf;
use crate::error::{Error, Result};
use crate::link::Link;

/// Population size, constant over the analysis window.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Population(f64);

impl Population {
    pub fn new(n: f64) -> Result<Self> {
        if n > 0.0 && n.is_finite() {
            Ok(Self(n))
        } else {
            Err(Error::Config(format!("population must be positive, got {n}")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompartmentState {
    pub s: f64,
    pub i_u: f64,
    pub i_d: f64,
    pub r: f64,
}

impl CompartmentState {
    pub fn new(s: f64, i_u: f64, i_d: f64, r: f64) -> Self {
        Self { s, i_u, i_d, r }
    }

    /// Day-0 state with nobody removed yet.
    pub fn initial(population: Population, i_u0: f64, i_d0: f64) -> Self {
        Self {
            s: population.get() - i_u0 - i_d0,
            i_u: i_u0,
            i_d: i_d0,
            r: 0.0,
        }
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.s + self.i_u + self.i_d + self.r
    }

    #[inline]
    pub fn infectious(&self) -> f64 {
        self.i_u + self.i_d
    }

    /// Name of the first negative compartment, if any.
    pub fn negative_compartment(&self) -> Option<(&'static str, f64)> {
        [("S", self.s), ("I_U", self.i_u), ("I_D", self.i_d), ("R", self.r)]
            .into_iter()
            .find(|&(_, v)| v < 0.0 || v.is_nan())
    }

    /// One day of the dynamics using yesterday's transmission rate and case count.
    #[inline]
    pub fn step(&self, beta: f64, cases: f64, alpha: f64, population: f64) -> Self {
        let infectious = self.i_u + self.i_d;
        let new_infections = beta * self.s * infectious / population;
        let keep = 1.0 - alpha;
        Self {
            s: self.s - new_infections,
            i_u: keep * self.i_u + new_infections - cases,
            i_d: keep * self.i_d + cases,
            r: self.r + alpha * infectious,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<CompartmentState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest `|S + I_U + I_D + R - N|` over the path.
    pub fn max_mass_error(&self, population: Population) -> f64 {
        self.states
            .iter()
            .map(|s| (s.total() - population.get()).abs())
            .fold(0.0, f64::max)
    }
}

/// Daily new confirmed cases aligned so that day 0 is the first day with at
/// least 100 cumulative confirmed cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    /// `B_0 ..= B_T`.
    pub cases: Vec<f64>,
    /// Documented infectious count on day 0.
    pub i_d0: f64,
    pub population: Population,
    pub day0: NaiveDate,
}

impl Observations {
    pub fn new(cases: Vec<f64>, i_d0: f64, population: Population, day0: NaiveDate) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::Dimension("observations need at least one day".into()));
        }
        if let Some((t, b)) = cases.iter().enumerate().find(|(_, b)| !(**b >= 0.0 && b.is_finite())) {
            return Err(Error::Config(format!("case count B_{t} = {b} is not a non-negative number")));
        }
        if !(i_d0 > 0.0) {
            return Err(Error::Config(format!("I_D0 must be positive, got {i_d0}")));
        }
        Ok(Self {
            cases,
            i_d0,
            population,
            day0,
        })
    }

    /// Number of days `T + 1`.
    pub fn n_days(&self) -> usize {
        self.cases.len()
    }

    /// Index of the last observed day, `T`.
    pub fn last_day(&self) -> usize {
        self.cases.len() - 1
    }

    pub fn date(&self, t: usize) -> NaiveDate {
        self.day0 + chrono::Days::new(t as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub i_u0: f64,
    /// Per-day transmission rates `beta_0 ..= beta_T`.
    pub beta: Vec<f64>,
    pub alpha: f64,
}

impl EpidemicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.i_u0 > 0.0) {
            return Err(Error::Config(format!("I_U0 must be positive, got {}", self.i_u0)));
        }
        if let Some(b) = self.beta.iter().find(|b| !(**b > 0.0)) {
            return Err(Error::Config(format!("transmission rates must be positive, got {b}")));
        }
        Ok(())
    }
}

/// Runs the dynamics from `v0` for `params.beta.len()` days (states `0..=T`).
///
/// Only `B_0 ..= B_{T-1}` and `beta_0 ..= beta_{T-1}` influence the path.
pub fn propagate(
    v0: CompartmentState,
    params: &EpidemicParams,
    cases: &[f64],
    population: Population,
) -> Result<Trajectory> {
    let n_states = params.beta.len();
    if n_states == 0 {
        return Err(Error::Dimension("need at least one transmission rate".into()));
    }
    if cases.len() + 1 < n_states {
        return Err(Error::Dimension(format!(
            "{} case counts cannot drive {} states",
            cases.len(),
            n_states
        )));
    }
    let mut states = Vec::with_capacity(n_states);
    check_feasible(0, &v0)?;
    states.push(v0);
    for t in 1..n_states {
        let next = states[t - 1].step(params.beta[t - 1], cases[t - 1], params.alpha, population.get());
        check_feasible(t, &next)?;
        states.push(next);
    }
    Ok(Trajectory { states })
}

#[inline]
fn check_feasible(t: usize, state: &CompartmentState) -> Result<()> {
    match state.negative_compartment() {
        Some((compartment, value)) => Err(Error::InfeasibleTrajectory { t, compartment, value }),
        None => Ok(()),
    }
}

/// Basic and effective reproduction numbers on one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub basic: f64,
    pub effective: f64,
}

pub fn reproduction_numbers(
    traj: &Trajectory,
    params: &EpidemicParams,
    population: Population,
) -> Vec<Reproduction> {
    traj.states
        .iter()
        .zip(&params.beta)
        .map(|(state, &beta)| Reproduction {
            basic: beta / params.alpha,
            effective: beta * state.s / (params.alpha * population.get()),
        })
        .collect()
}

/// Diagnosis rate `B_t / ((1 - alpha) I_U_t)` when it lies in (0, 1).
#[inline]
pub fn diagnosis_rate(cases: f64, i_u: f64, alpha: f64) -> Option<f64> {
    let gamma = cases / ((1.0 - alpha) * i_u);
    (gamma > 0.0 && gamma < 1.0).then_some(gamma)
}

/// Link-transformed diagnosis rates for every observed day, or `None` when the
/// trajectory is infeasible or some rate leaves (0, 1).
pub fn diagnosis_logits(params: &EpidemicParams, obs: &Observations, link: Link) -> Option<Vec<f64>> {
    let v0 = CompartmentState::initial(obs.population, params.i_u0, obs.i_d0);
    let traj = propagate(v0, params, &obs.cases, obs.population).ok()?;
    traj.states
        .iter()
        .zip(&obs.cases)
        .map(|(s, &b)| diagnosis_rate(b, s.i_u, params.alpha).map(|g| link.forward_unchecked(g)))
        .collect()
}

/// `sum_t log N(link(gamma_t); y_t' eta, sigma_gamma2)`; `-inf` when infeasible.
///
/// No Jacobian from `B_t` to the transformed rate is included.
pub fn log_likelihood(
    params: &EpidemicParams,
    eta: &[f64],
    sigma_gamma2: f64,
    obs: &Observations,
    link: Link,
    covariates: &Design,
) -> f64 {
    if params.beta.len() != obs.n_days() || covariates.rows() < obs.n_days() {
        return f64::NEG_INFINITY;
    }
    match diagnosis_logits(params, obs, link) {
        Some(logits) => logits
            .iter()
            .enumerate()
            .map(|(t, &x)| normal_ln_pdf(x, covariates.row_dot(t, eta), sigma_gamma2))
            .sum(),
        None => f64::NEG_INFINITY,
    }
}
