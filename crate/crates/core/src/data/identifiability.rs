//! Two epidemic processes with different removal rates that produce the same
//! confirmed-case series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CompartmentState, Population};

/// A fully specified process with its observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Process {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub cases: Vec<f64>,
    pub states: Vec<CompartmentState>,
    pub re: Vec<f64>,
}

/// Forward-simulates `B_t = gamma_t (1 - alpha) I_U_t`.
pub fn simulate_process(
    v0: CompartmentState,
    beta: &[f64],
    gamma: &[f64],
    alpha: f64,
    population: Population,
) -> Result<Process> {
    if beta.len() != gamma.len() || beta.is_empty() {
        return Err(Error::Dimension("beta and gamma need the same non-zero length".into()));
    }
    let n = population.get();
    let mut states = Vec::with_capacity(beta.len());
    let mut cases = Vec::with_capacity(beta.len());
    let mut v = v0;
    for t in 0..beta.len() {
        let b = gamma[t] * (1.0 - alpha) * v.i_u;
        states.push(v);
        cases.push(b);
        if t + 1 < beta.len() {
            v = v.step(beta[t], b, alpha, n);
            if let Some((compartment, value)) = v.negative_compartment() {
                return Err(Error::InfeasibleTrajectory { t: t + 1, compartment, value });
            }
        }
    }
    let re = states.iter().zip(beta).map(|(s, b)| b * s.s / (alpha * n)).collect();
    Ok(Process { alpha, beta: beta.to_vec(), gamma: gamma.to_vec(), cases, states, re })
}

/// Builds a second process with removal rate `alpha2` and the same initial
/// state whose daily confirmed counts equal those of `base`.
///
/// The second diagnosis rate is `gamma_2 = gamma_1 (1 - alpha_1) / (1 - alpha_2)`,
/// and each `beta_{2,t}` is chosen so that `I_U_{2,t+1} = I_U_{1,t+1}`; the
/// last rate uses the base dynamics continued one more day.
pub fn identifiability_counterexample(base: &Process, alpha2: f64, population: Population) -> Result<Process> {
    if !(alpha2 > 0.0 && alpha2 < 1.0) {
        return Err(Error::Config(format!("alpha2 must lie in (0, 1), got {alpha2}")));
    }
    if alpha2 == base.alpha {
        return Ok(base.clone());
    }
    let n = population.get();
    let a1 = base.alpha;
    let len = base.beta.len();
    let gamma: Vec<f64> = base.gamma.iter().map(|g| g * (1.0 - a1) / (1.0 - alpha2)).collect();
    if let Some((t, g)) = gamma.iter().enumerate().find(|(_, g)| !(**g > 0.0 && **g < 1.0)) {
        return Err(Error::Infeasible(format!("second diagnosis rate on day {t} is {g}, outside (0, 1)")));
    }
    let mut beta = Vec::with_capacity(len);
    let mut states = Vec::with_capacity(len);
    let mut cases = Vec::with_capacity(len);
    let mut v = base.states[0];
    for t in 0..len {
        let b = gamma[t] * (1.0 - alpha2) * v.i_u;
        states.push(v);
        cases.push(b);
        let base_next = if t + 1 < len {
            base.states[t + 1]
        } else {
            base.states[t].step(base.beta[t], base.cases[t], a1, n)
        };
        let pressure = v.s * (v.i_u + v.i_d) / n;
        let needed = base_next.i_u - (1.0 - alpha2) * v.i_u + b;
        let beta_t = needed / pressure;
        if !(beta_t > 0.0 && beta_t.is_finite()) {
            return Err(Error::Infeasible(format!("second transmission rate on day {t} is {beta_t}")));
        }
        beta.push(beta_t);
        if t + 1 < len {
            v = v.step(beta_t, b, alpha2, n);
            if let Some((compartment, value)) = v.negative_compartment() {
                return Err(Error::InfeasibleTrajectory { t: t + 1, compartment, value });
            }
        }
    }
    let re = states.iter().zip(&beta).map(|(s, b)| b * s.s / (alpha2 * n)).collect();
    Ok(Process { alpha: alpha2, beta, gamma, cases, states, re })
}

/// Settings of the worked two-process example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSpec {
    pub population: f64,
    pub i_u0: f64,
    pub i_d0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub gamma1: f64,
    pub n_days: usize,
}

impl Default for DemoSpec {
    fn default() -> Self {
        Self {
            population: 2e7,
            i_u0: 800.0,
            i_d0: 100.0,
            alpha1: 0.3,
            alpha2: 0.05,
            gamma1: 0.2,
            // Later days of the declining wave would need a negative second
            // transmission rate.
            n_days: 60,
        }
    }
}

/// Runs the worked example; the base transmission rate follows the first
/// simulation scenario's `R0(t)` scaled by `alpha1`.
pub fn identifiability_demo(spec: &DemoSpec) -> Result<(Process, Process)> {
    let population = Population::new(spec.population)?;
    let k = super::scenario::scenario_constants(super::scenario::ScenarioId::Scn1)?;
    let beta: Vec<f64> = (0..spec.n_days)
        .map(|t| spec.alpha1 * super::scenario::scenario_r0(super::scenario::ScenarioId::Scn1, k, t))
        .collect();
    let v0 = CompartmentState::initial(population, spec.i_u0, spec.i_d0);
    let base = simulate_process(v0, &beta, &vec![spec.gamma1; spec.n_days], spec.alpha1, population)?;
    let second = identifiability_counterexample(&base, spec.alpha2, population)?;
    Ok((base, second))
}
