//! Integer-valued binomial-chain epidemic, used to generate misspecified data.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::scenario::{scenario_beta, RateTransform, ScenarioSpec};
use crate::dist::std_normal;
use crate::error::{Error, Result};
use crate::link::Link;
use crate::model::{Observations, Population};

/// Integer compartments `(S, I_U, I_D, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountState {
    pub s: u64,
    pub i_u: u64,
    pub i_d: u64,
    pub r: u64,
}

impl CountState {
    pub fn total(&self) -> u64 {
        self.s + self.i_u + self.i_d + self.r
    }
}

/// Transitions out of one day: new infections `a`, diagnoses `b`,
/// undocumented removals `c`, documented removals `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transitions {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n, p.min(1.0)).expect("valid binomial").sample(rng)
}

/// Draws one day of transitions from state `v`.
pub fn binomial_step<R: Rng + ?Sized>(
    v: &CountState,
    beta: f64,
    gamma: f64,
    alpha: f64,
    population: f64,
    rng: &mut R,
) -> Transitions {
    let p_inf = -(-beta * (v.i_u + v.i_d) as f64 / population).exp_m1();
    let p_rem = -(-alpha).exp_m1();
    let a = binomial(v.s, p_inf, rng);
    let c = binomial(v.i_u, p_rem, rng);
    let b = binomial(v.i_u - c, -(-gamma).exp_m1(), rng);
    let d = binomial(v.i_d, p_rem, rng);
    Transitions { a, b, c, d }
}

pub fn apply(v: &CountState, tr: &Transitions) -> CountState {
    CountState {
        s: v.s - tr.a,
        i_u: v.i_u + tr.a - tr.b - tr.c,
        i_d: v.i_d + tr.b - tr.d,
        r: v.r + tr.c + tr.d,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticTruth {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: f64,
    pub states: Vec<CountState>,
    pub transitions: Vec<Transitions>,
}

impl StochasticTruth {
    /// One row per day: the state at the start of the day and the
    /// transitions out of it.
    pub fn write_csv<W: std::io::Write>(&self, w: W, obs: &Observations) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["day", "date", "beta", "gamma", "s", "i_u", "i_d", "r", "infected", "diagnosed", "removed_u", "removed_d"])?;
        for (t, tr) in self.transitions.iter().enumerate() {
            let v = &self.states[t];
            wtr.write_record([
                t.to_string(),
                obs.date(t).to_string(),
                self.beta[t].to_string(),
                self.gamma[t].to_string(),
                v.s.to_string(),
                v.i_u.to_string(),
                v.i_d.to_string(),
                v.r.to_string(),
                tr.a.to_string(),
                tr.b.to_string(),
                tr.c.to_string(),
                tr.d.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs the chain for `beta.len()` days and returns states `0..=T` together
/// with the transitions drawn on each day.
pub fn binomial_chain<R: Rng + ?Sized>(
    v0: CountState,
    beta: &[f64],
    gamma: &[f64],
    alpha: f64,
    rng: &mut R,
) -> (Vec<CountState>, Vec<Transitions>) {
    let population = v0.total() as f64;
    let mut states = Vec::with_capacity(beta.len());
    let mut transitions = Vec::with_capacity(beta.len());
    let mut v = v0;
    for (t, (&b, &g)) in beta.iter().zip(gamma).enumerate() {
        states.push(v);
        let tr = binomial_step(&v, b, g, alpha, population, rng);
        transitions.push(tr);
        if t + 1 < beta.len() {
            v = apply(&v, &tr);
        }
    }
    (states, transitions)
}

/// Binomial-chain counterpart of scenario generation. Diagnosis rates are
/// drawn as in the deterministic generator; observed counts are the daily
/// diagnoses, with zero days replaced by `spec.zero_floor`.
pub fn stochastic_generate<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<(Observations, StochasticTruth)> {
    let beta = scenario_beta(spec)?;
    let round = |x: f64| -> Result<u64> {
        if x.fract() != 0.0 || x < 0.0 {
            return Err(Error::Config(format!("binomial chain needs integer compartments, got {x}")));
        }
        Ok(x as u64)
    };
    let i_u = round(spec.i_u0)?;
    let i_d = round(spec.i_d0)?;
    let n = round(spec.population)?;
    let v0 = CountState { s: n - i_u - i_d, i_u, i_d, r: 0 };
    let link = match spec.transform {
        RateTransform::Cloglog => Link::Cloglog,
        RateTransform::Logit => Link::Logit,
    };
    let gamma: Vec<f64> = beta
        .iter()
        .map(|_| link.inverse(spec.gamma_mean_tilde + spec.gamma_sd * std_normal(rng)))
        .collect();
    let (states, transitions) = binomial_chain(v0, &beta, &gamma, spec.alpha, rng);
    let cases = transitions
        .iter()
        .map(|t| if t.b == 0 { spec.zero_floor } else { t.b as f64 })
        .collect();
    let obs = Observations::new(cases, spec.i_d0, Population::new(spec.population)?, spec.day0)?;
    Ok((obs, StochasticTruth { beta, gamma, alpha: spec.alpha, states, transitions }))
}
