//! Posterior predictive simulation of future confirmed cases and Re(t).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignKind;
use crate::dist::std_normal;
use crate::error::{Error, Result};
use crate::gp::{gp_conditional, gp_sample_conditional};
use crate::link::Link;
use crate::model::{propagate, CompartmentState, Observations};
use crate::sampler::PosteriorDraws;
use crate::state::ParameterState;
use crate::stats::{quantile_sorted, sorted};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub horizon: usize,
    pub seed: u64,
    pub link: Link,
    pub gp_design: DesignKind,
    pub diagnosis_design: DesignKind,
}

impl ForecastConfig {
    pub fn new(horizon: usize, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            link: Link::Logit,
            gp_design: DesignKind::InterceptTime,
            diagnosis_design: DesignKind::Intercept,
        }
    }

    /// Takes the link and designs from the prior the draws were fitted with.
    pub fn for_prior(horizon: usize, seed: u64, prior: &crate::priors::PriorConfig) -> Self {
        Self {
            horizon,
            seed,
            link: prior.link,
            gp_design: prior.gp_design,
            diagnosis_design: prior.diagnosis_design,
        }
    }
}

/// Predictive draws for days `T+1 ..= T+horizon`, one row per posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastDraws {
    pub first_day: usize,
    pub cases: Vec<Vec<f64>>,
    pub re: Vec<Vec<f64>>,
    /// Posterior draws dropped because their fitted path was infeasible.
    pub skipped: usize,
}

/// One day of dynamics with new infections capped at `S`.
fn clamped_step(v: &CompartmentState, beta: f64, cases: f64, alpha: f64, n: f64) -> CompartmentState {
    let new = (beta * v.s * (v.i_u + v.i_d) / n).min(v.s);
    CompartmentState {
        s: v.s - new,
        i_u: (1.0 - alpha) * v.i_u + new - cases,
        i_d: (1.0 - alpha) * v.i_d + cases,
        r: v.r + alpha * (v.i_u + v.i_d),
    }
}

fn forecast_one(
    theta: &ParameterState,
    obs: &Observations,
    cfg: &ForecastConfig,
    rng: &mut impl rand::Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_obs = obs.n_days();
    let h = cfg.horizon;
    let x = cfg.gp_design.build(0, n_obs);
    let x_star = cfg.gp_design.build(n_obs, h);
    let y_star = cfg.diagnosis_design.build(n_obs, h);
    let cond = gp_conditional(&theta.beta_tilde, &theta.gp_spec(&x), &x_star)?;
    let beta_star: Vec<f64> = gp_sample_conditional(&cond, rng)?.iter().map(|b| b.exp()).collect();

    let params = theta.epidemic_params(obs.i_d0);
    let v0 = CompartmentState::initial(obs.population, params.i_u0, obs.i_d0);
    let traj = propagate(v0, &params, &obs.cases, obs.population)?;
    let alpha = params.alpha;
    let n = obs.population.get();
    let last = obs.last_day();
    let mut v = clamped_step(&traj.states[last], params.beta[last], obs.cases[last], alpha, n);
    let sd = theta.sigma_gamma2.sqrt();
    let mut cases = Vec::with_capacity(h);
    let mut re = Vec::with_capacity(h);
    for k in 0..h {
        let g = cfg.link.inverse(y_star.row_dot(k, &theta.eta) + sd * std_normal(rng));
        let cap = ((1.0 - alpha) * v.i_u).max(0.0);
        let b = (g * cap).clamp(0.0, cap);
        cases.push(b);
        re.push(beta_star[k] * v.s / (alpha * n));
        v = clamped_step(&v, beta_star[k], b, alpha, n);
    }
    Ok((cases, re))
}

/// Simulates the predictive distribution of the next `cfg.horizon` days.
///
/// Each posterior draw gets its own ChaCha stream keyed by `(seed, draw index)`.
pub fn forecast(draws: &PosteriorDraws, obs: &Observations, cfg: &ForecastConfig) -> Result<ForecastDraws> {
    if cfg.horizon == 0 {
        return Err(Error::Config("forecast horizon must be at least 1".into()));
    }
    if draws.is_empty() {
        return Err(Error::Dimension("no posterior draws".into()));
    }
    if draws.draws[0].n_days() != obs.n_days() {
        return Err(Error::Dimension(format!(
            "draws cover {} days but the dataset has {}",
            draws.draws[0].n_days(),
            obs.n_days()
        )));
    }
    let results: Vec<Option<(Vec<f64>, Vec<f64>)>> = draws
        .draws
        .par_iter()
        .enumerate()
        .map(|(i, theta)| {
            let mut rng = crate::sampler::stream_rng(cfg.seed, i as u64);
            forecast_one(theta, obs, cfg, &mut rng).ok()
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    if skipped == results.len() {
        return Err(Error::Infeasible("no posterior draw gives a feasible path".into()));
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} draws with infeasible fitted paths");
    }
    let (cases, re) = results.into_iter().flatten().unzip();
    Ok(ForecastDraws { first_day: obs.n_days(), cases, re, skipped })
}

/// Median and central 95% band per forecast day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub day: Vec<usize>,
    pub median: Vec<f64>,
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
}

impl BandSummary {
    pub fn from_rows(rows: &[Vec<f64>], first_day: usize) -> Self {
        let h = rows.first().map_or(0, Vec::len);
        let mut out = Self { day: vec![], median: vec![], lo95: vec![], hi95: vec![] };
        for k in 0..h {
            let s = sorted(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
            out.day.push(first_day + k);
            out.median.push(quantile_sorted(&s, 0.5));
            out.lo95.push(quantile_sorted(&s, 0.025));
            out.hi95.push(quantile_sorted(&s, 0.975));
        }
        out
    }

    pub fn width(&self, k: usize) -> f64 {
        self.hi95[k] - self.lo95[k]
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W, obs: &Observations) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["day", "date", "median", "lo95", "hi95"])?;
        for k in 0..self.day.len() {
            wtr.write_record([
                self.day[k].to_string(),
                obs.date(self.day[k]).to_string(),
                self.median[k].to_string(),
                self.lo95[k].to_string(),
                self.hi95[k].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl ForecastDraws {
    pub fn cases_summary(&self) -> BandSummary {
        BandSummary::from_rows(&self.cases, self.first_day)
    }

    pub fn re_summary(&self) -> BandSummary {
        BandSummary::from_rows(&self.re, self.first_day)
    }

    /// Full `draws x horizon` matrix as CSV.
    pub fn write_matrix_csv<W: std::io::Write>(rows: &[Vec<f64>], first_day: usize, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let h = rows.first().map_or(0, Vec::len);
        wtr.write_record((0..h).map(|k| format!("day_{}", first_day + k)))?;
        for r in rows {
            wtr.write_record(r.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Splits after day `t_star`: training days `0..=t_star`, test days after.
pub fn train_test_split(obs: &Observations, t_star: usize) -> Result<(Observations, Observations)> {
    let last = obs.last_day();
    if t_star == 0 || t_star >= last {
        return Err(Error::Index { index: t_star, range: format!("1..{last}") });
    }
    let train = Observations::new(obs.cases[..=t_star].to_vec(), obs.i_d0, obs.population, obs.day0)?;
    let test = Observations::new(obs.cases[t_star + 1..].to_vec(), obs.i_d0, obs.population, obs.date(t_star + 1))?;
    Ok((train, test))
}
