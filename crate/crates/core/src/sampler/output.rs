use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::chain::{BlockScales, ChainState};
use super::config::SamplerConfig;
use crate::error::{Error, Result};
use crate::model::{propagate, reproduction_numbers, CompartmentState, Observations};
use crate::state::ParameterState;
use crate::stats::{mean, quantile_sorted, sorted, variance};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub r0: f64,
    /// Joint `r0`/`eta` move.
    #[serde(default)]
    pub r0_shift: f64,
    pub alpha_inv: f64,
    /// Joint `alpha_inv`/`eta` move.
    #[serde(default)]
    pub alpha_shift: f64,
    /// `alpha_inv` move that keeps the undocumented infections fixed.
    #[serde(default)]
    pub alpha_path: f64,
    pub rho: f64,
    /// Pooled over days.
    pub beta_tilde: f64,
}

/// Thinned draws from the temperature-1 chain.
#[derive(Debug, Clone, Default)]
pub struct PosteriorDraws {
    pub draws: Vec<ParameterState>,
    /// Untempered log-likelihood of each draw.
    pub log_lik: Vec<f64>,
    pub acceptance: AcceptanceRates,
    /// Post-burn-in swap rate between rungs `j` and `j + 1`.
    pub swap_acceptance: Vec<f64>,
    pub final_scales: Option<BlockScales>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n_draws: usize,
    pub params: Vec<ParamSummary>,
    pub acceptance: AcceptanceRates,
    pub swap_acceptance: Vec<f64>,
    pub mean_log_lik: f64,
}

/// Pointwise posterior band of the effective reproduction number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReBand {
    pub day: Vec<usize>,
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PosteriorDraws {
    pub(crate) fn with_capacity(cfg: &SamplerConfig) -> Self {
        Self {
            draws: Vec::with_capacity(cfg.n_draws()),
            log_lik: Vec::with_capacity(cfg.n_draws()),
            ..Default::default()
        }
    }

    pub(crate) fn push(&mut self, state: &ChainState) {
        self.draws.push(state.theta.clone());
        self.log_lik.push(state.log_lik);
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    fn dims(&self) -> (usize, usize, usize) {
        self.draws
            .first()
            .map(|d| (d.mu.len(), d.eta.len(), d.n_days()))
            .unwrap_or((0, 0, 0))
    }

    pub fn column_names(&self) -> Vec<String> {
        let (m, e, n) = self.dims();
        ParameterState::column_names(m, e, n)
    }

    /// Values of one named column across draws.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_names().iter().position(|c| c == name)?;
        Some(self.draws.iter().map(|d| d.to_row()[idx]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = self.column_names();
        header.push("log_lik".into());
        wtr.write_record(&header)?;
        for (d, l) in self.draws.iter().zip(&self.log_lik) {
            let mut row: Vec<String> = d.to_row().iter().map(|v| format!("{v:e}")).collect();
            row.push(format!("{l:e}"));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads draws written by [`PosteriorDraws::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let n_mu = header.iter().filter(|h| h.starts_with("mu_")).count();
        let n_eta = header.iter().filter(|h| h.starts_with("eta_")).count();
        let has_lik = header.last().is_some_and(|h| h == "log_lik");
        let n_days = header.iter().filter(|h| h.starts_with("beta_tilde_")).count();
        let expected = ParameterState::column_names(n_mu, n_eta, n_days);
        if header[..expected.len().min(header.len())] != expected[..] {
            return Err(Error::Parse("draws file has unexpected columns".into()));
        }
        let mut out = Self::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse(format!("draws row {}: {e}", i + 1)))?;
            let lik = if has_lik { row.pop().unwrap_or(f64::NAN) } else { f64::NAN };
            let theta = ParameterState::from_row(&row, n_mu, n_eta)
                .ok_or_else(|| Error::Parse(format!("draws row {} is too short", i + 1)))?;
            out.draws.push(theta);
            out.log_lik.push(lik);
        }
        Ok(out)
    }

    /// Mean, sd and 95% interval of every scalar parameter. Daily log
    /// transmission rates are left out; see [`PosteriorDraws::re_band`].
    pub fn summary(&self) -> PosteriorSummary {
        let names = self.column_names();
        let n_days = self.dims().2;
        let rows: Vec<Vec<f64>> = self.draws.iter().map(|d| d.to_row()).collect();
        let params = names
            .iter()
            .take(names.len() - n_days)
            .enumerate()
            .map(|(j, name)| {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                let s = sorted(&col);
                ParamSummary {
                    name: name.clone(),
                    mean: mean(&col),
                    sd: variance(&col).sqrt(),
                    q025: quantile_sorted(&s, 0.025),
                    median: quantile_sorted(&s, 0.5),
                    q975: quantile_sorted(&s, 0.975),
                }
            })
            .collect();
        PosteriorSummary {
            n_draws: self.len(),
            params,
            acceptance: self.acceptance.clone(),
            swap_acceptance: self.swap_acceptance.clone(),
            mean_log_lik: if self.log_lik.is_empty() { f64::NAN } else { mean(&self.log_lik) },
        }
    }

    /// Effective reproduction number per draw and day (`draws x days`).
    pub fn re_paths(&self, obs: &Observations) -> Result<Vec<Vec<f64>>> {
        self.draws
            .iter()
            .map(|d| {
                let params = d.epidemic_params(obs.i_d0);
                let v0 = CompartmentState::initial(obs.population, params.i_u0, obs.i_d0);
                let traj = propagate(v0, &params, &obs.cases, obs.population)?;
                Ok(reproduction_numbers(&traj, &params, obs.population)
                    .iter()
                    .map(|r| r.effective)
                    .collect())
            })
            .collect()
    }

    /// Pointwise `level` credible band of the effective reproduction number.
    pub fn re_band(&self, obs: &Observations, level: f64) -> Result<ReBand> {
        if self.is_empty() {
            return Err(Error::Dimension("no posterior draws".into()));
        }
        let paths = self.re_paths(obs)?;
        let n = paths[0].len();
        let tail = 0.5 * (1.0 - level);
        let mut band = ReBand { day: (0..n).collect(), lower: vec![], median: vec![], upper: vec![] };
        for t in 0..n {
            let s = sorted(&paths.iter().map(|p| p[t]).collect::<Vec<_>>());
            band.lower.push(quantile_sorted(&s, tail));
            band.median.push(quantile_sorted(&s, 0.5));
            band.upper.push(quantile_sorted(&s, 1.0 - tail));
        }
        Ok(band)
    }
}

impl ReBand {
    pub fn write_csv<W: Write>(&self, w: W, obs: Option<&Observations>) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["day", "date", "re_lower", "re_median", "re_upper"])?;
        for i in 0..self.day.len() {
            let date = obs.map(|o| o.date(self.day[i]).to_string()).unwrap_or_default();
            wtr.write_record([
                self.day[i].to_string(),
                date,
                self.lower[i].to_string(),
                self.median[i].to_string(),
                self.upper[i].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
