//! Convergence and goodness-of-fit diagnostics on posterior draws.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::link::{std_normal_cdf, Link};
use crate::model::{diagnosis_logits, Observations};
use crate::sampler::PosteriorDraws;
use crate::stats::{mean, sorted};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GewekeResult {
    pub z_score: f64,
    pub first_fraction: f64,
    pub last_fraction: f64,
}

/// Variance of a segment mean from the Bartlett-windowed spectral density
/// at frequency zero.
fn spectral_mean_variance(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let m = mean(x);
    let acov = |k: usize| x[..n - k].iter().zip(&x[k..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n as f64;
    let mut s0 = acov(0);
    for k in 1..=lag.min(n - 1) {
        s0 += 2.0 * (1.0 - k as f64 / (lag + 1) as f64) * acov(k);
    }
    s0.max(0.0) / n as f64
}

pub const MIN_GEWEKE_LEN: usize = 100;

/// Geweke z-score comparing the first `first` and the last `last` fraction
/// of a chain.
pub fn geweke_z_with(chain: &[f64], first: f64, last: f64) -> Result<GewekeResult> {
    if !(first > 0.0 && last > 0.0 && first + last <= 1.0) {
        return Err(Error::Config(format!("invalid Geweke fractions ({first}, {last})")));
    }
    if chain.len() < MIN_GEWEKE_LEN {
        return Err(Error::Dimension(format!(
            "Geweke diagnostic needs at least {MIN_GEWEKE_LEN} draws, got {}",
            chain.len()
        )));
    }
    let n = chain.len();
    let na = ((first * n as f64).round() as usize).max(2);
    let nb = ((last * n as f64).round() as usize).max(2);
    let a = &chain[..na];
    let b = &chain[n - nb..];
    let lag = |len: usize| ((0.04 * len as f64).round() as usize).max(1);
    let va = spectral_mean_variance(a, lag(na));
    let vb = spectral_mean_variance(b, lag(nb));
    let flat = |s: &[f64]| s.iter().all(|v| *v == s[0]);
    if flat(a) || flat(b) || !(va + vb > 0.0) {
        return Err(Error::DegenerateChain("a Geweke segment has zero variance".into()));
    }
    Ok(GewekeResult {
        z_score: (mean(a) - mean(b)) / (va + vb).sqrt(),
        first_fraction: first,
        last_fraction: last,
    })
}

/// First 10% against last 50%.
pub fn geweke_z(chain: &[f64]) -> Result<GewekeResult> {
    geweke_z_with(chain, 0.1, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeRow {
    pub parameter: String,
    pub z_score: Option<f64>,
    /// Why the score is missing, if it is.
    pub note: Option<String>,
}

/// Geweke scores for every scalar parameter plus `i_u0 = r0 * I_D0`.
pub fn geweke_table(draws: &PosteriorDraws, i_d0: f64) -> Vec<GewekeRow> {
    let names = draws.column_names();
    let n_days = draws.draws.first().map_or(0, |d| d.n_days());
    let mut rows = Vec::new();
    let mut push = |name: &str, col: Vec<f64>| {
        let (z_score, note) = match geweke_z(&col) {
            Ok(g) => (Some(g.z_score), None),
            Err(e) => (None, Some(e.to_string())),
        };
        rows.push(GewekeRow { parameter: name.to_string(), z_score, note });
    };
    if let Some(r0) = draws.column("r0") {
        push("i_u0", r0.iter().map(|r| r * i_d0).collect());
    }
    for name in names.iter().take(names.len().saturating_sub(n_days)) {
        push(name, draws.column(name).unwrap_or_default());
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSqFitResult {
    /// One statistic per usable draw.
    pub omega_draws: Vec<f64>,
    pub exceed_proportion: f64,
    /// `chi^2_{G-1}` 95% quantile.
    pub threshold: f64,
    pub bin_edges: Vec<f64>,
    pub bin_probs: Vec<f64>,
    /// Draws whose trajectory was infeasible.
    pub skipped: usize,
}

pub fn chi2_quantile(df: f64, p: f64) -> f64 {
    ChiSquared::new(df).expect("positive degrees of freedom").inverse_cdf(p)
}

/// `omega = sum_g (m_g - n p_g)^2 / (n p_g)` for equal-probability bins of the
/// probability-integral-transformed residuals `u`.
pub fn omega_statistic(u: &[f64], n_bins: usize) -> f64 {
    let mut counts = vec![0usize; n_bins];
    for &v in u {
        let g = ((v * n_bins as f64).floor() as usize).min(n_bins - 1);
        counts[g] += 1;
    }
    let expected = u.len() as f64 / n_bins as f64;
    counts.iter().map(|&m| (m as f64 - expected).powi(2) / expected).sum()
}

/// Bayesian chi-square goodness-of-fit test with `n_bins` equal-probability
/// bins on the configured link scale.
pub fn bayesian_chi2(
    draws: &PosteriorDraws,
    obs: &Observations,
    link: Link,
    diag_design: &Design,
    n_bins: usize,
) -> Result<ChiSqFitResult> {
    if draws.is_empty() {
        return Err(Error::Dimension("no posterior draws".into()));
    }
    if n_bins < 2 {
        return Err(Error::Config("need at least two bins".into()));
    }
    let mut omega = Vec::with_capacity(draws.len());
    let mut skipped = 0;
    for d in &draws.draws {
        let params = d.epidemic_params(obs.i_d0);
        let Some(logits) = diagnosis_logits(&params, obs, link) else {
            skipped += 1;
            continue;
        };
        let sd = d.sigma_gamma2.sqrt();
        let u: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(t, x)| std_normal_cdf((x - diag_design.row_dot(t, &d.eta)) / sd))
            .collect();
        omega.push(omega_statistic(&u, n_bins));
    }
    if omega.is_empty() {
        return Err(Error::Infeasible("every draw has an infeasible trajectory".into()));
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} draws with infeasible trajectories");
    }
    let threshold = chi2_quantile((n_bins - 1) as f64, 0.95);
    let exceed = omega.iter().filter(|w| **w > threshold).count() as f64 / omega.len() as f64;
    Ok(ChiSqFitResult {
        omega_draws: omega,
        exceed_proportion: exceed,
        threshold,
        bin_edges: (0..=n_bins).map(|g| g as f64 / n_bins as f64).collect(),
        bin_probs: vec![1.0 / n_bins as f64; n_bins],
        skipped,
    })
}

impl ChiSqFitResult {
    /// Pairs of (empirical quantile of omega, theoretical chi-square quantile).
    pub fn qq_points(&self) -> Vec<(f64, f64)> {
        let s = sorted(&self.omega_draws);
        let n = s.len();
        let df = (self.bin_probs.len() - 1) as f64;
        s.iter()
            .enumerate()
            .map(|(i, w)| (*w, chi2_quantile(df, (i as f64 + 0.5) / n as f64)))
            .collect()
    }

    pub fn write_qq_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["empirical", "theoretical"])?;
        for (e, t) in self.qq_points() {
            wtr.write_record([e.to_string(), t.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn mean_omega(&self) -> f64 {
        mean(&self.omega_draws)
    }
}
