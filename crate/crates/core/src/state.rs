use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::gp::GpSpec;
use crate::model::EpidemicParams;

/// One complete sampler state.
///
/// The undocumented count on day 0 is carried on the ratio scale
/// `r0 = I_U0 / I_D0` and the removal rate through its inverse, the mean
/// infectious period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    pub r0: f64,
    /// Log transmission rates for days `0..=T`.
    pub beta_tilde: Vec<f64>,
    pub alpha_inv: f64,
    pub mu: Vec<f64>,
    pub sigma_beta2: f64,
    pub rho: f64,
    pub eta: Vec<f64>,
    pub sigma_gamma2: f64,
}

impl ParameterState {
    #[inline]
    pub fn alpha(&self) -> f64 {
        1.0 / self.alpha_inv
    }

    pub fn i_u0(&self, i_d0: f64) -> f64 {
        self.r0 * i_d0
    }

    pub fn beta(&self) -> Vec<f64> {
        self.beta_tilde.iter().map(|b| b.exp()).collect()
    }

    pub fn epidemic_params(&self, i_d0: f64) -> EpidemicParams {
        EpidemicParams {
            i_u0: self.i_u0(i_d0),
            beta: self.beta(),
            alpha: self.alpha(),
        }
    }

    pub fn gp_spec(&self, design: &Design) -> GpSpec {
        GpSpec {
            design: design.clone(),
            mu: self.mu.clone(),
            sigma_beta2: self.sigma_beta2,
            rho: self.rho,
        }
    }

    pub fn n_days(&self) -> usize {
        self.beta_tilde.len()
    }

    /// Whether every component sits inside its support.
    pub fn in_support(&self) -> bool {
        self.r0 > 0.0
            && self.alpha_inv >= 1.0
            && self.sigma_beta2 > 0.0
            && self.rho > 0.0
            && self.rho < 1.0
            && self.sigma_gamma2 > 0.0
            && self.beta_tilde.iter().all(|b| b.is_finite())
            && self.mu.iter().all(|b| b.is_finite())
            && self.eta.iter().all(|b| b.is_finite())
    }

    /// Column names for flat serialization, matching [`ParameterState::to_row`].
    pub fn column_names(n_mu: usize, n_eta: usize, n_days: usize) -> Vec<String> {
        let mut cols = vec!["r0".to_string(), "alpha_inv".to_string()];
        cols.extend((0..n_mu).map(|i| format!("mu_{i}")));
        cols.push("sigma_beta2".into());
        cols.push("rho".into());
        cols.extend((0..n_eta).map(|i| format!("eta_{i}")));
        cols.push("sigma_gamma2".into());
        cols.extend((0..n_days).map(|t| format!("beta_tilde_{t}")));
        cols
    }

    pub fn to_row(&self) -> Vec<f64> {
        let mut row = vec![self.r0, self.alpha_inv];
        row.extend(&self.mu);
        row.push(self.sigma_beta2);
        row.push(self.rho);
        row.extend(&self.eta);
        row.push(self.sigma_gamma2);
        row.extend(&self.beta_tilde);
        row
    }

    pub fn from_row(row: &[f64], n_mu: usize, n_eta: usize) -> Option<Self> {
        let fixed = 2 + n_mu + 2 + n_eta + 1;
        if row.len() <= fixed {
            return None;
        }
        let mut it = row.iter().copied();
        let r0 = it.next()?;
        let alpha_inv = it.next()?;
        let mu = it.by_ref().take(n_mu).collect();
        let sigma_beta2 = it.next()?;
        let rho = it.next()?;
        let eta = it.by_ref().take(n_eta).collect();
        let sigma_gamma2 = it.next()?;
        let beta_tilde = it.collect();
        Some(Self {
            r0,
            beta_tilde,
            alpha_inv,
            mu,
            sigma_beta2,
            rho,
            eta,
            sigma_gamma2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_row_round_trip() {
        let s = ParameterState {
            r0: 4.2,
            beta_tilde: vec![-1.0, -1.1, -1.2],
            alpha_inv: 9.3,
            mu: vec![-1.31, 0.01],
            sigma_beta2: 0.1,
            rho: 0.8,
            eta: vec![-1.4],
            sigma_gamma2: 0.07,
        };
        let names = ParameterState::column_names(2, 1, 3);
        let row = s.to_row();
        assert_eq!(names.len(), row.len());
        assert_eq!(ParameterState::from_row(&row, 2, 1).unwrap(), s);
        assert!(s.in_support());
    }
}
