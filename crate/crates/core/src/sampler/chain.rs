//! One Metropolis-within-Gibbs sweep at a given temperature.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::latent::{LatentModel, Workspace};
use crate::design::Design;
use crate::dist::{beta_ln_pdf, gamma_ln_pdf, sample_inv_gamma, std_normal};
use crate::error::{Error, Result};
use crate::gp::{ar1_log_density, ar1_site_terms, ar1_site_terms_with, ar1_whiten};
use crate::priors::PreparedPrior;
use crate::state::ParameterState;

/// Everything a sweep needs that does not change between iterations.
pub struct Target<'a, M: LatentModel + ?Sized> {
    pub model: &'a M,
    pub prior: &'a PreparedPrior,
    /// Covariates of the GP mean, one row per day.
    pub gp_design: &'a Design,
    /// Covariates of the diagnosis-rate mean, one row per day.
    pub diag_design: &'a Design,
}

impl<M: LatentModel + ?Sized> Clone for Target<'_, M> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<M: LatentModel + ?Sized> Copy for Target<'_, M> {}

impl<'a, M: LatentModel + ?Sized> Target<'a, M> {
    pub fn new(model: &'a M, prior: &'a PreparedPrior, gp_design: &'a Design, diag_design: &'a Design) -> Result<Self> {
        let n = model.n_days();
        if gp_design.rows() != n || diag_design.rows() != n {
            return Err(Error::Dimension(format!(
                "design matrices need {n} rows (got {} and {})",
                gp_design.rows(),
                diag_design.rows()
            )));
        }
        if gp_design.cols() != prior.mu.dim() || diag_design.cols() != prior.eta.dim() {
            return Err(Error::Dimension("design columns do not match the prior dimensions".into()));
        }
        Ok(Self { model, prior, gp_design, diag_design })
    }

    /// Untempered log-likelihood, `-inf` if infeasible.
    pub fn log_likelihood(&self, theta: &ParameterState) -> f64 {
        let mut ws = self.model.workspace();
        if !self.model.evaluate(theta, 0, &mut ws) {
            return f64::NEG_INFINITY;
        }
        let mean = self.diag_design.mul_vec(&theta.eta);
        gaussian_log_lik(&ws.logits, &mean, theta.sigma_gamma2)
    }

    pub fn log_prior(&self, theta: &ParameterState) -> f64 {
        self.prior.log_prior(theta, self.gp_design, self.model.i_d0())
    }
}

/// `L(theta) / delta + log p(theta)`; only the likelihood is tempered.
pub fn tempered_log_target<M: LatentModel + ?Sized>(theta: &ParameterState, delta: f64, target: &Target<'_, M>) -> f64 {
    let prior = target.log_prior(theta);
    if prior == f64::NEG_INFINITY {
        return prior;
    }
    let lik = target.log_likelihood(theta);
    if lik == f64::NEG_INFINITY {
        return lik;
    }
    lik / delta + prior
}

fn gaussian_log_lik(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let n = x.len() as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * sum_sq(x, mean, 0) / var
}

fn sum_sq(x: &[f64], mean: &[f64], from: usize) -> f64 {
    x[from..].iter().zip(&mean[from..]).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Per-block acceptance flags of one sweep.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepAccepts {
    pub r0: bool,
    /// Joint move of `r0` and `eta`.
    pub r0_shift: bool,
    /// One flag per day.
    pub beta_tilde: Vec<bool>,
    pub alpha_inv: bool,
    /// Joint move of `alpha_inv` and `eta`.
    pub alpha_shift: bool,
    /// Move of `alpha_inv` along the path with the same undocumented infections.
    pub alpha_path: bool,
    pub rho: bool,
}

/// Adaptive scales for one ladder rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockScales {
    pub r0: f64,
    pub alpha_inv: f64,
    pub rho: f64,
    pub beta_tilde: Vec<f64>,
}

impl BlockScales {
    pub fn uniform(s: &super::ProposalScales, n_days: usize) -> Self {
        Self {
            r0: s.r0,
            alpha_inv: s.alpha_inv,
            rho: s.rho,
            beta_tilde: vec![s.beta_tilde; n_days],
        }
    }
}

/// A sampler state together with its cached likelihood pieces.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub theta: ParameterState,
    /// Untempered log-likelihood of `theta`.
    pub log_lik: f64,
    ws: Workspace,
    gp_mean: Vec<f64>,
    diag_mean: Vec<f64>,
}

impl ChainState {
    /// Returns `None` if `theta` is outside the support or infeasible.
    pub fn new<M: LatentModel + ?Sized>(theta: ParameterState, target: &Target<'_, M>) -> Option<Self> {
        if !theta.in_support() || theta.n_days() != target.model.n_days() {
            return None;
        }
        let mut ws = target.model.workspace();
        if !target.model.evaluate(&theta, 0, &mut ws) {
            return None;
        }
        let gp_mean = target.gp_design.mul_vec(&theta.mu);
        let diag_mean = target.diag_design.mul_vec(&theta.eta);
        let log_lik = gaussian_log_lik(&ws.logits, &diag_mean, theta.sigma_gamma2);
        if !log_lik.is_finite() || !target.log_prior(&theta).is_finite() {
            return None;
        }
        Some(Self { theta, log_lik, ws, gp_mean, diag_mean })
    }

    /// Link-scale diagnosis rates implied by the current state.
    pub fn logits(&self) -> &[f64] {
        &self.ws.logits
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    fn refresh_log_lik(&mut self) {
        self.log_lik = gaussian_log_lik(&self.ws.logits, &self.diag_mean, self.theta.sigma_gamma2);
    }

    /// Runs all eight blocks once; the `r0` and `alpha_inv` updates are each
    /// followed by a joint move with `eta`, and `alpha_inv` also by a move that
    /// keeps the undocumented infections fixed. `scratch` must come from the same model.
    pub fn sweep<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        delta: f64,
        target: &Target<'_, M>,
        scales: &BlockScales,
        scratch: &mut Workspace,
        rng: &mut R,
    ) -> SweepAccepts {
        let mut acc = SweepAccepts {
            beta_tilde: vec![false; self.theta.n_days()],
            ..Default::default()
        };
        acc.r0 = self.update_r0(delta, target, scales.r0, scratch, rng);
        acc.r0_shift = self.shift_r0(delta, target, scales.r0, scratch, rng);
        self.update_beta_tilde(delta, target, &scales.beta_tilde, scratch, rng, &mut acc.beta_tilde);
        acc.alpha_inv = self.update_alpha_inv(delta, target, scales.alpha_inv, scratch, rng);
        acc.alpha_shift = self.shift_alpha_inv(delta, target, scales.alpha_inv, scratch, rng);
        acc.alpha_path = self.path_alpha_inv(delta, target, scales.alpha_inv, scratch, rng);
        self.update_mu(target, rng);
        self.update_sigma_beta2(target, rng);
        acc.rho = self.update_rho(target, scales.rho, rng);
        self.update_eta(delta, target, rng);
        self.update_sigma_gamma2(delta, target, rng);
        acc
    }

    /// Accepts the fully re-evaluated proposal in `scratch` with the given
    /// log prior ratio (Jacobian included).
    fn full_mh<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        proposal: ParameterState,
        log_prior_ratio: f64,
        delta: f64,
        target: &Target<'_, M>,
        scratch: &mut Workspace,
        rng: &mut R,
    ) -> bool {
        if !log_prior_ratio.is_finite() && log_prior_ratio < 0.0 {
            return false;
        }
        if !target.model.evaluate(&proposal, 0, scratch) {
            return false;
        }
        let lik = gaussian_log_lik(&scratch.logits, &self.diag_mean, proposal.sigma_gamma2);
        let log_a = (lik - self.log_lik) / delta + log_prior_ratio;
        if accept(log_a, rng) {
            std::mem::swap(&mut self.ws, scratch);
            self.theta = proposal;
            self.log_lik = lik;
            true
        } else {
            false
        }
    }

    fn propose_r0<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &self,
        target: &Target<'_, M>,
        scale: f64,
        rng: &mut R,
    ) -> (ParameterState, f64) {
        let c = &target.prior.cfg;
        let cur = self.theta.r0;
        let prop = cur * (scale * std_normal(rng)).exp();
        let ratio = gamma_ln_pdf(prop, c.i_u0_ratio_shape, c.i_u0_ratio_rate)
            - gamma_ln_pdf(cur, c.i_u0_ratio_shape, c.i_u0_ratio_rate)
            + (prop / cur).ln();
        let mut theta = self.theta.clone();
        theta.r0 = prop;
        (theta, ratio)
    }

    fn propose_alpha_inv<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &self,
        target: &Target<'_, M>,
        scale: f64,
        rng: &mut R,
    ) -> (ParameterState, f64) {
        let prior = &target.prior.alpha_inv;
        let cur = self.theta.alpha_inv;
        let excess = (cur - 1.0) * (scale * std_normal(rng)).exp();
        let prop = 1.0 + excess;
        let ratio = prior.ln_pdf(prop) - prior.ln_pdf(cur) + (excess / (cur - 1.0)).ln();
        let mut theta = self.theta.clone();
        theta.alpha_inv = prop;
        (theta, ratio)
    }

    fn update_r0<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        delta: f64,
        target: &Target<'_, M>,
        scale: f64,
        scratch: &mut Workspace,
        rng: &mut R,
    ) -> bool {
        let (theta, ratio) = self.propose_r0(target, scale, rng);
        self.full_mh(theta, ratio, delta, target, scratch, rng)
    }

    fn update_alpha_inv<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        delta: f64,
        target: &Target<'_, M>,
        scale: f64,
        scratch: &mut Workspace,
        rng: &mut R,
    ) -> bool {
        let (theta, ratio) = self.propose_alpha_inv(target, scale, rng);
        self.full_mh(theta, ratio, delta, target, scratch, rng)
    }

    /// Like [`ChainState::full_mh`], but also moves `eta` by the least-squares
    /// change of the rates, so the proposal follows the ridge between the
    /// scalar and the rate intercept instead of cutting across it. The shift
    /// is a shear (unit Jacobian) and is undone by the reverse proposal.
    fn shifted_mh<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        mut proposal: ParameterState,
        log_prior_ratio: f64,
        delta: f64,
        target: &Target<'_, M>,
        scratch: &mut Workspace,
        rng: &mut R,
    ) -> bool {
        if !log_prior_ratio.is_finite() && log_prior_ratio < 0.0 {
            return false;
        }
        if !target.model.evaluate(&proposal, 0, scratch) {
            return false;
        }
        let x = target.diag_design;
        let diff: Vec<f64> = scratch.logits.iter().zip(&self.ws.logits).map(|(a, b)| a - b).collect();
        let shift = least_squares(x, &diff);
        for (e, d) in proposal.eta.iter_mut().zip(&shift) {
            *e += d;
        }
        let eta_prior = &target.prior.eta;
        let ratio = log_prior_ratio + eta_prior.ln_pdf(&proposal.eta) - eta_prior.ln_pdf(&self.theta.eta);
        let mean = x.mul_vec(&proposal.eta);
        let lik = gaussian_log_lik(&scratch.logits, &mean, proposal.sigma_gamma2);
        let log_a = (lik - self.log_lik) / delta + ratio;
        if accept(log_a, rng) {
            std::mem::swap(&mut self.ws, scratch);
            self.theta = proposal;
            self.diag_mean = mean;
            self.gp_mean = target.gp_design.mul_vec(&self.theta.mu);
            self.log_lik = lik;
            true
        } else {
            false
        }
    }

    fn shift_r0<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        delta: f64,
        target: &Target<'_, M>,
        scale: f64,
        scratch: &mut Workspace,
        rng: &mut R,
    ) -> bool {
        let (theta, ratio) = self.propose_r0(target, scale, rng);
        self.shifted_mh(theta, ratio, delta, target, scratch, rng)
    }

    fn shift_alpha_inv<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        delta: f64,
        target: &Target<'_, M>,
        scale: f64,
        scratch: &mut Workspace,
        rng: &mut R,
    ) -> bool {
        let (theta, ratio) = self.propose_alpha_inv(target, scale, rng);
        self.shifted_mh(theta, ratio, delta, target, scratch, rng)
    }

    /// Changes the infectious period and rebuilds the transmission path so
    /// that the undocumented compartment stays the same; only the diagnosis
    /// rates then move, by roughly a constant, which the `eta` shift absorbs.
    /// `mu` moves by the least-squares change of the path so the GP residuals
    /// stay put as well. Both shifts are linear in the path change and undone
    /// by the reverse proposal.
    fn path_alpha_inv<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        delta: f64,
        target: &Target<'_, M>,
        scale: f64,
        scratch: &mut Workspace,
        rng: &mut R,
    ) -> bool {
        let (mut proposal, ratio) = self.propose_alpha_inv(target, scale, rng);
        let Some((path, log_jac)) = target.model.matching_path(&self.theta, &self.ws, proposal.alpha_inv) else {
            return false;
        };
        let x = target.gp_design;
        let diff: Vec<f64> = path.iter().zip(&self.theta.beta_tilde).map(|(a, b)| a - b).collect();
        for (m, d) in proposal.mu.iter_mut().zip(least_squares(x, &diff)) {
            *m += d;
        }
        proposal.beta_tilde = path;
        let s2 = proposal.sigma_beta2;
        let rho = proposal.rho;
        let gp_ratio = ar1_log_density(&proposal.beta_tilde, &x.mul_vec(&proposal.mu), s2, rho)
            - ar1_log_density(&self.theta.beta_tilde, &self.gp_mean, s2, rho)
            + target.prior.mu.ln_pdf(&proposal.mu)
            - target.prior.mu.ln_pdf(&self.theta.mu);
        self.shifted_mh(proposal, ratio + log_jac + gp_ratio, delta, target, scratch, rng)
    }

    fn update_beta_tilde<M: LatentModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        delta: f64,
        target: &Target<'_, M>,
        scales: &[f64],
        scratch: &mut Workspace,
        rng: &mut R,
        flags: &mut [bool],
    ) {
        let n = self.theta.n_days();
        let sigma2 = self.theta.sigma_beta2;
        let rho = self.theta.rho;
        let var = self.theta.sigma_gamma2;
        // Days before `synced` agree between `scratch` and `self.ws`.
        let mut synced = 0usize;
        for t in 0..n {
            let cur = self.theta.beta_tilde[t];
            let cand = cur + scales[t] * std_normal(rng);
            let prior_ratio = ar1_site_terms_with(&self.theta.beta_tilde, &self.gp_mean, t, cand, sigma2, rho)
                - ar1_site_terms(&self.theta.beta_tilde, &self.gp_mean, t, sigma2, rho);
            let from = target.model.beta_site_start(t).min(n);
            if from >= n {
                // Rate path does not depend on this day.
                if accept(prior_ratio, rng) {
                    self.theta.beta_tilde[t] = cand;
                    flags[t] = true;
                }
                continue;
            }
            if synced < from {
                scratch.sync_range(&self.ws, synced, from);
            }
            self.theta.beta_tilde[t] = cand;
            let ok = target.model.evaluate(&self.theta, from, scratch);
            synced = from;
            if !ok {
                self.theta.beta_tilde[t] = cur;
                continue;
            }
            let d_ss = sum_sq(&scratch.logits, &self.diag_mean, from) - sum_sq(&self.ws.logits, &self.diag_mean, from);
            let d_lik = -0.5 * d_ss / var;
            if accept(d_lik / delta + prior_ratio, rng) {
                std::mem::swap(&mut self.ws, scratch);
                self.log_lik += d_lik;
                flags[t] = true;
            } else {
                self.theta.beta_tilde[t] = cur;
            }
        }
        // Drop accumulated rounding from the incremental updates.
        self.refresh_log_lik();
    }

    fn update_mu<M: LatentModel + ?Sized, R: Rng + ?Sized>(&mut self, target: &Target<'_, M>, rng: &mut R) {
        let rho = self.theta.rho;
        let x = target.gp_design;
        let k = x.cols();
        let y = ar1_whiten(&self.theta.beta_tilde, rho);
        let cols: Vec<Vec<f64>> = (0..k)
            .map(|j| ar1_whiten(&(0..x.rows()).map(|t| x.row(t)[j]).collect::<Vec<_>>(), rho))
            .collect();
        let w = DMatrix::from_fn(x.rows(), k, |t, j| cols[j][t]);
        let mu = conjugate_normal(&target.prior.mu, &w, &y, self.theta.sigma_beta2, rng);
        self.theta.mu = mu;
        self.gp_mean = x.mul_vec(&self.theta.mu);
    }

    fn update_sigma_beta2<M: LatentModel + ?Sized, R: Rng + ?Sized>(&mut self, target: &Target<'_, M>, rng: &mut R) {
        let c = &target.prior.cfg;
        let resid: Vec<f64> = self.theta.beta_tilde.iter().zip(&self.gp_mean).map(|(b, m)| b - m).collect();
        let e = ar1_whiten(&resid, self.theta.rho);
        let ss: f64 = e.iter().map(|v| v * v).sum();
        let n = e.len() as f64;
        self.theta.sigma_beta2 = sample_inv_gamma(rng, c.sigma_beta2_shape + 0.5 * n, c.sigma_beta2_rate + 0.5 * ss);
    }

    fn update_rho<M: LatentModel + ?Sized, R: Rng + ?Sized>(&mut self, target: &Target<'_, M>, scale: f64, rng: &mut R) -> bool {
        let c = &target.prior.cfg;
        let cur = self.theta.rho;
        let v = (cur / (1.0 - cur)).ln() + scale * std_normal(rng);
        let prop = 1.0 / (1.0 + (-v).exp());
        if !(prop > 0.0 && prop < 1.0) {
            return false;
        }
        let s2 = self.theta.sigma_beta2;
        let bt = &self.theta.beta_tilde;
        let log_a = ar1_log_density(bt, &self.gp_mean, s2, prop) - ar1_log_density(bt, &self.gp_mean, s2, cur)
            + beta_ln_pdf(prop, c.rho_a, c.rho_b)
            - beta_ln_pdf(cur, c.rho_a, c.rho_b)
            + (prop * (1.0 - prop)).ln()
            - (cur * (1.0 - cur)).ln();
        if accept(log_a, rng) {
            self.theta.rho = prop;
            true
        } else {
            false
        }
    }

    fn update_eta<M: LatentModel + ?Sized, R: Rng + ?Sized>(&mut self, delta: f64, target: &Target<'_, M>, rng: &mut R) {
        let y = target.diag_design;
        let w = DMatrix::from_fn(y.rows(), y.cols(), |t, j| y.row(t)[j]);
        // Tempering the likelihood inflates the observation variance.
        let eta = conjugate_normal(&target.prior.eta, &w, &self.ws.logits, self.theta.sigma_gamma2 * delta, rng);
        self.theta.eta = eta;
        self.diag_mean = y.mul_vec(&self.theta.eta);
        self.refresh_log_lik();
    }

    fn update_sigma_gamma2<M: LatentModel + ?Sized, R: Rng + ?Sized>(&mut self, delta: f64, target: &Target<'_, M>, rng: &mut R) {
        let c = &target.prior.cfg;
        let ss = sum_sq(&self.ws.logits, &self.diag_mean, 0);
        let n = self.ws.logits.len() as f64;
        self.theta.sigma_gamma2 = sample_inv_gamma(
            rng,
            c.sigma_gamma2_shape + 0.5 * n / delta,
            c.sigma_gamma2_rate + 0.5 * ss / delta,
        );
        self.refresh_log_lik();
    }
}

#[inline]
fn accept<R: Rng + ?Sized>(log_a: f64, rng: &mut R) -> bool {
    if log_a.is_nan() {
        return false;
    }
    if log_a >= 0.0 {
        // Still consume a uniform so the stream does not depend on the outcome.
        let _: f64 = rng.random();
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_a
}

/// `(X'X)^-1 X'y`.
fn least_squares(x: &Design, y: &[f64]) -> Vec<f64> {
    let w = x.to_matrix();
    let xtx = w.transpose() * &w;
    let xty = w.transpose() * DVector::from_column_slice(y);
    match xtx.cholesky() {
        Some(c) => c.solve(&xty).iter().copied().collect(),
        None => vec![0.0; x.cols()],
    }
}

/// Draws coefficients from `N(m, V)` with `V^-1 = P0 + W'W / var` and
/// `m = V (P0 m0 + W'y / var)`.
fn conjugate_normal<R: Rng + ?Sized>(
    prior: &crate::priors::Mvn,
    w: &DMatrix<f64>,
    y: &[f64],
    var: f64,
    rng: &mut R,
) -> Vec<f64> {
    let yv = DVector::from_column_slice(y);
    let prec = &prior.precision + w.transpose() * w / var;
    let rhs = &prior.precision * &prior.mean + w.transpose() * yv / var;
    let chol = prec
        .clone()
        .cholesky()
        .expect("posterior precision is positive definite");
    let mean = chol.solve(&rhs);
    let k = mean.len();
    let z = DVector::from_iterator(k, (0..k).map(|_| std_normal(rng)));
    // With P = L L', L'^-1 z has covariance P^-1.
    let dev = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("triangular factor is invertible");
    (mean + dev).iter().copied().collect()
}

/// Draws a starting state from the prior with the GP path at its mean.
pub fn initial_state<M: LatentModel + ?Sized, R: Rng + ?Sized>(
    target: &Target<'_, M>,
    max_attempts: usize,
    rng: &mut R,
) -> Result<ChainState> {
    let c = &target.prior.cfg;
    let mu = c.mu_mean.clone();
    let beta_tilde = target.gp_design.mul_vec(&mu);
    for _ in 0..max_attempts {
        let theta = ParameterState {
            r0: crate::dist::sample_gamma(rng, c.i_u0_ratio_shape, c.i_u0_ratio_rate),
            beta_tilde: beta_tilde.clone(),
            alpha_inv: target.prior.alpha_inv.sample(rng),
            mu: mu.clone(),
            sigma_beta2: sample_inv_gamma(rng, c.sigma_beta2_shape, c.sigma_beta2_rate),
            rho: crate::dist::sample_beta(rng, c.rho_a, c.rho_b),
            eta: target.prior.eta.sample(rng),
            sigma_gamma2: sample_inv_gamma(rng, c.sigma_gamma2_shape, c.sigma_gamma2_rate),
        };
        if let Some(state) = ChainState::new(theta, target) {
            return Ok(state);
        }
    }
    Err(Error::Initialization { attempts: max_attempts })
}
