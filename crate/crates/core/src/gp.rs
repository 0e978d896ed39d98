//! Gaussian-process prior on the log transmission rate.
//!
//! The kernel `C(t, t') = sigma2 * rho^|t - t'|` on integer days is the
//! covariance of a stationary AR(1) process, so the joint density factorizes as
//!
//! ```text
//! z_0 ~ N(0, sigma2),   z_t | z_{t-1} ~ N(rho * z_{t-1}, sigma2 * (1 - rho^2))
//! ```
//!
//! with `z_t = beta_tilde_t - x_t' mu`. Everything here runs in `O(T)` except
//! sampling from a conditional, which factors the `T* x T*` covariance.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::dist::{normal_ln_pdf, std_normal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSpec {
    pub design: Design,
    pub mu: Vec<f64>,
    pub sigma_beta2: f64,
    pub rho: f64,
}

impl GpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.sigma_beta2 > 0.0) {
            return Err(Error::Config(format!(
                "sigma_beta2 must be positive, got {}",
                self.sigma_beta2
            )));
        }
        if self.mu.len() != self.design.cols() {
            return Err(Error::Dimension(format!(
                "{} mean coefficients for {} design columns",
                self.mu.len(),
                self.design.cols()
            )));
        }
        Ok(())
    }

    /// Prior mean `X mu`.
    pub fn mean(&self) -> Vec<f64> {
        self.design.mul_vec(&self.mu)
    }

    /// Kernel value between days `t` and `s`.
    pub fn kernel(&self, t: usize, s: usize) -> f64 {
        self.sigma_beta2 * self.rho.powi(t.abs_diff(s) as i32)
    }
}

/// Log density of `values` under an AR(1) process around `mean`.
pub fn ar1_log_density(values: &[f64], mean: &[f64], sigma2: f64, rho: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let innovation = sigma2 * (1.0 - rho * rho);
    let mut prev = values[0] - mean[0];
    let mut acc = normal_ln_pdf(prev, 0.0, sigma2);
    for (v, m) in values.iter().zip(mean).skip(1) {
        let z = v - m;
        acc += normal_ln_pdf(z, rho * prev, innovation);
        prev = z;
    }
    acc
}

/// The terms of [`ar1_log_density`] that involve `values[t]`.
///
/// Differences of this quantity give the single-site conditional density
/// ratio in `O(1)`.
#[inline]
pub fn ar1_site_terms(values: &[f64], mean: &[f64], t: usize, sigma2: f64, rho: f64) -> f64 {
    let innovation = sigma2 * (1.0 - rho * rho);
    let z = values[t] - mean[t];
    let mut acc = if t == 0 {
        normal_ln_pdf(z, 0.0, sigma2)
    } else {
        normal_ln_pdf(z, rho * (values[t - 1] - mean[t - 1]), innovation)
    };
    if t + 1 < values.len() {
        acc += normal_ln_pdf(values[t + 1] - mean[t + 1], rho * z, innovation);
    }
    acc
}

/// Same as [`ar1_site_terms`] but with `values[t]` replaced by `candidate`.
#[inline]
pub fn ar1_site_terms_with(
    values: &[f64],
    mean: &[f64],
    t: usize,
    candidate: f64,
    sigma2: f64,
    rho: f64,
) -> f64 {
    let innovation = sigma2 * (1.0 - rho * rho);
    let z = candidate - mean[t];
    let mut acc = if t == 0 {
        normal_ln_pdf(z, 0.0, sigma2)
    } else {
        normal_ln_pdf(z, rho * (values[t - 1] - mean[t - 1]), innovation)
    };
    if t + 1 < values.len() {
        acc += normal_ln_pdf(values[t + 1] - mean[t + 1], rho * z, innovation);
    }
    acc
}

/// Log density of `beta_tilde` under the GP prior, through the AR(1) factorization.
pub fn gp_log_density(beta_tilde: &[f64], spec: &GpSpec) -> f64 {
    if !(spec.rho > 0.0 && spec.rho < 1.0) || !(spec.sigma_beta2 > 0.0) {
        return f64::NEG_INFINITY;
    }
    debug_assert_eq!(beta_tilde.len(), spec.design.rows());
    ar1_log_density(beta_tilde, &spec.mean(), spec.sigma_beta2, spec.rho)
}

/// Whitened residuals `e_0 = z_0`, `e_t = (z_t - rho z_{t-1}) / sqrt(1 - rho^2)`;
/// under the prior they are i.i.d. `N(0, sigma2)`.
pub fn ar1_whiten(values: &[f64], rho: f64) -> Vec<f64> {
    let scale = 1.0 / (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(values.len());
    for (t, &v) in values.iter().enumerate() {
        if t == 0 {
            out.push(v);
        } else {
            out.push((v - rho * values[t - 1]) * scale);
        }
    }
    out
}

/// Conditional law of future log transmission rates given the observed window.
#[derive(Debug, Clone, PartialEq)]
pub struct GpConditional {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

/// Conditional mean and covariance of `beta_tilde_{T+1..T+T*}` given `beta_tilde_{0..T}`.
///
/// With the power kernel the Schur complement collapses onto the last observed
/// day: the mean is `m(T+h) + rho^h (beta_tilde_T - m(T))` and the covariance
/// `sigma2 (rho^|h-h'| - rho^(h+h'))`.
pub fn gp_conditional(beta_tilde: &[f64], spec: &GpSpec, x_star: &Design) -> Result<GpConditional> {
    spec.validate()?;
    let horizon = x_star.rows();
    if horizon == 0 {
        return Err(Error::Config("forecast horizon must be at least 1".into()));
    }
    if beta_tilde.len() != spec.design.rows() {
        return Err(Error::Dimension(format!(
            "{} values for a {}-row design",
            beta_tilde.len(),
            spec.design.rows()
        )));
    }
    if x_star.cols() != spec.mu.len() {
        return Err(Error::Dimension("future design has the wrong number of columns".into()));
    }
    let last = beta_tilde.len() - 1;
    let anchor = beta_tilde[last] - spec.design.row_dot(last, &spec.mu);
    let (sigma2, rho) = (spec.sigma_beta2, spec.rho);
    let mean = (0..horizon)
        .map(|i| x_star.row_dot(i, &spec.mu) + rho.powi(i as i32 + 1) * anchor)
        .collect();
    let covariance = DMatrix::from_fn(horizon, horizon, |i, j| {
        let (h, k) = (i as i32 + 1, j as i32 + 1);
        sigma2 * (rho.powi((h - k).abs()) - rho.powi(h + k))
    });
    Ok(GpConditional { mean, covariance })
}

/// One draw from `N(mean, covariance)`.
pub fn gp_sample_conditional<R: Rng + ?Sized>(cond: &GpConditional, rng: &mut R) -> Result<Vec<f64>> {
    let n = cond.mean.len();
    if cond.covariance.iter().all(|&c| c == 0.0) {
        return Ok(cond.mean.clone());
    }
    let factor = match cond.covariance.clone().cholesky() {
        Some(c) => c,
        None => {
            let jittered = &cond.covariance + DMatrix::identity(n, n) * 1e-10;
            jittered
                .cholesky()
                .ok_or_else(|| Error::Factorization("conditional covariance is not PSD".into()))?
        }
    };
    let z = DVector::from_iterator(n, (0..n).map(|_| std_normal(rng)));
    let draw = factor.l() * z;
    Ok(cond.mean.iter().zip(draw.iter()).map(|(m, d)| m + d).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(n: usize, rho: f64) -> GpSpec {
        GpSpec {
            design: Design::intercept_time(0, n),
            mu: vec![-1.31, -0.02],
            sigma_beta2: 0.1,
            rho,
        }
    }

    #[test]
    fn single_point_reduces_to_normal() {
        let s = spec(1, 0.8);
        assert_abs_diff_eq!(
            gp_log_density(&[-1.0], &s),
            normal_ln_pdf(-1.0, -1.31, 0.1),
            epsilon = 1e-14
        );
    }

    #[test]
    fn small_rho_is_independent() {
        let s = spec(5, 1e-12);
        let v = [-1.0, -1.5, -1.2, -0.9, -1.4];
        let m = s.mean();
        let indep: f64 = v.iter().zip(&m).map(|(x, mu)| normal_ln_pdf(*x, *mu, 0.1)).sum();
        assert_abs_diff_eq!(gp_log_density(&v, &s), indep, epsilon = 1e-9);
    }

    #[test]
    fn intercept_only_is_shift_invariant() {
        let make = |start| GpSpec {
            design: Design::intercept_time(start, 6).head(6),
            mu: vec![-1.0, 0.0],
            sigma_beta2: 0.2,
            rho: 0.7,
        };
        let v = [-1.0, -0.8, -1.1, -1.3, -0.7, -1.0];
        let a = gp_log_density(&v, &make(0));
        let b = gp_log_density(&v, &make(17));
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn site_terms_give_the_full_difference() {
        let s = spec(7, 0.85);
        let m = s.mean();
        let v = vec![-1.2, -1.1, -1.4, -1.3, -1.6, -1.5, -1.7];
        for t in 0..v.len() {
            let mut w = v.clone();
            w[t] += 0.37;
            let full = gp_log_density(&w, &s) - gp_log_density(&v, &s);
            let local = ar1_site_terms_with(&v, &m, t, w[t], 0.1, 0.85) - ar1_site_terms(&v, &m, t, 0.1, 0.85);
            assert_abs_diff_eq!(full, local, epsilon = 1e-10);
        }
    }

    #[test]
    fn centered_one_step_conditional() {
        let s = spec(4, 0.8);
        let v = s.mean();
        let cond = gp_conditional(&v, &s, &Design::intercept_time(4, 1)).unwrap();
        assert_abs_diff_eq!(cond.mean[0], -1.31 - 0.02 * 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cond.covariance[(0, 0)], 0.1 * (1.0 - 0.64), epsilon = 1e-12);
    }

    #[test]
    fn two_step_mean_decays_geometrically() {
        let s = spec(4, 0.8);
        let mut v = s.mean();
        v[3] += 1.0;
        let cond = gp_conditional(&v, &s, &Design::intercept_time(4, 2)).unwrap();
        assert_abs_diff_eq!(cond.mean[1], -1.31 - 0.02 * 5.0 + 0.64, epsilon = 1e-12);
    }

    #[test]
    fn conditional_variance_bounded_by_marginal() {
        let s = spec(10, 0.95);
        let cond = gp_conditional(&s.mean(), &s, &Design::intercept_time(10, 30)).unwrap();
        for i in 0..30 {
            assert!(cond.covariance[(i, i)] <= 0.1 + 1e-10);
            if i > 0 {
                assert!(cond.covariance[(i, i)] >= cond.covariance[(i - 1, i - 1)]);
            }
        }
    }

    #[test]
    fn horizon_zero_is_rejected() {
        let s = spec(3, 0.5);
        assert!(gp_conditional(&s.mean(), &s, &Design::intercept_time(3, 0)).is_err());
    }

    #[test]
    fn zero_covariance_returns_mean() {
        let cond = GpConditional {
            mean: vec![1.0, 2.0],
            covariance: DMatrix::zeros(2, 2),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(gp_sample_conditional(&cond, &mut rng).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn conditional_draw_moments() {
        let s = spec(6, 0.8);
        let mut v = s.mean();
        v[5] += 0.3;
        let cond = gp_conditional(&v, &s, &Design::intercept_time(6, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| gp_sample_conditional(&cond, &mut rng).unwrap()).collect();
        let k = 3;
        let mut mean = vec![0.0; k];
        for d in &draws {
            for i in 0..k {
                mean[i] += d[i] / n as f64;
            }
        }
        for i in 0..k {
            let se = (cond.covariance[(i, i)] / n as f64).sqrt();
            assert!((mean[i] - cond.mean[i]).abs() < 4.0 * se, "component {i}");
        }
        let mut cov = DMatrix::<f64>::zeros(k, k);
        for d in &draws {
            for i in 0..k {
                for j in 0..k {
                    cov[(i, j)] += (d[i] - mean[i]) * (d[j] - mean[j]) / (n as f64 - 1.0);
                }
            }
        }
        let rel = (&cov - &cond.covariance).norm() / cond.covariance.norm();
        assert!(rel < 0.1, "relative Frobenius error {rel}");
    }
}
