//! Prior hyperparameters, presets and the joint prior density.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::{Design, DesignKind};
use crate::dist::{beta_ln_pdf, gamma_ln_pdf, inv_gamma_ln_pdf, std_normal, TruncatedGamma};
use crate::error::{Error, Result};
use crate::gp::ar1_log_density;
use crate::link::Link;
use crate::state::ParameterState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Gamma(shape, rate) on `I_U0 / I_D0`.
    pub i_u0_ratio_shape: f64,
    pub i_u0_ratio_rate: f64,
    /// Normal prior on the GP mean coefficients.
    pub mu_mean: Vec<f64>,
    pub mu_cov: Vec<Vec<f64>>,
    /// Inverse-gamma(shape, scale) on the GP variance.
    pub sigma_beta2_shape: f64,
    pub sigma_beta2_rate: f64,
    /// Beta(a, b) on the GP correlation.
    pub rho_a: f64,
    pub rho_b: f64,
    /// Gamma(shape, rate) truncated to `[1, inf)` on the mean infectious period.
    pub alpha_inv_shape: f64,
    pub alpha_inv_rate: f64,
    /// Normal prior on the diagnosis-rate coefficients.
    pub eta_mean: Vec<f64>,
    pub eta_cov: Vec<Vec<f64>>,
    /// Inverse-gamma(shape, scale) on the diagnosis-rate variance.
    pub sigma_gamma2_shape: f64,
    pub sigma_gamma2_rate: f64,
    pub link: Link,
    /// Covariates of the GP mean.
    pub gp_design: DesignKind,
    /// Covariates of the diagnosis-rate mean.
    pub diagnosis_design: DesignKind,
}

impl Default for PriorConfig {
    fn default() -> Self {
        default_prior_config()
    }
}

pub fn default_prior_config() -> PriorConfig {
    PriorConfig {
        i_u0_ratio_shape: 5.0,
        i_u0_ratio_rate: 1.0,
        mu_mean: vec![-1.31, 0.0],
        mu_cov: vec![vec![0.3 * 0.3, 0.0], vec![0.0, 1.0]],
        sigma_beta2_shape: 11.0,
        sigma_beta2_rate: 1.0,
        rho_a: 4.0,
        rho_b: 1.0,
        alpha_inv_shape: 325.5,
        alpha_inv_rate: 35.0,
        eta_mean: vec![0.0],
        eta_cov: vec![vec![1.0]],
        sigma_gamma2_shape: 1.0,
        sigma_gamma2_rate: 1.0,
        link: Link::Logit,
        gp_design: DesignKind::InterceptTime,
        diagnosis_design: DesignKind::Intercept,
    }
}

pub const PRESET_NAMES: [&str; 5] = ["default", "probit", "cloglog", "alpha-var", "alpha-mean20"];

/// The four sensitivity settings: probit link, cloglog link, a wider
/// infectious-period prior and one centred on 20 days.
pub fn sensitivity_presets() -> Vec<PriorConfig> {
    PRESET_NAMES[1..]
        .iter()
        .map(|name| preset(name).expect("built-in preset"))
        .collect()
}

pub fn preset(name: &str) -> Result<PriorConfig> {
    let mut cfg = default_prior_config();
    match name {
        "default" => {}
        "probit" => cfg.link = Link::Probit,
        "cloglog" => cfg.link = Link::Cloglog,
        "alpha-var" => {
            cfg.alpha_inv_shape = 46.5;
            cfg.alpha_inv_rate = 5.0;
        }
        "alpha-mean20" => {
            cfg.alpha_inv_shape = 700.0;
            cfg.alpha_inv_rate = 35.0;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown prior preset `{other}` (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    }
    Ok(cfg)
}

fn parse_vec(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
        })
        .collect()
}

fn parse_matrix(value: &str) -> Result<Vec<Vec<f64>>> {
    value.split(';').map(parse_vec).collect()
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{key} = `{value}`: {e}")))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn fmt_matrix(m: &[Vec<f64>]) -> String {
    m.iter().map(|r| fmt_vec(r)).collect::<Vec<_>>().join("; ")
}

/// Splits `key = value` lines, ignoring blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

impl PriorConfig {
    /// Keys understood by [`PriorConfig::apply`].
    pub const KEYS: [&'static str; 18] = [
        "preset",
        "i_u0_ratio_shape",
        "i_u0_ratio_rate",
        "mu_mean",
        "mu_cov",
        "sigma_beta2_shape",
        "sigma_beta2_rate",
        "rho_a",
        "rho_b",
        "alpha_inv_shape",
        "alpha_inv_rate",
        "eta_mean",
        "eta_cov",
        "sigma_gamma2_shape",
        "sigma_gamma2_rate",
        "link",
        "gp_design",
        "diagnosis_design",
    ];

    /// Overrides fields from parsed key/value pairs. A `preset` key resets the
    /// whole config first; unknown keys are returned to the caller.
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<Vec<String>> {
        if let Some(name) = kv.get("preset") {
            *self = preset(name)?;
        }
        let mut unknown = Vec::new();
        for (key, value) in kv {
            match key.as_str() {
                "preset" => {}
                "i_u0_ratio_shape" => self.i_u0_ratio_shape = parse_f64(key, value)?,
                "i_u0_ratio_rate" => self.i_u0_ratio_rate = parse_f64(key, value)?,
                "mu_mean" => self.mu_mean = parse_vec(value)?,
                "mu_cov" => self.mu_cov = parse_matrix(value)?,
                "sigma_beta2_shape" => self.sigma_beta2_shape = parse_f64(key, value)?,
                "sigma_beta2_rate" => self.sigma_beta2_rate = parse_f64(key, value)?,
                "rho_a" => self.rho_a = parse_f64(key, value)?,
                "rho_b" => self.rho_b = parse_f64(key, value)?,
                "alpha_inv_shape" => self.alpha_inv_shape = parse_f64(key, value)?,
                "alpha_inv_rate" => self.alpha_inv_rate = parse_f64(key, value)?,
                "eta_mean" => self.eta_mean = parse_vec(value)?,
                "eta_cov" => self.eta_cov = parse_matrix(value)?,
                "sigma_gamma2_shape" => self.sigma_gamma2_shape = parse_f64(key, value)?,
                "sigma_gamma2_rate" => self.sigma_gamma2_rate = parse_f64(key, value)?,
                "link" => self.link = value.parse()?,
                "gp_design" => self.gp_design = DesignKind::parse(value)?,
                "diagnosis_design" => self.diagnosis_design = DesignKind::parse(value)?,
                _ => unknown.push(key.clone()),
            }
        }
        self.validate()?;
        Ok(unknown)
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let mut cfg = default_prior_config();
        let unknown = cfg.apply(&kv)?;
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown prior keys: {}", unknown.join(", "))));
        }
        Ok(cfg)
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "i_u0_ratio_shape = {}", self.i_u0_ratio_shape);
        let _ = writeln!(s, "i_u0_ratio_rate = {}", self.i_u0_ratio_rate);
        let _ = writeln!(s, "mu_mean = {}", fmt_vec(&self.mu_mean));
        let _ = writeln!(s, "mu_cov = {}", fmt_matrix(&self.mu_cov));
        let _ = writeln!(s, "sigma_beta2_shape = {}", self.sigma_beta2_shape);
        let _ = writeln!(s, "sigma_beta2_rate = {}", self.sigma_beta2_rate);
        let _ = writeln!(s, "rho_a = {}", self.rho_a);
        let _ = writeln!(s, "rho_b = {}", self.rho_b);
        let _ = writeln!(s, "alpha_inv_shape = {}", self.alpha_inv_shape);
        let _ = writeln!(s, "alpha_inv_rate = {}", self.alpha_inv_rate);
        let _ = writeln!(s, "eta_mean = {}", fmt_vec(&self.eta_mean));
        let _ = writeln!(s, "eta_cov = {}", fmt_matrix(&self.eta_cov));
        let _ = writeln!(s, "sigma_gamma2_shape = {}", self.sigma_gamma2_shape);
        let _ = writeln!(s, "sigma_gamma2_rate = {}", self.sigma_gamma2_rate);
        let _ = writeln!(s, "link = {}", self.link);
        let _ = writeln!(s, "gp_design = {}", self.gp_design.name());
        let _ = writeln!(s, "diagnosis_design = {}", self.diagnosis_design.name());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("i_u0_ratio_shape", self.i_u0_ratio_shape),
            ("i_u0_ratio_rate", self.i_u0_ratio_rate),
            ("sigma_beta2_shape", self.sigma_beta2_shape),
            ("sigma_beta2_rate", self.sigma_beta2_rate),
            ("rho_a", self.rho_a),
            ("rho_b", self.rho_b),
            ("alpha_inv_shape", self.alpha_inv_shape),
            ("alpha_inv_rate", self.alpha_inv_rate),
            ("sigma_gamma2_shape", self.sigma_gamma2_shape),
            ("sigma_gamma2_rate", self.sigma_gamma2_rate),
        ];
        for (name, v) in positives {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.mu_mean.len() != self.gp_design.dim() {
            return Err(Error::Config(format!(
                "mu_mean has {} entries but the {} design has {} columns",
                self.mu_mean.len(),
                self.gp_design.name(),
                self.gp_design.dim()
            )));
        }
        if self.eta_mean.len() != self.diagnosis_design.dim() {
            return Err(Error::Config(format!(
                "eta_mean has {} entries but the {} design has {} columns",
                self.eta_mean.len(),
                self.diagnosis_design.name(),
                self.diagnosis_design.dim()
            )));
        }
        Mvn::new(&self.mu_mean, &self.mu_cov).map_err(|e| Error::Config(format!("mu_cov: {e}")))?;
        Mvn::new(&self.eta_mean, &self.eta_cov).map_err(|e| Error::Config(format!("eta_cov: {e}")))?;
        Ok(())
    }

    pub fn alpha_inv_prior(&self) -> Result<TruncatedGamma> {
        TruncatedGamma::new(self.alpha_inv_shape, self.alpha_inv_rate, 1.0)
    }

    pub fn prepare(&self) -> Result<PreparedPrior> {
        self.validate()?;
        Ok(PreparedPrior {
            cfg: self.clone(),
            mu: Mvn::new(&self.mu_mean, &self.mu_cov)?,
            eta: Mvn::new(&self.eta_mean, &self.eta_cov)?,
            alpha_inv: self.alpha_inv_prior()?,
        })
    }
}

/// Multivariate normal with a cached Cholesky factor and precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Mvn {
    pub mean: DVector<f64>,
    pub chol_lower: DMatrix<f64>,
    pub precision: DMatrix<f64>,
    log_norm: f64,
}

impl Mvn {
    pub fn new(mean: &[f64], cov: &[Vec<f64>]) -> Result<Self> {
        let k = mean.len();
        if cov.len() != k || cov.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension(format!("covariance must be {k}x{k}")));
        }
        let m = DMatrix::from_fn(k, k, |i, j| cov[i][j]);
        if (&m - m.transpose()).amax() > 1e-12 {
            return Err(Error::Config("covariance is not symmetric".into()));
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Config("covariance is not positive definite".into()))?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            chol_lower: chol.l(),
            precision: chol.inverse(),
            log_norm: -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.mean;
        self.log_norm - 0.5 * (d.transpose() * &self.precision * &d)[(0, 0)]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(self.dim(), (0..self.dim()).map(|_| std_normal(rng)));
        (&self.mean + &self.chol_lower * z).iter().copied().collect()
    }
}

/// Prior with its normalizing constants and factorizations computed once.
#[derive(Debug, Clone)]
pub struct PreparedPrior {
    pub cfg: PriorConfig,
    pub mu: Mvn,
    pub eta: Mvn,
    pub alpha_inv: TruncatedGamma,
}

impl PreparedPrior {
    /// Log prior of everything except the GP term.
    pub fn log_prior_scalars(&self, theta: &ParameterState, i_d0: f64) -> f64 {
        let c = &self.cfg;
        if !(theta.rho > 0.0 && theta.rho < 1.0) || theta.alpha_inv < 1.0 {
            return f64::NEG_INFINITY;
        }
        // Density of I_U0 = r0 * I_D0 carries the 1 / I_D0 scale factor.
        gamma_ln_pdf(theta.r0, c.i_u0_ratio_shape, c.i_u0_ratio_rate) - i_d0.ln()
            + self.mu.ln_pdf(&theta.mu)
            + inv_gamma_ln_pdf(theta.sigma_beta2, c.sigma_beta2_shape, c.sigma_beta2_rate)
            + beta_ln_pdf(theta.rho, c.rho_a, c.rho_b)
            + self.alpha_inv.ln_pdf(theta.alpha_inv)
            + self.eta.ln_pdf(&theta.eta)
            + inv_gamma_ln_pdf(theta.sigma_gamma2, c.sigma_gamma2_shape, c.sigma_gamma2_rate)
    }

    /// Full log prior, GP term included.
    pub fn log_prior(&self, theta: &ParameterState, gp_design: &Design, i_d0: f64) -> f64 {
        let scalars = self.log_prior_scalars(theta, i_d0);
        if scalars == f64::NEG_INFINITY {
            return scalars;
        }
        let mean = gp_design.mul_vec(&theta.mu);
        scalars + ar1_log_density(&theta.beta_tilde, &mean, theta.sigma_beta2, theta.rho)
    }
}

/// Log prior density of `theta`; `-inf` outside the support.
pub fn log_prior(theta: &ParameterState, cfg: &PriorConfig, gp_design: &Design, i_d0: f64) -> f64 {
    match cfg.prepare() {
        Ok(p) => p.log_prior(theta, gp_design, i_d0),
        Err(_) => f64::NEG_INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::normal_ln_pdf;
    use crate::gp::{gp_log_density, GpSpec};
    use approx::assert_abs_diff_eq;

    fn theta() -> ParameterState {
        ParameterState {
            r0: 4.0,
            beta_tilde: vec![-1.2, -1.25, -1.3, -1.4],
            alpha_inv: 9.0,
            mu: vec![-1.3, -0.01],
            sigma_beta2: 0.12,
            rho: 0.85,
            eta: vec![-1.2],
            sigma_gamma2: 0.08,
        }
    }

    #[test]
    fn default_prior_means() {
        let c = default_prior_config();
        assert_eq!(c.i_u0_ratio_shape / c.i_u0_ratio_rate, 5.0);
        assert_abs_diff_eq!(c.sigma_beta2_rate / (c.sigma_beta2_shape - 1.0), 0.1, epsilon = 1e-15);
        assert_eq!(c.rho_a / (c.rho_a + c.rho_b), 0.8);
        assert_abs_diff_eq!(c.alpha_inv_shape / c.alpha_inv_rate, 9.3, epsilon = 1e-12);
        assert_eq!(c.mu_mean, vec![-1.31, 0.0]);
        assert_abs_diff_eq!(c.mu_cov[0][0], 0.09, epsilon = 1e-15);
        assert_eq!(c.link, Link::Logit);
    }

    #[test]
    fn presets() {
        let p = sensitivity_presets();
        assert_eq!(p.len(), 4);
        let d = default_prior_config();
        assert_eq!(PriorConfig { link: Link::Logit, ..p[0].clone() }, d);
        assert_eq!(p[0].link, Link::Probit);
        assert_eq!(PriorConfig { link: Link::Logit, ..p[1].clone() }, d);
        assert_eq!(p[1].link, Link::Cloglog);
        // Same mean as the default, larger variance.
        assert_abs_diff_eq!(p[2].alpha_inv_shape / p[2].alpha_inv_rate, 9.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2].alpha_inv_shape / p[2].alpha_inv_rate.powi(2), 1.86, epsilon = 1e-12);
        assert_abs_diff_eq!(d.alpha_inv_shape / d.alpha_inv_rate.powi(2), 0.2657, epsilon = 1e-4);
        assert_eq!(p[3].alpha_inv_shape / p[3].alpha_inv_rate, 20.0);
        assert!(preset("nope").is_err());
    }

    #[test]
    fn outside_support() {
        let cfg = default_prior_config();
        let x = Design::intercept_time(0, 4);
        let mut t = theta();
        t.rho = 1.2;
        assert_eq!(log_prior(&t, &cfg, &x, 100.0), f64::NEG_INFINITY);
        let mut t = theta();
        t.alpha_inv = 0.9;
        assert_eq!(log_prior(&t, &cfg, &x, 100.0), f64::NEG_INFINITY);
    }

    #[test]
    fn componentwise_sum() {
        let cfg = default_prior_config();
        let x = Design::intercept_time(0, 4);
        let t = theta();
        let tg = TruncatedGamma::new(325.5, 35.0, 1.0).unwrap();
        let expected = gamma_ln_pdf(4.0, 5.0, 1.0) - 100f64.ln()
            + normal_ln_pdf(-1.3, -1.31, 0.09)
            + normal_ln_pdf(-0.01, 0.0, 1.0)
            + inv_gamma_ln_pdf(0.12, 11.0, 1.0)
            + beta_ln_pdf(0.85, 4.0, 1.0)
            + tg.ln_pdf(9.0)
            + normal_ln_pdf(-1.2, 0.0, 1.0)
            + inv_gamma_ln_pdf(0.08, 1.0, 1.0)
            + gp_log_density(
                &t.beta_tilde,
                &GpSpec {
                    design: x.clone(),
                    mu: t.mu.clone(),
                    sigma_beta2: 0.12,
                    rho: 0.85,
                },
            );
        assert_abs_diff_eq!(log_prior(&t, &cfg, &x, 100.0), expected, epsilon = 1e-10);
    }

    #[test]
    fn finite_on_plausible_box() {
        let cfg = default_prior_config().prepare().unwrap();
        let x = Design::intercept_time(0, 4);
        for &r0 in &[0.5, 5.0, 20.0] {
            for &ai in &[1.0, 9.3, 15.0] {
                for &rho in &[0.05, 0.5, 0.99] {
                    for &s2 in &[0.01, 0.1, 2.0] {
                        let mut t = theta();
                        t.r0 = r0;
                        t.alpha_inv = ai;
                        t.rho = rho;
                        t.sigma_beta2 = s2;
                        t.sigma_gamma2 = s2;
                        assert!(cfg.log_prior(&t, &x, 100.0).is_finite());
                    }
                }
            }
        }
    }

    #[test]
    fn config_text_round_trip() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            let back = PriorConfig::from_config_str(&cfg.to_config_string()).unwrap();
            assert_eq!(back, cfg);
        }
        let cfg = PriorConfig::from_config_str("preset = alpha-var\n# comment\nrho_a = 3\n").unwrap();
        assert_eq!(cfg.alpha_inv_shape, 46.5);
        assert_eq!(cfg.rho_a, 3.0);
        assert!(PriorConfig::from_config_str("bogus = 1").is_err());
        assert!(PriorConfig::from_config_str("rho_a = -1").is_err());
        assert!(PriorConfig::from_config_str("mu_cov = 1, 2; 3, 4").is_err());
    }
}
