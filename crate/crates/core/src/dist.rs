//! Scalar log densities and samplers for the prior families.
//!
//! Gamma uses the shape/rate parameterization, inverse gamma the shape/scale
//! one (so that `InvGamma(a, b)` is the law of `1 / Gamma(a, rate = b)`).

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaSampler, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    GammaSampler::new(shape, 1.0 / rate)
        .expect("gamma parameters validated by caller")
        .sample(rng)
}

pub fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    1.0 / sample_gamma(rng, shape, scale)
}

pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x = sample_gamma(rng, a, 1.0);
    let y = sample_gamma(rng, b, 1.0);
    x / (x + y)
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gamma(shape, rate) restricted to `[lower, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedGamma {
    pub shape: f64,
    pub rate: f64,
    pub lower: f64,
    log_tail_mass: f64,
}

impl TruncatedGamma {
    pub fn new(shape: f64, rate: f64, lower: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && lower >= 0.0) {
            return Err(Error::Config(format!(
                "truncated gamma needs shape, rate > 0 and lower >= 0 (got {shape}, {rate}, {lower})"
            )));
        }
        // Upper regularized incomplete gamma gives P(X >= lower) for X ~ Gamma(shape, rate).
        let tail = if lower == 0.0 { 1.0 } else { gamma_ur(shape, rate * lower) };
        if !(tail > 0.0) {
            return Err(Error::Config(format!(
                "truncated gamma has no mass above {lower} (shape {shape}, rate {rate})"
            )));
        }
        Ok(Self {
            shape,
            rate,
            lower,
            log_tail_mass: tail.ln(),
        })
    }

    pub fn tail_mass(&self) -> f64 {
        self.log_tail_mass.exp()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < self.lower {
            return f64::NEG_INFINITY;
        }
        gamma_ln_pdf(x, self.shape, self.rate) - self.log_tail_mass
    }

    /// Rejection sampler from the untruncated gamma.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = sample_gamma(rng, self.shape, self.rate);
            if x >= self.lower {
                return x;
            }
        }
    }
}
