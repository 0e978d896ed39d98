//! Link functions mapping the daily diagnosis rate in (0, 1) onto the real line.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Logit,
    Probit,
    Cloglog,
}

impl Link {
    /// Maps `p` in (0, 1) to the real line.
    pub fn forward(self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(p));
        }
        Ok(self.forward_unchecked(p))
    }

    /// Forward map without the domain check; callers guarantee `0 < p < 1`.
    #[inline]
    pub fn forward_unchecked(self, p: f64) -> f64 {
        match self {
            Link::Logit => p.ln() - (-p).ln_1p(),
            Link::Probit => std_normal_quantile(p),
            Link::Cloglog => (-(-p).ln_1p()).ln(),
        }
    }

    #[inline]
    pub fn inverse(self, x: f64) -> f64 {
        match self {
            Link::Logit => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Link::Probit => std_normal_cdf(x),
            Link::Cloglog => -(-x.exp()).exp_m1(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Cloglog => "cloglog",
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            "cloglog" => Ok(Link::Cloglog),
            other => Err(Error::Config(format!("unknown link function `{other}`"))),
        }
    }
}

#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, polished with one Newton step on the CDF.
pub fn std_normal_quantile(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if pdf > 0.0 {
        x - (std_normal_cdf(x) - p) / pdf
    } else {
        x
    }
}
