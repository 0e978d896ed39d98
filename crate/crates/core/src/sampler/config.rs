use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decreasing temperatures ending at exactly 1 (the target chain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TemperatureLadder(Vec<f64>);

impl TemperatureLadder {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::Config("temperature ladder is empty".into()));
        }
        if *deltas.last().unwrap() != 1.0 {
            return Err(Error::Config("last temperature must be exactly 1".into()));
        }
        if deltas.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::Config("temperatures must be strictly decreasing".into()));
        }
        Ok(Self(deltas))
    }

    /// `base^(J - j)` for `j = 1..=J`.
    pub fn geometric(n_chains: usize, base: f64) -> Result<Self> {
        if n_chains == 0 || !(base > 1.0) {
            return Err(Error::Config(format!(
                "geometric ladder needs at least one chain and base > 1 (got {n_chains}, {base})"
            )));
        }
        Self::new((1..=n_chains).map(|j| base.powi((n_chains - j) as i32)).collect())
    }

    /// A single chain at temperature 1.
    pub fn cold() -> Self {
        Self(vec![1.0])
    }

    pub fn deltas(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for TemperatureLadder {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TemperatureLadder> for Vec<f64> {
    fn from(l: TemperatureLadder) -> Self {
        l.0
    }
}

/// Random-walk proposal scales on the unconstrained scale of each MH block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalScales {
    /// On `log r0`.
    pub r0: f64,
    /// On `log(alpha_inv - 1)`.
    pub alpha_inv: f64,
    /// On `logit rho`.
    pub rho: f64,
    /// On each `beta_tilde_t`; a single value is broadcast to every day.
    pub beta_tilde: f64,
}

impl Default for ProposalScales {
    fn default() -> Self {
        Self {
            r0: 0.1,
            alpha_inv: 0.2,
            rho: 0.5,
            beta_tilde: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub ladder: TemperatureLadder,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub swap_every: usize,
    pub scales: ProposalScales,
    /// Tune proposal scales during burn-in.
    pub adapt: bool,
    /// Iterations per adaptation batch.
    pub adapt_batch: usize,
    pub max_init_attempts: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            ladder: TemperatureLadder::geometric(10, 1.5).expect("valid default ladder"),
            n_iter: 50_000,
            burn_in: 20_000,
            thin: 30,
            seed: 1,
            swap_every: 1,
            scales: ProposalScales::default(),
            adapt: true,
            adapt_batch: 50,
            max_init_attempts: 100,
        }
    }
}

impl SamplerConfig {
    pub fn n_chains(&self) -> usize {
        self.ladder.len()
    }

    /// Number of retained cold-chain draws.
    pub fn n_draws(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 || self.swap_every == 0 || self.adapt_batch == 0 {
            return Err(Error::Config("thin, swap_every and adapt_batch must be positive".into()));
        }
        if self.max_init_attempts == 0 {
            return Err(Error::Config("max_init_attempts must be positive".into()));
        }
        let s = &self.scales;
        if [s.r0, s.alpha_inv, s.rho, s.beta_tilde].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("proposal scales must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Keys understood by [`SamplerConfig::apply`].
    pub const KEYS: [&'static str; 10] = [
        "chains",
        "ladder_base",
        "iters",
        "burn_in",
        "thin",
        "seed",
        "swap_every",
        "adapt",
        "adapt_batch",
        "max_init_attempts",
    ];

    /// Applies `key = value` overrides; unknown keys are returned.
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<Vec<String>> {
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{k} = `{v}` is not a valid number")))
        }
        let mut chains = None;
        let mut base = None;
        let mut unknown = Vec::new();
        for (k, v) in kv {
            match k.as_str() {
                "chains" => chains = Some(num::<usize>(k, v)?),
                "ladder_base" => base = Some(num::<f64>(k, v)?),
                "iters" => self.n_iter = num(k, v)?,
                "burn_in" => self.burn_in = num(k, v)?,
                "thin" => self.thin = num(k, v)?,
                "seed" => self.seed = num(k, v)?,
                "swap_every" => self.swap_every = num(k, v)?,
                "adapt" => {
                    self.adapt = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("adapt = `{v}` is not a boolean")))?
                }
                "adapt_batch" => self.adapt_batch = num(k, v)?,
                "max_init_attempts" => self.max_init_attempts = num(k, v)?,
                _ => unknown.push(k.clone()),
            }
        }
        if chains.is_some() || base.is_some() {
            self.ladder = TemperatureLadder::geometric(chains.unwrap_or(self.ladder.len()), base.unwrap_or(1.5))?;
        }
        Ok(unknown)
    }
}
