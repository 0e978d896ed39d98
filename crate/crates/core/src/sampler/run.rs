use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::chain::{initial_state, BlockScales, ChainState, SweepAccepts, Target};
use super::config::SamplerConfig;
use super::latent::{LatentModel, Workspace};
use super::output::{AcceptanceRates, PosteriorDraws};
use crate::error::Result;

/// Stream reserved for the swap moves; chain streams use their rung index.
const SWAP_STREAM: u64 = u64::MAX;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Log acceptance ratio for exchanging the states of rungs `j` and `j + 1`.
pub fn swap_log_acceptance(log_lik_j: f64, log_lik_next: f64, delta_j: f64, delta_next: f64) -> f64 {
    (1.0 / delta_j - 1.0 / delta_next) * (log_lik_next - log_lik_j)
}

pub fn swap_probability(log_lik_j: f64, log_lik_next: f64, delta_j: f64, delta_next: f64) -> f64 {
    swap_log_acceptance(log_lik_j, log_lik_next, delta_j, delta_next).min(0.0).exp()
}

/// Proposes exchanging two neighbouring states; returns whether it happened.
pub fn pt_swap<R: Rng + ?Sized>(
    a: &mut ChainState,
    b: &mut ChainState,
    delta_a: f64,
    delta_b: f64,
    rng: &mut R,
) -> bool {
    let log_a = swap_log_acceptance(a.log_lik, b.log_lik, delta_a, delta_b);
    let u: f64 = rng.random();
    if !log_a.is_nan() && u.ln() < log_a {
        std::mem::swap(a, b);
        true
    } else {
        false
    }
}

#[derive(Debug, Default, Clone)]
struct Counter {
    accepted: u64,
    tried: u64,
}

impl Counter {
    fn add(&mut self, ok: bool) {
        self.tried += 1;
        self.accepted += ok as u64;
    }

    fn rate(&self) -> f64 {
        if self.tried == 0 {
            0.0
        } else {
            self.accepted as f64 / self.tried as f64
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Counters {
    r0: Counter,
    r0_shift: Counter,
    alpha_inv: Counter,
    alpha_shift: Counter,
    alpha_path: Counter,
    rho: Counter,
    beta_tilde: Vec<Counter>,
}

impl Counters {
    fn new(n_days: usize) -> Self {
        Self {
            beta_tilde: vec![Counter::default(); n_days],
            ..Default::default()
        }
    }

    fn add(&mut self, a: &SweepAccepts) {
        self.r0.add(a.r0);
        self.r0_shift.add(a.r0_shift);
        self.alpha_inv.add(a.alpha_inv);
        self.alpha_shift.add(a.alpha_shift);
        self.alpha_path.add(a.alpha_path);
        self.rho.add(a.rho);
        for (c, &ok) in self.beta_tilde.iter_mut().zip(&a.beta_tilde) {
            c.add(ok);
        }
    }

    fn rates(&self) -> AcceptanceRates {
        let bt = &self.beta_tilde;
        let (acc, tried) = bt.iter().fold((0, 0), |(a, t), c| (a + c.accepted, t + c.tried));
        AcceptanceRates {
            r0: self.r0.rate(),
            r0_shift: self.r0_shift.rate(),
            alpha_inv: self.alpha_inv.rate(),
            alpha_shift: self.alpha_shift.rate(),
            alpha_path: self.alpha_path.rate(),
            rho: self.rho.rate(),
            beta_tilde: if tried == 0 { 0.0 } else { acc as f64 / tried as f64 },
        }
    }
}

const SCALAR_TARGET: f64 = 0.23;
const SITE_TARGET: f64 = 0.44;

/// One temperature of the ladder: its RNG stream, tuned scales and buffers.
/// States travel between rungs through swaps; everything here stays put.
struct Rung {
    delta: f64,
    rng: ChaCha8Rng,
    scales: BlockScales,
    scratch: Workspace,
    batch: Counters,
    kept: Counters,
    n_batches: u32,
}

impl Rung {
    fn adapt(&mut self) {
        self.n_batches += 1;
        let step = (1.0 / (self.n_batches as f64).sqrt()).min(0.5);
        let tune = |s: &mut f64, rate: f64, goal: f64| {
            if rate > goal {
                *s *= step.exp();
            } else {
                *s /= step.exp();
            }
        };
        tune(&mut self.scales.r0, self.batch.r0.rate(), SCALAR_TARGET);
        tune(&mut self.scales.alpha_inv, self.batch.alpha_inv.rate(), SCALAR_TARGET);
        tune(&mut self.scales.rho, self.batch.rho.rate(), SCALAR_TARGET);
        for (s, c) in self.scales.beta_tilde.iter_mut().zip(&self.batch.beta_tilde) {
            tune(s, c.rate(), SITE_TARGET);
        }
        self.batch = Counters::new(self.scales.beta_tilde.len());
    }
}

fn build_rungs<M: LatentModel + ?Sized>(
    target: &Target<'_, M>,
    cfg: &SamplerConfig,
) -> Result<(Vec<Rung>, Vec<ChainState>)> {
    let n = target.model.n_days();
    let mut rungs = Vec::with_capacity(cfg.n_chains());
    let mut states = Vec::with_capacity(cfg.n_chains());
    for (j, &delta) in cfg.ladder.deltas().iter().enumerate() {
        let mut rng = stream_rng(cfg.seed, j as u64);
        states.push(initial_state(target, cfg.max_init_attempts, &mut rng)?);
        rungs.push(Rung {
            delta,
            rng,
            scales: BlockScales::uniform(&cfg.scales, n),
            scratch: target.model.workspace(),
            batch: Counters::new(n),
            kept: Counters::new(n),
            n_batches: 0,
        });
    }
    Ok((rungs, states))
}

fn step_rung<M: LatentModel + ?Sized>(
    rung: &mut Rung,
    state: &mut ChainState,
    target: &Target<'_, M>,
    cfg: &SamplerConfig,
    iter: usize,
) {
    let acc = state.sweep(rung.delta, target, &rung.scales, &mut rung.scratch, &mut rung.rng);
    if iter < cfg.burn_in {
        if cfg.adapt {
            rung.batch.add(&acc);
            if (iter + 1) % cfg.adapt_batch == 0 {
                rung.adapt();
            }
        }
    } else {
        rung.kept.add(&acc);
    }
}

fn is_recorded(cfg: &SamplerConfig, iter: usize) -> bool {
    iter >= cfg.burn_in && (iter - cfg.burn_in + 1) % cfg.thin == 0
}

/// Parallel-tempering sampler; returns thinned draws from the rung at
/// temperature 1.
///
/// Each rung owns a ChaCha stream keyed by `(seed, rung index)` and swaps use
/// a separate stream, so the output does not depend on the thread count.
pub fn run_sampler<M: LatentModel + ?Sized>(target: &Target<'_, M>, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let (mut rungs, mut states) = build_rungs(target, cfg)?;
    let n_chains = rungs.len();
    let cold = n_chains - 1;
    let mut swap_rng = stream_rng(cfg.seed, SWAP_STREAM);
    let mut swaps = vec![Counter::default(); n_chains.saturating_sub(1)];
    let mut out = PosteriorDraws::with_capacity(cfg);

    for iter in 0..cfg.n_iter {
        if n_chains == 1 {
            step_rung(&mut rungs[0], &mut states[0], target, cfg, iter);
        } else {
            rungs
                .par_iter_mut()
                .zip(states.par_iter_mut())
                .for_each(|(rung, state)| step_rung(rung, state, target, cfg, iter));
        }
        if n_chains > 1 && (iter + 1) % cfg.swap_every == 0 {
            for j in 0..n_chains - 1 {
                let (lo, hi) = states.split_at_mut(j + 1);
                let ok = pt_swap(&mut lo[j], &mut hi[0], rungs[j].delta, rungs[j + 1].delta, &mut swap_rng);
                if iter >= cfg.burn_in {
                    swaps[j].add(ok);
                }
            }
        }
        if is_recorded(cfg, iter) {
            out.push(&states[cold]);
        }
    }
    out.acceptance = rungs[cold].kept.rates();
    out.swap_acceptance = swaps.iter().map(Counter::rate).collect();
    out.final_scales = Some(rungs[cold].scales.clone());
    Ok(out)
}

/// Single-chain Metropolis-within-Gibbs at temperature 1, with no swaps.
/// With a one-rung ladder and the same seed it reproduces [`run_sampler`].
pub fn run_plain<M: LatentModel + ?Sized>(target: &Target<'_, M>, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    let mut cfg = cfg.clone();
    cfg.ladder = super::TemperatureLadder::cold();
    cfg.validate()?;
    let (mut rungs, mut states) = build_rungs(target, &cfg)?;
    let mut out = PosteriorDraws::with_capacity(&cfg);
    for iter in 0..cfg.n_iter {
        step_rung(&mut rungs[0], &mut states[0], target, &cfg, iter);
        if is_recorded(&cfg, iter) {
            out.push(&states[0]);
        }
    }
    out.acceptance = rungs[0].kept.rates();
    out.final_scales = Some(rungs[0].scales.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn swap_ratio_example() {
        let log_a = swap_log_acceptance(0.0, 10.0, 1.5, 1.0);
        assert_abs_diff_eq!(log_a, -10.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(swap_probability(0.0, 10.0, 1.5, 1.0), 0.035673993347252374, epsilon = 1e-12);
        // The hotter rung holding the lower likelihood always swaps.
        assert_eq!(swap_probability(10.0, 0.0, 1.5, 1.0), 1.0);
    }

    #[test]
    fn recording_schedule() {
        let cfg = SamplerConfig { n_iter: 100, burn_in: 40, thin: 20, ..Default::default() };
        let kept: Vec<usize> = (0..100).filter(|&i| is_recorded(&cfg, i)).collect();
        assert_eq!(kept, vec![59, 79, 99]);
        assert_eq!(kept.len(), cfg.n_draws());
    }
}
