//! Maps a parameter state onto link-scale diagnosis rates.
//!
//! The sampler only ever sees the likelihood through [`LatentModel`], which
//! lets tests swap the epidemic recursion for a fixed set of rates with a
//! known conjugate posterior.

use crate::model::{diagnosis_rate, CompartmentState, Observations};
use crate::link::Link;
use crate::state::ParameterState;

/// Per-chain buffers holding the latent path and the transformed rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub states: Vec<CompartmentState>,
    pub logits: Vec<f64>,
}

impl Workspace {
    pub fn new(n_days: usize) -> Self {
        Self {
            states: vec![CompartmentState::default(); n_days],
            logits: vec![0.0; n_days],
        }
    }

    /// Copies days `from..to` from `other`.
    pub fn sync_range(&mut self, other: &Workspace, from: usize, to: usize) {
        if from >= to {
            return;
        }
        if !self.states.is_empty() {
            self.states[from..to].copy_from_slice(&other.states[from..to]);
        }
        self.logits[from..to].copy_from_slice(&other.logits[from..to]);
    }
}

pub trait LatentModel: Sync {
    fn n_days(&self) -> usize;

    /// Documented count on day 0, used to scale the initial-condition prior.
    fn i_d0(&self) -> f64;

    /// Recomputes days `from..` of `ws`, assuming days before `from` are
    /// already consistent with `theta`. Returns `false` when the state is
    /// infeasible (negative compartment or a rate outside (0, 1)).
    fn evaluate(&self, theta: &ParameterState, from: usize, ws: &mut Workspace) -> bool;

    /// First day whose rate depends on `beta_tilde[t]`.
    fn beta_site_start(&self, t: usize) -> usize {
        t + 1
    }

    fn workspace(&self) -> Workspace {
        Workspace::new(self.n_days())
    }

    /// Log transmission rates that, with mean infectious period
    /// `alpha_inv_new`, reproduce the undocumented compartment of `theta`
    /// (whose path is in `ws`) on every day, together with the log Jacobian
    /// of the map on `beta_tilde`. `None` if the model has no such path or the
    /// matching path is infeasible.
    fn matching_path(&self, _theta: &ParameterState, _ws: &Workspace, _alpha_inv_new: f64) -> Option<(Vec<f64>, f64)> {
        None
    }
}

/// The compartment recursion driven by observed case counts.
#[derive(Debug, Clone)]
pub struct EpidemicLatent {
    pub obs: Observations,
    pub link: Link,
}

impl EpidemicLatent {
    pub fn new(obs: Observations, link: Link) -> Self {
        Self { obs, link }
    }
}

impl LatentModel for EpidemicLatent {
    fn n_days(&self) -> usize {
        self.obs.n_days()
    }

    fn i_d0(&self) -> f64 {
        self.obs.i_d0
    }

    fn evaluate(&self, theta: &ParameterState, from: usize, ws: &mut Workspace) -> bool {
        let n = self.obs.n_days();
        let alpha = theta.alpha();
        let population = self.obs.population.get();
        let cases = &self.obs.cases;
        if from >= n {
            return true;
        }
        let start = if from == 0 {
            let v0 = CompartmentState::initial(self.obs.population, theta.i_u0(self.obs.i_d0), self.obs.i_d0);
            if v0.s < 0.0 {
                return false;
            }
            ws.states[0] = v0;
            match diagnosis_rate(cases[0], v0.i_u, alpha) {
                Some(g) => ws.logits[0] = self.link.forward_unchecked(g),
                None => return false,
            }
            1
        } else {
            from
        };
        let mut prev = ws.states[start - 1];
        for t in start..n {
            let next = prev.step(theta.beta_tilde[t - 1].exp(), cases[t - 1], alpha, population);
            if next.negative_compartment().is_some() {
                return false;
            }
            match diagnosis_rate(cases[t], next.i_u, alpha) {
                Some(g) => ws.logits[t] = self.link.forward_unchecked(g),
                None => return false,
            }
            ws.states[t] = next;
            prev = next;
        }
        true
    }

    /// New infections on day `t` become `n_t + (alpha' - alpha) I_U_t`, which
    /// keeps `I_U` unchanged; `S` and `I_D` follow the new removal rate. The
    /// map is triangular with diagonal `n_t / n'_t` on the log scale. The last
    /// rate does not enter the path and moves with the one before it.
    fn matching_path(&self, theta: &ParameterState, ws: &Workspace, alpha_inv_new: f64) -> Option<(Vec<f64>, f64)> {
        let n = self.obs.n_days();
        let pop = self.obs.population.get();
        let alpha_new = 1.0 / alpha_inv_new;
        let d_alpha = alpha_new - theta.alpha();
        if d_alpha == 0.0 {
            return Some((theta.beta_tilde.clone(), 0.0));
        }
        let mut path = theta.beta_tilde.clone();
        let mut log_jac = 0.0;
        let (mut s, mut i_d) = (ws.states[0].s, ws.states[0].i_d);
        for t in 0..n.saturating_sub(1) {
            let v = ws.states[t];
            let infected = theta.beta_tilde[t].exp() * v.s * (v.i_u + v.i_d) / pop;
            let moved = infected + d_alpha * v.i_u;
            if !(moved > 0.0 && moved < s) {
                return None;
            }
            path[t] = (moved * pop / (s * (v.i_u + i_d))).ln();
            log_jac += (infected / moved).ln();
            s -= moved;
            i_d = (1.0 - alpha_new) * i_d + self.obs.cases[t];
        }
        if n >= 2 {
            path[n - 1] += path[n - 2] - theta.beta_tilde[n - 2];
        }
        Some((path, log_jac))
    }
}

/// Rates that ignore the epidemic parameters entirely. With this model the
/// diagnosis-rate block is a plain normal regression, which has an
/// analytically tractable posterior.
#[derive(Debug, Clone)]
pub struct FixedLogits {
    pub logits: Vec<f64>,
    pub i_d0: f64,
}

impl LatentModel for FixedLogits {
    fn n_days(&self) -> usize {
        self.logits.len()
    }

    fn i_d0(&self) -> f64 {
        self.i_d0
    }

    fn evaluate(&self, _theta: &ParameterState, from: usize, ws: &mut Workspace) -> bool {
        if from < self.logits.len() {
            ws.logits[from..].copy_from_slice(&self.logits[from..]);
        }
        true
    }

    fn beta_site_start(&self, _t: usize) -> usize {
        self.logits.len()
    }

    fn workspace(&self) -> Workspace {
        Workspace {
            states: Vec::new(),
            logits: vec![0.0; self.logits.len()],
        }
    }
}
