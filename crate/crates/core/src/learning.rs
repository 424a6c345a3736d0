//! Spike-timing-dependent plasticity over exponential spike traces.
//!
//! Two learning rules share one update body. The pair-based
//! weight-dependent rule potentiates the synapses of a firing neuron in
//! proportion to how recently each input spiked (its trace) relative to a
//! target, scaled by how far the weight sits below its maximum. The
//! adaptive-rate variant multiplies the learning rate by an activity
//! correction: samples that deliver fewer input spikes than a reference
//! count learn proportionally harder, which keeps learning effective when
//! the presentation window shrinks and spikes become scarce.
//!
//! Column normalization keeps each neuron's total incoming weight at a
//! fixed budget so no neuron wins the competition by weight mass alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::NetworkState;

/// Which plasticity rule a run uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdpRule {
    /// Pair-based weight-dependent potentiation at a fixed learning rate.
    #[default]
    Stdp1,
    /// Same body with the learning rate scaled by per-sample input
    /// activity relative to a reference count.
    Stdp2,
}

/// Plasticity settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StdpConfig {
    pub rule: StdpRule,
    /// Learning rate for potentiation on a post-synaptic spike.
    pub eta_pre: f64,
    /// Rate for the optional depression on a pre-synaptic spike; 0 (the
    /// default) disables that path.
    pub eta_post: f64,
    /// Pre-trace value at which potentiation changes sign.
    pub x_target: f64,
    /// Weight-dependence exponent (>= 0).
    pub mu: f64,
    /// Upper weight bound, in millivolts.
    pub w_max: f64,
    /// Pre-synaptic trace decay constant, in timesteps.
    pub tau_pre: f64,
    /// Post-synaptic trace decay constant, in timesteps.
    pub tau_post: f64,
    /// Target incoming-weight sum per neuron; `None` disables
    /// normalization.
    pub norm_total: Option<f64>,
    /// Lower bound of the adaptive-rate multiplier, in (0, 1]. Its
    /// reciprocal bounds the multiplier from above.
    pub alr_floor: f64,
    /// Reference pre-spike count per sample for the adaptive rule,
    /// normally the expected count at the full-length window. `None` lets
    /// the pipeline estimate it from the dataset and encoder gain.
    pub ref_pre_spikes: Option<f64>,
}

impl Default for StdpConfig {
    fn default() -> Self {
        StdpConfig {
            rule: StdpRule::Stdp1,
            eta_pre: 0.01,
            eta_post: 0.0,
            x_target: 0.4,
            mu: 1.0,
            w_max: 1.0,
            tau_pre: 20.0,
            tau_post: 20.0,
            norm_total: Some(78.4),
            alr_floor: 0.1,
            ref_pre_spikes: None,
        }
    }
}

impl StdpConfig {
    /// Default configuration with the normalization budget scaled to an
    /// input dimension (one tenth of a unit weight per input).
    pub fn defaults_for(n_inputs: usize) -> Self {
        StdpConfig {
            norm_total: Some(0.1 * n_inputs as f64),
            ..StdpConfig::default()
        }
    }

    /// Checks every field is in its documented domain.
    pub fn validate(&self) -> Result<()> {
        if !self.eta_pre.is_finite() || self.eta_pre <= 0.0 {
            return Err(Error::Config(format!(
                "eta_pre must be finite and > 0, got {}",
                self.eta_pre
            )));
        }
        if !self.eta_post.is_finite() || self.eta_post < 0.0 {
            return Err(Error::Config(format!(
                "eta_post must be finite and >= 0, got {}",
                self.eta_post
            )));
        }
        if !self.x_target.is_finite() || self.x_target < 0.0 {
            return Err(Error::Config(format!(
                "x_target must be finite and >= 0, got {}",
                self.x_target
            )));
        }
        if !self.mu.is_finite() || self.mu < 0.0 {
            return Err(Error::Config(format!(
                "mu must be finite and >= 0, got {}",
                self.mu
            )));
        }
        if !self.w_max.is_finite() || self.w_max <= 0.0 {
            return Err(Error::Config(format!(
                "w_max must be finite and > 0, got {}",
                self.w_max
            )));
        }
        if !self.tau_pre.is_finite() || self.tau_pre <= 0.0 {
            return Err(Error::Config(format!(
                "tau_pre must be > 0, got {}",
                self.tau_pre
            )));
        }
        if !self.tau_post.is_finite() || self.tau_post <= 0.0 {
            return Err(Error::Config(format!(
                "tau_post must be > 0, got {}",
                self.tau_post
            )));
        }
        if let Some(t) = self.norm_total {
            if !t.is_finite() || t <= 0.0 {
                return Err(Error::Config(format!(
                    "norm_total must be finite and > 0 when enabled, got {t}"
                )));
            }
        }
        if !self.alr_floor.is_finite() || self.alr_floor <= 0.0 || self.alr_floor > 1.0 {
            return Err(Error::Config(format!(
                "alr_floor must lie in (0, 1], got {}",
                self.alr_floor
            )));
        }
        if let Some(r) = self.ref_pre_spikes {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::Config(format!(
                    "ref_pre_spikes must be finite and > 0 when set, got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// Decays both trace arrays by one step and resets the trace of every
/// channel/neuron that spiked this step to one.
///
/// Call once per timestep with that step's input and output spike vectors,
/// after the membrane update and before any weight update, so traces are
/// current when plasticity reads them.
pub fn decay_traces(
    state: &mut NetworkState,
    cfg: &StdpConfig,
    pre_spikes: &[u8],
    post_spikes: &[u8],
) {
    let k_pre = (-1.0 / cfg.tau_pre).exp();
    let k_post = (-1.0 / cfg.tau_post).exp();
    for (trace, &s) in state.pre_trace.iter_mut().zip(pre_spikes) {
        *trace = if s != 0 { 1.0 } else { *trace * k_pre };
    }
    for (trace, &s) in state.post_trace.iter_mut().zip(post_spikes) {
        *trace = if s != 0 { 1.0 } else { *trace * k_post };
    }
}

/// The adaptive learning-rate multiplier: reference activity over observed
/// activity, clamped to `[alr_floor, 1 / alr_floor]`.
///
/// An unset reference disables adaptation (multiplier 1). A sample with
/// zero input spikes hits the upper clamp rather than dividing by zero.
pub fn alr_multiplier(cfg: &StdpConfig, sample_pre_spike_count: u64) -> f64 {
    let Some(reference) = cfg.ref_pre_spikes else {
        return 1.0;
    };
    let ratio = reference / (sample_pre_spike_count.max(1) as f64);
    ratio.clamp(cfg.alr_floor, 1.0 / cfg.alr_floor)
}

/// Weight-dependence factor `(w_max - w)^mu`, with the common exponents
/// special-cased away from `powf`.
#[inline]
fn headroom(gap: f64, mu: f64) -> f64 {
    if mu == 1.0 {
        gap
    } else if mu == 0.0 {
        1.0
    } else {
        gap.powf(mu)
    }
}

fn potentiate(state: &mut NetworkState, cfg: &StdpConfig, fired: &[u8], eta: f64) {
    let n = state.n_neurons;
    debug_assert_eq!(fired.len(), n);
    let mut fired_count = 0u64;
    for (j, &spiked) in fired.iter().enumerate() {
        if spiked == 0 {
            continue;
        }
        fired_count += 1;
        for i in 0..state.n_inputs {
            let w = &mut state.weights[i * n + j];
            let dw = eta * (state.pre_trace[i] - cfg.x_target) * headroom(cfg.w_max - *w, cfg.mu);
            *w = (*w + dw).clamp(0.0, cfg.w_max);
        }
    }
    state.counts.learning_updates += fired_count * state.n_inputs as u64;
}

/// Pair-based weight-dependent potentiation, triggered by post-synaptic
/// spikes.
///
/// For every fired neuron `j` and every input `i`:
/// `w[i][j] += eta_pre * (pre_trace[i] - x_target) * (w_max - w[i][j])^mu`,
/// then clamp to `[0, w_max]`. Inputs whose trace sits below the target are
/// depressed, recently active ones are potentiated, and potentiation
/// saturates as the weight approaches its bound. Neurons that did not fire
/// keep their weights bit-identically.
pub fn stdp1_on_post_spike(state: &mut NetworkState, cfg: &StdpConfig, fired: &[u8]) {
    potentiate(state, cfg, fired, cfg.eta_pre);
}

/// The adaptive-rate rule: identical to [`stdp1_on_post_spike`] with the
/// learning rate multiplied by [`alr_multiplier`] for the current sample's
/// accumulated input-spike count.
pub fn stdp2_on_post_spike(
    state: &mut NetworkState,
    cfg: &StdpConfig,
    fired: &[u8],
    sample_pre_spike_count: u64,
) {
    let eta = cfg.eta_pre * alr_multiplier(cfg, sample_pre_spike_count);
    potentiate(state, cfg, fired, eta);
}

/// Optional depression on pre-synaptic spikes: every synapse from a
/// spiking input is weakened by `eta_post * post_trace[j] * w^mu`, clamped
/// to the weight bounds. A zero `eta_post` (the default) makes this a
/// no-op.
pub fn depress_on_pre_spike(state: &mut NetworkState, cfg: &StdpConfig, pre_spikes: &[u8]) {
    if cfg.eta_post == 0.0 {
        return;
    }
    let n = state.n_neurons;
    debug_assert_eq!(pre_spikes.len(), state.n_inputs);
    let mut active = 0u64;
    for (i, &spiked) in pre_spikes.iter().enumerate() {
        if spiked == 0 {
            continue;
        }
        active += 1;
        for j in 0..n {
            let w = &mut state.weights[i * n + j];
            let dw = cfg.eta_post * state.post_trace[j] * headroom(*w, cfg.mu);
            *w = (*w - dw).clamp(0.0, cfg.w_max);
        }
    }
    state.counts.learning_updates += active * n as u64;
}

/// Rescales every neuron's incoming weight column to sum to `norm_total`.
///
/// Plain proportional rescaling is used whenever it keeps every weight
/// within `[0, w_max]`. When the column's mass is concentrated enough that
/// plain rescaling would push some weight past the bound, those synapses
/// are pinned at `w_max` and the remainder of the budget is distributed
/// proportionally over the rest, so the sum still lands on `norm_total`
/// whenever the target is reachable (`norm_total <= n_inputs * w_max`).
/// All-zero columns and a disabled `norm_total` are left untouched.
pub fn normalize_weights(state: &mut NetworkState, cfg: &StdpConfig) {
    let Some(target) = cfg.norm_total else {
        return;
    };
    let n = state.n_neurons;
    let inputs = state.n_inputs;
    for j in 0..n {
        let mut sum = 0.0;
        let mut max_w = 0.0f64;
        for i in 0..inputs {
            let w = state.weights[i * n + j];
            sum += w;
            max_w = max_w.max(w);
        }
        if sum == 0.0 {
            continue;
        }
        let scale = target / sum;
        if scale * max_w <= cfg.w_max {
            for i in 0..inputs {
                state.weights[i * n + j] *= scale;
            }
        } else {
            rescale_with_saturation(state, cfg, j, target);
        }
    }
}

/// Exact rescale for a column where plain scaling would exceed `w_max`:
/// finds how many of the largest weights saturate and scales the rest to
/// absorb the remaining budget.
fn rescale_with_saturation(state: &mut NetworkState, cfg: &StdpConfig, j: usize, target: f64) {
    let n = state.n_neurons;
    let inputs = state.n_inputs;
    let mut sorted: Vec<f64> = (0..inputs).map(|i| state.weights[i * n + j]).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut tail_sum: f64 = sorted.iter().sum();
    let mut chosen_scale = None;
    for k in 0..inputs {
        // Suppose the k largest weights saturate: the rest must share the
        // leftover budget proportionally.
        let leftover = target - k as f64 * cfg.w_max;
        if leftover <= 0.0 || tail_sum == 0.0 {
            break;
        }
        let scale = leftover / tail_sum;
        let head_ok = k == 0 || scale * sorted[k - 1] >= cfg.w_max;
        let tail_ok = scale * sorted[k] <= cfg.w_max;
        if head_ok && tail_ok {
            chosen_scale = Some((k, scale));
            break;
        }
        tail_sum -= sorted[k];
    }
    match chosen_scale {
        Some((k, scale)) => {
            // The k largest weights pin to w_max, the rest scale. Equal
            // values straddling the cut are assigned by rank, which the
            // consistency checks above make sum-exact at equality.
            let mut by_rank: Vec<usize> = (0..inputs).collect();
            by_rank.sort_by(|&a, &b| {
                state.weights[b * n + j]
                    .partial_cmp(&state.weights[a * n + j])
                    .unwrap()
            });
            for (rank, idx) in by_rank.into_iter().enumerate() {
                let w = &mut state.weights[idx * n + j];
                if rank < k {
                    *w = cfg.w_max;
                } else {
                    *w *= scale;
                }
            }
        }
        None => {
            // The target sits at or above the column's ceiling: everything
            // saturates.
            for i in 0..inputs {
                state.weights[i * n + j] = cfg.w_max;
            }
        }
    }
}
