//! Leaky integrate-and-fire neurons with adaptive thresholds and
//! winner-take-all lateral inhibition.
//!
//! The network is a single fully connected layer: every input channel feeds
//! every output neuron. Within one timestep the update order is fixed:
//! threshold adaptation decays, membranes leak toward rest, input spikes are
//! integrated through the weights, thresholds are tested, lateral inhibition
//! picks winners among the crossers, and finally the firing neurons are
//! reset and enter their refractory period. Changing this order changes the
//! dynamics, so all entry points funnel through one implementation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::OpCounts;
use crate::error::{Error, Result};

/// Membrane and threshold parameters shared by every neuron in a layer.
///
/// Voltages are in millivolts, times in timesteps. The defaults are the
/// standard operating point for a 350-step presentation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuronParams {
    /// Base firing threshold.
    pub v_th: f64,
    /// Potential a neuron is reset to after firing.
    pub v_reset: f64,
    /// Potential the membrane leaks toward.
    pub v_rest: f64,
    /// Refractory period in timesteps (>= 1).
    pub t_ref: u32,
    /// Threshold increase added each time a neuron fires during learning.
    pub theta_plus: f64,
    /// Membrane leak time constant, in timesteps.
    pub tau_mem: f64,
    /// Threshold-adaptation decay time constant, in timesteps.
    pub tau_theta: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            v_th: -52.0,
            v_reset: -60.0,
            v_rest: -60.0,
            t_ref: 5,
            theta_plus: 1.0,
            tau_mem: 100.0,
            tau_theta: 1e5,
        }
    }
}

impl NeuronParams {
    /// Checks every field is in its documented domain.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v_th", self.v_th),
            ("v_reset", self.v_reset),
            ("v_rest", self.v_rest),
            ("theta_plus", self.theta_plus),
            ("tau_mem", self.tau_mem),
            ("tau_theta", self.tau_theta),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.v_th <= self.v_reset {
            return Err(Error::Config(format!(
                "v_th ({}) must exceed v_reset ({})",
                self.v_th, self.v_reset
            )));
        }
        if self.t_ref < 1 {
            return Err(Error::Config("t_ref must be >= 1".into()));
        }
        if self.theta_plus < 0.0 {
            return Err(Error::Config(format!(
                "theta_plus must be >= 0, got {}",
                self.theta_plus
            )));
        }
        if self.tau_mem <= 0.0 {
            return Err(Error::Config(format!(
                "tau_mem must be > 0, got {}",
                self.tau_mem
            )));
        }
        if self.tau_theta <= 0.0 {
            return Err(Error::Config(format!(
                "tau_theta must be > 0, got {}",
                self.tau_theta
            )));
        }
        Ok(())
    }
}

/// Lateral-inhibition policy applied after threshold crossing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inhibition {
    /// Every crosser fires.
    Off,
    /// Only the strongest crosser fires; the others keep their membrane.
    Soft,
    /// Only the strongest crosser fires; the others are clamped to reset.
    #[default]
    Hard,
}

/// Full mutable state of one network: membranes, adaptive thresholds,
/// refractory counters, weights, plasticity traces, and operation counters.
///
/// Weights are stored row-major by input channel (`weights[i * n_neurons +
/// j]` is the synapse from input `i` to neuron `j`) so that integrating one
/// input spike is a contiguous row addition.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub n_inputs: usize,
    pub n_neurons: usize,
    pub v_mem: Vec<f64>,
    pub theta: Vec<f64>,
    pub refrac_remaining: Vec<u32>,
    pub weights: Vec<f64>,
    pub pre_trace: Vec<f64>,
    pub post_trace: Vec<f64>,
    /// Pre-reset membrane value of each neuron that crossed threshold in the
    /// most recent step (`-inf` for the rest); inhibition ranks crossers by
    /// this drive.
    pub last_drive: Vec<f64>,
    pub counts: OpCounts,
}

impl NetworkState {
    /// Builds a fresh state with weights drawn uniformly from `[0, w_max)`
    /// and membranes at rest.
    pub fn new(
        n_inputs: usize,
        n_neurons: usize,
        params: &NeuronParams,
        w_max: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        params.validate()?;
        if n_inputs == 0 || n_neurons == 0 {
            return Err(Error::Config(format!(
                "network needs at least one input and one neuron, got {n_inputs}x{n_neurons}"
            )));
        }
        if !w_max.is_finite() || w_max <= 0.0 {
            return Err(Error::Config(format!(
                "w_max must be finite and > 0, got {w_max}"
            )));
        }
        let weights = (0..n_inputs * n_neurons)
            .map(|_| rng.random::<f64>() * w_max)
            .collect();
        Ok(NetworkState {
            n_inputs,
            n_neurons,
            v_mem: vec![params.v_rest; n_neurons],
            theta: vec![0.0; n_neurons],
            refrac_remaining: vec![0; n_neurons],
            weights,
            pre_trace: vec![0.0; n_inputs],
            post_trace: vec![0.0; n_neurons],
            last_drive: vec![f64::NEG_INFINITY; n_neurons],
            counts: OpCounts::default(),
        })
    }

    /// Synapse weight from input `i` to neuron `j`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_neurons + j]
    }

    /// Mutable synapse weight from input `i` to neuron `j`.
    #[inline]
    pub fn weight_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.weights[i * self.n_neurons + j]
    }

    /// Sum of the weights feeding neuron `j`.
    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.n_inputs).map(|i| self.weight(i, j)).sum()
    }

    /// Checks the structural invariants the dynamics promise to maintain:
    /// finite membranes, non-negative thresholds and traces, refractory
    /// counters within `[0, t_ref]`, and weights within `[0, w_max]`.
    pub fn check_invariants(&self, params: &NeuronParams, w_max: f64) -> Result<()> {
        let n = self.n_neurons;
        if self.v_mem.len() != n
            || self.theta.len() != n
            || self.refrac_remaining.len() != n
            || self.post_trace.len() != n
            || self.last_drive.len() != n
            || self.pre_trace.len() != self.n_inputs
            || self.weights.len() != self.n_inputs * n
        {
            return Err(Error::Contract("state vector lengths disagree".into()));
        }
        for (j, &v) in self.v_mem.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Contract(format!("v_mem[{j}] is not finite: {v}")));
            }
        }
        for (j, &t) in self.theta.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Contract(format!("theta[{j}] out of range: {t}")));
            }
        }
        for (j, &r) in self.refrac_remaining.iter().enumerate() {
            if r > params.t_ref {
                return Err(Error::Contract(format!(
                    "refrac_remaining[{j}] = {r} exceeds t_ref = {}",
                    params.t_ref
                )));
            }
        }
        for (k, &w) in self.weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 || w > w_max {
                return Err(Error::Contract(format!(
                    "weights[{k}] = {w} outside [0, {w_max}]"
                )));
            }
        }
        for (i, &x) in self.pre_trace.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Contract(format!("pre_trace[{i}] out of range: {x}")));
            }
        }
        for (j, &x) in self.post_trace.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Contract(format!(
                    "post_trace[{j}] out of range: {x}"
                )));
            }
        }
        Ok(())
    }
}

/// Returns the per-step exponential decay factor for a time constant.
#[inline]
fn decay_factor(tau: f64) -> f64 {
    (-1.0 / tau).exp()
}

/// Advances the layer one timestep without lateral inhibition: every neuron
/// that crosses its threshold fires.
///
/// `input` is the spike vector for this step (entries 0 or 1, one per input
/// channel); the returned vector holds one 0/1 entry per neuron. When
/// `learning` is set, adaptive thresholds decay slowly each step and firing
/// neurons raise theirs by `theta_plus`; outside learning, thresholds are
/// frozen so inference never modifies the trained state.
pub fn step_lif(
    state: &mut NetworkState,
    params: &NeuronParams,
    input: &[u8],
    learning: bool,
) -> Result<Vec<u8>> {
    step(state, params, input, learning, Inhibition::Off)
}

/// Advances the layer one timestep under the given inhibition policy.
///
/// With inhibition enabled, at most one neuron fires per step: the crosser
/// with the largest pre-reset membrane (ties break toward the lowest
/// index). Suppressed crossers do not fire, are not reset into refractory,
/// and do not adapt their threshold; under [`Inhibition::Hard`] their
/// membrane is additionally clamped to `v_reset`, while [`Inhibition::Soft`]
/// lets them keep their charge.
pub fn step(
    state: &mut NetworkState,
    params: &NeuronParams,
    input: &[u8],
    learning: bool,
    inhibition: Inhibition,
) -> Result<Vec<u8>> {
    if input.len() != state.n_inputs {
        return Err(Error::Contract(format!(
            "input spike vector has {} entries, network expects {}",
            input.len(),
            state.n_inputs
        )));
    }
    debug_assert!(input.iter().all(|&s| s <= 1), "input spikes must be 0/1");

    let n = state.n_neurons;
    let k_mem = decay_factor(params.tau_mem);

    state.counts.steps += 1;
    state.counts.neuron_updates += n as u64;

    // The slow threshold decay is part of learning-phase homeostasis;
    // outside learning, thresholds are frozen so inference never alters
    // the trained state.
    if learning {
        let k_theta = decay_factor(params.tau_theta);
        for theta in &mut state.theta {
            *theta *= k_theta;
        }
    }

    // Gather the summed synaptic drive from this step's input spikes. Every
    // spike is delivered across the full fan-out (and counted as such);
    // refractory neurons discard their share below.
    let mut drive = vec![0.0; n];
    let mut active_inputs = 0u64;
    for (i, &s) in input.iter().enumerate() {
        if s != 0 {
            active_inputs += 1;
            let row = &state.weights[i * n..(i + 1) * n];
            for (d, &w) in drive.iter_mut().zip(row) {
                *d += w;
            }
        }
    }
    state.counts.synaptic_events += active_inputs * n as u64;

    // Leak, integrate, and test thresholds.
    let mut spikes = vec![0u8; n];
    for j in 0..n {
        if state.refrac_remaining[j] > 0 {
            state.refrac_remaining[j] -= 1;
            state.last_drive[j] = f64::NEG_INFINITY;
            continue;
        }
        let leaked = params.v_rest + (state.v_mem[j] - params.v_rest) * k_mem;
        let v = leaked + drive[j];
        state.v_mem[j] = v;
        if v >= params.v_th + state.theta[j] {
            spikes[j] = 1;
            state.last_drive[j] = v;
        } else {
            state.last_drive[j] = f64::NEG_INFINITY;
        }
    }

    // Lateral competition among the crossers, then reset the survivors.
    if inhibition != Inhibition::Off {
        suppress_losers(&mut spikes, state, inhibition, params.v_reset);
    }
    for (j, &spiked) in spikes.iter().enumerate() {
        if spiked == 1 {
            state.v_mem[j] = params.v_reset;
            state.refrac_remaining[j] = params.t_ref;
            if learning {
                state.theta[j] += params.theta_plus;
            }
        }
    }
    Ok(spikes)
}

/// Applies winner-take-all competition to a spike vector produced this step.
///
/// Keeps only the spike of the neuron with the largest recorded drive (ties
/// break toward the lowest index). Under [`Inhibition::Hard`] the suppressed
/// crossers' membranes are clamped to the reset potential. With zero or one
/// spike set, the vector is returned unchanged. [`Inhibition::Off`] is a
/// no-op.
pub fn apply_lateral_inhibition(
    spikes: &mut [u8],
    state: &mut NetworkState,
    params: &NeuronParams,
    inhibition: Inhibition,
) {
    if inhibition == Inhibition::Off {
        return;
    }
    suppress_losers(spikes, state, inhibition, params.v_reset);
}

/// Index of the crosser with the largest drive, if any neuron spiked.
fn winner_index(spikes: &[u8], state: &NetworkState) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &s) in spikes.iter().enumerate() {
        if s == 1 {
            let d = state.last_drive[j];
            match best {
                Some((_, bd)) if d <= bd => {}
                _ => best = Some((j, d)),
            }
        }
    }
    best.map(|(j, _)| j)
}

/// Winner-take-all used inside [`step`], before any crosser is reset: the
/// losers never fire, so they skip reset, refractory, and adaptation.
fn suppress_losers(
    spikes: &mut [u8],
    state: &mut NetworkState,
    inhibition: Inhibition,
    v_reset: f64,
) {
    let Some(win) = winner_index(spikes, state) else {
        return;
    };
    for (j, spike) in spikes.iter_mut().enumerate() {
        if *spike == 1 && j != win {
            *spike = 0;
            if inhibition == Inhibition::Hard {
                state.v_mem[j] = v_reset;
            }
        }
    }
}

/// Clears the transient per-sample state: membranes return to rest,
/// refractory counters and plasticity traces to zero. Weights and adaptive
/// thresholds persist across samples.
pub fn reset_state(state: &mut NetworkState, params: &NeuronParams) {
    state.v_mem.fill(params.v_rest);
    state.refrac_remaining.fill(0);
    state.pre_trace.fill(0.0);
    state.post_trace.fill(0.0);
    state.last_drive.fill(f64::NEG_INFINITY);
}
