//! Deterministic latency/energy accounting from operation counts.
//!
//! Simulation cost is measured by counting the operations the dynamics
//! actually perform — nothing is sampled from wall clocks, so two runs with
//! the same seed report identical costs. Three operation classes are
//! tracked:
//!
//! * `neuron_updates` — one per neuron per timestep (leak/integrate/test);
//! * `synaptic_events` — one per input spike per fan-out synapse: a spike on
//!   an input channel is delivered to every output neuron, which matches the
//!   synaptic-operation convention of neuromorphic cost models (refractory
//!   targets discard the delivery after it is counted);
//! * `learning_updates` — one per plasticity weight update (each output
//!   spike triggers one update per incoming synapse; the optional
//!   pre-spike depression path counts the same way). Weight normalization
//!   is bookkeeping, not plasticity, and is not counted.
//!
//! [`cost_model`] turns counts into latency (timesteps × timestep duration)
//! and an abstract energy figure (weighted operation counts plus a static
//! term per timestep), optionally normalized against a baseline report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw operation counters accumulated while a network runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    /// Timesteps simulated.
    pub steps: u64,
    /// Per-neuron state updates (one per neuron per timestep).
    pub neuron_updates: u64,
    /// Input-spike deliveries across the fan-out.
    pub synaptic_events: u64,
    /// Plasticity weight updates.
    pub learning_updates: u64,
}

impl OpCounts {
    /// Adds another counter set into this one.
    pub fn absorb(&mut self, other: &OpCounts) {
        self.steps += other.steps;
        self.neuron_updates += other.neuron_updates;
        self.synaptic_events += other.synaptic_events;
        self.learning_updates += other.learning_updates;
    }
}

/// Per-operation energy weights and the timestep duration.
///
/// Energy is abstract (arbitrary units); only ratios between runs carry
/// meaning. The static term models always-on circuitry and defaults to one
/// unit per neuron per timestep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostTable {
    /// Energy per neuron update.
    pub c_neuron: f64,
    /// Energy per synaptic event.
    pub c_syn: f64,
    /// Energy per learning update.
    pub c_learn: f64,
    /// Static energy per timestep; `None` means one unit per neuron.
    pub p_static: Option<f64>,
    /// Wall-clock duration of one timestep, in seconds.
    pub t_step_s: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            c_neuron: 1.0,
            c_syn: 1.0,
            c_learn: 5.0,
            p_static: None,
            t_step_s: 1e-3,
        }
    }
}

impl CostTable {
    /// Checks that all weights are finite and non-negative and the timestep
    /// duration is positive.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_neuron", self.c_neuron),
            ("c_syn", self.c_syn),
            ("c_learn", self.c_learn),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "cost weight {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if let Some(p) = self.p_static {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Config(format!(
                    "p_static must be finite and >= 0, got {p}"
                )));
            }
        }
        if !self.t_step_s.is_finite() || self.t_step_s <= 0.0 {
            return Err(Error::Config(format!(
                "t_step_s must be finite and > 0, got {}",
                self.t_step_s
            )));
        }
        Ok(())
    }
}

/// Cost of one run: raw counts plus derived latency/energy figures.
///
/// `l_n` and `e_n` are the latency and energy divided by a baseline run's;
/// a report that is its own baseline carries `l_n = e_n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub steps: u64,
    pub neuron_updates: u64,
    pub synaptic_events: u64,
    pub learning_updates: u64,
    /// Simulated wall-clock latency in seconds.
    pub latency_s: f64,
    /// Total energy in abstract units.
    pub energy: f64,
    /// Latency relative to the baseline report.
    pub l_n: f64,
    /// Energy relative to the baseline report.
    pub e_n: f64,
}

/// Derives latency and energy from `counts`, normalizing against `baseline`
/// when given.
///
/// The relative latency is computed as the ratio of timestep counts (the
/// timestep duration cancels), so runs over the same sample count at window
/// lengths `t1` and `t0` report `l_n` equal to the correctly rounded
/// quotient `t1 / t0` exactly. Passing `None` for `baseline` designates the
/// report as its own baseline (`l_n = e_n = 1`). A baseline with zero steps
/// or zero energy cannot normalize anything and is rejected.
pub fn cost_model(
    counts: &OpCounts,
    table: &CostTable,
    n_neurons: u32,
    baseline: Option<&CostReport>,
) -> Result<CostReport> {
    table.validate()?;
    let p_static = table.p_static.unwrap_or(f64::from(n_neurons));
    let latency_s = table.t_step_s * counts.steps as f64;
    let energy = table.c_neuron * counts.neuron_updates as f64
        + table.c_syn * counts.synaptic_events as f64
        + table.c_learn * counts.learning_updates as f64
        + p_static * counts.steps as f64;
    let (l_n, e_n) = match baseline {
        None => (1.0, 1.0),
        Some(base) => {
            if base.steps == 0 {
                return Err(Error::Contract(
                    "baseline report has zero steps; cannot normalize latency".into(),
                ));
            }
            if base.energy <= 0.0 {
                return Err(Error::Contract(
                    "baseline report has zero energy; cannot normalize energy".into(),
                ));
            }
            (
                counts.steps as f64 / base.steps as f64,
                energy / base.energy,
            )
        }
    };
    Ok(CostReport {
        steps: counts.steps,
        neuron_updates: counts.neuron_updates,
        synaptic_events: counts.synaptic_events,
        learning_updates: counts.learning_updates,
        latency_s,
        energy,
        l_n,
        e_n,
    })
}
