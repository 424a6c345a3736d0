//! Spiking neural network training and evaluation with a deterministic
//! operation-count cost model.
//!
//! The crate simulates single-layer, fully connected networks of
//! leaky-integrate-and-fire neurons trained with spike-timing-dependent
//! plasticity. Inputs are rate-coded into Bernoulli spike trains, output
//! neurons compete through lateral inhibition, and class labels are assigned
//! to neurons from their responses to labelled data.
//!
//! Beyond plain training and inference, the crate addresses a practical
//! question: how far can the simulation window (the number of timesteps each
//! sample is presented for) be shrunk before accuracy collapses? Shrinking
//! the window cuts latency and energy roughly linearly, but naively reusing
//! parameters tuned for a long window loses accuracy quickly. The
//! [`enhance`] module rescales the firing threshold, refractory period, and
//! threshold adaptation step to the shorter window; the [`sweep`] module runs
//! both the naive and the rescaled variant over a grid of window lengths and
//! scores each point with an accuracy/latency/energy trade-off so callers can
//! pick an operating point under explicit constraints.
//!
//! Everything is deterministic given a master seed: every random decision
//! draws from a named substream derived from it (see [`rng`]), so repeated
//! runs produce byte-identical artifacts.

pub mod checkpoint;
pub mod cost;
pub mod dataset;
pub mod encoding;
pub mod enhance;
pub mod error;
pub mod learning;
pub mod neuron;
pub mod pipeline;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};
