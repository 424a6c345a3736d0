//! Unsupervised training, neuron labeling, and classification loops.
//!
//! The flow mirrors the classic unsupervised digit-recognition setup:
//! train the layer on unlabeled presentations (labels are never shown to
//! the plasticity rule), then present labeled data with learning frozen to
//! discover which class each neuron responds to, then classify unseen
//! samples by the average response of each class's neuron group.
//!
//! Each phase draws its encoder randomness from a named stream derived
//! from the run seed (`encode/train`, `encode/label`, `encode/infer`), so
//! phases are statistically independent but individually reproducible.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::encoding::{encode_with_retry, EncoderConfig};
use crate::error::{Error, Result};
use crate::learning::{
    decay_traces, depress_on_pre_spike, normalize_weights, stdp1_on_post_spike,
    stdp2_on_post_spike, StdpConfig, StdpRule,
};
use crate::neuron::{reset_state, step, Inhibition, NetworkState, NeuronParams};
use crate::rng::stream_rng;

/// Which phase of the experiment a run configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Label,
    Infer,
}

/// Everything one run needs: window length, network size, phase, seeds,
/// and the component configurations.
///
/// `timestep` is the authoritative presentation-window length; the
/// encoder's own `timestep_count` is overridden with it so the two can
/// never disagree. `baseline_timestep` names the full-length window the
/// run is conceptually derived from; the adaptive learning rule uses it to
/// estimate reference activity when none is configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub timestep: u32,
    pub n_neurons: u32,
    pub epochs: u32,
    pub phase: Phase,
    pub baseline_timestep: u32,
    pub seed: u64,
    pub inhibition: Inhibition,
    pub neuron: NeuronParams,
    pub stdp: StdpConfig,
    pub encoder: EncoderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            timestep: 350,
            n_neurons: 100,
            epochs: 1,
            phase: Phase::Train,
            baseline_timestep: 350,
            seed: 42,
            inhibition: Inhibition::Hard,
            neuron: NeuronParams::default(),
            stdp: StdpConfig::default(),
            encoder: EncoderConfig::default(),
        }
    }
}

impl RunConfig {
    /// Checks this configuration and all its components.
    pub fn validate(&self) -> Result<()> {
        if self.timestep < 1 {
            return Err(Error::Config("timestep must be >= 1".into()));
        }
        if self.n_neurons < 1 {
            return Err(Error::Config("n_neurons must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.baseline_timestep < 1 {
            return Err(Error::Config("baseline_timestep must be >= 1".into()));
        }
        self.neuron.validate()?;
        self.stdp.validate()?;
        self.encoder.validate()?;
        Ok(())
    }

    /// The encoder configuration actually used: the run's window length
    /// overrides the encoder's own.
    pub fn effective_encoder(&self) -> EncoderConfig {
        EncoderConfig {
            timestep_count: self.timestep,
            ..self.encoder
        }
    }

    /// Builds a fresh untrained network sized for this configuration, its
    /// weights drawn from the `init` stream of the run seed.
    pub fn init_state(&self, input_dim: usize) -> Result<NetworkState> {
        self.validate()?;
        let mut rng = stream_rng(self.seed, "init");
        NetworkState::new(
            input_dim,
            self.n_neurons as usize,
            &self.neuron,
            self.stdp.w_max,
            &mut rng,
        )
    }

    /// The plasticity configuration with the adaptive-rate reference
    /// resolved: when unset, it is estimated as the dataset's mean total
    /// intensity times the encoder gain times the baseline window — the
    /// expected input-spike count a full-length presentation would
    /// deliver.
    pub fn resolved_stdp(&self, ds: &LabeledDataset) -> StdpConfig {
        let mut stdp = self.stdp;
        if stdp.rule == StdpRule::Stdp2 && stdp.ref_pre_spikes.is_none() && !ds.is_empty() {
            let mean_intensity: f64 = ds
                .images
                .iter()
                .map(|img| img.iter().map(|&v| f64::from(v)).sum::<f64>())
                .sum::<f64>()
                / ds.len() as f64;
            let estimate =
                mean_intensity * self.encoder.rate_gain * f64::from(self.baseline_timestep);
            if estimate > 0.0 {
                stdp.ref_pre_spikes = Some(estimate);
            }
        }
        stdp
    }
}

/// The class each neuron responds to, with the response counts the
/// assignment was made from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAssignment {
    /// Class id per neuron.
    pub label_of_neuron: Vec<u8>,
    /// Spike counts per neuron (rows) and class (columns).
    pub response_matrix: Vec<[u64; 10]>,
}

impl LabelAssignment {
    /// Checks shape coherence and class-id range.
    pub fn validate(&self) -> Result<()> {
        if self.label_of_neuron.len() != self.response_matrix.len() {
            return Err(Error::Contract(
                "label vector and response matrix disagree on neuron count".into(),
            ));
        }
        if let Some(&l) = self.label_of_neuron.iter().find(|&&l| l > 9) {
            return Err(Error::Contract(format!("assigned class {l} outside 0-9")));
        }
        Ok(())
    }
}

/// Checks a dataset/network/config triple is coherent before a run.
fn check_run_inputs(ds: &LabeledDataset, cfg: &RunConfig, state: &NetworkState) -> Result<()> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::Contract("dataset is empty".into()));
    }
    ds.validate()?;
    if ds.input_dim() != state.n_inputs {
        return Err(Error::Contract(format!(
            "dataset images have {} pixels but the network has {} inputs",
            ds.input_dim(),
            state.n_inputs
        )));
    }
    if state.n_neurons != cfg.n_neurons as usize {
        return Err(Error::Contract(format!(
            "network has {} neurons but the config says {}",
            state.n_neurons, cfg.n_neurons
        )));
    }
    if let Some(t) = cfg.stdp.norm_total {
        let ceiling = state.n_inputs as f64 * cfg.stdp.w_max;
        if t > ceiling {
            return Err(Error::Config(format!(
                "norm_total {t} exceeds the reachable column sum {ceiling} \
                 ({} inputs at w_max {})",
                state.n_inputs, cfg.stdp.w_max
            )));
        }
    }
    Ok(())
}

/// How every presentation of one pass runs: model parameters, plasticity
/// table, encoder, competition policy, and whether learning is on.
struct PresentSetup<'a> {
    params: &'a NeuronParams,
    stdp: &'a StdpConfig,
    enc: &'a EncoderConfig,
    inhibition: Inhibition,
    learning: bool,
}

/// Presents one sample: encodes it (with silent-sample retry), runs the
/// window, and applies plasticity when the setup has learning on.
///
/// `per_neuron` receives the output spike counts of the accepted
/// presentation; the return value is their sum.
fn present(
    state: &mut NetworkState,
    setup: &PresentSetup<'_>,
    image: &[u8],
    rng: &mut ChaCha8Rng,
    per_neuron: &mut [u64],
) -> Result<u64> {
    let PresentSetup {
        params,
        stdp,
        enc,
        inhibition,
        learning,
    } = *setup;
    let mut total = 0u64;
    encode_with_retry(image, enc, rng, |train| {
        reset_state(state, params);
        per_neuron.fill(0);
        let mut out_count = 0u64;
        let mut pre_count = 0u64;
        for t in 0..train.timesteps() {
            let row = train.row(t);
            let spikes = step(state, params, row, learning, inhibition)?;
            decay_traces(state, stdp, row, &spikes);
            if learning {
                pre_count += row.iter().filter(|&&s| s != 0).count() as u64;
                match stdp.rule {
                    StdpRule::Stdp1 => stdp1_on_post_spike(state, stdp, &spikes),
                    StdpRule::Stdp2 => stdp2_on_post_spike(state, stdp, &spikes, pre_count),
                }
                depress_on_pre_spike(state, stdp, row);
            }
            for (slot, &s) in per_neuron.iter_mut().zip(&spikes) {
                *slot += u64::from(s);
            }
            out_count += spikes.iter().map(|&s| u64::from(s)).sum::<u64>();
        }
        total = out_count;
        Ok(out_count)
    })?;
    Ok(total)
}

/// Trains the network on every sample of `ds` for `cfg.epochs` passes.
///
/// Presentation order is reshuffled every epoch so that datasets stored
/// in class-sorted order do not let the first class capture every
/// neuron before the others appear. Per sample: reset transient state,
/// encode with retry, run the window with plasticity on, then
/// renormalize the weight columns. Labels are never consulted. The
/// network's weights enter training already normalized so the first
/// sample sees the same weight budget as the rest.
pub fn train(ds: &LabeledDataset, cfg: &RunConfig, state: &mut NetworkState) -> Result<()> {
    check_run_inputs(ds, cfg, state)?;
    if cfg.phase != Phase::Train {
        return Err(Error::Contract(format!(
            "train called with phase {:?}",
            cfg.phase
        )));
    }
    let stdp = cfg.resolved_stdp(ds);
    let enc = cfg.effective_encoder();
    let mut rng = stream_rng(cfg.seed, "encode/train");
    let mut order_rng = stream_rng(cfg.seed, "train/order");
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut scratch = vec![0u64; state.n_neurons];
    let setup = PresentSetup {
        params: &cfg.neuron,
        stdp: &stdp,
        enc: &enc,
        inhibition: cfg.inhibition,
        learning: true,
    };
    normalize_weights(state, &stdp);
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        for &sample in &order {
            present(state, &setup, &ds.images[sample], &mut rng, &mut scratch)?;
            normalize_weights(state, &stdp);
        }
    }
    Ok(())
}

/// Presents labeled samples with learning frozen and assigns each neuron
/// the class it spiked most for. Ties break toward the lower class id;
/// silent neurons land on class 0.
pub fn assign_labels(
    ds: &LabeledDataset,
    cfg: &RunConfig,
    state: &mut NetworkState,
) -> Result<LabelAssignment> {
    check_run_inputs(ds, cfg, state)?;
    let stdp = cfg.resolved_stdp(ds);
    let enc = cfg.effective_encoder();
    let mut rng = stream_rng(cfg.seed, "encode/label");
    let n = state.n_neurons;
    let mut response = vec![[0u64; 10]; n];
    let mut per_neuron = vec![0u64; n];
    let setup = PresentSetup {
        params: &cfg.neuron,
        stdp: &stdp,
        enc: &enc,
        inhibition: cfg.inhibition,
        learning: false,
    };
    for (image, &label) in ds.images.iter().zip(&ds.labels) {
        present(state, &setup, image, &mut rng, &mut per_neuron)?;
        for (row, &count) in response.iter_mut().zip(&per_neuron) {
            row[label as usize] += count;
        }
    }
    let label_of_neuron = response
        .iter()
        .map(|row| {
            let mut best_class = 0u8;
            let mut best_count = row[0];
            for (c, &count) in row.iter().enumerate().skip(1) {
                if count > best_count {
                    best_count = count;
                    best_class = c as u8;
                }
            }
            best_class
        })
        .collect();
    Ok(LabelAssignment {
        label_of_neuron,
        response_matrix: response,
    })
}

/// Turns per-neuron spike counts into a class decision: the class whose
/// assigned neurons spiked most on average wins; ties break toward the
/// lower class id, and total silence yields class 0.
pub fn decide(per_neuron: &[u64], labels: &LabelAssignment) -> u8 {
    let mut sum = [0u64; 10];
    let mut members = [0u64; 10];
    for (&count, &class) in per_neuron.iter().zip(&labels.label_of_neuron) {
        sum[class as usize] += count;
        members[class as usize] += 1;
    }
    let mut best_class = 0u8;
    let mut best_avg = 0.0f64;
    for c in 0..10 {
        let avg = if members[c] == 0 {
            0.0
        } else {
            sum[c] as f64 / members[c] as f64
        };
        if avg > best_avg {
            best_avg = avg;
            best_class = c as u8;
        }
    }
    best_class
}

/// Classifies one sample with the trained network and label assignment.
/// Learning stays off; the caller supplies the encoder randomness.
pub fn classify(
    image: &[u8],
    cfg: &RunConfig,
    state: &mut NetworkState,
    labels: &LabelAssignment,
    rng: &mut ChaCha8Rng,
) -> Result<u8> {
    cfg.validate()?;
    labels.validate()?;
    if labels.label_of_neuron.len() != state.n_neurons {
        return Err(Error::Contract(format!(
            "label assignment covers {} neurons, network has {}",
            labels.label_of_neuron.len(),
            state.n_neurons
        )));
    }
    let enc = cfg.effective_encoder();
    let mut per_neuron = vec![0u64; state.n_neurons];
    let setup = PresentSetup {
        params: &cfg.neuron,
        stdp: &cfg.stdp,
        enc: &enc,
        inhibition: cfg.inhibition,
        learning: false,
    };
    present(state, &setup, image, rng, &mut per_neuron)?;
    Ok(decide(&per_neuron, labels))
}

/// Fraction of `test` samples the network classifies correctly. The
/// encoder stream is derived fresh from the run seed, so repeated
/// evaluations of the same state agree exactly.
pub fn evaluate_accuracy(
    test: &LabeledDataset,
    cfg: &RunConfig,
    state: &mut NetworkState,
    labels: &LabelAssignment,
) -> Result<f64> {
    check_run_inputs(test, cfg, state)?;
    labels.validate()?;
    let mut rng = stream_rng(cfg.seed, "encode/infer");
    let mut correct = 0usize;
    for (image, &truth) in test.images.iter().zip(&test.labels) {
        if classify(image, cfg, state, labels, &mut rng)? == truth {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth_dataset;

    fn micro_cfg() -> RunConfig {
        RunConfig {
            timestep: 20,
            n_neurons: 10,
            epochs: 1,
            seed: 7,
            // The tiny window needs much brighter inputs and a larger
            // per-neuron weight budget than a full-length run to build up
            // threshold-crossing drive within 20 steps.
            encoder: EncoderConfig {
                rate_gain: 0.9 / 255.0,
                min_output_spikes: 2,
                max_retries: 3,
                ..EncoderConfig::default()
            },
            stdp: StdpConfig {
                norm_total: Some(2.4),
                ..StdpConfig::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn training_changes_weights_and_emits_spikes() {
        let ds = synth_dataset(2, 10, 16, 3).unwrap();
        let cfg = micro_cfg();
        let mut state = cfg.init_state(16).unwrap();
        let w0 = state.weights.clone();
        train(&ds, &cfg, &mut state).unwrap();
        assert_ne!(state.weights, w0);
        assert!(state.counts.steps > 0);
        assert!(state.counts.synaptic_events > 0);
    }

    #[test]
    fn training_rejects_empty_dataset() {
        let ds = LabeledDataset {
            images: vec![],
            labels: vec![],
            name: "empty".into(),
        };
        let cfg = micro_cfg();
        let mut state = cfg.init_state(16).unwrap();
        assert!(matches!(
            train(&ds, &cfg, &mut state),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn training_rejects_wrong_phase() {
        let ds = synth_dataset(2, 2, 16, 3).unwrap();
        let cfg = RunConfig {
            phase: Phase::Infer,
            ..micro_cfg()
        };
        let mut state = cfg.init_state(16).unwrap();
        assert!(matches!(
            train(&ds, &cfg, &mut state),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn zero_intensity_dataset_leaves_weights_to_normalization_only() {
        let ds = LabeledDataset {
            images: vec![vec![0u8; 16]; 4],
            labels: vec![0, 1, 0, 1],
            name: "dark".into(),
        };
        let cfg = micro_cfg();
        let mut state = cfg.init_state(16).unwrap();
        // Pre-normalize so training's own normalization is a fixed point.
        normalize_weights(&mut state, &cfg.stdp);
        let w0 = state.weights.clone();
        train(&ds, &cfg, &mut state).unwrap();
        for (a, b) in w0.iter().zip(&state.weights) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(state.counts.learning_updates, 0);
    }

    #[test]
    fn labeling_and_inference_leave_trained_state_untouched() {
        let ds = synth_dataset(2, 8, 16, 5).unwrap();
        let cfg = micro_cfg();
        let mut state = cfg.init_state(16).unwrap();
        train(&ds, &cfg, &mut state).unwrap();
        let weights = state.weights.clone();
        let theta = state.theta.clone();
        let labels = assign_labels(&ds, &cfg, &mut state).unwrap();
        let _ = evaluate_accuracy(&ds, &cfg, &mut state, &labels).unwrap();
        assert_eq!(state.weights, weights, "weights drifted outside training");
        assert_eq!(state.theta, theta, "thresholds drifted outside training");
    }

    #[test]
    fn pipeline_is_deterministic_per_seed() {
        let ds = synth_dataset(2, 8, 16, 5).unwrap();
        let cfg = micro_cfg();
        let run = |cfg: &RunConfig| {
            let mut state = cfg.init_state(16).unwrap();
            train(&ds, cfg, &mut state).unwrap();
            let labels = assign_labels(&ds, cfg, &mut state).unwrap();
            let acc = evaluate_accuracy(&ds, cfg, &mut state, &labels).unwrap();
            (state.weights.clone(), labels, acc)
        };
        let (w1, l1, a1) = run(&cfg);
        let (w2, l2, a2) = run(&cfg);
        assert_eq!(w1, w2);
        assert_eq!(l1, l2);
        assert_eq!(a1, a2);
        let other = RunConfig { seed: 8, ..cfg };
        let (w3, _, _) = run(&other);
        assert_ne!(w1, w3);
    }

    #[test]
    fn micro_run_classifies_above_chance() {
        // Two well-separated synthetic classes: even a tiny network should
        // beat the 50% coin flip comfortably.
        let train_ds = synth_dataset(2, 30, 16, 5).unwrap();
        let test_ds = synth_dataset(2, 10, 16, 99).unwrap();
        let cfg = micro_cfg();
        let mut state = cfg.init_state(16).unwrap();
        train(&train_ds, &cfg, &mut state).unwrap();
        let labels = assign_labels(&train_ds, &cfg, &mut state).unwrap();
        let acc = evaluate_accuracy(&test_ds, &cfg, &mut state, &labels).unwrap();
        assert!(acc >= 0.7, "accuracy {acc} not above chance");
    }

    #[test]
    fn decide_prefers_higher_average_and_breaks_ties_low() {
        let labels = LabelAssignment {
            // Neurons 0,1 -> class 1; neuron 2 -> class 2.
            label_of_neuron: vec![1, 1, 2],
            response_matrix: vec![[0; 10]; 3],
        };
        // Class 1 avg = 3, class 2 avg = 4 -> class 2 wins.
        assert_eq!(decide(&[2, 4, 4], &labels), 2);
        // Equal averages -> lower class id.
        assert_eq!(decide(&[4, 4, 4], &labels), 1);
        // Silence -> class 0.
        assert_eq!(decide(&[0, 0, 0], &labels), 0);
    }

    #[test]
    fn label_assignment_tie_breaks_to_lowest_class() {
        let ds = synth_dataset(2, 4, 16, 5).unwrap();
        let cfg = micro_cfg();
        let mut state = cfg.init_state(16).unwrap();
        train(&ds, &cfg, &mut state).unwrap();
        let labels = assign_labels(&ds, &cfg, &mut state).unwrap();
        labels.validate().unwrap();
        // Every response row's assigned class carries its row maximum, and
        // no earlier class does strictly better.
        for (row, &assigned) in labels.response_matrix.iter().zip(&labels.label_of_neuron) {
            let max = *row.iter().max().unwrap();
            assert_eq!(row[assigned as usize], max);
            for &earlier in &row[..assigned as usize] {
                assert!(earlier < max || max == 0);
            }
        }
    }
}
