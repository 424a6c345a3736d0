//! Window-length sweeps and the accuracy/latency/energy trade-off.
//!
//! A sweep trains, labels, and evaluates one network per (window length,
//! technique) pair over a grid of shortened windows. The `direct`
//! technique simply truncates the presentation window; `topspark`
//! additionally rescales the neuron parameters to the shorter window
//! first. The full-length direct run anchors normalization: every record's
//! relative latency and energy are ratios against it.
//!
//! Each record is scored `S = A - (tau * L_n + epsilon * E_n)` — accuracy
//! minus weighted relative costs — and [`select_best`] picks the
//! highest-scoring record that satisfies explicit accuracy/latency/energy
//! constraints, reporting infeasibility as a value rather than an error.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{cost_model, CostReport, CostTable};
use crate::dataset::LabeledDataset;
use crate::enhance::enhance_params;
use crate::error::{Error, Result};
use crate::pipeline::{assign_labels, evaluate_accuracy, train, RunConfig};
use crate::rng::stream_seed;

/// How a sweep point reaches its shortened window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    /// Keep full-window parameters, only shorten the window.
    Direct,
    /// Rescale threshold, refractory period, and adaptation step to the
    /// shorter window, then run it.
    Topspark,
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Technique::Direct => "direct",
            Technique::Topspark => "topspark",
        })
    }
}

/// Adjustment factors weighting relative latency and energy against
/// accuracy in the trade-off score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TradeoffWeights {
    pub tau: f64,
    pub epsilon: f64,
}

impl Default for TradeoffWeights {
    fn default() -> Self {
        TradeoffWeights {
            tau: 0.0,
            epsilon: 0.0,
        }
    }
}

impl TradeoffWeights {
    /// Both factors must be finite and non-negative.
    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::Contract(format!(
                "tau must be finite and >= 0, got {}",
                self.tau
            )));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::Contract(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Trade-off score `S = A - (tau * L_n + epsilon * E_n)`.
///
/// With both weights zero the score is the accuracy itself, so ranking by
/// score is ranking by accuracy.
pub fn tradeoff_score(accuracy: f64, report: &CostReport, w: &TradeoffWeights) -> Result<f64> {
    w.validate()?;
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::Contract(format!(
            "accuracy must lie in [0, 1], got {accuracy}"
        )));
    }
    Ok(accuracy - (w.tau * report.l_n + w.epsilon * report.e_n))
}

/// One evaluated sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub t1: u32,
    pub technique: Technique,
    pub accuracy: f64,
    pub cost: CostReport,
    pub score: f64,
}

/// All records of one sweep, sorted by window length (direct before
/// topspark within a length), plus the full-length window they are
/// normalized against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub t0: u32,
    pub weights: TradeoffWeights,
    pub records: Vec<SweepRecord>,
}

/// Runs the full train/label/evaluate pipeline for every grid point and
/// technique.
///
/// `base` supplies the full-window configuration; its `baseline_timestep`
/// is the anchor `t0`, and a direct run at `t0` is always executed (even
/// when the grid omits it) because every other record's relative cost is
/// normalized against it. Every point derives an independent seed stream
/// from the base seed and its own coordinates, so points are reproducible
/// in isolation and the grid may execute in parallel.
pub fn sweep(
    train_ds: &LabeledDataset,
    test_ds: &LabeledDataset,
    base: &RunConfig,
    grid: &[u32],
    techniques: &[Technique],
    weights: &TradeoffWeights,
    table: &CostTable,
) -> Result<SweepResult> {
    base.validate()?;
    weights.validate()?;
    table.validate()?;
    if grid.is_empty() {
        return Err(Error::Contract("sweep grid is empty".into()));
    }
    if techniques.is_empty() {
        return Err(Error::Contract("sweep technique list is empty".into()));
    }
    let t0 = base.baseline_timestep;
    if let Some(&bad) = grid.iter().find(|&&t1| t1 < 1 || t1 > t0) {
        return Err(Error::Contract(format!(
            "grid entry {bad} outside 1..={t0}"
        )));
    }
    if train_ds.input_dim() != test_ds.input_dim() {
        return Err(Error::Contract(format!(
            "train images have {} pixels, test images {}",
            train_ds.input_dim(),
            test_ds.input_dim()
        )));
    }

    let mut points: Vec<(u32, Technique)> = Vec::new();
    for &t1 in grid {
        for &tech in techniques {
            if !points.contains(&(t1, tech)) {
                points.push((t1, tech));
            }
        }
    }

    // The anchor run: direct technique at the full window.
    let (baseline_acc, baseline_report) =
        run_point(train_ds, test_ds, base, t0, Technique::Direct, table, None)?;

    let mut records: Vec<SweepRecord> = points
        .par_iter()
        .map(|&(t1, tech)| -> Result<SweepRecord> {
            let (accuracy, cost) = if t1 == t0 && tech == Technique::Direct {
                (baseline_acc, baseline_report)
            } else {
                run_point(
                    train_ds,
                    test_ds,
                    base,
                    t1,
                    tech,
                    table,
                    Some(&baseline_report),
                )?
            };
            let score = tradeoff_score(accuracy, &cost, weights)?;
            Ok(SweepRecord {
                t1,
                technique: tech,
                accuracy,
                cost,
                score,
            })
        })
        .collect::<Result<_>>()?;
    records.sort_by_key(|r| (r.t1, r.technique));

    Ok(SweepResult {
        t0,
        weights: *weights,
        records,
    })
}

/// Trains, labels, and evaluates one sweep point, returning its accuracy
/// and cost report (normalized when a baseline is given).
fn run_point(
    train_ds: &LabeledDataset,
    test_ds: &LabeledDataset,
    base: &RunConfig,
    t1: u32,
    technique: Technique,
    table: &CostTable,
    baseline: Option<&CostReport>,
) -> Result<(f64, CostReport)> {
    let t0 = base.baseline_timestep;
    let neuron = match technique {
        Technique::Direct => base.neuron,
        Technique::Topspark => enhance_params(&base.neuron, t0, t1)?.scaled,
    };
    let cfg = RunConfig {
        timestep: t1,
        neuron,
        seed: stream_seed(base.seed, &format!("sweep/{technique}/{t1}")),
        ..*base
    };
    let mut state = cfg.init_state(train_ds.input_dim())?;
    train(train_ds, &cfg, &mut state)?;
    let labels = assign_labels(train_ds, &cfg, &mut state)?;
    let accuracy = evaluate_accuracy(test_ds, &cfg, &mut state, &labels)?;
    let report = cost_model(&state.counts, table, cfg.n_neurons, baseline)?;
    Ok((accuracy, report))
}

/// Feasibility bounds for [`select_best`]; `None` leaves a dimension
/// unconstrained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Constraints {
    pub min_accuracy: Option<f64>,
    pub max_l_n: Option<f64>,
    pub max_e_n: Option<f64>,
}

impl Constraints {
    fn satisfied_by(&self, r: &SweepRecord) -> bool {
        self.min_accuracy.is_none_or(|m| r.accuracy >= m)
            && self.max_l_n.is_none_or(|m| r.cost.l_n <= m)
            && self.max_e_n.is_none_or(|m| r.cost.e_n <= m)
    }

    /// Total shortfall against the constraints; zero iff satisfied.
    fn violation(&self, r: &SweepRecord) -> f64 {
        let mut v = 0.0;
        if let Some(m) = self.min_accuracy {
            v += (m - r.accuracy).max(0.0);
        }
        if let Some(m) = self.max_l_n {
            v += (r.cost.l_n - m).max(0.0);
        }
        if let Some(m) = self.max_e_n {
            v += (r.cost.e_n - m).max(0.0);
        }
        v
    }
}

/// Outcome of constrained selection: a chosen record, or an explicit
/// infeasibility carrying the record closest to satisfying the
/// constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Selection {
    Chosen(SweepRecord),
    Infeasible { nearest_miss: SweepRecord },
}

/// Picks the highest-scoring record that satisfies the constraints; score
/// ties break toward the shorter window. With no satisfying record, the
/// result is [`Selection::Infeasible`] carrying the record with the
/// smallest total constraint shortfall (ties: higher score, then shorter
/// window).
pub fn select_best(result: &SweepResult, constraints: &Constraints) -> Result<Selection> {
    if result.records.is_empty() {
        return Err(Error::Contract(
            "sweep has no records to select from".into(),
        ));
    }
    let survivors: Vec<&SweepRecord> = result
        .records
        .iter()
        .filter(|r| constraints.satisfied_by(r))
        .collect();
    if let Some(best) = survivors.into_iter().reduce(|best, r| {
        if r.score > best.score || (r.score == best.score && r.t1 < best.t1) {
            r
        } else {
            best
        }
    }) {
        return Ok(Selection::Chosen(best.clone()));
    }
    let nearest = result
        .records
        .iter()
        .reduce(|best, r| {
            let (vb, vr) = (constraints.violation(best), constraints.violation(r));
            if vr < vb
                || (vr == vb && r.score > best.score)
                || (vr == vb && r.score == best.score && r.t1 < best.t1)
            {
                r
            } else {
                best
            }
        })
        .expect("records checked non-empty");
    Ok(Selection::Infeasible {
        nearest_miss: nearest.clone(),
    })
}

/// Renders a sweep as CSV, one row per record.
///
/// Columns: `technique, t1, accuracy, l_n, e_n, score, steps,
/// neuron_updates, synaptic_events, learning_updates, latency_s, energy`.
/// Floats print in Rust's shortest round-trip form, so equal sweeps render
/// byte-identically.
pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "technique,t1,accuracy,l_n,e_n,score,steps,neuron_updates,synaptic_events,learning_updates,latency_s,energy\n",
    );
    for r in &result.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.technique,
            r.t1,
            r.accuracy,
            r.cost.l_n,
            r.cost.e_n,
            r.score,
            r.cost.steps,
            r.cost.neuron_updates,
            r.cost.synaptic_events,
            r.cost.learning_updates,
            r.cost.latency_s,
            r.cost.energy,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::OpCounts;
    use crate::dataset::synth_dataset;
    use crate::encoding::EncoderConfig;
    use crate::learning::StdpConfig;

    fn report(l_n: f64, e_n: f64) -> CostReport {
        let counts = OpCounts {
            steps: 100,
            neuron_updates: 100,
            synaptic_events: 10,
            learning_updates: 5,
        };
        let mut r = cost_model(&counts, &CostTable::default(), 1, None).unwrap();
        r.l_n = l_n;
        r.e_n = e_n;
        r
    }

    fn record(t1: u32, technique: Technique, accuracy: f64, l_n: f64, e_n: f64) -> SweepRecord {
        let cost = report(l_n, e_n);
        SweepRecord {
            t1,
            technique,
            accuracy,
            cost,
            score: accuracy,
        }
    }

    #[test]
    fn score_matches_hand_values() {
        let w = TradeoffWeights {
            tau: 10.0,
            epsilon: 0.0,
        };
        let s = tradeoff_score(0.86, &report(30.0 / 350.0, 0.1), &w).unwrap();
        let expect = 0.86 - 10.0 * (30.0 / 350.0);
        assert!((s - expect).abs() < 1e-15);
        assert!((s - 0.002857142857142936).abs() < 1e-12);
        // Zero weights: score is the accuracy.
        let zero = TradeoffWeights::default();
        assert_eq!(
            tradeoff_score(0.73, &report(0.5, 0.5), &zero).unwrap(),
            0.73
        );
    }

    #[test]
    fn score_rejects_bad_inputs() {
        let w = TradeoffWeights {
            tau: -1.0,
            epsilon: 0.0,
        };
        assert!(tradeoff_score(0.5, &report(1.0, 1.0), &w).is_err());
        let ok = TradeoffWeights::default();
        assert!(tradeoff_score(1.5, &report(1.0, 1.0), &ok).is_err());
    }

    #[test]
    fn nonpositive_accuracy_score_bound() {
        // A = 0 keeps the score at or below zero for any weights.
        let w = TradeoffWeights {
            tau: 3.0,
            epsilon: 7.0,
        };
        let s = tradeoff_score(0.0, &report(0.3, 0.4), &w).unwrap();
        assert!(s <= 0.0);
    }

    #[test]
    fn select_best_honours_constraints_and_tie_breaks() {
        let sweep = SweepResult {
            t0: 350,
            weights: TradeoffWeights::default(),
            records: vec![
                record(10, Technique::Direct, 0.50, 10.0 / 350.0, 0.05),
                record(30, Technique::Topspark, 0.80, 30.0 / 350.0, 0.12),
                record(100, Technique::Direct, 0.80, 100.0 / 350.0, 0.35),
                record(350, Technique::Direct, 0.85, 1.0, 1.0),
            ],
        };
        // Unconstrained: highest score (accuracy) wins.
        let sel = select_best(&sweep, &Constraints::default()).unwrap();
        assert!(matches!(&sel, Selection::Chosen(r) if r.t1 == 350));
        // Cap latency: the 350 record is excluded; equal scores at 30 and
        // 100 break toward the shorter window.
        let constrained = Constraints {
            max_l_n: Some(0.5),
            ..Constraints::default()
        };
        let sel = select_best(&sweep, &constrained).unwrap();
        assert!(matches!(&sel, Selection::Chosen(r) if r.t1 == 30));
        // Impossible accuracy: infeasible, nearest miss is the most
        // accurate record.
        let impossible = Constraints {
            min_accuracy: Some(1.01),
            ..Constraints::default()
        };
        let sel = select_best(&sweep, &impossible).unwrap();
        match sel {
            Selection::Infeasible { nearest_miss } => assert_eq!(nearest_miss.t1, 350),
            Selection::Chosen(_) => panic!("constraints were unsatisfiable"),
        }
    }

    #[test]
    fn select_best_rejects_empty_sweep() {
        let empty = SweepResult {
            t0: 350,
            weights: TradeoffWeights::default(),
            records: vec![],
        };
        assert!(select_best(&empty, &Constraints::default()).is_err());
    }

    #[test]
    fn csv_layout_is_stable() {
        let sweep = SweepResult {
            t0: 350,
            weights: TradeoffWeights::default(),
            records: vec![record(30, Technique::Topspark, 0.8, 0.25, 0.5)],
        };
        let csv = to_csv(&sweep);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "technique,t1,accuracy,l_n,e_n,score,steps,neuron_updates,synaptic_events,learning_updates,latency_s,energy"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("topspark,30,0.8,0.25,0.5,"), "row: {row}");
        assert!(lines.next().is_none());
    }

    fn tiny_base() -> RunConfig {
        RunConfig {
            timestep: 12,
            baseline_timestep: 12,
            n_neurons: 6,
            seed: 5,
            encoder: EncoderConfig {
                rate_gain: 0.5 / 255.0,
                min_output_spikes: 1,
                max_retries: 2,
                ..EncoderConfig::default()
            },
            stdp: StdpConfig {
                norm_total: Some(1.2),
                ..StdpConfig::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn sweep_runs_sorts_and_normalizes() {
        let train_ds = synth_dataset(2, 6, 12, 3).unwrap();
        let test_ds = synth_dataset(2, 3, 12, 4).unwrap();
        let base = tiny_base();
        let grid = [12u32, 4, 8];
        let techniques = [Technique::Direct, Technique::Topspark];
        let result = sweep(
            &train_ds,
            &test_ds,
            &base,
            &grid,
            &techniques,
            &TradeoffWeights::default(),
            &CostTable::default(),
        )
        .unwrap();
        assert_eq!(result.t0, 12);
        assert_eq!(result.records.len(), 6);
        // Sorted ascending by window, direct before topspark.
        let order: Vec<(u32, Technique)> =
            result.records.iter().map(|r| (r.t1, r.technique)).collect();
        assert_eq!(
            order,
            vec![
                (4, Technique::Direct),
                (4, Technique::Topspark),
                (8, Technique::Direct),
                (8, Technique::Topspark),
                (12, Technique::Direct),
                (12, Technique::Topspark),
            ]
        );
        // The anchor record self-normalizes.
        let anchor = result
            .records
            .iter()
            .find(|r| r.t1 == 12 && r.technique == Technique::Direct)
            .unwrap();
        assert_eq!(anchor.cost.l_n, 1.0);
        assert_eq!(anchor.cost.e_n, 1.0);
        // Shorter windows report proportionally lower relative latency.
        for r in &result.records {
            assert!(
                (r.cost.l_n - f64::from(r.t1) / 12.0).abs() < 0.35, // retries may add steps
                "t1 {} l_n {}",
                r.t1,
                r.cost.l_n
            );
            assert!(r.cost.e_n <= 1.0 + 1e-9 || r.t1 == 12);
            assert!(r.score.is_finite());
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let train_ds = synth_dataset(2, 5, 12, 3).unwrap();
        let test_ds = synth_dataset(2, 3, 12, 4).unwrap();
        let base = tiny_base();
        let grid = [12u32, 6];
        let techniques = [Technique::Direct, Technique::Topspark];
        let a = sweep(
            &train_ds,
            &test_ds,
            &base,
            &grid,
            &techniques,
            &TradeoffWeights::default(),
            &CostTable::default(),
        )
        .unwrap();
        let b = sweep(
            &train_ds,
            &test_ds,
            &base,
            &grid,
            &techniques,
            &TradeoffWeights::default(),
            &CostTable::default(),
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(to_csv(&a), to_csv(&b));
    }

    #[test]
    fn sweep_validates_grid() {
        let train_ds = synth_dataset(2, 3, 12, 3).unwrap();
        let test_ds = synth_dataset(2, 2, 12, 4).unwrap();
        let base = tiny_base();
        let w = TradeoffWeights::default();
        let t = CostTable::default();
        let err = sweep(
            &train_ds,
            &test_ds,
            &base,
            &[],
            &[Technique::Direct],
            &w,
            &t,
        );
        assert!(err.is_err());
        let err = sweep(
            &train_ds,
            &test_ds,
            &base,
            &[13],
            &[Technique::Direct],
            &w,
            &t,
        );
        assert!(err.is_err());
    }
}
