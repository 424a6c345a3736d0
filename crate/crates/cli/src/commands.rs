//! The five subcommands: train, infer, sweep, tradeoff, and dataset
//! utilities. Each returns `Ok(())` for exit 0 or a [`Failure`] carrying
//! the exit code; all validation happens before any file is written.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use topspark::checkpoint::{load_checkpoint, save_checkpoint};
use topspark::cost::cost_model;
use topspark::dataset::{load_idx, subset, synth_dataset, write_idx, LabeledDataset};
use topspark::enhance::enhance_params;
use topspark::neuron::NeuronParams;
use topspark::pipeline::{assign_labels, evaluate_accuracy, train, LabelAssignment, Phase};
use topspark::sweep::{select_best, sweep, to_csv, Selection, SweepRecord, SweepResult, Technique};

use crate::config::Settings;
use crate::Failure;

/// Trains on the configured training split and writes the checkpoint,
/// the neuron→class label table, and the run's cost report into the
/// output directory.
pub fn cmd_train(settings: &Settings) -> Result<(), Failure> {
    let ds = load_split(settings, "train")?;
    let cfg = settings.run_for(ds.input_dim(), Phase::Train)?;
    let mut state = cfg.init_state(ds.input_dim()).map_err(Failure::from)?;
    train(&ds, &cfg, &mut state).map_err(Failure::from)?;
    let labels = assign_labels(&ds, &cfg, &mut state).map_err(Failure::from)?;
    let report =
        cost_model(&state.counts, &settings.cost, cfg.n_neurons, None).map_err(Failure::from)?;
    fs::create_dir_all(&settings.out).map_err(|e| Failure {
        code: 2,
        message: format!("cannot create {}: {e}", settings.out.display()),
    })?;
    let ckpt_path = settings.out.join("checkpoint.tspk");
    save_checkpoint(&ckpt_path, &state, cfg.timestep).map_err(Failure::from)?;
    let labels_path = settings.out.join("labels.json");
    write_json(&labels_path, &labels)?;
    let cost_path = settings.out.join("cost.json");
    write_json(&cost_path, &report)?;
    println!(
        "trained {} neurons on {} samples ({} inputs, {} technique, T = {})",
        cfg.n_neurons,
        ds.len(),
        ds.input_dim(),
        settings.technique,
        cfg.timestep
    );
    println!("checkpoint: {}", ckpt_path.display());
    println!("labels:     {}", labels_path.display());
    println!("cost:       {}", cost_path.display());
    Ok(())
}

/// Loads a checkpoint plus label table, evaluates the configured test
/// split, and prints accuracy together with the evaluation cost report.
pub fn cmd_infer(
    settings: &Settings,
    checkpoint: Option<PathBuf>,
    labels: Option<PathBuf>,
) -> Result<(), Failure> {
    let ckpt_path = checkpoint.unwrap_or_else(|| settings.out.join("checkpoint.tspk"));
    let labels_path = labels.unwrap_or_else(|| settings.out.join("labels.json"));
    let ds = load_split(settings, "test")?;
    let ckpt = load_checkpoint(&ckpt_path).map_err(Failure::from)?;
    let label_table: LabelAssignment = read_json(&labels_path)?;
    let mut cfg = settings.run_for(ds.input_dim(), Phase::Infer)?;
    if ckpt.timestep != cfg.timestep {
        return Err(Failure {
            code: 1,
            message: format!(
                "checkpoint was trained with timestep {} but the run is configured for {}; \
                 pass --timestep {} to match",
                ckpt.timestep, cfg.timestep, ckpt.timestep
            ),
        });
    }
    cfg.n_neurons = ckpt.n_neurons;
    let mut state = ckpt.into_state(&cfg.neuron).map_err(Failure::from)?;
    let accuracy = evaluate_accuracy(&ds, &cfg, &mut state, &label_table).map_err(Failure::from)?;
    let report =
        cost_model(&state.counts, &settings.cost, cfg.n_neurons, None).map_err(Failure::from)?;
    println!("accuracy: {accuracy:.4} on {} samples", ds.len());
    println!(
        "cost: {} steps, {} neuron updates, {} synaptic events, latency {:.4} s, energy {:.1}",
        report.steps,
        report.neuron_updates,
        report.synaptic_events,
        report.latency_s,
        report.energy
    );
    Ok(())
}

/// Runs the configured timestep grid under the configured techniques and
/// writes the results as CSV and JSON, printing a summary table.
pub fn cmd_sweep(settings: &Settings) -> Result<(), Failure> {
    let train_ds = load_split(settings, "train")?;
    let test_ds = load_split(settings, "test")?;
    let base = settings.sweep_base(train_ds.input_dim())?;
    let result = sweep(
        &train_ds,
        &test_ds,
        &base,
        &settings.grid,
        &settings.techniques,
        &settings.weights,
        &settings.cost,
    )
    .map_err(Failure::from)?;
    fs::create_dir_all(&settings.out).map_err(|e| Failure {
        code: 2,
        message: format!("cannot create {}: {e}", settings.out.display()),
    })?;
    let csv_path = settings.out.join("sweep.csv");
    write_text(&csv_path, &to_csv(&result))?;
    let json_path = settings.out.join("sweep.json");
    write_json(&json_path, &result)?;
    print_record_table(&result.records);
    println!("csv:  {}", csv_path.display());
    println!("json: {}", json_path.display());
    Ok(())
}

/// Re-scores a stored sweep under the configured adjustment factors,
/// applies the constraints, and reports the chosen record — or the
/// nearest miss with exit code 3 when no record satisfies them. The
/// chosen operating point is written out as a config fragment.
pub fn cmd_tradeoff(settings: &Settings, sweep_path: Option<PathBuf>) -> Result<(), Failure> {
    let path = sweep_path.unwrap_or_else(|| settings.out.join("sweep.json"));
    let stored: SweepResult = read_json(&path)?;
    let rescored = rescore(&stored, settings)?;
    print_record_table(&rescored.records);
    match select_best(&rescored, &settings.constraints).map_err(Failure::from)? {
        Selection::Chosen(record) => {
            println!(
                "chosen: {} at T = {} (accuracy {:.4}, score {:.4})",
                record.technique, record.t1, record.accuracy, record.score
            );
            let fragment_path = settings.out.join("choice.toml");
            write_choice(settings, &record, &fragment_path)?;
            println!("config fragment: {}", fragment_path.display());
            Ok(())
        }
        Selection::Infeasible { nearest_miss } => Err(Failure {
            code: 3,
            message: format!(
                "no sweep record satisfies the constraints; nearest miss is {} at T = {} \
                 (accuracy {:.4}, l_n {:.4}, e_n {:.4})",
                nearest_miss.technique,
                nearest_miss.t1,
                nearest_miss.accuracy,
                nearest_miss.cost.l_n,
                nearest_miss.cost.e_n
            ),
        }),
    }
}

/// `dataset synth`: generates a synthetic labelled corpus as an IDX pair.
pub fn cmd_dataset_synth(
    settings: &Settings,
    classes: u32,
    samples: u32,
    dim: usize,
    images: &Path,
    labels: &Path,
) -> Result<(), Failure> {
    let ds = synth_dataset(classes, samples, dim, settings.run.seed).map_err(Failure::from)?;
    write_idx(&ds, images, labels).map_err(Failure::from)?;
    println!(
        "wrote {} samples ({classes} classes, {dim} inputs) to {} / {}",
        ds.len(),
        images.display(),
        labels.display()
    );
    Ok(())
}

/// `dataset subset`: draws a class-stratified subset of an IDX pair and
/// writes it as a new pair.
pub fn cmd_dataset_subset(
    settings: &Settings,
    images: &Path,
    labels: &Path,
    n: usize,
    out_images: &Path,
    out_labels: &Path,
) -> Result<(), Failure> {
    let ds = load_idx(images, labels).map_err(Failure::from)?;
    let cut = subset(&ds, n, settings.run.seed).map_err(Failure::from)?;
    write_idx(&cut, out_images, out_labels).map_err(Failure::from)?;
    println!(
        "wrote {} of {} samples to {} / {}",
        cut.len(),
        ds.len(),
        out_images.display(),
        out_labels.display()
    );
    Ok(())
}

/// `dataset info`: prints sample count, input dimension, and the class
/// histogram of an IDX pair.
pub fn cmd_dataset_info(images: &Path, labels: &Path) -> Result<(), Failure> {
    let ds = load_idx(images, labels).map_err(Failure::from)?;
    println!(
        "{}: {} samples, {} inputs",
        ds.name,
        ds.len(),
        ds.input_dim()
    );
    for (class, count) in ds.class_counts().iter().enumerate() {
        if *count > 0 {
            println!("  class {class}: {count}");
        }
    }
    Ok(())
}

/// Operating point written by `tradeoff` for reuse as a config file.
#[derive(Serialize)]
struct ChoiceFragment {
    technique: Technique,
    timestep: u32,
    baseline_timestep: u32,
    neuron: NeuronParams,
}

fn write_choice(settings: &Settings, record: &SweepRecord, path: &Path) -> Result<(), Failure> {
    let t0 = settings.run.baseline_timestep;
    let neuron = match record.technique {
        Technique::Direct => settings.run.neuron,
        Technique::Topspark => {
            enhance_params(&settings.run.neuron, t0, record.t1)
                .map_err(Failure::from)?
                .scaled
        }
    };
    let fragment = ChoiceFragment {
        technique: record.technique,
        timestep: record.t1,
        baseline_timestep: t0,
        neuron,
    };
    let text = toml::to_string(&fragment).map_err(|e| Failure {
        code: 2,
        message: format!("cannot serialize config fragment: {e}"),
    })?;
    fs::create_dir_all(settings.out.as_path()).map_err(|e| Failure {
        code: 2,
        message: format!("cannot create {}: {e}", settings.out.display()),
    })?;
    write_text(path, &text)
}

fn rescore(stored: &SweepResult, settings: &Settings) -> Result<SweepResult, Failure> {
    let mut rescored = stored.clone();
    rescored.weights = settings.weights;
    for record in &mut rescored.records {
        record.score =
            topspark::sweep::tradeoff_score(record.accuracy, &record.cost, &settings.weights)
                .map_err(Failure::from)?;
    }
    Ok(rescored)
}

fn print_record_table(records: &[SweepRecord]) {
    println!(
        "{:<9} {:>5} {:>9} {:>8} {:>8} {:>9}",
        "technique", "t1", "accuracy", "l_n", "e_n", "score"
    );
    for r in records {
        println!(
            "{:<9} {:>5} {:>9.4} {:>8.4} {:>8.4} {:>9.4}",
            r.technique.to_string(),
            r.t1,
            r.accuracy,
            r.cost.l_n,
            r.cost.e_n,
            r.score
        );
    }
}

/// Loads the named split ("train" or "test") from the `[data]` table,
/// failing with a config error when the paths are absent.
fn load_split(settings: &Settings, split: &str) -> Result<LabeledDataset, Failure> {
    let (images, labels) = match split {
        "train" => (&settings.data.train_images, &settings.data.train_labels),
        _ => (&settings.data.test_images, &settings.data.test_labels),
    };
    match (images, labels) {
        (Some(i), Some(l)) => load_idx(i, l).map_err(Failure::from),
        _ => Err(Failure {
            code: 1,
            message: format!("config is missing data.{split}_images / data.{split}_labels"),
        }),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure {
        code: 2,
        message: format!("cannot serialize {}: {e}", path.display()),
    })?;
    write_text(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| Failure {
        code: 2,
        message: format!("malformed {}: {e}", path.display()),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure {
        code: 2,
        message: format!("cannot write {}: {e}", path.display()),
    })
}
