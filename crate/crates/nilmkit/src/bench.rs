//! Monte-Carlo experiment runner and sensitivity sweeps.
//!
//! An experiment measures how well each (feature space, classifier) pair
//! identifies appliances from switching events. Every trial runs the full
//! pipeline: obtain a record (generated or read from a corpus), extract one
//! delta signature per event, drop events below the power threshold,
//! attach labels (from the truth log when one exists, by clustering
//! otherwise), split, normalize, optionally tune hyper-parameters, train,
//! and score. Trials differ only in their derived seeds, so a report is a
//! pure function of its [`ExperimentSpec`].
//!
//! ## Features
//!
//! - The prediction-precision metric: correct classifications over total
//!   switching events.
//! - [`run_experiment`], producing a [`MetricsReport`] with every raw
//!   per-trial sample retained (summaries are recomputable order
//!   statistics, not baked-in aggregates).
//! - [`sweep`], rerunning an experiment along one axis (training fraction,
//!   power threshold, noise level, or load dynamics) with decorrelated
//!   seeds per value, exported as long-form CSV for plotting.
//!
//! ## Example
//!
//! ```
//! use nilmkit::bench::{run_experiment, DataSource, ExperimentSpec};
//! use nilmkit::simulate::{Appliance, Archetype, GridSpec, ScenarioConfig};
//!
//! let grid = GridSpec::default();
//! let appliances = vec![
//!     Appliance::new("heater", Archetype::Resistive, 1200.0, &grid, 1).unwrap(),
//!     Appliance::new("fan", Archetype::Inductive { phase: 0.5 }, 400.0, &grid, 2).unwrap(),
//! ];
//! let scenario = ScenarioConfig { hours: 0.25, events_per_hour: 60.0, ..Default::default() };
//! let mut spec = ExperimentSpec::new(DataSource::Synthetic { grid, appliances, scenario });
//! spec.trials = 2;
//! let report = run_experiment(&spec).unwrap();
//! let cell = &report.cells[0];
//! assert_eq!(cell.trials.len(), 2);
//! assert!(cell.overall_summary().unwrap().median >= 0.0);
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{
    detect_events_with, extract_delta_with, purity, select_k, DeltaSignature, Polarity,
    DEFAULT_SETTLE_CYCLES,
};
use crate::features::{featurize, FeatureSpace};
use crate::ingest;
use crate::learn::{self, Algorithm, Normalizer, DEFAULT_FRACTIONS};
use crate::optimize::{model_select, DeConfig, SelectKind};
use crate::seed::derive_seed;
use crate::simulate::{generate_scenario, Appliance, GridSpec, ScenarioConfig};

const TRIAL_TAG: u64 = 0x5452_4C;
const CLUSTER_TAG: u64 = 0x434C_55;
const FIT_TAG: u64 = 0x4649_54;
const SELECT_TAG: u64 = 0x5345_4C;
const SWEEP_TAG: u64 = 0x5357_50;

/// Largest settle window the event-window extractor supports; beyond this
/// the post-event cycle could leak into a neighboring event's segment.
pub const MAX_SETTLE_CYCLES: usize = 12;

// ---------------------------------------------------------------------------
// Precision
// ---------------------------------------------------------------------------

/// Fraction of correctly predicted classes over all switching events.
///
/// The ratio is exact: 97 correct out of 100 gives `0.97`.
pub fn precision(predicted: &[u32], truth: &[u32]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::Argument("precision needs at least one prediction".into()));
    }
    if predicted.len() != truth.len() {
        return Err(Error::Argument(format!(
            "precision got {} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / predicted.len() as f64)
}

// ---------------------------------------------------------------------------
// Experiment specification
// ---------------------------------------------------------------------------

/// Where a run's events come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// A corpus directory written by [`crate::ingest::write_corpus`]. When
    /// `truth.csv` sits next to the header, events are labeled from it;
    /// otherwise labels come from clustering.
    Corpus(PathBuf),
    /// A scenario generated fresh each trial from these appliances.
    Synthetic {
        grid: GridSpec,
        appliances: Vec<Appliance>,
        scenario: ScenarioConfig,
    },
}

/// Everything a Monte-Carlo run needs. Equal specs give equal reports.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub source: DataSource,
    /// Feature spaces to evaluate; each gets its own report cells.
    pub spaces: Vec<FeatureSpace>,
    /// Classifiers to evaluate against every space.
    pub algorithms: Vec<Algorithm>,
    /// Train / cross-validation / test fractions, summing to one.
    pub fractions: (f64, f64, f64),
    /// Events whose power step is smaller than this are dropped.
    pub p_min: f64,
    pub trials: usize,
    /// Settle window (cycles) for event extraction.
    pub settle: usize,
    /// Label events by clustering even when a truth log exists. Cluster
    /// purity against the truth is then reported per trial.
    pub label_by_clustering: bool,
    /// Tune hyper-parameters per trial with this search budget. Boosting
    /// has no tuned hyper-parameter and passes through unchanged.
    pub model_select: Option<DeConfig>,
    pub seed: u64,
}

impl ExperimentSpec {
    /// A single-trial spec with the wave-shape space and boosting, the
    /// default split and a 50 W threshold.
    pub fn new(source: DataSource) -> Self {
        ExperimentSpec {
            source,
            spaces: vec![FeatureSpace::Ws],
            algorithms: vec![Algorithm::Boost { rounds: 60 }],
            fractions: DEFAULT_FRACTIONS,
            p_min: 50.0,
            trials: 1,
            settle: DEFAULT_SETTLE_CYCLES,
            label_by_clustering: false,
            model_select: None,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.spaces.is_empty() {
            return Err(Error::Argument("an experiment needs at least one feature space".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Argument("an experiment needs at least one algorithm".into()));
        }
        if self.trials == 0 {
            return Err(Error::Argument("an experiment needs at least one trial".into()));
        }
        if !(self.p_min >= 0.0) || !self.p_min.is_finite() {
            return Err(Error::Argument(format!("p_min must be non-negative, got {}", self.p_min)));
        }
        if self.settle == 0 || self.settle > MAX_SETTLE_CYCLES {
            return Err(Error::Argument(format!(
                "settle must lie in 1..={MAX_SETTLE_CYCLES}, got {}",
                self.settle
            )));
        }
        if !(self.fractions.0 > 0.0) {
            return Err(Error::Argument("the training fraction must be positive".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Scores of one trial. `total` counts every labeled event the trial saw;
/// `correct` counts those the trained model got right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub train_precision: f64,
    /// Absent when the test fraction rounds to an empty set.
    pub test_precision: Option<f64>,
    pub overall_precision: f64,
    pub correct: u64,
    pub total: u64,
    /// Cluster purity against the truth log, when both were in play.
    pub purity: Option<f64>,
}

/// Order statistics of one precision sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

fn summarize(samples: &[f64]) -> Option<Summary> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Some(Summary {
        max: sorted[n - 1],
        mean: sorted.iter().sum::<f64>() / n as f64,
        median,
    })
}

/// All trials of one (space, algorithm) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub space: FeatureSpace,
    pub algorithm: Algorithm,
    pub trials: Vec<TrialOutcome>,
    /// Confusion counts over every event of every trial: `confusion[t][p]`
    /// is how often true class `t` was predicted as `p`. Rows sum to the
    /// per-class event totals.
    pub confusion: Vec<Vec<u64>>,
    /// Names along the confusion axes (appliance or cluster names).
    pub classes: Vec<String>,
}

impl CellReport {
    pub fn overall_summary(&self) -> Option<Summary> {
        summarize(&self.trials.iter().map(|t| t.overall_precision).collect::<Vec<_>>())
    }

    pub fn train_summary(&self) -> Option<Summary> {
        summarize(&self.trials.iter().map(|t| t.train_precision).collect::<Vec<_>>())
    }

    pub fn test_summary(&self) -> Option<Summary> {
        summarize(&self.trials.iter().filter_map(|t| t.test_precision).collect::<Vec<_>>())
    }

    fn bump(&mut self, truth: usize, predicted: usize) {
        let need = truth.max(predicted) + 1;
        if self.confusion.len() < need {
            for row in self.confusion.iter_mut() {
                row.resize(need, 0);
            }
            self.confusion.resize_with(need, || vec![0; need]);
        }
        self.confusion[truth][predicted] += 1;
    }
}

/// The full result table of one experiment, cells ordered space-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cells: Vec<CellReport>,
}

impl MetricsReport {
    pub fn cell(&self, space: FeatureSpace, algorithm: Algorithm) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.space == space && c.algorithm == algorithm)
    }

    /// Long-form CSV with one row per (cell, trial). Reruns of the same
    /// spec produce byte-identical output.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("space,algorithm,trial,train_precision,test_precision,overall_precision,correct,total,purity\n");
        for cell in &self.cells {
            for t in &cell.trials {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    cell.space.name(),
                    cell.algorithm.name(),
                    t.trial,
                    t.train_precision,
                    t.test_precision.map_or(String::new(), |v| v.to_string()),
                    t.overall_precision,
                    t.correct,
                    t.total,
                    t.purity.map_or(String::new(), |v| v.to_string()),
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

// ---------------------------------------------------------------------------
// Event assembly
// ---------------------------------------------------------------------------

/// One trial's labeled feature rows, aligned across spaces.
#[derive(Clone)]
struct EventSet {
    /// `rows[space_index][event]` in the order of `spec.spaces`.
    rows: Vec<Vec<Vec<f64>>>,
    labels: Vec<u32>,
    class_names: Vec<String>,
    purity: Option<f64>,
}

/// Flips an off-event so both polarities of one appliance share a shape.
pub(crate) fn canonical(sig: DeltaSignature) -> DeltaSignature {
    if sig.polarity == Polarity::Off {
        DeltaSignature {
            cycle: sig.cycle.with_negated_current(),
            event_index: sig.event_index,
            polarity: sig.polarity,
            p_delta: sig.p_delta,
        }
    } else {
        sig
    }
}

fn too_few(got: usize, classes: usize) -> Error {
    Error::InsufficientData { got, needed: 3 * classes.max(1), filter: "p_min" }
}

/// Featurizes canonical signatures in every requested space.
fn feature_rows(spaces: &[FeatureSpace], sigs: &[DeltaSignature]) -> Result<Vec<Vec<Vec<f64>>>> {
    spaces
        .iter()
        .map(|&space| sigs.iter().map(|s| Ok(featurize(s, space)?.values)).collect())
        .collect()
}

/// Replaces truth labels with cluster assignments on the first space's
/// rows (z-scored first so no feature dominates by unit). Purity against
/// the replaced labels is kept when they were real truth.
fn cluster_labels(
    rows: &[Vec<Vec<f64>>],
    truth: Option<&[u32]>,
    seed: u64,
) -> Result<(Vec<u32>, Vec<String>, Option<f64>)> {
    let scaled = Normalizer::fit(&rows[0])?.apply_all(&rows[0]);
    let (k, clustering) = select_k(&scaled, seed)?;
    let labels: Vec<u32> = clustering.assignments.iter().map(|&a| a as u32).collect();
    let names = (0..k).map(|j| format!("cluster {j}")).collect();
    let pure = match truth {
        Some(t) => {
            let t_usize: Vec<usize> = t.iter().map(|&v| v as usize).collect();
            Some(purity(&clustering.assignments, &t_usize)?)
        }
        None => None,
    };
    Ok((labels, names, pure))
}

/// Generates a scenario for this trial and harvests one filtered,
/// canonicalized signature per truth event.
fn assemble_synthetic(
    spec: &ExperimentSpec,
    grid: &GridSpec,
    appliances: &[Appliance],
    scenario: &ScenarioConfig,
    trial_seed: u64,
) -> Result<EventSet> {
    let mut config = *scenario;
    config.seed = trial_seed;
    let record = generate_scenario(grid, appliances, &config)?;
    let spc = grid.samples_per_cycle;
    let margin = spec.settle.max(2) as u64;

    let mut sigs = Vec::new();
    let mut labels = Vec::new();
    for te in &record.truth {
        let start = te.cycle - margin;
        let len = margin as usize + spec.settle + 2;
        let (wv, wi) = record.window_waveforms(start, len)?;
        let delta = extract_delta_with(&wv, &wi, margin as usize * spc, spec.settle)?;
        if delta.p_delta.abs() < spec.p_min {
            continue;
        }
        sigs.push(canonical(DeltaSignature {
            event_index: te.cycle as usize * spc,
            ..delta
        }));
        labels.push(te.appliance as u32);
    }
    if sigs.len() < 3 {
        return Err(too_few(sigs.len(), 1));
    }

    let rows = feature_rows(&spec.spaces, &sigs)?;
    let class_names: Vec<String> = appliances.iter().map(|a| a.name.clone()).collect();
    if spec.label_by_clustering {
        let (labels, class_names, purity) =
            cluster_labels(&rows, Some(&labels), derive_seed(trial_seed, &[CLUSTER_TAG]))?;
        check_count(&labels)?;
        return Ok(EventSet { rows, labels, class_names, purity });
    }
    check_count(&labels)?;
    Ok(EventSet { rows, labels, class_names, purity: None })
}

/// Reads a corpus once, detects events, and labels them from the adjacent
/// truth log or by clustering.
fn assemble_corpus(spec: &ExperimentSpec, dir: &Path) -> Result<EventSet> {
    let (wv, wi) = ingest::read_waveform_pair(dir)?;
    let spc = wv.samples_per_cycle();
    let indices = detect_events_with(&wv, &wi, spec.p_min, spec.settle)?;

    let truth_path = dir.join("truth.csv");
    let truth = if truth_path.exists() { Some(ingest::read_truth_log(&truth_path)?) } else { None };

    let mut sigs = Vec::new();
    let mut labels = Vec::new();
    let mut matched = vec![false; truth.as_ref().map_or(0, |t| t.len())];
    for &idx in &indices {
        let ce = idx / spc;
        // Skip events whose settle window would leave the record.
        if ce < spec.settle.max(2) || (ce + spec.settle + 2) * spc > wv.len() {
            continue;
        }
        let delta = extract_delta_with(&wv, &wi, idx, spec.settle)?;
        if delta.p_delta.abs() < spec.p_min {
            continue;
        }
        let label = match &truth {
            Some(events) => {
                // Nearest unmatched toggle within the settle window.
                let best = events
                    .iter()
                    .enumerate()
                    .filter(|(j, t)| {
                        !matched[*j] && t.cycle.abs_diff(ce as u64) <= spec.settle as u64 + 2
                    })
                    .min_by_key(|(_, t)| t.cycle.abs_diff(ce as u64));
                match best {
                    Some((j, t)) => {
                        matched[j] = true;
                        t.appliance as u32
                    }
                    None => continue,
                }
            }
            None => 0,
        };
        sigs.push(canonical(delta));
        labels.push(label);
    }
    if sigs.len() < 3 {
        return Err(too_few(sigs.len(), 1));
    }

    let rows = feature_rows(&spec.spaces, &sigs)?;
    match &truth {
        Some(events) if !spec.label_by_clustering => {
            let universe = events.iter().map(|t| t.appliance).max().unwrap_or(0) + 1;
            let mut class_names = vec![String::new(); universe];
            for t in events {
                class_names[t.appliance] = t.name.clone();
            }
            for (j, name) in class_names.iter_mut().enumerate() {
                if name.is_empty() {
                    *name = format!("appliance {j}");
                }
            }
            check_count(&labels)?;
            Ok(EventSet { rows, labels, class_names, purity: None })
        }
        _ => {
            let reference = truth.is_some().then_some(&labels[..]);
            let (labels, class_names, purity) =
                cluster_labels(&rows, reference, derive_seed(spec.seed, &[CLUSTER_TAG]))?;
            check_count(&labels)?;
            Ok(EventSet { rows, labels, class_names, purity })
        }
    }
}

/// The events-per-class floor: a split needs a few samples of everything.
fn check_count(labels: &[u32]) -> Result<()> {
    let mut distinct: Vec<u32> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if labels.len() < 3 * distinct.len() {
        return Err(too_few(labels.len(), distinct.len()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// The runner
// ---------------------------------------------------------------------------

fn select_kind(algorithm: &Algorithm) -> Option<SelectKind> {
    match algorithm {
        Algorithm::Ann { .. } => Some(SelectKind::Ann),
        Algorithm::AnnEa { .. } => Some(SelectKind::AnnEa),
        Algorithm::Svm { .. } => Some(SelectKind::Svm),
        Algorithm::Boost { .. } => None,
    }
}

/// Runs the full Monte-Carlo experiment. Scores are gathered per trial
/// into one [`CellReport`] per (space, algorithm) pair; trial `t` always
/// sees the same data and split regardless of which cell is being scored.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<MetricsReport> {
    spec.validate()?;

    // A corpus is fixed data: assemble it once and reuse across trials.
    let fixed = match &spec.source {
        DataSource::Corpus(dir) => Some(assemble_corpus(spec, dir)?),
        DataSource::Synthetic { .. } => None,
    };

    let mut cells: Vec<CellReport> = Vec::new();
    for &space in &spec.spaces {
        for &algorithm in &spec.algorithms {
            cells.push(CellReport {
                space,
                algorithm,
                trials: Vec::with_capacity(spec.trials),
                confusion: Vec::new(),
                classes: Vec::new(),
            });
        }
    }

    for trial in 0..spec.trials {
        let trial_seed = derive_seed(spec.seed, &[TRIAL_TAG, trial as u64]);
        let events = match (&fixed, &spec.source) {
            (Some(set), _) => set.clone(),
            (None, DataSource::Synthetic { grid, appliances, scenario }) => {
                assemble_synthetic(spec, grid, appliances, scenario, trial_seed)?
            }
            (None, DataSource::Corpus(_)) => unreachable!("corpus sets are pre-assembled"),
        };

        let split = learn::split(&events.labels, spec.fractions, trial_seed)?;

        // Classes with training examples, densified for the trainers. A
        // class that drew no training rows cannot be learned; its rows stay
        // in the pool and score as misses.
        let mut present: Vec<u32> = split.train.iter().map(|&k| events.labels[k]).collect();
        present.sort_unstable();
        present.dedup();
        let dense_of = |label: u32| present.binary_search(&label).ok().map(|p| p as u32);

        let y_train: Vec<u32> = split
            .train
            .iter()
            .map(|&k| dense_of(events.labels[k]).expect("training labels define the class set"))
            .collect();
        // Cross-validation rows of unseen classes cannot steer early
        // stopping, so they are left out of the trainer's view.
        let cv_kept: Vec<usize> =
            split.cv.iter().copied().filter(|&k| dense_of(events.labels[k]).is_some()).collect();
        let y_cv: Vec<u32> = cv_kept.iter().map(|&k| dense_of(events.labels[k]).unwrap()).collect();

        let gather = |idx: &[usize], rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            idx.iter().map(|&k| rows[k].clone()).collect()
        };

        for (si, _) in spec.spaces.iter().enumerate() {
            let rows = &events.rows[si];
            let x_train_raw = gather(&split.train, rows);
            let normalizer = Normalizer::fit(&x_train_raw)?;
            let x_train = normalizer.apply_all(&x_train_raw);
            let x_cv = normalizer.apply_all(&gather(&cv_kept, rows));
            let x_all = normalizer.apply_all(rows);

            for (ai, &requested) in spec.algorithms.iter().enumerate() {
                let cell = &mut cells[si * spec.algorithms.len() + ai];
                let algorithm = match (&spec.model_select, select_kind(&requested)) {
                    (Some(de), Some(kind)) => {
                        let mut config = de.clone();
                        config.seed = derive_seed(trial_seed, &[SELECT_TAG, si as u64, ai as u64]);
                        model_select(kind, &x_train, &y_train, &x_cv, &y_cv, &config)?.0
                    }
                    _ => requested,
                };
                let fit_seed = derive_seed(trial_seed, &[FIT_TAG, si as u64, ai as u64]);
                let model = learn::train(algorithm, &x_train, &y_train, &x_cv, &y_cv, fit_seed)?;

                // Predictions mapped back to the stable outer ids.
                let predicted: Vec<u32> =
                    x_all.iter().map(|r| present[model.predict(r) as usize]).collect();
                let on = |idx: &[usize]| -> Result<f64> {
                    let p: Vec<u32> = idx.iter().map(|&k| predicted[k]).collect();
                    let t: Vec<u32> = idx.iter().map(|&k| events.labels[k]).collect();
                    precision(&p, &t)
                };
                let train_precision = on(&split.train)?;
                let test_precision = if split.test.is_empty() {
                    None
                } else {
                    Some(on(&split.test)?)
                };
                let correct =
                    predicted.iter().zip(&events.labels).filter(|(p, t)| p == t).count() as u64;
                let overall_precision = precision(&predicted, &events.labels)?;

                for (k, &pred) in predicted.iter().enumerate() {
                    cell.bump(events.labels[k] as usize, pred as usize);
                }
                for (j, name) in events.class_names.iter().enumerate() {
                    if cell.classes.len() <= j {
                        cell.classes.push(name.clone());
                    }
                }
                cell.trials.push(TrialOutcome {
                    trial,
                    train_precision,
                    test_precision,
                    overall_precision,
                    correct,
                    total: events.labels.len() as u64,
                    purity: events.purity,
                });
            }
        }
    }

    Ok(MetricsReport { cells })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// One tunable axis with the values to visit.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Training fraction; the cross-validation share is kept and the test
    /// share absorbs the rest.
    TrainFraction(Vec<f64>),
    /// Minimum event power in watts.
    PMin(Vec<f64>),
    /// Scenario noise level in dB (synthetic sources only).
    SnrDb(Vec<f64>),
    /// Scenario load dynamics on or off (synthetic sources only).
    Dynamics(Vec<bool>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::TrainFraction(_) => "train_fraction",
            SweepAxis::PMin(_) => "p_min",
            SweepAxis::SnrDb(_) => "snr_db",
            SweepAxis::Dynamics(_) => "dynamics",
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            SweepAxis::TrainFraction(v) | SweepAxis::PMin(v) | SweepAxis::SnrDb(v) => v.is_empty(),
            SweepAxis::Dynamics(v) => v.is_empty(),
        }
    }
}

/// One sweep value's label and report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: String,
    pub report: MetricsReport,
}

/// Reports along one axis, in the order the values were given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: String,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    /// Long-form CSV: the per-trial rows of every cell, prefixed with the
    /// axis name and value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "axis,value,space,algorithm,trial,train_precision,test_precision,overall_precision,correct,total,purity\n",
        );
        for cell in &self.cells {
            for line in cell.report.to_csv().lines().skip(1) {
                out.push_str(&format!("{},{},{line}\n", self.axis, cell.value));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn synthetic_scenario_mut<'a>(spec: &'a mut ExperimentSpec, axis: &SweepAxis) -> Result<&'a mut ScenarioConfig> {
    match &mut spec.source {
        DataSource::Synthetic { scenario, .. } => Ok(scenario),
        DataSource::Corpus(_) => Err(Error::Argument(format!(
            "a {} sweep needs a synthetic source; a recorded corpus cannot be regenerated",
            axis.name()
        ))),
    }
}

/// Runs one experiment per axis value. Each value gets its own seed
/// derived from the value itself, so repeated values (and separate sweeps
/// crossing the same value) produce identical reports.
pub fn sweep(spec: &ExperimentSpec, axis: &SweepAxis) -> Result<SweepTable> {
    if axis.is_empty() {
        return Err(Error::Argument("a sweep needs at least one axis value".into()));
    }
    let mut cells = Vec::new();
    let mut run_value = |bits: u64, value: String, patch: &dyn Fn(&mut ExperimentSpec) -> Result<()>| -> Result<()> {
        let mut cell_spec = spec.clone();
        patch(&mut cell_spec)?;
        cell_spec.seed = derive_seed(spec.seed, &[SWEEP_TAG, bits]);
        let report = run_experiment(&cell_spec)?;
        cells.push(SweepCell { value, report });
        Ok(())
    };
    match axis {
        SweepAxis::TrainFraction(values) => {
            for &f in values {
                run_value(f.to_bits(), f.to_string(), &|s: &mut ExperimentSpec| {
                    let cv = s.fractions.1;
                    if !(f > 0.0) || f + cv > 1.0 + 1e-9 {
                        return Err(Error::Argument(format!(
                            "train fraction {f} does not fit beside the cross-validation share {cv}"
                        )));
                    }
                    s.fractions = (f, cv, (1.0 - f - cv).max(0.0));
                    Ok(())
                })?;
            }
        }
        SweepAxis::PMin(values) => {
            for &p in values {
                run_value(p.to_bits(), p.to_string(), &|s: &mut ExperimentSpec| {
                    s.p_min = p;
                    Ok(())
                })?;
            }
        }
        SweepAxis::SnrDb(values) => {
            for &snr in values {
                run_value(snr.to_bits(), snr.to_string(), &|s: &mut ExperimentSpec| {
                    synthetic_scenario_mut(s, axis)?.snr_db = Some(snr);
                    Ok(())
                })?;
            }
        }
        SweepAxis::Dynamics(values) => {
            for &on in values {
                run_value(on as u64, on.to_string(), &|s: &mut ExperimentSpec| {
                    synthetic_scenario_mut(s, axis)?.dynamics = on;
                    Ok(())
                })?;
            }
        }
    }
    Ok(SweepTable { axis: axis.name().into(), cells })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::Archetype;

    #[test]
    fn precision_is_exact_arithmetic() {
        assert_eq!(precision(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(precision(&[9, 9, 9], &[1, 2, 3]).unwrap(), 0.0);
        let predicted: Vec<u32> = (0..100).map(|k| if k < 97 { 0 } else { 1 }).collect();
        let truth = vec![0u32; 100];
        assert_eq!(precision(&predicted, &truth).unwrap(), 0.97);
        assert!(matches!(precision(&[], &[]), Err(Error::Argument(_))));
        assert!(matches!(precision(&[1], &[1, 2]), Err(Error::Argument(_))));
    }

    fn bank(grid: &GridSpec) -> Vec<Appliance> {
        vec![
            Appliance::new("heater", Archetype::Resistive, 1500.0, grid, 11).unwrap(),
            Appliance::new("compressor", Archetype::Inductive { phase: 0.5 }, 1000.0, grid, 12).unwrap(),
            Appliance::new("rectifier", Archetype::PowerElectronic, 400.0, grid, 13).unwrap(),
            Appliance::new("mixed", Archetype::Composite, 700.0, grid, 14).unwrap(),
        ]
    }

    fn small_spec(snr_db: Option<f64>, seed: u64) -> ExperimentSpec {
        let grid = GridSpec::default();
        let mut spec = ExperimentSpec::new(DataSource::Synthetic {
            appliances: bank(&grid),
            grid,
            scenario: ScenarioConfig {
                hours: 0.5,
                events_per_hour: 80.0,
                snr_db,
                dynamics: false,
                seed: 0,
            },
        });
        spec.seed = seed;
        spec
    }

    #[test]
    fn noiseless_separated_bank_is_classified_almost_perfectly() {
        let mut spec = small_spec(None, 42);
        spec.trials = 25;
        let report = run_experiment(&spec).unwrap();
        let cell = &report.cells[0];
        assert_eq!(cell.trials.len(), 25);
        let summary = cell.overall_summary().unwrap();
        assert!(summary.median >= 0.98, "median {summary:?}");
        // Order statistics stay within the metric's range.
        assert!(summary.max <= 1.0 && summary.mean <= 1.0);
    }

    #[test]
    fn identical_specs_give_identical_reports() {
        let mut spec = small_spec(Some(30.0), 7);
        spec.spaces = vec![FeatureSpace::Pq, FeatureSpace::Ws];
        spec.trials = 2;
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        // Different seeds move the numbers.
        let mut other = small_spec(Some(30.0), 8);
        other.spaces = spec.spaces.clone();
        other.trials = 2;
        assert_ne!(run_experiment(&other).unwrap(), a);
    }

    #[test]
    fn confusion_rows_sum_to_class_totals() {
        let mut spec = small_spec(Some(25.0), 3);
        spec.trials = 3;
        let report = run_experiment(&spec).unwrap();
        let cell = &report.cells[0];
        let total_events: u64 = cell.trials.iter().map(|t| t.total).sum();
        let matrix_sum: u64 = cell.confusion.iter().flatten().sum();
        assert_eq!(matrix_sum, total_events);
        // Diagonal matches the summed correct counts.
        let diag: u64 = (0..cell.confusion.len()).map(|j| cell.confusion[j][j]).sum();
        let correct: u64 = cell.trials.iter().map(|t| t.correct).sum();
        assert_eq!(diag, correct);
        for t in &cell.trials {
            assert!(t.overall_precision >= 0.0 && t.overall_precision <= 1.0);
            assert_eq!(t.overall_precision, t.correct as f64 / t.total as f64);
        }
    }

    #[test]
    fn full_train_fraction_leaves_test_absent() {
        let mut spec = small_spec(None, 1);
        spec.fractions = (0.9, 0.1, 0.0);
        let report = run_experiment(&spec).unwrap();
        let cell = &report.cells[0];
        assert!(cell.trials[0].test_precision.is_none());
        assert!(cell.test_summary().is_none());
        assert!(cell.train_summary().is_some());
    }

    #[test]
    fn threshold_above_every_appliance_is_insufficient_data() {
        let mut spec = small_spec(None, 2);
        spec.p_min = 10_000.0;
        match run_experiment(&spec) {
            Err(Error::InsufficientData { got, filter, .. }) => {
                assert_eq!(got, 0);
                assert_eq!(filter, "p_min");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_validation_rejects_empty_plans() {
        let mut spec = small_spec(None, 0);
        spec.spaces.clear();
        assert!(matches!(run_experiment(&spec), Err(Error::Argument(_))));
        let mut spec = small_spec(None, 0);
        spec.trials = 0;
        assert!(matches!(run_experiment(&spec), Err(Error::Argument(_))));
        let mut spec = small_spec(None, 0);
        spec.settle = MAX_SETTLE_CYCLES + 1;
        assert!(matches!(run_experiment(&spec), Err(Error::Argument(_))));
    }

    #[test]
    fn clustered_labels_on_clean_data_recover_the_appliances() {
        let mut spec = small_spec(None, 5);
        spec.label_by_clustering = true;
        let report = run_experiment(&spec).unwrap();
        let cell = &report.cells[0];
        let purity = cell.trials[0].purity.expect("truth was available");
        assert!(purity >= 0.9, "purity {purity}");
        assert!(cell.classes[0].starts_with("cluster"));
    }

    #[test]
    fn sweep_cells_with_equal_values_are_identical() {
        let mut spec = small_spec(Some(30.0), 9);
        spec.trials = 2;
        let table = sweep(&spec, &SweepAxis::SnrDb(vec![30.0, 10.0, 30.0])).unwrap();
        assert_eq!(table.cells.len(), 3);
        assert_eq!(table.cells[0].report, table.cells[2].report);
        assert_ne!(table.cells[0].report, table.cells[1].report);
        // Rerunning reproduces the CSV byte for byte.
        let again = sweep(&spec, &SweepAxis::SnrDb(vec![30.0, 10.0, 30.0])).unwrap();
        assert_eq!(table.to_csv(), again.to_csv());
        assert!(table.to_csv().starts_with("axis,value,space,algorithm,trial"));
    }

    #[test]
    fn sweep_axis_constraints_are_enforced() {
        let spec = small_spec(None, 0);
        assert!(matches!(sweep(&spec, &SweepAxis::PMin(vec![])), Err(Error::Argument(_))));
        // Corpus sources cannot re-run at a different noise level.
        let corpus = ExperimentSpec::new(DataSource::Corpus(PathBuf::from("/nonexistent")));
        assert!(matches!(sweep(&corpus, &SweepAxis::SnrDb(vec![20.0])), Err(Error::Argument(_))));
        // Train fraction must leave room for the cross-validation share.
        assert!(matches!(
            sweep(&spec, &SweepAxis::TrainFraction(vec![0.99])),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn train_fraction_sweep_reshapes_the_split() {
        let mut spec = small_spec(None, 4);
        spec.trials = 1;
        let table = sweep(&spec, &SweepAxis::TrainFraction(vec![0.3, 0.6])).unwrap();
        for cell in &table.cells {
            let t = &cell.report.cells[0].trials[0];
            assert!(t.test_precision.is_some());
        }
    }

    #[test]
    fn corpus_round_trip_matches_truth_labels() {
        use crate::ingest::{write_corpus, write_truth_log, ChannelDef, CorpusHeader, SampleFormat};
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::default();
        let appliances = bank(&grid);
        let config = ScenarioConfig {
            hours: 0.02,
            events_per_hour: 6000.0,
            snr_db: None,
            dynamics: false,
            seed: 77,
        };
        let scenario = generate_scenario(&grid, &appliances, &config).unwrap();
        let (v, i) = scenario.materialize().unwrap();
        let header = CorpusHeader {
            sample_rate: grid.sample_rate(),
            mains_freq: grid.mains_freq,
            format: SampleFormat::F32,
            voltage_channel: 1,
            current_channel: 2,
            mains: vec![1, 2],
            channels: vec![
                ChannelDef { id: 1, name: "voltage".into() },
                ChannelDef { id: 2, name: "aggregate".into() },
            ],
        };
        write_corpus(dir.path(), &header, &[(1, &v), (2, &i)]).unwrap();
        write_truth_log(&dir.path().join("truth.csv"), &scenario.truth).unwrap();

        let mut spec = ExperimentSpec::new(DataSource::Corpus(dir.path().to_path_buf()));
        spec.trials = 2;
        let report = run_experiment(&spec).unwrap();
        let cell = &report.cells[0];
        // Noiseless templates are trivially separable.
        assert!(cell.trials[0].overall_precision >= 0.9);
        assert_eq!(cell.classes.len(), 4);
        assert!(cell.classes.contains(&"heater".to_string()));

        // Without the truth log the runner falls back to clustering.
        std::fs::remove_file(dir.path().join("truth.csv")).unwrap();
        let report = run_experiment(&spec).unwrap();
        assert!(report.cells[0].classes[0].starts_with("cluster"));
        assert!(report.cells[0].trials[0].purity.is_none());
    }
}
