//! Command-line pipeline driver.
//!
//! Exposes the toolkit as file-based subcommands: `ingest` scans a corpus
//! for switching events, `simulate` writes a synthetic household corpus,
//! `extract`, `cluster`, `model-select` and `train` work on signature
//! databases, and `evaluate`, `sweep` and `report` run and render
//! Monte-Carlo experiments. Structured inputs are TOML documents; reports
//! come out as CSV for plotting plus JSON for machines.
//!
//! Every subcommand accepts `--seed` and `--out` and echoes its resolved
//! configuration to stdout, so a run can be reproduced from its log alone.
//! Reruns with equal inputs and seeds write byte-identical outputs.
//!
//! Exit codes: `0` success, `2` bad arguments or config, `3` missing or
//! inconsistent data, `4` numeric failure (degenerate input, stalled
//! training).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bench::{self, DataSource, ExperimentSpec, MetricsReport, SweepAxis, SweepTable};
use crate::error::{Error, Result};
use crate::events::{detect_events_with, extract_delta_with, kmeans, purity, select_k, DEFAULT_SETTLE_CYCLES};
use crate::features::{featurize, FeatureSpace};
use crate::ingest::{self, ChannelDef, CorpusHeader, SampleFormat, SignatureRecord};
use crate::learn::{self, Algorithm, Normalizer, DEFAULT_FRACTIONS};
use crate::optimize::{model_select, Acceptance, DeConfig, SelectKind};
use crate::seed::derive_seed;
use crate::simulate::{generate_scenario, Appliance, Archetype, GridSpec, ScenarioConfig};

/// Seed stream tag for per-appliance construction seeds ("APP").
const APPLIANCE_TAG: u64 = 0x41_50_50;

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "nilm",
    version,
    about = "Appliance-level load disaggregation: events, features, classifiers, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a corpus for switching events and write a signature database
    Ingest(IngestArgs),
    /// Generate a synthetic household recording as a corpus plus truth log
    Simulate(SimulateArgs),
    /// Project a signature database onto a feature space as CSV
    Extract(ExtractArgs),
    /// Group signatures into appliance clusters
    Cluster(ClusterArgs),
    /// Tune classifier hyper-parameters with differential evolution
    ModelSelect(ModelSelectArgs),
    /// Fit one classifier on a labeled database and save the model
    Train(TrainArgs),
    /// Run a Monte-Carlo experiment described by a config file
    Evaluate(EvaluateArgs),
    /// Rerun an experiment along one swept parameter
    Sweep(SweepArgs),
    /// Render a JSON report as a readable table
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Corpus directory holding header.toml and channel files
    corpus: PathBuf,
    /// Smallest per-cycle power step that counts as an event, in watts
    #[arg(long, default_value_t = 50.0)]
    p_min: f64,
    /// Cycles an event may ring before its post window is taken
    #[arg(long, default_value_t = DEFAULT_SETTLE_CYCLES)]
    settle: usize,
    /// Truth log for labeling; defaults to truth.csv inside the corpus
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Signature database to write
    #[arg(long, default_value = "signatures.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario description (appliances, duration, noise), TOML
    config: PathBuf,
    /// Overrides the seed given in the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Corpus directory to write
    #[arg(long, default_value = "corpus")]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Signature database to read
    db: PathBuf,
    /// Feature space: pq, har or ws
    #[arg(long, default_value = "ws")]
    space: FeatureSpace,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature table to write
    #[arg(long, default_value = "features.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Signature database to read
    db: PathBuf,
    /// Feature space the clustering runs in
    #[arg(long, default_value = "ws")]
    space: FeatureSpace,
    /// Number of clusters; picked by silhouette scan when omitted
    #[arg(long)]
    k: Option<usize>,
    /// Also write a copy of the database relabeled by cluster
    #[arg(long)]
    apply: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Assignment table to write
    #[arg(long, default_value = "clusters.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ModelSelectArgs {
    /// Labeled signature database to read
    db: PathBuf,
    /// Classifier family to tune: ann, ann+ea or svm
    #[arg(long)]
    kind: SelectKind,
    /// Feature space the search trains in
    #[arg(long, default_value = "ws")]
    space: FeatureSpace,
    #[arg(long, default_value_t = DEFAULT_FRACTIONS.0)]
    train_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_FRACTIONS.1)]
    cv_fraction: f64,
    #[arg(long, default_value_t = 12)]
    pop_size: usize,
    #[arg(long, default_value_t = 60)]
    generations: usize,
    /// Differential weight applied to the partner difference
    #[arg(long, default_value_t = 0.5)]
    weight: f64,
    /// Fixed recombination rate; adaptive acceptance when omitted
    #[arg(long)]
    acceptance_rate: Option<f64>,
    /// Stop as soon as the best objective reaches this value
    #[arg(long)]
    of_threshold: Option<f64>,
    /// Stop after this many generations without improvement
    #[arg(long)]
    stall_generations: Option<usize>,
    /// Also write the per-generation history as CSV
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Chosen algorithm and search stats, TOML
    #[arg(long, default_value = "selection.toml")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled signature database to read
    db: PathBuf,
    /// Classifier: ann, ann+ea, svm or boost (default hyper-parameters)
    #[arg(long, default_value = "boost")]
    algorithm: Algorithm,
    /// Feature space the model consumes
    #[arg(long, default_value = "ws")]
    space: FeatureSpace,
    #[arg(long, default_value_t = DEFAULT_FRACTIONS.0)]
    train_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_FRACTIONS.1)]
    cv_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_FRACTIONS.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Experiment description, TOML
    config: PathBuf,
    /// Overrides the seed given in the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Report stem; writes <out>.csv and <out>.json
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment description with a [sweep] section, TOML
    config: PathBuf,
    /// Overrides the seed given in the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Table stem; writes <out>.csv and <out>.json
    #[arg(long, default_value = "sweep")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// A report written by evaluate or sweep, JSON
    report: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rendered text; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parses the process arguments, runs the subcommand, and maps errors to
/// exit codes. The binary is a one-line wrapper around this.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version exit cleanly; usage errors exit 2.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => run_ingest(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Extract(args) => run_extract(args),
        Command::Cluster(args) => run_cluster(args),
        Command::ModelSelect(args) => run_model_select(args),
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Report(args) => run_report(args),
    }
}

/// Prints the effective settings as a small key-value document.
fn echo(command: &str, pairs: &[(&str, String)]) {
    println!("# resolved configuration");
    println!("command = \"{command}\"");
    for (key, value) in pairs {
        println!("{key} = {value}");
    }
}

fn quoted(path: &Path) -> String {
    format!("{:?}", path.display().to_string())
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

fn run_ingest(args: IngestArgs) -> Result<()> {
    let truth_path = args
        .truth
        .clone()
        .or_else(|| {
            let default = args.corpus.join("truth.csv");
            default.exists().then_some(default)
        });
    echo(
        "ingest",
        &[
            ("corpus", quoted(&args.corpus)),
            ("p_min", args.p_min.to_string()),
            ("settle", args.settle.to_string()),
            ("truth", truth_path.as_deref().map_or("\"none\"".into(), quoted)),
            ("seed", args.seed.to_string()),
            ("out", quoted(&args.out)),
        ],
    );

    let header = ingest::read_corpus_header(&args.corpus)?;
    let (v, i) = ingest::read_waveform_pair(&args.corpus)?;
    let spc = v.samples_per_cycle();
    let indices = detect_events_with(&v, &i, args.p_min, args.settle)?;
    let truth = truth_path.map(|p| ingest::read_truth_log(&p)).transpose()?;

    let mut matched = vec![false; truth.as_ref().map_or(0, |t| t.len())];
    let mut records = Vec::new();
    let mut labeled = 0usize;
    for &idx in &indices {
        let ce = idx / spc;
        // Skip events whose window would leave the record.
        if ce < args.settle.max(2) || (ce + args.settle + 2) * spc > v.len() {
            continue;
        }
        let sig = extract_delta_with(&v, &i, idx, args.settle)?;
        if sig.p_delta.abs() < args.p_min {
            continue;
        }
        // Nearest unmatched truth toggle within the settle window.
        let label = truth.as_ref().and_then(|events| {
            let best = events
                .iter()
                .enumerate()
                .filter(|(j, t)| !matched[*j] && t.cycle.abs_diff(ce as u64) <= args.settle as u64 + 2)
                .min_by_key(|(_, t)| t.cycle.abs_diff(ce as u64));
            best.map(|(j, t)| {
                matched[j] = true;
                t.appliance as u32
            })
        });
        labeled += label.is_some() as usize;
        records.push(SignatureRecord::from_delta(&sig, label));
    }
    ingest::save_signatures(&args.out, &records)?;

    println!("sample_rate = {}", header.sample_rate);
    println!("mains_freq = {}", header.mains_freq);
    println!("events = {}", records.len());
    println!("labeled = {labeled}");
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// `[grid]` section; every field falls back to the default supply.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GridSection {
    v_rms: f64,
    mains_freq: f64,
    samples_per_cycle: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::default();
        GridSection { v_rms: g.v_rms, mains_freq: g.mains_freq, samples_per_cycle: g.samples_per_cycle }
    }
}

impl GridSection {
    fn grid(&self) -> GridSpec {
        GridSpec { v_rms: self.v_rms, mains_freq: self.mains_freq, samples_per_cycle: self.samples_per_cycle }
    }
}

/// One `[[appliance]]` entry: name, nominal power, and the archetype tag
/// (`kind = "resistive" | "inductive" | "powerelectronic" | "composite"`,
/// inductive adds `phase` in radians).
#[derive(Debug, Deserialize)]
struct ApplianceSection {
    name: String,
    power: f64,
    #[serde(flatten)]
    archetype: Archetype,
    /// Per-appliance template seed; derived from the master seed when absent.
    seed: Option<u64>,
}

/// `[scenario]` section. Omitting `snr_db` gives a noise-free record.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ScenarioSection {
    hours: f64,
    events_per_hour: f64,
    snr_db: Option<f64>,
    dynamics: bool,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection { hours: 1.0, events_per_hour: 20.0, snr_db: None, dynamics: false }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    #[serde(default)]
    grid: GridSection,
    #[serde(rename = "appliance")]
    appliances: Vec<ApplianceSection>,
    #[serde(default)]
    scenario: ScenarioSection,
    /// Channel encoding: "f32" (default) or "text".
    format: Option<String>,
    seed: Option<u64>,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| {
        Error::Config(format!("{}: {}", path.display(), e.message()))
    })
}

fn build_appliances(sections: &[ApplianceSection], grid: &GridSpec, seed: u64) -> Result<Vec<Appliance>> {
    sections
        .iter()
        .enumerate()
        .map(|(idx, a)| {
            let s = a.seed.unwrap_or_else(|| derive_seed(seed, &[APPLIANCE_TAG, idx as u64]));
            Appliance::new(&a.name, a.archetype, a.power, grid, s)
        })
        .collect()
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let config: SimulateConfig = read_toml(&args.config)?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let format = match config.format.as_deref() {
        None | Some("f32") => SampleFormat::F32,
        Some("text") => SampleFormat::Text,
        Some(other) => {
            return Err(Error::Config(format!("unknown sample format {other:?} (expected f32 or text)")))
        }
    };
    let grid = config.grid.grid();
    let scenario_config = ScenarioConfig {
        hours: config.scenario.hours,
        events_per_hour: config.scenario.events_per_hour,
        snr_db: config.scenario.snr_db,
        dynamics: config.scenario.dynamics,
        seed,
    };
    echo(
        "simulate",
        &[
            ("config", quoted(&args.config)),
            ("appliances", config.appliances.len().to_string()),
            ("hours", scenario_config.hours.to_string()),
            ("events_per_hour", scenario_config.events_per_hour.to_string()),
            ("snr_db", scenario_config.snr_db.map_or("\"none\"".into(), |s| s.to_string())),
            ("dynamics", scenario_config.dynamics.to_string()),
            ("format", format!("{:?}", match format { SampleFormat::F32 => "f32", SampleFormat::Text => "text" })),
            ("seed", seed.to_string()),
            ("out", quoted(&args.out)),
        ],
    );

    let appliances = build_appliances(&config.appliances, &grid, seed)?;
    let scenario = generate_scenario(&grid, &appliances, &scenario_config)?;
    let (v, i) = scenario.materialize()?;

    let header = CorpusHeader {
        sample_rate: grid.sample_rate(),
        mains_freq: grid.mains_freq,
        format,
        voltage_channel: 1,
        current_channel: 2,
        mains: vec![1, 2],
        channels: vec![
            ChannelDef { id: 1, name: "mains_voltage".into() },
            ChannelDef { id: 2, name: "mains_current".into() },
        ],
    };
    ingest::write_corpus(&args.out, &header, &[(1, &v), (2, &i)])?;
    fs::write(args.out.join("truth.csv"), scenario.truth_csv())?;

    println!("duration_cycles = {}", scenario.duration_cycles);
    println!("events = {}", scenario.truth.len());
    println!("noise_sigma = {}", scenario.noise_sigma);
    Ok(())
}

// ---------------------------------------------------------------------------
// extract / cluster
// ---------------------------------------------------------------------------

/// Loads a signature database and featurizes every record, off-events
/// flipped so both polarities of an appliance share one shape.
fn load_features(db: &Path, space: FeatureSpace) -> Result<(Vec<SignatureRecord>, Vec<Vec<f64>>)> {
    let records = ingest::load_signatures(db)?;
    if records.is_empty() {
        return Err(Error::InsufficientData { got: 0, needed: 1, filter: "signature database" });
    }
    let mut rows = Vec::with_capacity(records.len());
    for record in &records {
        let delta = bench::canonical(record.to_delta()?);
        rows.push(featurize(&delta, space)?.values);
    }
    Ok((records, rows))
}

/// Column names per space, in the order `featurize` emits them.
fn feature_names(space: FeatureSpace) -> Vec<String> {
    match space {
        FeatureSpace::Pq => ["p", "q", "thd_odd", "thd_even"].map(String::from).to_vec(),
        FeatureSpace::Har => (1..=space.dim()).map(|h| format!("h{h}")).collect(),
        FeatureSpace::Ws => [
            "looping_direction",
            "area_enclosed",
            "curve_nonlinearity",
            "num_intersections",
            "middle_slope",
            "area_rl",
            "span",
        ]
        .map(String::from)
        .to_vec(),
    }
}

fn run_extract(args: ExtractArgs) -> Result<()> {
    echo(
        "extract",
        &[
            ("db", quoted(&args.db)),
            ("space", format!("\"{}\"", args.space)),
            ("seed", args.seed.to_string()),
            ("out", quoted(&args.out)),
        ],
    );
    let (records, rows) = load_features(&args.db, args.space)?;

    let mut csv = String::from("event_index,polarity,p_delta,label");
    for name in feature_names(args.space) {
        let _ = write!(csv, ",{name}");
    }
    csv.push('\n');
    for (record, row) in records.iter().zip(&rows) {
        let label = record.label.map_or(String::new(), |l| l.to_string());
        let _ = write!(csv, "{},{},{},{label}", record.event_index, record.polarity, record.p_delta);
        for value in row {
            let _ = write!(csv, ",{value}");
        }
        csv.push('\n');
    }
    fs::write(&args.out, csv)?;

    println!("events = {}", records.len());
    println!("dims = {}", args.space.dim());
    Ok(())
}

fn run_cluster(args: ClusterArgs) -> Result<()> {
    echo(
        "cluster",
        &[
            ("db", quoted(&args.db)),
            ("space", format!("\"{}\"", args.space)),
            ("k", args.k.map_or("\"auto\"".into(), |k| k.to_string())),
            ("seed", args.seed.to_string()),
            ("out", quoted(&args.out)),
        ],
    );
    let (records, rows) = load_features(&args.db, args.space)?;
    let normalizer = Normalizer::fit(&rows)?;
    let scaled = normalizer.apply_all(&rows);
    let (k, clustering) = match args.k {
        Some(k) => (k, kmeans(&scaled, k, args.seed)?),
        None => select_k(&scaled, args.seed)?,
    };

    let mut csv = String::from("event_index,cluster,label\n");
    for (record, &cluster) in records.iter().zip(&clustering.assignments) {
        let label = record.label.map_or(String::new(), |l| l.to_string());
        let _ = writeln!(csv, "{},{cluster},{label}", record.event_index);
    }
    fs::write(&args.out, csv)?;

    println!("k = {k}");
    println!("wcss = {}", clustering.wcss);
    let labeled: Vec<(usize, usize)> = records
        .iter()
        .zip(&clustering.assignments)
        .filter_map(|(r, &c)| r.label.map(|l| (c, l as usize)))
        .collect();
    if !labeled.is_empty() {
        let assignments: Vec<usize> = labeled.iter().map(|&(c, _)| c).collect();
        let truth: Vec<usize> = labeled.iter().map(|&(_, l)| l).collect();
        println!("purity = {}", purity(&assignments, &truth)?);
    }

    if let Some(apply) = &args.apply {
        let relabeled: Vec<SignatureRecord> = records
            .iter()
            .zip(&clustering.assignments)
            .map(|(r, &c)| {
                let mut r = r.clone();
                r.label = Some(c as u32);
                r
            })
            .collect();
        ingest::save_signatures(apply, &relabeled)?;
        println!("applied = {}", quoted(apply));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// model-select / train
// ---------------------------------------------------------------------------

/// Labels of every record, or an error naming how many lack one.
fn require_labels(records: &[SignatureRecord]) -> Result<Vec<u32>> {
    let labels: Vec<u32> = records.iter().filter_map(|r| r.label).collect();
    if labels.len() != records.len() {
        return Err(Error::InsufficientData {
            got: labels.len(),
            needed: records.len(),
            filter: "label",
        });
    }
    Ok(labels)
}

/// Densifies arbitrary label ids to `0..k` for the trainers.
fn densify(labels: &[u32]) -> Vec<u32> {
    let mut present = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    labels
        .iter()
        .map(|l| present.binary_search(l).expect("label in its own set") as u32)
        .collect()
}

struct Prepared {
    x_train: Vec<Vec<f64>>,
    y_train: Vec<u32>,
    x_cv: Vec<Vec<f64>>,
    y_cv: Vec<u32>,
    x_test: Vec<Vec<f64>>,
    y_test: Vec<u32>,
    normalizer: Normalizer,
}

/// Splits, fits the normalizer on the training portion, and scales all
/// three portions.
fn prepare(rows: &[Vec<f64>], labels: &[u32], fractions: (f64, f64, f64), seed: u64) -> Result<Prepared> {
    let dense = densify(labels);
    let split = learn::split(&dense, fractions, seed)?;
    let gather_x = |idx: &[usize]| -> Vec<Vec<f64>> { idx.iter().map(|&k| rows[k].clone()).collect() };
    let gather_y = |idx: &[usize]| -> Vec<u32> { idx.iter().map(|&k| dense[k]).collect() };
    let x_train_raw = gather_x(&split.train);
    let normalizer = Normalizer::fit(&x_train_raw)?;
    Ok(Prepared {
        x_train: normalizer.apply_all(&x_train_raw),
        y_train: gather_y(&split.train),
        x_cv: normalizer.apply_all(&gather_x(&split.cv)),
        y_cv: gather_y(&split.cv),
        x_test: normalizer.apply_all(&gather_x(&split.test)),
        y_test: gather_y(&split.test),
        normalizer,
    })
}

fn run_model_select(args: ModelSelectArgs) -> Result<()> {
    let kind = args.kind;
    let kind_name = match kind {
        SelectKind::Ann => "ann",
        SelectKind::AnnEa => "ann+ea",
        SelectKind::Svm => "svm",
    };
    let test_fraction = 1.0 - args.train_fraction - args.cv_fraction;
    echo(
        "model-select",
        &[
            ("db", quoted(&args.db)),
            ("kind", format!("{kind_name:?}")),
            ("space", format!("\"{}\"", args.space)),
            ("train_fraction", args.train_fraction.to_string()),
            ("cv_fraction", args.cv_fraction.to_string()),
            ("pop_size", args.pop_size.to_string()),
            ("generations", args.generations.to_string()),
            ("weight", args.weight.to_string()),
            ("acceptance_rate", args.acceptance_rate.map_or("\"adaptive\"".into(), |r| r.to_string())),
            ("of_threshold", args.of_threshold.map_or("\"none\"".into(), |t| t.to_string())),
            ("stall_generations", args.stall_generations.map_or("\"none\"".into(), |s| s.to_string())),
            ("seed", args.seed.to_string()),
            ("out", quoted(&args.out)),
        ],
    );
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::Argument(format!(
            "train and cv fractions must leave a test share in [0, 1], got {test_fraction}"
        )));
    }

    let (records, rows) = load_features(&args.db, args.space)?;
    let labels = require_labels(&records)?;
    let prepared = prepare(&rows, &labels, (args.train_fraction, args.cv_fraction, test_fraction), args.seed)?;

    let config = DeConfig {
        pop_size: args.pop_size,
        generations: args.generations,
        weight: args.weight,
        acceptance: args.acceptance_rate.map_or(Acceptance::Adaptive, |rate| Acceptance::Classic { rate }),
        of_threshold: args.of_threshold,
        stall_generations: args.stall_generations,
        seed: args.seed,
    };
    let (algorithm, result) = model_select(
        kind,
        &prepared.x_train,
        &prepared.y_train,
        &prepared.x_cv,
        &prepared.y_cv,
        &config,
    )?;

    let mut doc = String::new();
    let _ = writeln!(doc, "best_of = {}", result.best_of);
    let _ = writeln!(doc, "evaluations = {}", result.evaluations);
    let _ = writeln!(doc, "stop = {:?}", format!("{:?}", result.stop).to_lowercase());
    let _ = writeln!(doc);
    let _ = writeln!(doc, "[algorithm]");
    let algorithm_toml = toml::to_string(&algorithm)
        .map_err(|e| Error::Config(format!("could not encode the chosen algorithm: {e}")))?;
    doc.push_str(&algorithm_toml);
    fs::write(&args.out, doc)?;

    if let Some(history) = &args.history {
        fs::write(history, result.history_csv())?;
    }

    println!("algorithm = \"{algorithm}\"");
    println!("best_of = {}", result.best_of);
    println!("evaluations = {}", result.evaluations);
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    echo(
        "train",
        &[
            ("db", quoted(&args.db)),
            ("algorithm", format!("\"{}\"", args.algorithm)),
            ("space", format!("\"{}\"", args.space)),
            ("train_fraction", args.train_fraction.to_string()),
            ("cv_fraction", args.cv_fraction.to_string()),
            ("test_fraction", args.test_fraction.to_string()),
            ("seed", args.seed.to_string()),
            ("out", quoted(&args.out)),
        ],
    );
    let (records, rows) = load_features(&args.db, args.space)?;
    let labels = require_labels(&records)?;
    let fractions = (args.train_fraction, args.cv_fraction, args.test_fraction);
    let prepared = prepare(&rows, &labels, fractions, args.seed)?;

    let model = learn::train(
        args.algorithm,
        &prepared.x_train,
        &prepared.y_train,
        &prepared.x_cv,
        &prepared.y_cv,
        args.seed,
    )?;
    let file = ingest::ModelFile {
        space: args.space,
        algorithm: args.algorithm,
        normalizer: prepared.normalizer.clone(),
        model: model.clone(),
    };
    ingest::save_model(&args.out, &file)?;

    let score = |x: &[Vec<f64>], y: &[u32]| -> Result<Option<f64>> {
        if x.is_empty() {
            return Ok(None);
        }
        let predicted: Vec<u32> = x.iter().map(|r| model.predict(r)).collect();
        bench::precision(&predicted, y).map(Some)
    };
    println!("events = {}", records.len());
    if let Some(p) = score(&prepared.x_train, &prepared.y_train)? {
        println!("train_precision = {p}");
    }
    if let Some(p) = score(&prepared.x_cv, &prepared.y_cv)? {
        println!("cv_precision = {p}");
    }
    if let Some(p) = score(&prepared.x_test, &prepared.y_test)? {
        println!("test_precision = {p}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate / sweep
// ---------------------------------------------------------------------------

/// `[source]` of an experiment: a recorded corpus or an inline scenario.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SourceSection {
    Corpus {
        dir: PathBuf,
    },
    Synthetic {
        #[serde(default)]
        grid: GridSection,
        #[serde(rename = "appliance")]
        appliances: Vec<ApplianceSection>,
        #[serde(default)]
        scenario: ScenarioSection,
    },
}

/// Optional `[model_select]` section enabling per-trial tuning.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ModelSelectSection {
    pop_size: usize,
    generations: usize,
    weight: f64,
    acceptance_rate: Option<f64>,
    of_threshold: Option<f64>,
    stall_generations: Option<usize>,
}

impl Default for ModelSelectSection {
    fn default() -> Self {
        let d = DeConfig::default();
        ModelSelectSection {
            pop_size: d.pop_size,
            generations: d.generations,
            weight: d.weight,
            acceptance_rate: None,
            of_threshold: None,
            stall_generations: None,
        }
    }
}

impl ModelSelectSection {
    fn config(&self, seed: u64) -> DeConfig {
        DeConfig {
            pop_size: self.pop_size,
            generations: self.generations,
            weight: self.weight,
            acceptance: self.acceptance_rate.map_or(Acceptance::Adaptive, |rate| Acceptance::Classic { rate }),
            of_threshold: self.of_threshold,
            stall_generations: self.stall_generations,
            seed,
        }
    }
}

/// `[sweep]` section: the axis name and its values.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    axis: String,
    values: Vec<toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    source: SourceSection,
    #[serde(default = "default_spaces")]
    spaces: Vec<String>,
    #[serde(default = "default_algorithms")]
    algorithms: Vec<String>,
    train_fraction: Option<f64>,
    cv_fraction: Option<f64>,
    test_fraction: Option<f64>,
    p_min: Option<f64>,
    trials: Option<usize>,
    settle: Option<usize>,
    #[serde(default)]
    label_by_clustering: bool,
    model_select: Option<ModelSelectSection>,
    seed: Option<u64>,
    sweep: Option<SweepSection>,
}

fn default_spaces() -> Vec<String> {
    vec!["ws".into()]
}

fn default_algorithms() -> Vec<String> {
    vec!["boost".into()]
}

impl ExperimentConfig {
    fn spec(&self, seed: u64) -> Result<ExperimentSpec> {
        let source = match &self.source {
            SourceSection::Corpus { dir } => DataSource::Corpus(dir.clone()),
            SourceSection::Synthetic { grid, appliances, scenario } => {
                let grid = grid.grid();
                DataSource::Synthetic {
                    grid,
                    appliances: build_appliances(appliances, &grid, seed)?,
                    scenario: ScenarioConfig {
                        hours: scenario.hours,
                        events_per_hour: scenario.events_per_hour,
                        snr_db: scenario.snr_db,
                        dynamics: scenario.dynamics,
                        seed: 0, // per-trial seeds are derived by the runner
                    },
                }
            }
        };
        let mut spec = ExperimentSpec::new(source);
        spec.spaces = self.spaces.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        spec.algorithms = self.algorithms.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        spec.fractions = (
            self.train_fraction.unwrap_or(DEFAULT_FRACTIONS.0),
            self.cv_fraction.unwrap_or(DEFAULT_FRACTIONS.1),
            self.test_fraction.unwrap_or(DEFAULT_FRACTIONS.2),
        );
        if let Some(p_min) = self.p_min {
            spec.p_min = p_min;
        }
        if let Some(trials) = self.trials {
            spec.trials = trials;
        }
        if let Some(settle) = self.settle {
            spec.settle = settle;
        }
        spec.label_by_clustering = self.label_by_clustering;
        spec.model_select = self.model_select.as_ref().map(|m| m.config(seed));
        spec.seed = seed;
        Ok(spec)
    }

    fn sweep_axis(&self) -> Result<SweepAxis> {
        let section = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("the config has no [sweep] section".into()))?;
        let floats = || -> Result<Vec<f64>> {
            section
                .values
                .iter()
                .map(|v| {
                    v.as_float()
                        .or_else(|| v.as_integer().map(|n| n as f64))
                        .ok_or_else(|| Error::Config(format!("sweep value {v} is not a number")))
                })
                .collect()
        };
        match section.axis.as_str() {
            "train_fraction" => Ok(SweepAxis::TrainFraction(floats()?)),
            "p_min" => Ok(SweepAxis::PMin(floats()?)),
            "snr_db" => Ok(SweepAxis::SnrDb(floats()?)),
            "dynamics" => {
                let values = section
                    .values
                    .iter()
                    .map(|v| {
                        v.as_bool()
                            .ok_or_else(|| Error::Config(format!("sweep value {v} is not a boolean")))
                    })
                    .collect::<Result<Vec<bool>>>()?;
                Ok(SweepAxis::Dynamics(values))
            }
            other => Err(Error::Config(format!(
                "unknown sweep axis {other:?} (expected train_fraction, p_min, snr_db or dynamics)"
            ))),
        }
    }
}

fn echo_experiment(command: &str, args_config: &Path, spec: &ExperimentSpec, out: &Path, extra: &[(&str, String)]) {
    let source = match &spec.source {
        DataSource::Corpus(dir) => format!("corpus {:?}", dir.display().to_string()),
        DataSource::Synthetic { appliances, scenario, .. } => format!(
            "synthetic ({} appliances, {} h, snr {})",
            appliances.len(),
            scenario.hours,
            scenario.snr_db.map_or("none".into(), |s| s.to_string())
        ),
    };
    let mut pairs = vec![
        ("config", quoted(args_config)),
        ("source", format!("\"{source}\"")),
        ("spaces", format!("{:?}", spec.spaces.iter().map(|s| s.to_string()).collect::<Vec<_>>())),
        ("algorithms", format!("{:?}", spec.algorithms.iter().map(|a| a.to_string()).collect::<Vec<_>>())),
        ("fractions", format!("[{}, {}, {}]", spec.fractions.0, spec.fractions.1, spec.fractions.2)),
        ("p_min", spec.p_min.to_string()),
        ("trials", spec.trials.to_string()),
        ("settle", spec.settle.to_string()),
        ("label_by_clustering", spec.label_by_clustering.to_string()),
        ("model_select", spec.model_select.is_some().to_string()),
        ("seed", spec.seed.to_string()),
        ("out", quoted(out)),
    ];
    pairs.extend(extra.iter().cloned());
    echo(command, &pairs);
}

fn write_report_pair(stem: &Path, csv: &str, json: &str) -> Result<(PathBuf, PathBuf)> {
    let csv_path = stem.with_extension("csv");
    let json_path = stem.with_extension("json");
    fs::write(&csv_path, csv)?;
    fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let config: ExperimentConfig = read_toml(&args.config)?;
    if config.sweep.is_some() {
        return Err(Error::Config(
            "the config has a [sweep] section; run the sweep subcommand instead".into(),
        ));
    }
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let spec = config.spec(seed)?;
    echo_experiment("evaluate", &args.config, &spec, &args.out, &[]);

    let report = bench::run_experiment(&spec)?;
    let (csv_path, json_path) = write_report_pair(&args.out, &report.to_csv(), &report.to_json()?)?;

    println!("csv = {}", quoted(&csv_path));
    println!("json = {}", quoted(&json_path));
    print!("{}", render_metrics(&report));
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let config: ExperimentConfig = read_toml(&args.config)?;
    let axis = config.sweep_axis()?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let spec = config.spec(seed)?;
    echo_experiment("sweep", &args.config, &spec, &args.out, &[("axis", format!("\"{}\"", axis.name()))]);

    let table = bench::sweep(&spec, &axis)?;
    let (csv_path, json_path) = write_report_pair(&args.out, &table.to_csv(), &table.to_json()?)?;

    println!("csv = {}", quoted(&csv_path));
    println!("json = {}", quoted(&json_path));
    print!("{}", render_sweep(&table));
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn summary_text(s: Option<bench::Summary>) -> (String, String, String) {
    match s {
        Some(s) => (format!("{:.4}", s.median), format!("{:.4}", s.mean), format!("{:.4}", s.max)),
        None => ("-".into(), "-".into(), "-".into()),
    }
}

/// One line per (space, algorithm) cell with the precision summaries.
fn render_metrics(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<5} {:<7} {:>6} {:>8} {:>8} {:>8} {:>9} {:>9}",
        "space", "algo", "trials", "ov.med", "ov.mean", "ov.max", "train.med", "test.med"
    );
    for cell in &report.cells {
        let (ov_med, ov_mean, ov_max) = summary_text(cell.overall_summary());
        let (tr_med, _, _) = summary_text(cell.train_summary());
        let (te_med, _, _) = summary_text(cell.test_summary());
        let _ = writeln!(
            out,
            "{:<5} {:<7} {:>6} {:>8} {:>8} {:>8} {:>9} {:>9}",
            cell.space.to_string(),
            cell.algorithm.to_string(),
            cell.trials.len(),
            ov_med,
            ov_mean,
            ov_max,
            tr_med,
            te_med
        );
    }
    out
}

/// One line per (value, space, algorithm) with the median precisions.
fn render_sweep(table: &SweepTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<8} {:<5} {:<7} {:>8} {:>9} {:>9}",
        "axis", "value", "space", "algo", "ov.med", "train.med", "test.med"
    );
    for cell in &table.cells {
        for report_cell in &cell.report.cells {
            let (ov_med, _, _) = summary_text(report_cell.overall_summary());
            let (tr_med, _, _) = summary_text(report_cell.train_summary());
            let (te_med, _, _) = summary_text(report_cell.test_summary());
            let _ = writeln!(
                out,
                "{:<14} {:<8} {:<5} {:<7} {:>8} {:>9} {:>9}",
                table.axis,
                cell.value,
                report_cell.space.to_string(),
                report_cell.algorithm.to_string(),
                ov_med,
                tr_med,
                te_med
            );
        }
    }
    out
}

fn run_report(args: ReportArgs) -> Result<()> {
    echo(
        "report",
        &[
            ("report", quoted(&args.report)),
            ("seed", args.seed.to_string()),
            ("out", args.out.as_deref().map_or("\"stdout\"".into(), quoted)),
        ],
    );
    let text = fs::read_to_string(&args.report)?;
    // A sweep table has an axis; a plain report does not.
    let rendered = if let Ok(table) = serde_json::from_str::<SweepTable>(&text) {
        render_sweep(&table)
    } else if let Ok(report) = serde_json::from_str::<MetricsReport>(&text) {
        render_metrics(&report)
    } else {
        return Err(Error::Parse {
            file: args.report.clone(),
            line: 1,
            details: "not a metrics report or sweep table".into(),
        });
    };
    match &args.out {
        Some(path) => fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(())
}
