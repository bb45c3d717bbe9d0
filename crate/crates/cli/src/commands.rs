use std::fs;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;
use stgraph_core::harness::report::{read_roc_csv, render_roc_svg, write_roc_csv};
use stgraph_core::harness::{
    default_batch_size, run_experiment, Estimator, ExperimentConfig, ExperimentReport, HyperGrid, Precision,
    GRID_DROPOUT, DEFAULT_EPOCHS, GRID_LR, GRID_WEIGHT_DECAY,
};
use stgraph_core::prep::io::{load_records, write_atomic, write_matrix, MatrixFormat};
use stgraph_core::prep::{prepare_samples, PrepConfig};
use stgraph_core::synth::{generate, write_dataset, SynthConfig};
use stgraph_core::zoo::{resolve_threshold, Model, ModelName, ModelSpec};

use crate::config::{parse_list, ConfigFile, RUN_KEYS};
use crate::{Cli, Command, FormatArg, ParamsArgs, PrecisionArg, PreprocessArgs, RocPlotArgs, RunArgs, Shared, SynthArgs};

pub const RESULTS_FILE: &str = "results.json";

pub fn dispatch(cli: Cli) -> Result<()> {
    let shared = cli.shared;
    match cli.command {
        Command::Synth(a) => synth(&shared, a),
        Command::Preprocess(a) => preprocess(&shared, a),
        Command::Run(a) => run(&shared, a),
        Command::Params(a) => params(a),
        Command::RocPlot(a) => roc_plot(&shared, a),
    }
}

fn synth(shared: &Shared, a: SynthArgs) -> Result<()> {
    let out = shared.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    let cfg = SynthConfig {
        n_subjects: a.subjects,
        n_nodes: a.nodes,
        n_sessions: a.sessions,
        session_length: a.length,
        effect_size: a.effect,
        signal: a.signal.parse()?,
        seed: shared.seed.unwrap_or(0),
    };
    let data = generate(&cfg)?;
    let format = match a.format {
        FormatArg::Binary => MatrixFormat::Binary,
        FormatArg::Csv => MatrixFormat::Csv,
    };
    let manifest = write_dataset(&out, &data, format)?;
    load_records(&manifest).context("re-reading the written dataset")?;
    println!("{}", manifest.display());
    Ok(())
}

/// Windows per scan for a requested number of samples per subject.
fn windows_per_scan(splits: usize, sessions: usize) -> Result<usize> {
    ensure!(sessions > 0, "dataset subjects have no sessions");
    ensure!(
        splits >= sessions && splits.is_multiple_of(sessions),
        "{splits} samples per subject is not a multiple of the {sessions} sessions per subject"
    );
    Ok(splits / sessions)
}

fn session_count(records: &[stgraph_core::prep::SubjectRecord]) -> Result<usize> {
    let first = records.first().context("dataset lists no subjects")?.sessions.len();
    ensure!(
        records.iter().all(|r| r.sessions.len() == first),
        "subjects have differing session counts"
    );
    Ok(first)
}

#[derive(Serialize)]
struct SampleEntry {
    subject: String,
    scan: usize,
    window: usize,
    label: u8,
    features: PathBuf,
    correlation: PathBuf,
    edges: Vec<(usize, usize)>,
}

fn preprocess(shared: &Shared, a: PreprocessArgs) -> Result<()> {
    let out = shared.out.clone().unwrap_or_else(|| PathBuf::from("prepared"));
    let records = load_records(&a.data)?;
    let sessions = session_count(&records)?;
    let wps = windows_per_scan(a.splits.unwrap_or(sessions), sessions)?;
    let samples = prepare_samples(
        &records,
        PrepConfig {
            windows_per_scan: wps,
            threshold_percent: a.threshold,
        },
    )?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in &samples {
        let w = &s.window;
        let stem = format!("{}_scan{}_win{}", w.subject_id, w.scan_index, w.window_index);
        let features = PathBuf::from(format!("{stem}_features.stgm"));
        let correlation = PathBuf::from(format!("{stem}_correlation.stgm"));
        write_matrix(&out.join(&features), &w.features, MatrixFormat::Binary)?;
        write_matrix(&out.join(&correlation), &s.correlation, MatrixFormat::Binary)?;
        entries.push(SampleEntry {
            subject: w.subject_id.clone(),
            scan: w.scan_index,
            window: w.window_index,
            label: w.label as u8,
            features,
            correlation,
            edges: s.adjacency.edges().to_vec(),
        });
    }
    let index = serde_json::json!({
        "windows_per_scan": wps,
        "threshold_percent": a.threshold,
        "samples": entries,
    });
    let path = out.join("samples.json");
    write_atomic(&path, format!("{}\n", serde_json::to_string_pretty(&index)?).as_bytes())?;
    println!("{}", path.display());
    Ok(())
}

/// Run settings after merging flags over the config file over defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub model: String,
    pub threshold: Option<f64>,
    pub splits: Option<usize>,
    pub folds: usize,
    pub grid_fast: bool,
    pub dropout: Option<Vec<f64>>,
    pub lr: Option<Vec<f64>>,
    pub wd: Option<Vec<f64>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub select_final_epoch: bool,
    pub permute_labels: bool,
    pub no_timestamp: bool,
    pub save_models: bool,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub precision: Precision,
}

fn merge_list(flag: Option<&String>, file: Option<Vec<f64>>) -> Result<Option<Vec<f64>>> {
    match flag {
        Some(s) => Ok(Some(parse_list(s)?)),
        None => Ok(file),
    }
}

pub fn resolve_run_config(shared: &Shared, a: &RunArgs) -> Result<RunConfig> {
    let file = match &a.config {
        Some(p) => ConfigFile::load(p, RUN_KEYS)?,
        None => ConfigFile::default(),
    };
    let precision = match shared.precision {
        Some(PrecisionArg::F32) => Precision::F32,
        Some(PrecisionArg::F64) => Precision::F64,
        None => match file.get::<String>("precision")?.as_deref() {
            None | Some("f32") => Precision::F32,
            Some("f64") => Precision::F64,
            Some(other) => bail!("config key `precision`: expected f32 or f64, got `{other}`"),
        },
    };
    let data = a
        .data
        .clone()
        .or(file.get::<PathBuf>("data")?)
        .context("a dataset manifest is required (--data)")?;
    Ok(RunConfig {
        data,
        model: a.model.clone().or(file.get("model")?).unwrap_or_else(|| "mean_CNN".into()),
        threshold: a.threshold.or(file.get("threshold")?),
        splits: a.splits.or(file.get("splits")?),
        folds: a.folds.or(file.get("folds")?).unwrap_or(5),
        grid_fast: a.grid_fast || file.get_flag("grid-fast")?,
        dropout: merge_list(a.dropout.as_ref(), file.get_list("dropout")?)?,
        lr: merge_list(a.lr.as_ref(), file.get_list("lr")?)?,
        wd: merge_list(a.wd.as_ref(), file.get_list("wd")?)?,
        epochs: a.epochs.or(file.get("epochs")?),
        batch_size: a.batch_size.or(file.get("batch-size")?),
        select_final_epoch: a.select_final_epoch || file.get_flag("select-final-epoch")?,
        permute_labels: a.permute_labels || file.get_flag("permute-labels")?,
        no_timestamp: a.no_timestamp || file.get_flag("no-timestamp")?,
        save_models: a.save_models || file.get_flag("save-models")?,
        seed: shared.seed.or(file.get("seed")?).unwrap_or(0),
        out: shared.out.clone().or(file.get("out")?).unwrap_or_else(|| PathBuf::from("results")),
        jobs: shared
            .jobs
            .or(file.get("jobs")?)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1),
        precision,
    })
}

/// Estimator, threshold and requested samples-per-subject for a model name.
fn estimator_for(cfg: &RunConfig) -> Result<(Estimator, f64, Option<usize>)> {
    let threshold_only = |t: Option<f64>| resolve_threshold(None, t);
    match cfg.model.as_str() {
        "logreg" => Ok((Estimator::Logistic { binarize: false }, threshold_only(cfg.threshold)?, cfg.splits)),
        "logreg_bin" => Ok((Estimator::Logistic { binarize: true }, threshold_only(cfg.threshold)?, cfg.splits)),
        name => {
            let parsed: ModelName = name.parse()?;
            let splits = match (parsed.splits, cfg.splits) {
                (Some(a), Some(b)) if a != b => bail!("model `{name}` implies {a} splits, but --splits {b} was given"),
                (a, b) => a.or(b),
            };
            Ok((
                Estimator::Deep {
                    encoder: parsed.encoder,
                    use_gcn: parsed.use_gcn,
                    pooling: parsed.pooling,
                },
                resolve_threshold(parsed.threshold_percent, cfg.threshold)?,
                splits,
            ))
        }
    }
}

fn build_grid(cfg: &RunConfig, estimator: &Estimator, splits: usize) -> HyperGrid {
    let (dropout, lr, wd, epochs, batch) = if cfg.grid_fast {
        let f = HyperGrid::fast();
        let p = f.points[0];
        (vec![p.dropout], vec![p.lr], vec![p.weight_decay], f.epochs, f.batch_size)
    } else {
        let encoder = match estimator {
            Estimator::Deep { encoder, .. } => *encoder,
            Estimator::Logistic { .. } => stgraph_core::encoders::EncoderKind::Cnn,
        };
        (
            GRID_DROPOUT.to_vec(),
            GRID_LR.to_vec(),
            GRID_WEIGHT_DECAY.to_vec(),
            DEFAULT_EPOCHS,
            default_batch_size(encoder, splits),
        )
    };
    HyperGrid::product(
        cfg.dropout.as_deref().unwrap_or(&dropout),
        cfg.lr.as_deref().unwrap_or(&lr),
        cfg.wd.as_deref().unwrap_or(&wd),
        cfg.epochs.unwrap_or(epochs),
        cfg.batch_size.unwrap_or(batch),
    )
}

fn run(shared: &Shared, a: RunArgs) -> Result<()> {
    let cfg = resolve_run_config(shared, &a)?;
    let (estimator, threshold, splits) = estimator_for(&cfg)?;
    let records = load_records(&cfg.data)?;
    let sessions = session_count(&records)?;
    let splits = splits.unwrap_or(sessions);
    let wps = windows_per_scan(splits, sessions)?;
    let grid = build_grid(&cfg, &estimator, splits);
    ensure!(!grid.is_empty(), "hyperparameter grid is empty");
    ensure!(grid.epochs > 0 && grid.batch_size > 0, "epochs and batch size must be positive");
    let experiment = ExperimentConfig {
        model: cfg.model.clone(),
        estimator,
        threshold_percent: threshold,
        windows_per_scan: wps,
        folds: cfg.folds,
        grid,
        seed: cfg.seed,
        select_final_epoch: cfg.select_final_epoch,
        permute_labels: cfg.permute_labels,
        precision: cfg.precision,
        jobs: cfg.jobs,
        record_time: !cfg.no_timestamp,
        keep_models: cfg.save_models,
    };
    let output = run_experiment(records, &experiment)?;
    let report = &output.report;

    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    for fold in &report.folds {
        write_roc_csv(&cfg.out.join(format!("roc_fold{}.csv", fold.fold)), &fold.roc)?;
    }
    for (i, bytes) in output.models.iter().enumerate() {
        write_atomic(&cfg.out.join(format!("model_fold{i}.stgc")), bytes)?;
    }
    let results = cfg.out.join(RESULTS_FILE);
    let text = format!("{}\n", serde_json::to_string_pretty(report)?);
    write_atomic(&results, text.as_bytes())?;
    let back: ExperimentReport = serde_json::from_str(&fs::read_to_string(&results)?)
        .with_context(|| format!("validating {}", results.display()))?;
    ensure!(back.folds.len() == report.folds.len(), "results document failed validation");
    println!("{}", report.table_row());
    Ok(())
}

fn params(a: ParamsArgs) -> Result<()> {
    let name: ModelName = a.model.parse()?;
    let spec = ModelSpec::from_name(&name, a.threshold, 1, a.length, a.nodes)?;
    println!("{}", Model::<f32>::build(&spec)?.parameter_count());
    Ok(())
}

fn roc_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("roc_fold") && n.ends_with(".csv"))
                })
                .collect();
            found.sort();
            ensure!(!found.is_empty(), "no roc_fold*.csv files in {}", p.display());
            files.extend(found);
        } else {
            ensure!(p.is_file(), "{} does not exist", p.display());
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn roc_plot(shared: &Shared, a: RocPlotArgs) -> Result<()> {
    let files = roc_inputs(&a.inputs)?;
    let curves = files
        .iter()
        .map(|f| {
            let label = f.file_stem().and_then(|s| s.to_str()).unwrap_or("roc").to_string();
            Ok((label, read_roc_csv(f)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let out = shared.out.clone().unwrap_or_else(|| PathBuf::from("roc.svg"));
    write_atomic(&out, render_roc_svg(&curves).as_bytes())?;
    println!("{}", out.display());
    Ok(())
}

