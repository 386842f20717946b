use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::arch::{save_checkpoint, ArchitectureMode};
use crate::data::split;
use crate::encoder::EncoderFamily;
use crate::error::{Error, Result};
use crate::nn::Parameterized;
use crate::train::{evaluate, train};

/// Column order of `results.csv`.
pub const RESULT_COLUMNS: [&str; 17] = [
    "run_id",
    "encoder",
    "mode",
    "lambda1",
    "lambda2",
    "dropout",
    "seed",
    "model_acc",
    "make_acc_direct",
    "make_acc_derived",
    "top3",
    "top5",
    "consistency",
    "params",
    "flops",
    "epochs",
    "wall_ms",
];

/// One `results.csv` row: test-split metrics of the best-validation
/// checkpoint. Optional columns are left empty when they do not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub encoder: EncoderFamily,
    pub mode: ArchitectureMode,
    pub lambda1: f64,
    pub lambda2: f64,
    pub dropout: f64,
    pub seed: u64,
    pub model_acc: f64,
    pub make_acc_direct: Option<f64>,
    pub make_acc_derived: f64,
    pub top3: Option<f64>,
    pub top5: Option<f64>,
    pub consistency: Option<f64>,
    pub params: u64,
    pub flops: u64,
    pub epochs: usize,
    pub wall_ms: u64,
}

pub fn run_id(index: usize, cfg: &ExperimentConfig) -> String {
    format!(
        "{index:04}_{}_{}_l{}-{}_d{}_s{}",
        cfg.encoder.family, cfg.mode, cfg.lambda1, cfg.lambda2, cfg.dropout, cfg.seed
    )
}

/// Trains and evaluates one configuration. With an output directory, the
/// best checkpoint goes to `checkpoints/<run_id>.htmt` and the epoch log to
/// `logs/<run_id>.jsonl`.
pub fn run_experiment(cfg: &ExperimentConfig, run_id: &str, out_dir: Option<&Path>) -> Result<ResultRow> {
    let started = Instant::now();
    cfg.validate()?;
    let dataset = cfg.dataset.load()?;
    let parts = split(&dataset.samples, cfg.split, cfg.seed)?;
    let net = cfg.network_spec(&dataset)?.build(cfg.seed)?;
    let run = train(net, &parts, &dataset.taxonomy, &cfg.train_config()?)?;
    let report = evaluate(&run.best, &parts.test, &dataset.taxonomy)?;

    if let Some(out) = out_dir {
        let ckpt_dir = out.join("checkpoints");
        let log_dir = out.join("logs");
        for dir in [&ckpt_dir, &log_dir] {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        save_checkpoint(&run.best, &ckpt_dir.join(format!("{run_id}.htmt")))?;
        let log_path = log_dir.join(format!("{run_id}.jsonl"));
        let mut log = String::new();
        for rec in &run.history {
            log.push_str(&rec.to_json_line());
            log.push('\n');
        }
        std::fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;
    }

    Ok(ResultRow {
        run_id: run_id.to_string(),
        encoder: cfg.encoder.family,
        mode: cfg.mode,
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        dropout: cfg.dropout,
        seed: cfg.seed,
        model_acc: report.model_acc,
        make_acc_direct: report.make_acc_direct,
        make_acc_derived: report.make_acc_derived,
        top3: report.top(3),
        top5: report.top(5),
        consistency: report.consistency,
        params: run.best.parameter_count() as u64,
        flops: run.best.flops(),
        epochs: cfg.epochs,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

/// Cartesian axes; an absent axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub encoders: Option<Vec<EncoderFamily>>,
    pub weights: Option<Vec<[f64; 2]>>,
    pub dropouts: Option<Vec<f64>>,
    pub modes: Option<Vec<ArchitectureMode>>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub axes: SweepAxes,
}

fn axis<T: Clone>(name: &str, values: &Option<Vec<T>>, base: T) -> Result<Vec<T>> {
    match values {
        None => Ok(vec![base]),
        Some(v) if v.is_empty() => Err(Error::Config(format!("sweep axis {name} is empty"))),
        Some(v) => Ok(v.clone()),
    }
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.expand()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml_str(&text)?;
        spec.base.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(spec)
    }

    /// Every sweep point with its run id, ordered encoder, weights,
    /// dropout, mode, seed (last varies fastest).
    pub fn expand(&self) -> Result<Vec<(String, ExperimentConfig)>> {
        let base = &self.base;
        let encoders = axis("encoders", &self.axes.encoders, base.encoder.family)?;
        let weights = axis("weights", &self.axes.weights, [base.lambda1, base.lambda2])?;
        let dropouts = axis("dropouts", &self.axes.dropouts, base.dropout)?;
        let modes = axis("modes", &self.axes.modes, base.mode)?;
        let seeds = axis("seeds", &self.axes.seeds, base.seed)?;
        let mut points = Vec::new();
        for &family in &encoders {
            for &[lambda1, lambda2] in &weights {
                for &dropout in &dropouts {
                    for &mode in &modes {
                        for &seed in &seeds {
                            let cfg = ExperimentConfig {
                                encoder: base.encoder.with_family(family),
                                lambda1,
                                lambda2,
                                dropout,
                                mode,
                                seed,
                                ..base.clone()
                            };
                            cfg.validate()?;
                            points.push((run_id(points.len(), &cfg), cfg));
                        }
                    }
                }
            }
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    /// `(run_id, error)` for every point that failed.
    pub failures: Vec<(String, String)>,
    pub results_path: PathBuf,
}

impl SweepOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every point on a pool of `jobs` threads, then writes
/// `results.csv`, `summary.md` and, if anything failed, `errors.csv`
/// under `out_dir`. Rows come out in point order whatever the scheduling.
pub fn run_sweep(spec: &SweepSpec, out_dir: &Path, jobs: usize) -> Result<SweepOutcome> {
    let points = spec.expand()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    let results: Vec<(String, Result<ResultRow>)> = pool.install(|| {
        points
            .par_iter()
            .map(|(id, cfg)| (id.clone(), run_experiment(cfg, id, Some(out_dir))))
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((id, e.to_string())),
        }
    }
    let results_path = out_dir.join("results.csv");
    write_results(&results_path, &rows)?;
    let errors_path = out_dir.join("errors.csv");
    if failures.is_empty() {
        if errors_path.exists() {
            std::fs::remove_file(&errors_path).map_err(|e| Error::io(&errors_path, e))?;
        }
    } else {
        let mut w = csv::Writer::from_path(&errors_path)?;
        w.write_record(["run_id", "error"])?;
        for (id, e) in &failures {
            w.write_record([id, e])?;
        }
        w.flush().map_err(|e| Error::io(&errors_path, e))?;
    }
    let summary_path = out_dir.join("summary.md");
    std::fs::write(&summary_path, summary_markdown(&rows)).map_err(|e| Error::io(&summary_path, e))?;
    Ok(SweepOutcome {
        rows,
        failures,
        results_path,
    })
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Markdown table of accuracies averaged over seeds, one line per
/// (encoder, mode, weights, dropout).
pub fn summary_markdown(rows: &[ResultRow]) -> String {
    let mut groups: BTreeMap<(String, String, String, String), Vec<&ResultRow>> = BTreeMap::new();
    let mut order = Vec::new();
    for row in rows {
        let key = (
            row.encoder.to_string(),
            row.mode.to_string(),
            format!("[{}, {}]", row.lambda1, row.lambda2),
            row.dropout.to_string(),
        );
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(row);
    }
    let mut out = String::from(
        "| encoder | mode | weights | dropout | runs | model acc | make acc (direct) | make acc (derived) | top-3 | top-5 | consistency |\n\
         |---|---|---|---|---|---|---|---|---|---|---|\n",
    );
    for key in order {
        let g = &groups[&key];
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            key.0,
            key.1,
            key.2,
            key.3,
            g.len(),
            cell(mean(g.iter().map(|r| r.model_acc))),
            cell(mean(g.iter().filter_map(|r| r.make_acc_direct))),
            cell(mean(g.iter().map(|r| r.make_acc_derived))),
            cell(mean(g.iter().filter_map(|r| r.top3))),
            cell(mean(g.iter().filter_map(|r| r.top5))),
            cell(mean(g.iter().filter_map(|r| r.consistency))),
        );
    }
    out
}
