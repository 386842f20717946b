use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hiertask::arch::{load_checkpoint, HeadDims};
use hiertask::data::{generate_synthetic, load_manifest, write_manifest_inline, SyntheticSpec};
use hiertask::harness::{
    emit_plots, report_accounting, run_experiment, run_id, run_sweep, write_results, AccountingExpectations,
    ExperimentConfig, SweepSpec,
};
use hiertask::train::evaluate;

const OUT_ENV: &str = "HIERTASK_OUT";

#[derive(Parser)]
#[command(name = "hiertask", version, about = "Hierarchical make/model multi-task experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate a single configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every point of a sweep file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the base seed; a `seeds` axis still wins.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on every sample of a manifest.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Render bar charts from a results CSV.
    Plot {
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Head parameter and FLOP deltas for feature width d, K makes, M models.
    Accounting {
        d: usize,
        k: usize,
        m: usize,
        #[arg(long)]
        expect_parallel: Option<u64>,
        #[arg(long)]
        expect_cascaded: Option<u64>,
        #[arg(long)]
        expect_parallel_flops: Option<u64>,
        #[arg(long)]
        expect_cascaded_flops: Option<u64>,
    },
    /// Write a synthetic dataset as an inline-feature manifest.
    Synth {
        /// TOML file of synthetic generator settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// `--out`, then the config's `out_dir`, then `$HIERTASK_OUT`, then `runs`.
fn out_dir(flag: Option<PathBuf>, config: Option<&Path>) -> PathBuf {
    flag.or_else(|| config.map(Path::to_path_buf))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out = out_dir(out, cfg.out_dir.as_deref());
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let id = run_id(0, &cfg);
            let row = run_experiment(&cfg, &id, Some(&out))?;
            write_results(&out.join("results.csv"), std::slice::from_ref(&row))?;
            println!("{}", serde_json::to_string(&row)?);
        }
        Command::Sweep {
            config,
            seed,
            jobs,
            out,
        } => {
            let mut spec = SweepSpec::load(&config)?;
            if let Some(seed) = seed {
                spec.base.seed = seed;
            }
            let out = out_dir(out, spec.base.out_dir.as_deref());
            let outcome = run_sweep(&spec, &out, jobs)?;
            println!(
                "{} runs ok, {} failed; results in {}",
                outcome.rows.len(),
                outcome.failures.len(),
                outcome.results_path.display()
            );
            for (id, err) in &outcome.failures {
                eprintln!("{id}: {err}");
            }
            if !outcome.succeeded() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Eval { checkpoint, manifest } => {
            let net = load_checkpoint(&checkpoint)?;
            let data = load_manifest(&manifest)?;
            let report = evaluate(&net, &data.samples, &data.taxonomy)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Plot { results, out } => {
            let out = out.unwrap_or_else(|| results.parent().unwrap_or(Path::new(".")).to_path_buf());
            for path in emit_plots(&results, &out)? {
                println!("{}", path.display());
            }
        }
        Command::Accounting {
            d,
            k,
            m,
            expect_parallel,
            expect_cascaded,
            expect_parallel_flops,
            expect_cascaded_flops,
        } => {
            if d == 0 || k == 0 || m == 0 {
                bail!("d, K and M must be positive");
            }
            let report = report_accounting(
                HeadDims {
                    feature_dim: d,
                    makes: k,
                    models: m,
                },
                AccountingExpectations {
                    parallel_params: expect_parallel,
                    cascaded_params: expect_cascaded,
                    parallel_flops: expect_parallel_flops,
                    cascaded_flops: expect_cascaded_flops,
                },
            );
            print!("{report}");
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Synth { config, seed, out } => {
            let mut spec: SyntheticSpec = match &config {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    toml::from_str(&text)?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let out = out_dir(out, None);
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let data = generate_synthetic(&spec)?;
            write_manifest_inline(&out.join("manifest.csv"), &data)?;
            data.taxonomy.write_csv(&out.join("taxonomy.csv"))?;
            println!(
                "{} samples, {} makes, {} models -> {}",
                data.samples.len(),
                data.taxonomy.num_makes(),
                data.taxonomy.num_models(),
                out.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
