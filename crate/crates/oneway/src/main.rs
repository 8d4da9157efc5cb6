use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use oneway::formats::{read_json, read_sequence, write_json};
use oneway::harness::{
    average_improvement, backtest, brittleness_sweep, chunked_backtest, load_raw, running_curve,
    sample_prediction, write_outputs, Algorithm, ExperimentConfig, RatioCurve,
};
use oneway::ingest::{ingest_csv, Column, CsvOptions, Normalization};
use oneway::synthetic::{geometric_walk, rng, WalkParams};
use oneway_core::adaptive::{run_adapo, AdaptiveConfig};
use oneway_core::contract::{fit, ContractProfile};
use oneway_core::profile::{best_extension, decide_feasible, Profile};
use oneway_core::sequences::worst_case_sequence;
use oneway_core::threshold::run_ota;
use oneway_core::RateSequence;
use serde::Serialize;

/// Exit status for an infeasible profile.
const INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "oneway", version, about = "Learning-augmented one-way trading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Out {
    /// Write CSV curves and a JSON manifest into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CsvArgs {
    /// Rate column: zero-based index or header name.
    #[arg(long, default_value = "0")]
    column: Column,
    /// The first CSV row is a header.
    #[arg(long)]
    header: bool,
    #[arg(long, value_enum, default_value_t = Normalization::MinRatio)]
    normalization: Normalization,
}

impl CsvArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            column: self.column.clone(),
            has_header: self.header,
            normalization: self.normalization,
        }
    }
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 100.0)]
    m: f64,
    /// Robustness of every algorithm.
    #[arg(long, default_value_t = 4.0)]
    r: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            m_bound: self.m,
            robustness: self.r,
            worst_case_step: self.step,
            seed: self.seed,
            ..ExperimentConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a profile can be respected; exits with 2 if not.
    Feasible {
        profile: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Scale all targets of a profile by the smallest feasible factor.
    Extend {
        profile: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Run a profile's threshold algorithm on a sequence.
    Simulate {
        profile: PathBuf,
        /// Sequence file (JSON, or CSV for other extensions).
        #[arg(long, conflicts_with = "peak")]
        seq: Option<PathBuf>,
        /// Use the worst-case ramp to this peak instead.
        #[arg(long)]
        peak: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[command(flatten)]
        csv: CsvArgs,
        #[command(flatten)]
        out: Out,
    },
    /// Run the adaptive Pareto-optimal trader.
    Adapo {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        pred: f64,
        #[arg(long, default_value_t = 100.0)]
        m: f64,
        #[arg(long)]
        seq: PathBuf,
        #[command(flatten)]
        csv: CsvArgs,
        #[command(flatten)]
        out: Out,
    },
    /// Ratios of the trust-band profile and the Pareto-optimal baseline on all
    /// worst-case sequences.
    Brittleness {
        /// Prediction; drawn from the seed when omitted.
        #[arg(long)]
        pred: Option<f64>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Out,
    },
    /// Average gain of the trust-band profile over the baseline.
    Improvement {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Out,
    },
    /// Backtest on a price series (a seeded random walk when no data is
    /// given).
    Backtest {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        algo: Vec<Algorithm>,
        /// Cut the series into this many sequences and compare the profile with
        /// the baseline on each.
        #[arg(long)]
        chunks: Option<usize>,
        #[arg(long, default_value_t = 0.2)]
        head_fraction: f64,
        #[command(flatten)]
        csv: CsvArgs,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Out,
    },
    /// Fit a doubling contract schedule to a V-shaped profile.
    ContractFit {
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        phi: f64,
    },
    /// Write a sequence as JSON: a worst-case ramp, a random walk, or a
    /// normalized CSV column.
    Sequence {
        #[arg(long, conflicts_with_all = ["walk", "csv_file"])]
        peak: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Length of a seeded geometric random walk.
        #[arg(long, conflicts_with = "csv_file")]
        walk: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "from-csv")]
        csv_file: Option<PathBuf>,
        #[command(flatten)]
        csv: CsvArgs,
        #[arg(long, default_value_t = 100.0)]
        m: f64,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
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

fn print<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // A closed pipe (`oneway ... | head`) is not an error worth reporting.
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit<T: Serialize>(
    out: &Out,
    command: &str,
    seed: Option<u64>,
    summary: &T,
    curves: &[&RatioCurve],
) -> Result<()> {
    match &out.out {
        Some(dir) => {
            write_outputs(dir, command, seed, summary, curves)?;
            eprintln!("wrote {}", dir.display());
            Ok(())
        }
        None => print(summary),
    }
}

fn load_sequence(path: &Path, csv: &CsvArgs, m: f64) -> Result<RateSequence> {
    read_sequence(path, &csv.options(), m)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Feasible { profile, out } => {
            let profile: Profile = read_json(&profile)?;
            let result = decide_feasible(&profile);
            emit(&out, "feasible", None, &result, &[])?;
            Ok(if result.is_feasible() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(INFEASIBLE)
            })
        }
        Command::Extend { profile, tol, out } => {
            let profile: Profile = read_json(&profile)?;
            let ext = best_extension(&profile, tol)?;
            let (consistency, robustness) = ext.consistency_robustness();
            let summary = serde_json::json!({
                "a_min": ext.factor,
                "consistency": consistency,
                "robustness": robustness,
                "profile": ext.profile,
                "result": ext.result,
            });
            emit(&out, "extend", None, &summary, &[])?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            profile,
            seq,
            peak,
            step,
            csv,
            out,
        } => {
            let profile: Profile = read_json(&profile)?;
            let result = decide_feasible(&profile);
            let Some(phi) = result.phi else {
                eprintln!("profile is infeasible: {:?}", result.cause);
                return Ok(ExitCode::from(INFEASIBLE));
            };
            let m = profile.m_bound();
            let seq = match (seq, peak) {
                (Some(path), _) => load_sequence(&path, &csv, m)?,
                (None, Some(p)) => worst_case_sequence(p, step, m)?,
                (None, None) => bail!("give --seq or --peak"),
            };
            let trace = run_ota(&phi, &seq);
            let curve = running_curve("profile", &trace);
            let summary = serde_json::json!({
                "performance_ratio": trace.performance_ratio,
                "final_profit": trace.final_profit,
                "target": profile.target_at(trace.max_rate),
                "trace": trace,
            });
            emit(&out, "simulate", None, &summary, &[&curve])?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Adapo {
            r,
            pred,
            m,
            seq,
            csv,
            out,
        } => {
            let config = AdaptiveConfig::new(r, pred, m)?;
            let seq = load_sequence(&seq, &csv, m)?;
            let (trace, profits) = run_adapo(&config, &seq)?;
            let curve = running_curve("adapo", &trace);
            let summary = serde_json::json!({
                "config": config,
                "performance_ratio": trace.performance_ratio,
                "profit_vector": profits,
                "trace": trace,
            });
            emit(&out, "adapo", None, &summary, &[&curve])?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Brittleness { pred, common, out } => {
            let config = common.config();
            let prediction =
                pred.unwrap_or_else(|| sample_prediction(&mut rng(config.seed), config.m_bound));
            let report = brittleness_sweep(&config, prediction)?;
            let summary = serde_json::json!({
                "config": config,
                "prediction": report.prediction,
                "trusted_ratio": report.trusted_ratio,
                "po_consistency": report.po_consistency,
                "profile": report.profile,
            });
            let curves = [&report.profile_curve, &report.po_curve];
            match &out.out {
                Some(_) => emit(&out, "brittleness", Some(config.seed), &summary, &curves)?,
                None => print(&report)?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Improvement {
            trials,
            common,
            out,
        } => {
            let config = ExperimentConfig {
                trials,
                ..common.config()
            };
            let report = average_improvement(&config)?;
            let curve = report.curve();
            emit(&out, "improvement", Some(config.seed), &report, &[&curve])?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Backtest {
            data,
            algo,
            chunks,
            head_fraction,
            csv,
            common,
            out,
        } => {
            let config = ExperimentConfig {
                data_path: data.clone(),
                csv: csv.options(),
                head_fraction,
                chunks: chunks.unwrap_or(20),
                ..common.config()
            };
            let raw = match &data {
                Some(_) => load_raw(&config)?,
                None => {
                    let len = if chunks.is_some() { 20_000 } else { 1000 };
                    let params = WalkParams {
                        len,
                        ..WalkParams::default()
                    };
                    geometric_walk(&mut rng(config.seed), &params, f64::MAX)
                }
            };
            if chunks.is_some() {
                let report = chunked_backtest(&config, &raw)?;
                let mut curve = RatioCurve::new("chunk_improvement");
                for c in &report {
                    if let Some(v) = c.mean_improvement {
                        curve.push(c.index as f64, v);
                    }
                }
                emit(&out, "backtest", Some(config.seed), &report, &[&curve])?;
                return Ok(ExitCode::SUCCESS);
            }
            let series = match &data {
                Some(path) => ingest_csv(path, &config.csv, config.m_bound)?.sequence,
                None => {
                    let lines: Vec<u64> = (1..=raw.len() as u64).collect();
                    let rates =
                        oneway::ingest::normalize(&raw, &lines, csv.normalization, config.m_bound)
                            .context("normalizing the synthetic walk")?;
                    RateSequence::new(rates, config.m_bound)?
                }
            };
            let algorithms = if algo.is_empty() {
                Algorithm::ALL.to_vec()
            } else {
                algo
            };
            let report = backtest(&config, &series, &algorithms)?;
            let curves: Vec<&RatioCurve> = report.runs.iter().map(|r| &r.curve).collect();
            emit(&out, "backtest", Some(config.seed), &report, &curves)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ContractFit { tau, phi } => {
            let profile = ContractProfile::new(tau, phi)?;
            print(&fit(&profile))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sequence {
            peak,
            step,
            walk,
            seed,
            csv_file,
            csv,
            m,
            output,
        } => {
            let seq = match (peak, walk, csv_file) {
                (Some(p), _, _) => worst_case_sequence(p, step, m)?,
                (None, Some(len), _) => {
                    let params = WalkParams {
                        len,
                        ..WalkParams::default()
                    };
                    RateSequence::new(geometric_walk(&mut rng(seed), &params, m), m)?
                }
                (None, None, Some(path)) => ingest_csv(&path, &csv.options(), m)?.sequence,
                (None, None, None) => bail!("give --peak, --walk or --from-csv"),
            };
            match output {
                Some(path) => write_json(&path, &seq)?,
                None => print(&seq)?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
