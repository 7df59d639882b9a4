//! Command-line front end of the `fairbai` binary.
//!
//! Every command writes its human-readable report to the given writer; output
//! files go under the output directory. Arms and subpopulations are labelled
//! from 1 in everything printed or written.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::complexity::{lower_bound, t_star, Alternative, BestResponse};
use crate::config::load_experiment;
use crate::error::{Error, Result};
use crate::harness::{aggregate_and_write, run_experiment, Execution, ExperimentConfig, StrategySummary};
use crate::oracle::{run_checks, OracleReport};
use crate::presets::paper_example;

/// Environment variable naming the output directory used when neither `--out`
/// nor the config file gives one.
pub const OUT_DIR_ENV: &str = "FAIRBAI_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "fairbai-out";

const SCHEMA_HELP: &str = "\
Instance file (TOML):
  K, L, M            arms, subpopulations, constrained subpopulations (the first M)
  q                  subpopulation weights, length L, summing to 1
  mu                 K rows of L means
  sigma              noise standard deviation (default 1)
  thresholds         length M (default all 0)

Experiment file (TOML): an [instance] table or instance_file = \"path\", plus
  strategies         subset of [\"tascs\", \"tas\", \"uniform\"] (default all)
  delta              confidence parameter in (0, 1) (default 0.1)
  replications       default 300
  master_seed        default 0
  tau_max            sample cap per replication (default 15000)
  init_draws         initial draws per cell (default 5)
  output_dir         used when --out is not given
  [optimizer]        max_iters, alpha0, schedule = \"normalized_inverse_sqrt\" | \"inverse_sqrt\"
  [stopping]         threshold = { kind = \"stylized\" } or
                     { kind = \"conservative\", loglog_weight, offset }; statistic_scale

Outputs of run/paper: summary.csv, allocation.csv, trace.csv, manifest.json.
The output directory defaults to $FAIRBAI_OUT_DIR, then ./fairbai-out.";

#[derive(Debug, Parser)]
#[command(name = "fairbai", version, about = "Best-arm identification under subpopulation constraints", after_help = SCHEMA_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Characteristic time, optimal allocation and lower bounds of an instance (JSON).
    Complexity {
        #[arg(long)]
        config: PathBuf,
        /// Confidence levels for the lower bounds; defaults to the config's delta.
        #[arg(long, num_args = 1..)]
        delta: Vec<f64>,
    },
    /// Run the Monte-Carlo experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Replicate one of the two built-in examples.
    Paper {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
        example: u32,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare the fast solvers against brute-force oracles on random cases.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

#[derive(Debug, Args, Default, Clone)]
pub struct Overrides {
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tau_max: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) -> Result<()> {
        if let Some(d) = self.delta {
            config.delta = d;
        }
        if let Some(r) = self.reps {
            config.replications = r;
        }
        if let Some(s) = self.seed {
            config.master_seed = s;
        }
        if let Some(t) = self.tau_max {
            config.tau_max = t;
        }
        config.validate()
    }
}

#[derive(Debug, Args, Default, Clone)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run replications on one thread.
    #[arg(long)]
    pub serial: bool,
}

fn resolve_out_dir(cli: Option<&Path>, config: Option<&Path>) -> PathBuf {
    cli.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

fn certificate_json(cert: &BestResponse) -> Value {
    let candidate = cert.candidate.map_or(0, |c| c + 1);
    match &cert.alternative {
        Alternative::Overtake {
            competitor,
            candidate_row,
            competitor_row,
            multiplier,
        } => json!({
            "kind": "overtake",
            "candidate": candidate,
            "competitor": competitor + 1,
            "candidate_row": candidate_row,
            "competitor_row": competitor_row,
            "multiplier": multiplier,
            "value": cert.value,
        }),
        Alternative::Infeasible { subpop, level } => json!({
            "kind": "infeasible",
            "candidate": candidate,
            "subpop": subpop + 1,
            "level": level,
            "value": cert.value,
        }),
        Alternative::Rescue { arm, cells } => json!({
            "kind": "rescue",
            "arm": arm + 1,
            "subpops": cells.iter().map(|l| l + 1).collect::<Vec<_>>(),
            "value": cert.value,
        }),
    }
}

/// JSON report of `complexity`: `T*`, `w*`, the active certificate and one lower bound per `δ`.
pub fn complexity_report(config: &ExperimentConfig, deltas: &[f64]) -> Result<Value> {
    let result = t_star(&config.instance, &config.optimizer)?;
    let deltas = if deltas.is_empty() { vec![config.delta] } else { deltas.to_vec() };
    let bounds = deltas
        .iter()
        .map(|&d| lower_bound(result.t_star, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "t_star": result.t_star,
        "f_value": result.f_value,
        "iterations": result.iterations,
        "best_arm": config.instance.best_feasible_arm().map_or(0, |k| k + 1),
        "w_star": result.w_star.as_matrix().to_rows(),
        "certificate": certificate_json(&result.certificate),
        "lower_bounds": bounds,
    }))
}

fn write_summary_table(out: &mut dyn Write, summaries: &[StrategySummary]) -> std::io::Result<()> {
    writeln!(out, "{:<10} {:>6} {:>12} {:>10} {:>8} {:>9}", "strategy", "reps", "mean_stop", "std_stop", "pcs", "timeouts")?;
    for s in summaries {
        writeln!(
            out,
            "{:<10} {:>6} {:>12.1} {:>10.1} {:>8.3} {:>9.3}",
            s.strategy.name(),
            s.n_reps,
            s.mean_stop_time,
            s.std_stop_time,
            s.empirical_pcs,
            s.timeout_fraction
        )?;
    }
    Ok(())
}

fn run_and_report(config: &ExperimentConfig, output: &OutputArgs, out: &mut dyn Write) -> Result<()> {
    let dir = resolve_out_dir(output.out.as_deref(), config.output_dir.as_deref());
    let execution = if output.serial { Execution::Serial } else { Execution::Parallel };
    let reports = run_experiment(config, execution)?;
    let (summaries, files) = aggregate_and_write(&reports, config, &dir)?;
    let stdout_err = |e| Error::io("<stdout>", e);
    write_summary_table(out, &summaries).map_err(stdout_err)?;
    writeln!(out, "wrote {}", files.summary.display()).map_err(stdout_err)?;
    writeln!(out, "wrote {}", files.allocation.display()).map_err(stdout_err)?;
    writeln!(out, "wrote {}", files.trace.display()).map_err(stdout_err)?;
    writeln!(out, "wrote {}", files.manifest.display()).map_err(stdout_err)?;
    Ok(())
}

/// Executes one parsed command.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let stdout_err = |e| Error::io("<stdout>", e);
    match &cli.command {
        Command::Complexity { config, delta } => {
            let config = load_experiment(config)?;
            let report = complexity_report(&config, delta)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            writeln!(out, "{text}").map_err(stdout_err)?;
        }
        Command::Run {
            config,
            overrides,
            output,
        } => {
            let mut config = load_experiment(config)?;
            overrides.apply(&mut config)?;
            run_and_report(&config, output, out)?;
        }
        Command::Paper {
            example,
            overrides,
            output,
        } => {
            let mut config = paper_example(*example)?;
            overrides.apply(&mut config)?;
            run_and_report(&config, output, out)?;
        }
        Command::OracleCheck { seed, cases } => {
            let report = run_checks(*seed, *cases)?;
            write_oracle_report(out, &report).map_err(stdout_err)?;
            if !report.passes() {
                return Err(Error::InvalidParameter(
                    "oracle check exceeded its tolerances".into(),
                ));
            }
        }
    }
    Ok(())
}

fn write_oracle_report(out: &mut dyn Write, r: &OracleReport) -> std::io::Result<()> {
    writeln!(out, "oracle check: seed {}, {} cases per suite", r.seed, r.cases)?;
    writeln!(
        out,
        "inner solver      max abs error {:.3e} (tol {:.0e})",
        r.max_inner_abs_error,
        OracleReport::INNER_TOL
    )?;
    writeln!(out, "zero-weight cells {} mismatches", r.zero_weight_mismatches)?;
    writeln!(
        out,
        "T* (optimizer)    max rel error {:.3e} (tol {})",
        r.max_t_star_rel_error,
        OracleReport::T_STAR_TOL
    )?;
    writeln!(
        out,
        "T* (infeasible)   max rel error {:.3e} (tol {})",
        r.max_infeasible_rel_error,
        OracleReport::INFEASIBLE_TOL
    )?;
    writeln!(out, "{}", if r.passes() { "ok" } else { "FAILED" })
}
