use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{ExperimentConfig, ReplicationReport};
use crate::error::{Error, Result};
use crate::strategies::StrategyKind;

pub const SUMMARY_HEADER: [&str; 7] = [
    "strategy",
    "n_reps",
    "mean_stop_time",
    "std_stop_time",
    "timeout_fraction",
    "empirical_pcs",
    "delta",
];

pub const ALLOCATION_HEADER: [&str; 4] = ["strategy", "arm", "subpop", "mean_weight"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub n_reps: usize,
    /// Timed-out runs enter at `tau_max`, so this is a censored mean whenever `censored`.
    pub mean_stop_time: f64,
    pub std_stop_time: f64,
    pub timeout_fraction: f64,
    pub empirical_pcs: f64,
    pub delta: f64,
    pub censored: bool,
    /// Mean over runs that stopped on their own; `None` if every run timed out.
    pub mean_uncensored_stop_time: Option<f64>,
}

/// One allocation.csv record; `arm` and `subpop` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationRow {
    pub strategy: StrategyKind,
    pub arm: usize,
    pub subpop: usize,
    pub mean_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFiles {
    pub summary: PathBuf,
    pub allocation: PathBuf,
    pub trace: PathBuf,
    pub manifest: PathBuf,
}

/// Reports grouped by strategy, each group sorted by `rep_id`, so every fold below
/// is independent of the input order.
fn grouped(reports: &[ReplicationReport]) -> Result<BTreeMap<StrategyKind, Vec<&ReplicationReport>>> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter("no replication reports to aggregate".into()));
    }
    let mut groups: BTreeMap<StrategyKind, Vec<&ReplicationReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.strategy).or_default().push(r);
    }
    for g in groups.values_mut() {
        g.sort_by_key(|r| r.rep_id);
    }
    Ok(groups)
}

pub fn summarize(reports: &[ReplicationReport], delta: f64) -> Result<Vec<StrategySummary>> {
    Ok(grouped(reports)?
        .into_iter()
        .map(|(strategy, group)| {
            let n = group.len() as u128;
            let sum: u128 = group.iter().map(|r| r.stop_time as u128).sum();
            let sum_sq: u128 = group.iter().map(|r| (r.stop_time as u128).pow(2)).sum();
            let std = if n > 1 {
                ((n * sum_sq - sum * sum) as f64 / (n * (n - 1)) as f64).sqrt()
            } else {
                0.0
            };
            let timeouts = group.iter().filter(|r| r.timed_out).count();
            let correct = group.iter().filter(|r| r.correct).count();
            let stopped: Vec<u64> = group.iter().filter(|r| !r.timed_out).map(|r| r.stop_time).collect();
            StrategySummary {
                strategy,
                n_reps: group.len(),
                mean_stop_time: sum as f64 / n as f64,
                std_stop_time: std,
                timeout_fraction: timeouts as f64 / n as f64,
                empirical_pcs: correct as f64 / n as f64,
                delta,
                censored: timeouts > 0,
                mean_uncensored_stop_time: (!stopped.is_empty())
                    .then(|| stopped.iter().map(|&t| t as u128).sum::<u128>() as f64 / stopped.len() as f64),
            }
        })
        .collect())
}

/// Per-cell mean of the final allocations, per strategy.
pub fn allocation_rows(reports: &[ReplicationReport]) -> Result<Vec<AllocationRow>> {
    let mut rows = Vec::new();
    for (strategy, group) in grouped(reports)? {
        let first = &group[0].final_allocation;
        let (k, l) = (first.rows(), first.cols());
        let mut total = vec![0.0; k * l];
        for r in &group {
            if r.final_allocation.rows() != k || r.final_allocation.cols() != l {
                return Err(Error::Dimension("final allocations differ in shape".into()));
            }
            for (t, w) in total.iter_mut().zip(r.final_allocation.as_slice()) {
                *t += w;
            }
        }
        let n = group.len() as f64;
        for arm in 0..k {
            for subpop in 0..l {
                rows.push(AllocationRow {
                    strategy,
                    arm: arm + 1,
                    subpop: subpop + 1,
                    mean_weight: total[arm * l + subpop] / n,
                });
            }
        }
    }
    Ok(rows)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_summary_csv(path: &Path, summaries: &[StrategySummary]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for s in summaries {
        w.write_record([
            s.strategy.name().to_string(),
            s.n_reps.to_string(),
            s.mean_stop_time.to_string(),
            s.std_stop_time.to_string(),
            s.timeout_fraction.to_string(),
            s.empirical_pcs.to_string(),
            s.delta.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_allocation_csv(path: &Path, rows: &[AllocationRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ALLOCATION_HEADER)?;
    for r in rows {
        w.write_record([
            r.strategy.name().to_string(),
            r.arm.to_string(),
            r.subpop.to_string(),
            r.mean_weight.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per replication; `recommended` is 1-based with 0 meaning "no feasible arm".
pub fn write_trace_csv(path: &Path, reports: &[ReplicationReport]) -> Result<()> {
    let groups = grouped(reports)?;
    let first = &reports[0].final_allocation;
    let (k, l) = (first.rows(), first.cols());
    let mut w = writer(path)?;
    let mut header: Vec<String> = ["strategy", "rep_id", "seed", "stop_time", "recommended", "correct", "timed_out"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for arm in 1..=k {
        for subpop in 1..=l {
            header.push(format!("w_{arm}_{subpop}"));
        }
    }
    w.write_record(&header)?;
    for group in groups.values() {
        for r in group {
            let mut rec = vec![
                r.strategy.name().to_string(),
                r.rep_id.to_string(),
                r.seed.to_string(),
                r.stop_time.to_string(),
                r.recommended.map_or(0, |a| a + 1).to_string(),
                r.correct.to_string(),
                r.timed_out.to_string(),
            ];
            rec.extend(r.final_allocation.as_slice().iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// SHA-256 of the config's canonical JSON form, hex encoded.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    package: &'static str,
    version: &'static str,
    config_sha256: String,
    master_seed: u64,
    features: Features,
    config: &'a ExperimentConfig,
    summaries: &'a [StrategySummary],
    files: [&'static str; 3],
}

#[derive(Serialize)]
struct Features {
    parallel: bool,
}

/// Writes summary.csv, allocation.csv, trace.csv and manifest.json into `out_dir`.
pub fn aggregate_and_write(
    reports: &[ReplicationReport],
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(Vec<StrategySummary>, OutputFiles)> {
    let summaries = summarize(reports, config.delta)?;
    let rows = allocation_rows(reports)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = OutputFiles {
        summary: out_dir.join("summary.csv"),
        allocation: out_dir.join("allocation.csv"),
        trace: out_dir.join("trace.csv"),
        manifest: out_dir.join("manifest.json"),
    };
    write_summary_csv(&files.summary, &summaries)?;
    write_allocation_csv(&files.allocation, &rows)?;
    write_trace_csv(&files.trace, reports)?;
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: config_hash(config),
        master_seed: config.master_seed,
        features: Features {
            parallel: cfg!(feature = "parallel"),
        },
        config,
        summaries: &summaries,
        files: ["summary.csv", "allocation.csv", "trace.csv"],
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&files.manifest, json).map_err(|e| Error::io(&files.manifest, e))?;
    Ok((summaries, files))
}
