//! Seeded Monte-Carlo replications of the full sample/stop/recommend loop.

mod output;

use std::path::PathBuf;

use serde::Serialize;

use crate::complexity::OptimizerParams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{replication_stream, sample_observation, BanditInstance, EmpiricalState, StreamPurpose, Validity};
use crate::stopping::{stop_and_recommend, StoppingRule};
use crate::strategies::{initialization_schedule, StrategyKind};

pub use output::{
    aggregate_and_write, allocation_rows, config_hash, summarize, write_allocation_csv, write_summary_csv, write_trace_csv, AllocationRow,
    OutputFiles, StrategySummary, ALLOCATION_HEADER, SUMMARY_HEADER,
};

pub const DEFAULT_REPLICATIONS: usize = 300;
pub const DEFAULT_TAU_MAX: u64 = 15_000;
pub const DEFAULT_INIT_DRAWS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub instance: BanditInstance,
    pub strategies: Vec<StrategyKind>,
    pub delta: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub tau_max: u64,
    pub init_draws: usize,
    pub optimizer: OptimizerParams,
    pub stopping: StoppingRule,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for everything but the instance: all three strategies, `δ = 0.1`.
    pub fn new(instance: BanditInstance) -> Self {
        Self {
            instance,
            strategies: StrategyKind::ALL.to_vec(),
            delta: 0.1,
            replications: DEFAULT_REPLICATIONS,
            master_seed: 0,
            tau_max: DEFAULT_TAU_MAX,
            init_draws: DEFAULT_INIT_DRAWS,
            optimizer: OptimizerParams::default(),
            stopping: StoppingRule::default(),
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.instance.num_arms() * self.instance.num_subpops();
        let param = |msg: String| Err(Error::InvalidParameter(msg));
        if self.strategies.is_empty() {
            return param("at least one strategy is required".into());
        }
        if self.replications < 1 {
            return param("replications must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return param(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.init_draws < 1 {
            return param("init_draws must be at least 1".into());
        }
        let init_total = (cells * self.init_draws) as u64;
        if self.tau_max <= init_total {
            return param(format!(
                "tau_max ({}) must exceed K·L·init_draws ({init_total})",
                self.tau_max
            ));
        }
        if !(self.stopping.statistic_scale > 0.0 && self.stopping.statistic_scale.is_finite()) {
            return param(format!(
                "statistic_scale must be positive, got {}",
                self.stopping.statistic_scale
            ));
        }
        if let Validity::Invalid(v) = self.instance.validate() {
            return Err(Error::InvalidInstance(v.to_string()));
        }
        Ok(())
    }

    /// Correct answer: the best feasible arm, or `None` when no arm is feasible.
    pub fn truth(&self) -> Result<Option<usize>> {
        self.instance
            .validate()
            .best_arm()
            .ok_or_else(|| Error::InvalidInstance("instance has no well-defined answer".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub strategy: StrategyKind,
    pub rep_id: u64,
    /// Total samples drawn, initialization included.
    pub stop_time: u64,
    pub recommended: Option<usize>,
    pub correct: bool,
    pub timed_out: bool,
    /// `N_{k,l} / stop_time`.
    pub final_allocation: Matrix,
    pub seed: u64,
}

pub fn run_replication(config: &ExperimentConfig, strategy: StrategyKind, rep_id: u64) -> Result<ReplicationReport> {
    config.validate()?;
    let truth = config.truth()?;
    let instance = &config.instance;
    let shape = instance.shape();
    let (k, l) = (instance.num_arms(), instance.num_subpops());

    let mut observations = replication_stream(config.master_seed, rep_id, StreamPurpose::Observations);
    let mut strategy_rng = replication_stream(config.master_seed, rep_id, StreamPurpose::Strategy);
    let mut rule = strategy.build(shape);
    let mut state = EmpiricalState::new(k, l);
    for (arm, subpop) in initialization_schedule(k, l, config.init_draws) {
        state.update(arm, subpop, sample_observation(instance, arm, subpop, &mut observations)?);
    }

    let decision = loop {
        let decision = stop_and_recommend(&state, shape, config.delta, &config.stopping)?;
        if decision.stop || state.t() >= config.tau_max {
            break decision;
        }
        let (arm, subpop) = rule.next_cell(&state, &mut strategy_rng)?;
        if arm >= k || subpop >= l {
            return Err(Error::IndexOutOfRange {
                what: "sampled cell",
                index: arm * l + subpop,
                size: k * l,
            });
        }
        state.update(arm, subpop, sample_observation(instance, arm, subpop, &mut observations)?);
    };

    Ok(ReplicationReport {
        strategy,
        rep_id,
        stop_time: state.t(),
        recommended: decision.recommendation,
        correct: decision.recommendation == truth,
        timed_out: !decision.stop,
        final_allocation: state.weights(),
        seed: config.master_seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Serial,
    /// Replications spread over the rayon pool; serial when built without `parallel`.
    #[default]
    Parallel,
}

/// All `strategies × replications` runs, ordered by strategy then `rep_id`.
pub fn run_experiment(config: &ExperimentConfig, execution: Execution) -> Result<Vec<ReplicationReport>> {
    config.validate()?;
    let jobs: Vec<(StrategyKind, u64)> = config
        .strategies
        .iter()
        .flat_map(|&s| (0..config.replications as u64).map(move |r| (s, r)))
        .collect();
    let run = |&(s, r): &(StrategyKind, u64)| run_replication(config, s, r);
    match execution {
        Execution::Serial => jobs.iter().map(run).collect(),
        Execution::Parallel => run_parallel(&jobs, run),
    }
}

#[cfg(feature = "parallel")]
fn run_parallel<F>(jobs: &[(StrategyKind, u64)], run: F) -> Result<Vec<ReplicationReport>>
where
    F: Fn(&(StrategyKind, u64)) -> Result<ReplicationReport> + Sync + Send,
{
    use rayon::prelude::*;
    jobs.par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<F>(jobs: &[(StrategyKind, u64)], run: F) -> Result<Vec<ReplicationReport>>
where
    F: Fn(&(StrategyKind, u64)) -> Result<ReplicationReport>,
{
    jobs.iter().map(run).collect()
}
