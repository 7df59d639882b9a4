//! Bandit instances, feasibility, and the empirical sufficient statistics.
//!
//! Arm `k` is feasible when `means[k][l] >= thresholds[l]` for every constrained
//! subpopulation `l < num_constrained`. All downstream math works on the shifted
//! gaps `means[k][l] - thresholds[l]`, which reduces every constraint to `>= 0`.
//!
//! Indices are 0-based here; file formats and reports use 1-based labels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const Q_SUM_TOL: f64 = 1e-12;

/// Everything about an instance except its means: what a sampling rule is allowed to see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemShape {
    pub num_arms: usize,
    pub q: Vec<f64>,
    pub num_constrained: usize,
    pub thresholds: Vec<f64>,
    pub noise_sd: f64,
}

impl ProblemShape {
    #[inline]
    pub fn num_subpops(&self) -> usize {
        self.q.len()
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        self.num_arms * self.q.len()
    }

    /// Gap of `value` above the threshold of subpopulation `l`; only meaningful for `l < M`.
    #[inline]
    pub fn slack(&self, l: usize, value: f64) -> f64 {
        value - self.thresholds[l]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    means: Matrix,
    shape: ProblemShape,
}

impl BanditInstance {
    /// Builds an instance with unit noise and zero thresholds.
    pub fn new(means: Matrix, q: Vec<f64>, num_constrained: usize) -> Result<Self> {
        let thresholds = vec![0.0; num_constrained];
        Self::with_thresholds(means, q, num_constrained, thresholds, 1.0)
    }

    pub fn with_thresholds(
        means: Matrix,
        q: Vec<f64>,
        num_constrained: usize,
        thresholds: Vec<f64>,
        noise_sd: f64,
    ) -> Result<Self> {
        let (k, l) = (means.rows(), means.cols());
        if k < 1 || l < 1 {
            return Err(Error::Dimension(format!(
                "need at least one arm and one subpopulation, got K={k}, L={l}"
            )));
        }
        if q.len() != l {
            return Err(Error::Dimension(format!(
                "q has {} entries but means have L={l} columns",
                q.len()
            )));
        }
        if num_constrained > l {
            return Err(Error::Dimension(format!(
                "M={num_constrained} exceeds L={l}"
            )));
        }
        if thresholds.len() != num_constrained {
            return Err(Error::Dimension(format!(
                "thresholds has {} entries, expected M={num_constrained}",
                thresholds.len()
            )));
        }
        if means.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("means must be finite".into()));
        }
        if thresholds.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("thresholds must be finite".into()));
        }
        if q.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInstance("q entries must be nonnegative".into()));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > Q_SUM_TOL {
            return Err(Error::InvalidInstance(format!(
                "q must sum to 1, sums to {total}"
            )));
        }
        if !(noise_sd > 0.0) || !noise_sd.is_finite() {
            return Err(Error::InvalidInstance(format!(
                "noise_sd must be positive, got {noise_sd}"
            )));
        }
        Ok(Self {
            shape: ProblemShape {
                num_arms: k,
                q,
                num_constrained,
                thresholds,
                noise_sd,
            },
            means,
        })
    }

    /// Zero-noise copy; observations then equal the means exactly.
    pub fn noiseless(mut self) -> Self {
        self.shape.noise_sd = 0.0;
        self
    }

    #[inline]
    pub fn means(&self) -> &Matrix {
        &self.means
    }

    #[inline]
    pub fn shape(&self) -> &ProblemShape {
        &self.shape
    }

    #[inline]
    pub fn num_arms(&self) -> usize {
        self.means.rows()
    }

    #[inline]
    pub fn num_subpops(&self) -> usize {
        self.means.cols()
    }

    #[inline]
    pub fn num_constrained(&self) -> usize {
        self.shape.num_constrained
    }

    #[inline]
    pub fn q(&self) -> &[f64] {
        &self.shape.q
    }

    #[inline]
    pub fn thresholds(&self) -> &[f64] {
        &self.shape.thresholds
    }

    #[inline]
    pub fn noise_sd(&self) -> f64 {
        self.shape.noise_sd
    }

    pub fn aggregate_means(&self) -> Vec<f64> {
        aggregate_means(&self.means, &self.shape.q).expect("dimensions checked at construction")
    }

    pub fn feasible_set(&self) -> Vec<usize> {
        feasible_set(&self.means, &self.shape)
    }

    pub fn best_feasible_arm(&self) -> Option<usize> {
        best_feasible_arm(&self.means, &self.shape)
    }

    pub fn validate(&self) -> Validity {
        validate_means(&self.means, &self.shape)
    }

    /// Same instance with arm rows reordered (`perm[i]` becomes arm `i`).
    pub fn permute_arms(&self, perm: &[usize]) -> Self {
        Self {
            means: self.means.permute_rows(perm),
            shape: self.shape.clone(),
        }
    }
}

/// `μ_k = Σ_l q_l μ_{k,l}` for each arm.
pub fn aggregate_means(means: &Matrix, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != means.cols() {
        return Err(Error::Dimension(format!(
            "q has {} entries but means have {} columns",
            q.len(),
            means.cols()
        )));
    }
    Ok((0..means.rows())
        .map(|k| weighted_row_sum(means.row(k), q))
        .collect())
}

#[inline]
pub(crate) fn weighted_row_sum(row: &[f64], q: &[f64]) -> f64 {
    row.iter().zip(q).map(|(m, w)| m * w).sum()
}

#[inline]
pub fn is_feasible(row: &[f64], shape: &ProblemShape) -> bool {
    (0..shape.num_constrained).all(|l| row[l] >= shape.thresholds[l])
}

/// Arms whose constrained entries all meet their thresholds (equality counts).
pub fn feasible_set(means: &Matrix, shape: &ProblemShape) -> Vec<usize> {
    (0..means.rows())
        .filter(|&k| is_feasible(means.row(k), shape))
        .collect()
}

/// Feasible arm with the largest aggregate mean, smallest index on ties.
/// `None` when no arm is feasible.
pub fn best_feasible_arm(means: &Matrix, shape: &ProblemShape) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for k in 0..means.rows() {
        let row = means.row(k);
        if !is_feasible(row, shape) {
            continue;
        }
        let agg = weighted_row_sum(row, &shape.q);
        match best {
            Some((_, b)) if agg <= b => {}
            _ => best = Some((k, agg)),
        }
    }
    best.map(|(k, _)| k)
}

/// Membership in the identifiable model class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Validity {
    /// Unique best feasible arm, strictly above every threshold.
    BestFeasible { arm: usize },
    /// Every arm strictly violates at least one constraint.
    AllInfeasible,
    Invalid(Violation),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// Several feasible arms share the largest aggregate mean.
    TiedOptimum { arms: Vec<usize> },
    /// The best feasible arm sits exactly on a threshold.
    BestArmOnBoundary { arm: usize, subpop: usize },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        !matches!(self, Validity::Invalid(_))
    }

    /// Certified best feasible arm (`Some(None)` for the all-infeasible case).
    pub fn best_arm(&self) -> Option<Option<usize>> {
        match self {
            Validity::BestFeasible { arm } => Some(Some(*arm)),
            Validity::AllInfeasible => Some(None),
            Validity::Invalid(_) => None,
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::TiedOptimum { arms } => {
                let labels: Vec<String> = arms.iter().map(|a| (a + 1).to_string()).collect();
                write!(
                    f,
                    "best feasible arm is not unique (arms {} tie)",
                    labels.join(", ")
                )
            }
            Violation::BestArmOnBoundary { arm, subpop } => write!(
                f,
                "best feasible arm {} is on the threshold of subpopulation {}",
                arm + 1,
                subpop + 1
            ),
        }
    }
}

pub fn validate_means(means: &Matrix, shape: &ProblemShape) -> Validity {
    let feasible = feasible_set(means, shape);
    if feasible.is_empty() {
        return Validity::AllInfeasible;
    }
    let aggregates: Vec<f64> = feasible
        .iter()
        .map(|&k| weighted_row_sum(means.row(k), &shape.q))
        .collect();
    let top = aggregates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = feasible
        .iter()
        .zip(&aggregates)
        .filter(|(_, &a)| a == top)
        .map(|(&k, _)| k)
        .collect();
    if tied.len() > 1 {
        return Validity::Invalid(Violation::TiedOptimum { arms: tied });
    }
    let arm = tied[0];
    let row = means.row(arm);
    if let Some(subpop) = (0..shape.num_constrained).find(|&l| row[l] == shape.thresholds[l]) {
        return Validity::Invalid(Violation::BestArmOnBoundary { arm, subpop });
    }
    Validity::BestFeasible { arm }
}

/// Random stream behind every draw in a replication.
pub type StreamRng = ChaCha8Rng;

/// What a replication stream is used for; keeps observations and strategy coins apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Observations = 0,
    Strategy = 1,
}

/// Counter-based stream keyed by (master seed, replication id, purpose).
///
/// ChaCha's block counter is the draw index, so a replication's draws depend only
/// on its key and never on how replications are scheduled.
pub fn replication_stream(master_seed: u64, rep_id: u64, purpose: StreamPurpose) -> StreamRng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(b"fairbai\0");
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream((rep_id << 2) | purpose as u64);
    rng
}

/// One Gaussian reward from cell `(arm, subpop)`.
pub fn sample_observation(
    instance: &BanditInstance,
    arm: usize,
    subpop: usize,
    rng: &mut StreamRng,
) -> Result<f64> {
    if arm >= instance.num_arms() {
        return Err(Error::IndexOutOfRange {
            what: "arm",
            index: arm,
            size: instance.num_arms(),
        });
    }
    if subpop >= instance.num_subpops() {
        return Err(Error::IndexOutOfRange {
            what: "subpopulation",
            index: subpop,
            size: instance.num_subpops(),
        });
    }
    let mean = instance.means[(arm, subpop)];
    let sd = instance.noise_sd();
    if sd == 0.0 {
        return Ok(mean);
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(mean + sd * z)
}

/// Per-cell counts and running sums; `t` is the total number of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalState {
    num_arms: usize,
    num_subpops: usize,
    counts: Vec<u64>,
    sums: Vec<f64>,
    t: u64,
}

impl EmpiricalState {
    pub fn new(num_arms: usize, num_subpops: usize) -> Self {
        Self {
            num_arms,
            num_subpops,
            counts: vec![0; num_arms * num_subpops],
            sums: vec![0.0; num_arms * num_subpops],
            t: 0,
        }
    }

    #[inline]
    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    #[inline]
    pub fn num_subpops(&self) -> usize {
        self.num_subpops
    }

    #[inline]
    pub fn t(&self) -> u64 {
        self.t
    }

    #[inline]
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn count(&self, arm: usize, subpop: usize) -> u64 {
        self.counts[arm * self.num_subpops + subpop]
    }

    #[inline]
    pub fn update(&mut self, arm: usize, subpop: usize, x: f64) {
        let i = arm * self.num_subpops + subpop;
        self.counts[i] += 1;
        self.sums[i] += x;
        self.t += 1;
    }

    pub fn mean(&self, arm: usize, subpop: usize) -> Option<f64> {
        let i = arm * self.num_subpops + subpop;
        (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64)
    }

    /// Empirical means; every cell must have been sampled.
    pub fn means(&self) -> Result<Matrix> {
        let mut data = Vec::with_capacity(self.counts.len());
        for (i, (&n, &s)) in self.counts.iter().zip(&self.sums).enumerate() {
            if n == 0 {
                return Err(Error::UninitializedCell {
                    arm: i / self.num_subpops,
                    subpop: i % self.num_subpops,
                });
            }
            data.push(s / n as f64);
        }
        Matrix::new(self.num_arms, self.num_subpops, data)
    }

    /// Counts as reals (the unnormalized allocation `N`).
    pub fn count_matrix(&self) -> Matrix {
        let data = self.counts.iter().map(|&n| n as f64).collect();
        Matrix::new(self.num_arms, self.num_subpops, data).expect("consistent dimensions")
    }

    /// Empirical allocation `N/t`.
    pub fn weights(&self) -> Matrix {
        let t = self.t.max(1) as f64;
        let data = self.counts.iter().map(|&n| n as f64 / t).collect();
        Matrix::new(self.num_arms, self.num_subpops, data).expect("consistent dimensions")
    }

    pub fn arm_counts(&self) -> Vec<u64> {
        self.counts
            .chunks(self.num_subpops)
            .map(|row| row.iter().sum())
            .collect()
    }
}
