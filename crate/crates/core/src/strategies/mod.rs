//! Sampling rules: which `(arm, subpopulation)` cell to draw next.
//!
//! Every rule sees only the empirical state and the problem shape, never the true means.

mod tas;
mod tascs;
mod uniform;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EmpiricalState, ProblemShape, StreamRng};

pub use tas::{bai_oracle_weights, bai_oracle_weights_subgradient, BaiWeights, TaS};
pub use tascs::{TaScs, WeightUpdate};
pub use uniform::UniformRule;

pub trait SamplingRule {
    /// Next cell to sample. Requires every cell to have been drawn at least once.
    fn next_cell(&mut self, state: &EmpiricalState, rng: &mut StreamRng) -> Result<(usize, usize)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "tascs")]
    TaScs,
    #[serde(rename = "tas")]
    TaS,
    #[serde(rename = "uniform")]
    Uniform,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::TaScs, StrategyKind::TaS, StrategyKind::Uniform];

    /// Config and CSV name.
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::TaScs => "tascs",
            StrategyKind::TaS => "tas",
            StrategyKind::Uniform => "uniform",
        }
    }

    pub fn build(self, shape: &ProblemShape) -> Box<dyn SamplingRule + Send> {
        match self {
            StrategyKind::TaScs => Box::new(TaScs::new(shape.clone(), WeightUpdate::InLoop)),
            StrategyKind::TaS => Box::new(TaS::new(shape.clone())),
            StrategyKind::Uniform => Box::new(UniformRule::new(shape)),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tascs" => Ok(StrategyKind::TaScs),
            "tas" => Ok(StrategyKind::TaS),
            "uniform" => Ok(StrategyKind::Uniform),
            _ => Err(Error::UnknownStrategy(s.to_string())),
        }
    }
}

/// `n0` draws of every cell, arm-major.
pub fn initialization_schedule(num_arms: usize, num_subpops: usize, n0: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(num_arms * num_subpops * n0);
    for arm in 0..num_arms {
        for subpop in 0..num_subpops {
            out.extend(std::iter::repeat_n((arm, subpop), n0));
        }
    }
    out
}

/// Forced-exploration level `ε_t = (n² + t)^{-1/2} / 2` for `n` tracked cells.
pub fn exploration_epsilon(num_cells: usize, t: u64) -> f64 {
    let n = num_cells as f64;
    0.5 / (n * n + t as f64).sqrt()
}

/// Map a simplex point to `{w : w ≥ ε, Σ w = 1}`.
///
/// Entries below `ε` are raised to `ε` and the added mass is taken from the other
/// entries in proportion to their slack `w − ε`. Since `nε ≤ 1` the slack always
/// covers the added mass, so a single pass suffices.
pub fn clipped_projection(w: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    let mut out = w.to_vec();
    clipped_projection_in_place(&mut out, epsilon)?;
    Ok(out)
}

pub fn clipped_projection_in_place(w: &mut [f64], epsilon: f64) -> Result<()> {
    let n = w.len();
    if n == 0 || !(epsilon > 0.0) || epsilon * n as f64 > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} outside (0, 1/{n}]"
        )));
    }
    let mut added = 0.0;
    let mut slack = 0.0;
    for &x in w.iter() {
        if x < epsilon {
            added += epsilon - x;
        } else {
            slack += x - epsilon;
        }
    }
    if added == 0.0 {
        return Ok(());
    }
    let keep = if slack > 0.0 { (1.0 - added / slack).max(0.0) } else { 0.0 };
    for x in w.iter_mut() {
        *x = if *x < epsilon {
            epsilon
        } else {
            epsilon + (*x - epsilon) * keep
        };
    }
    Ok(())
}

/// C-tracking accumulator over a fixed set of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracker {
    cumulative: Vec<f64>,
    rounds: u64,
}

impl Tracker {
    pub fn new(num_cells: usize) -> Self {
        Self {
            cumulative: vec![0.0; num_cells],
            rounds: 0,
        }
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn add(&mut self, w: &[f64]) {
        debug_assert_eq!(w.len(), self.cumulative.len());
        for (c, x) in self.cumulative.iter_mut().zip(w) {
            *c += x;
        }
        self.rounds += 1;
    }

    /// `argmax_i cumulative_i − counts_i`, smallest index on ties.
    pub fn pick(&self, counts: &[u64]) -> usize {
        debug_assert_eq!(counts.len(), self.cumulative.len());
        let mut best = (0, f64::NEG_INFINITY);
        for (i, (c, &n)) in self.cumulative.iter().zip(counts).enumerate() {
            let deficit = c - n as f64;
            if deficit > best.1 {
                best = (i, deficit);
            }
        }
        best.0
    }
}
