use crate::complexity::{ascent_step, infeasible_case_weights, optimize_weights, AllocationWeights, OptimizerParams};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::model::{best_feasible_arm, EmpiricalState, ProblemShape, StreamRng};

use super::{clipped_projection_in_place, exploration_epsilon, SamplingRule, Tracker};

/// How T-a-SCS refreshes its target allocation each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightUpdate {
    /// One projected supergradient step with `α = 1`, warm-started from the previous round.
    InLoop,
    /// Solve `max_w F_μ̂(w)` from scratch every round.
    Reoptimize(OptimizerParams),
}

/// Track-and-stop with subpopulation constraints: C-tracking on `K × L` cell weights.
#[derive(Debug, Clone)]
pub struct TaScs {
    shape: ProblemShape,
    update: WeightUpdate,
    current: Matrix,
    tracker: Tracker,
    scratch: Vec<f64>,
}

impl TaScs {
    pub fn new(shape: ProblemShape, update: WeightUpdate) -> Self {
        let (k, l) = (shape.num_arms, shape.num_subpops());
        Self {
            current: AllocationWeights::uniform(k, l).into_matrix(),
            tracker: Tracker::new(k * l),
            scratch: vec![0.0; k * l],
            shape,
            update,
        }
    }

    /// Latest target allocation, already clipped to `w ≥ ε_t`.
    ///
    /// The clipped point is the warm start for the next round. Starting from the
    /// unclipped simplex iterate lets cells reach zero weight, where `F` vanishes
    /// and the chosen supergradient can leave competitor cells unsampled.
    pub fn current_weights(&self) -> &Matrix {
        &self.current
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    /// One round using `means` in place of the empirical means; counts and `t` come from `state`.
    pub fn next_given_means(&mut self, means: &Matrix, state: &EmpiricalState) -> Result<(usize, usize)> {
        let shape = &self.shape;
        match best_feasible_arm(means, shape) {
            Some(candidate) => match self.update {
                WeightUpdate::InLoop => {
                    ascent_step(&mut self.current, means, shape, candidate, 1.0);
                }
                WeightUpdate::Reoptimize(params) => {
                    self.current = optimize_weights(means, shape, candidate, &params)?
                        .w_star
                        .into_matrix();
                }
            },
            None => self.current = infeasible_case_weights(means, shape)?.weights.into_matrix(),
        }
        let l = shape.num_subpops();
        self.scratch.copy_from_slice(self.current.as_slice());
        let epsilon = exploration_epsilon(self.scratch.len(), state.t());
        clipped_projection_in_place(&mut self.scratch, epsilon)?;
        self.current.as_mut_slice().copy_from_slice(&self.scratch);
        self.tracker.add(&self.scratch);
        let cell = self.tracker.pick(state.counts());
        Ok((cell / l, cell % l))
    }
}

impl SamplingRule for TaScs {
    fn next_cell(&mut self, state: &EmpiricalState, _rng: &mut StreamRng) -> Result<(usize, usize)> {
        let means = state.means()?;
        self.next_given_means(&means, state)
    }
}
