use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::Result;
use crate::model::{EmpiricalState, ProblemShape, StreamRng};

use super::SamplingRule;

/// Arm uniform on `[K]`, subpopulation drawn from `q`.
#[derive(Debug, Clone)]
pub struct UniformRule {
    num_arms: usize,
    subpop: WeightedIndex<f64>,
}

impl UniformRule {
    pub fn new(shape: &ProblemShape) -> Self {
        Self {
            num_arms: shape.num_arms,
            subpop: WeightedIndex::new(&shape.q).expect("validated q"),
        }
    }
}

impl SamplingRule for UniformRule {
    fn next_cell(&mut self, _state: &EmpiricalState, rng: &mut StreamRng) -> Result<(usize, usize)> {
        Ok((rng.random_range(0..self.num_arms), self.subpop.sample(rng)))
    }
}
