//! The two worked example instances and their experiment settings.

use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::matrix::Matrix;
use crate::model::BanditInstance;

/// Example instance 1 (`K = L = M = 3`, best feasible arm 1) or 2 (`K = 4`, best feasible arm 2).
pub fn example_instance(id: u32) -> Result<BanditInstance> {
    match id {
        1 => BanditInstance::new(
            Matrix::from_rows(&[[0.2, 0.6, 0.8], [0.4, 0.4, 0.3], [-0.2, 1.0, 1.5]])?,
            vec![0.2, 0.3, 0.5],
            3,
        ),
        2 => BanditInstance::new(
            Matrix::from_rows(&[
                [-0.2, 0.4, 1.2],
                [0.2, 0.6, 0.6],
                [0.3, 0.3, 0.6],
                [-0.6, 0.8, 0.4],
            ])?,
            vec![1.0 / 3.0; 3],
            3,
        ),
        other => Err(Error::UnknownExample(other)),
    }
}

/// Experiment settings for an example: all three strategies, `δ = 0.1`, 300
/// replications, 5 initial draws per cell, `τ_max = 15000`.
pub fn paper_example(id: u32) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::new(example_instance(id)?))
}
