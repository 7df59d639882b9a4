use serde::{Deserialize, Serialize};

use super::simplex::project_simplex_into;
use super::{evaluate, AllocationWeights, ComplexityResult, Evaluation};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{best_feasible_arm, ProblemShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `α_n = α₀ / √n`.
    InverseSqrt,
    /// `α_n = α₀ / (√n ‖c_n‖)`: step length independent of the scale of `μ`.
    NormalizedInverseSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerParams {
    pub max_iters: usize,
    pub alpha0: f64,
    pub schedule: StepSchedule,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            alpha0: 1.0,
            schedule: StepSchedule::NormalizedInverseSqrt,
        }
    }
}

/// One projected supergradient step `w ← P_Σ(w + α c)` on `F_μ`.
///
/// Returns the evaluation at the point *before* the step.
pub fn ascent_step(
    w: &mut Matrix,
    means: &Matrix,
    shape: &ProblemShape,
    candidate: usize,
    alpha: f64,
) -> Evaluation {
    let eval = evaluate(w, means, shape, candidate);
    let moved: Vec<f64> = w
        .as_slice()
        .iter()
        .zip(eval.subgradient.as_slice())
        .map(|(x, c)| x + alpha * c)
        .collect();
    project_simplex_into(&moved, w.as_mut_slice());
    eval
}

/// Projected supergradient ascent on `F_μ` from the uniform allocation, keeping the best iterate.
pub fn optimize_weights(
    means: &Matrix,
    shape: &ProblemShape,
    candidate: usize,
    params: &OptimizerParams,
) -> Result<ComplexityResult> {
    match best_feasible_arm(means, shape) {
        None => return Err(Error::NoFeasibleArm),
        Some(best) if best != candidate => {
            return Err(Error::InvalidParameter(format!(
                "candidate arm {} is not the best feasible arm {}",
                candidate + 1,
                best + 1
            )))
        }
        Some(_) => {}
    }
    if params.max_iters == 0 || !(params.alpha0 > 0.0) {
        return Err(Error::InvalidParameter(
            "optimizer needs max_iters >= 1 and alpha0 > 0".into(),
        ));
    }

    let (k, l) = (means.rows(), means.cols());
    let mut w = AllocationWeights::uniform(k, l).into_matrix();
    let mut best: Option<(Matrix, Evaluation)> = None;
    let mut iterations = 0;
    let mut moved = vec![0.0; k * l];
    for n in 1..=params.max_iters {
        iterations = n;
        let eval = evaluate(&w, means, shape, candidate);
        let norm = eval.subgradient.as_slice().iter().map(|c| c * c).sum::<f64>().sqrt();
        let alpha = match params.schedule {
            StepSchedule::InverseSqrt => params.alpha0 / (n as f64).sqrt(),
            StepSchedule::NormalizedInverseSqrt => params.alpha0 / ((n as f64).sqrt() * norm),
        };
        for ((m, x), c) in moved.iter_mut().zip(w.as_slice()).zip(eval.subgradient.as_slice()) {
            *m = x + alpha * c;
        }
        if best.as_ref().is_none_or(|(_, b)| eval.value > b.value) {
            best = Some((w.clone(), eval));
        }
        if norm == 0.0 {
            break;
        }
        project_simplex_into(&moved, w.as_mut_slice());
    }
    let last = evaluate(&w, means, shape, candidate);
    if best.as_ref().is_none_or(|(_, b)| last.value > b.value) {
        best = Some((w, last));
    }
    let (w_star, eval) = best.expect("at least one iterate");
    let variance = shape.noise_sd * shape.noise_sd;
    Ok(ComplexityResult {
        t_star: 2.0 * variance / eval.value,
        w_star: AllocationWeights::new(w_star)?,
        f_value: eval.value,
        iterations,
        certificate: eval.best_response,
    })
}
