//! Chernoff GLR stopping rule and the final recommendation.

use serde::{Deserialize, Serialize};

use crate::complexity::{f_value, rescue_value};
use crate::error::{Error, Result};
use crate::model::{best_feasible_arm, EmpiricalState, ProblemShape};

/// Stopping threshold `β(t, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `ln((1 + ln t) / δ)`.
    #[default]
    Stylized,
    /// `loglog_weight · L · ln(1 + ln t) + ln(K / δ) + offset`.
    ///
    /// Only the order of this threshold is known; the constants are the caller's.
    Conservative { loglog_weight: f64, offset: f64 },
}

impl ThresholdRule {
    pub fn value(&self, t: u64, delta: f64, shape: &ProblemShape) -> Result<f64> {
        check_domain(t, delta)?;
        let log_t = (t as f64).ln();
        Ok(match *self {
            ThresholdRule::Stylized => ((1.0 + log_t) / delta).ln(),
            ThresholdRule::Conservative {
                loglog_weight,
                offset,
            } => {
                loglog_weight * shape.num_subpops() as f64 * (1.0 + log_t).ln()
                    + (shape.num_arms as f64 / delta).ln()
                    + offset
            }
        })
    }
}

fn check_domain(t: u64, delta: f64) -> Result<()> {
    if t < 1 {
        return Err(Error::InvalidParameter("threshold needs t >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// Stylized threshold `ln((1 + ln t) / δ)`.
pub fn threshold(t: u64, delta: f64) -> Result<f64> {
    check_domain(t, delta)?;
    Ok(((1.0 + (t as f64).ln()) / delta).ln())
}

/// GLR statistic `Z(t) = (t / 2σ²) F_μ̂(N/t)`; the all-infeasible form when no
/// empirical arm is feasible.
pub fn glr_statistic(state: &EmpiricalState, shape: &ProblemShape) -> Result<f64> {
    let means = state.means()?;
    let scale = 0.5 / (shape.noise_sd * shape.noise_sd);
    Ok(match best_feasible_arm(&means, shape) {
        Some(candidate) => {
            let t = state.t() as f64;
            t * scale * f_value(&state.weights(), &means, shape, candidate)
        }
        None => scale * rescue_value(&state.count_matrix(), &means, shape).1,
    })
}

/// Same statistic computed directly on the counts `N` instead of `N/t`.
pub fn glr_statistic_counts(state: &EmpiricalState, shape: &ProblemShape) -> Result<f64> {
    let means = state.means()?;
    let counts = state.count_matrix();
    let scale = 0.5 / (shape.noise_sd * shape.noise_sd);
    Ok(match best_feasible_arm(&means, shape) {
        Some(candidate) => scale * f_value(&counts, &means, shape, candidate),
        None => scale * rescue_value(&counts, &means, shape).1,
    })
}

/// Threshold choice plus a multiplier applied to `Z(t)` before comparing it with `β`.
///
/// `statistic_scale = 1` is the GLR test; other values exist for sensitivity studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoppingRule {
    pub threshold: ThresholdRule,
    pub statistic_scale: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            threshold: ThresholdRule::Stylized,
            statistic_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlrDecision {
    pub z: f64,
    pub beta: f64,
    pub stop: bool,
    /// Empirical best feasible arm; `None` when the empirical feasible set is empty.
    pub recommendation: Option<usize>,
}

pub fn stop_and_recommend(
    state: &EmpiricalState,
    shape: &ProblemShape,
    delta: f64,
    rule: &StoppingRule,
) -> Result<GlrDecision> {
    if !(rule.statistic_scale > 0.0 && rule.statistic_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "statistic_scale must be positive, got {}",
            rule.statistic_scale
        )));
    }
    let z = glr_statistic(state, shape)?;
    let beta = rule.threshold.value(state.t(), delta, shape)?;
    let means = state.means()?;
    Ok(GlrDecision {
        z,
        beta,
        stop: rule.statistic_scale * z > beta,
        recommendation: best_feasible_arm(&means, shape),
    })
}
