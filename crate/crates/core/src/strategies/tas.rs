use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::complexity::{optimize_weights, OptimizerParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{aggregate_means, EmpiricalState, ProblemShape, StreamRng};

use super::{clipped_projection_in_place, exploration_epsilon, SamplingRule, Tracker};

const BISECTION_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct BaiWeights {
    pub weights: Vec<f64>,
    /// Set when the best mean is shared by several arms; the weights are then uniform.
    pub degenerate: bool,
}

fn best_or_degenerate(arm_means: &[f64]) -> Result<std::result::Result<usize, BaiWeights>> {
    if arm_means.is_empty() || arm_means.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidParameter("arm means must be finite and nonempty".into()));
    }
    let k = arm_means.len();
    let best = (1..k).fold(0, |b, a| if arm_means[a] > arm_means[b] { a } else { b });
    let ties = arm_means.iter().filter(|&&m| m == arm_means[best]).count();
    if ties > 1 {
        return Ok(Err(BaiWeights {
            weights: vec![1.0 / k as f64; k],
            degenerate: true,
        }));
    }
    Ok(Ok(best))
}

/// Optimal arm proportions for Gaussian best-arm identification with unit variance.
///
/// Solves the optimality condition `Σ_{a≠1} x_a² = 1`, where
/// `x_a = y / (Δ_a²/2 − y)` is the ratio `w_a / w_1`, by bisection on
/// `y ∈ (0, min_a Δ_a²/2)`.
pub fn bai_oracle_weights(arm_means: &[f64]) -> Result<BaiWeights> {
    let best = match best_or_degenerate(arm_means)? {
        Ok(best) => best,
        Err(uniform) => return Ok(uniform),
    };
    let k = arm_means.len();
    if k == 1 {
        return Ok(BaiWeights {
            weights: vec![1.0],
            degenerate: false,
        });
    }
    let half_sq: Vec<f64> = arm_means
        .iter()
        .map(|m| 0.5 * (arm_means[best] - m).powi(2))
        .collect();
    let ratios = |y: f64| {
        half_sq
            .iter()
            .enumerate()
            .map(move |(a, h)| if a == best { 1.0 } else { y / (h - y) })
    };
    let excess = |y: f64| ratios(y).enumerate().filter(|&(a, _)| a != best).map(|(_, x)| x * x).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (
        0.0,
        half_sq
            .iter()
            .enumerate()
            .filter(|&(a, _)| a != best)
            .map(|(_, &h)| h)
            .fold(f64::INFINITY, f64::min),
    );
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x: Vec<f64> = ratios(0.5 * (lo + hi)).collect();
    let total: f64 = x.iter().sum();
    Ok(BaiWeights {
        weights: x.iter().map(|v| v / total).collect(),
        degenerate: false,
    })
}

/// Same proportions from the shared supergradient optimizer run on a
/// single-subpopulation, unconstrained instance.
pub fn bai_oracle_weights_subgradient(arm_means: &[f64], params: &OptimizerParams) -> Result<BaiWeights> {
    let best = match best_or_degenerate(arm_means)? {
        Ok(best) => best,
        Err(uniform) => return Ok(uniform),
    };
    let means = Matrix::new(arm_means.len(), 1, arm_means.to_vec())?;
    let shape = ProblemShape {
        num_arms: arm_means.len(),
        q: vec![1.0],
        num_constrained: 0,
        thresholds: Vec::new(),
        noise_sd: 1.0,
    };
    let result = optimize_weights(&means, &shape, best, params)?;
    Ok(BaiWeights {
        weights: result.w_star.into_matrix().into_vec(),
        degenerate: false,
    })
}

/// Baseline track-and-stop: arm weights from the aggregate means, subpopulation drawn from `q`.
#[derive(Debug, Clone)]
pub struct TaS {
    shape: ProblemShape,
    tracker: Tracker,
    subpop: WeightedIndex<f64>,
    degenerate_rounds: u64,
}

impl TaS {
    pub fn new(shape: ProblemShape) -> Self {
        let subpop = WeightedIndex::new(&shape.q).expect("validated q");
        Self {
            tracker: Tracker::new(shape.num_arms),
            subpop,
            degenerate_rounds: 0,
            shape,
        }
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    /// Rounds in which the empirical best aggregate mean was tied.
    pub fn degenerate_rounds(&self) -> u64 {
        self.degenerate_rounds
    }
}

impl SamplingRule for TaS {
    fn next_cell(&mut self, state: &EmpiricalState, rng: &mut StreamRng) -> Result<(usize, usize)> {
        let means = state.means()?;
        let aggregates = aggregate_means(&means, &self.shape.q)?;
        let mut target = bai_oracle_weights(&aggregates)?;
        if target.degenerate {
            self.degenerate_rounds += 1;
        }
        clipped_projection_in_place(&mut target.weights, exploration_epsilon(self.shape.num_arms, state.t()))?;
        self.tracker.add(&target.weights);
        let arm = self.tracker.pick(&state.arm_counts());
        Ok((arm, self.subpop.sample(rng)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{replication_stream, StreamPurpose};
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_arms_split_evenly() {
        let w = bai_oracle_weights(&[1.0, 0.0]).unwrap();
        assert!(!w.degenerate);
        assert_abs_diff_eq!(w.weights[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(w.weights[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn symmetry_scaling_and_ties() {
        let w = bai_oracle_weights(&[1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(w.weights[1], w.weights[2], epsilon = 1e-14);
        // Known optimum for two equal competitors: w_1 = √2 w_2.
        assert_abs_diff_eq!(w.weights[0] / w.weights[1], 2f64.sqrt(), epsilon = 1e-9);
        let base = bai_oracle_weights(&[0.3, 0.1, -0.4, 0.25]).unwrap();
        let scaled = bai_oracle_weights(&[1.5, 0.5, -2.0, 1.25]).unwrap();
        for (a, b) in base.weights.iter().zip(&scaled.weights) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let tie = bai_oracle_weights(&[0.2, 0.2, 0.2]).unwrap();
        assert!(tie.degenerate);
        assert_eq!(tie.weights, vec![1.0 / 3.0; 3]);
        assert!(bai_oracle_weights(&[]).is_err());
    }

    #[test]
    fn exact_and_subgradient_routes_agree() {
        let means = [0.62, 0.35, 1.01, 0.8];
        let exact = bai_oracle_weights(&means).unwrap();
        let sub = bai_oracle_weights_subgradient(&means, &OptimizerParams::default()).unwrap();
        for (a, b) in exact.weights.iter().zip(&sub.weights) {
            assert_abs_diff_eq!(a, b, epsilon = 0.01);
        }
    }

    #[test]
    fn subpopulations_follow_q() {
        let shape = ProblemShape {
            num_arms: 2,
            q: vec![0.2, 0.3, 0.5],
            num_constrained: 3,
            thresholds: vec![0.0; 3],
            noise_sd: 1.0,
        };
        let mut rule = TaS::new(shape);
        let mut state = EmpiricalState::new(2, 3);
        for l in 0..3 {
            state.update(0, l, 1.0);
            state.update(1, l, 0.0);
        }
        let mut rng = replication_stream(11, 0, StreamPurpose::Strategy);
        let mut freq = [0.0; 3];
        let n = 100_000;
        for _ in 0..n {
            let (_, l) = rule.next_cell(&state, &mut rng).unwrap();
            freq[l] += 1.0 / n as f64;
        }
        let tv = 0.5 * freq.iter().zip([0.2, 0.3, 0.5]).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 0.01, "{freq:?}");
    }

    #[test]
    fn arm_deficit_example() {
        let mut t = Tracker::new(2);
        t.add(&[1.0, 0.0]);
        t.add(&[1.0, 0.5]);
        t.add(&[1.0, 0.5]);
        assert_eq!(t.pick(&[1, 2]), 0);
    }
}
