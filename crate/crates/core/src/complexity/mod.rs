//! Characteristic time `T*(μ)`, optimal allocations, and the sample-complexity lower bound.
//!
//! For an allocation `w` on the K×L simplex, `F_μ(w)` is the weighted squared distance
//! from `μ` to the nearest instance with a different best feasible arm. It is the
//! smaller of two parts: the cheapest competitor overtaking the candidate
//! (one [`inner_best_response`] per competitor) and the cheapest push of the
//! candidate onto one of its thresholds. `T*(μ) = 2σ² / max_w F_μ(w)`.

mod inner;
mod optimize;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{BanditInstance, ProblemShape, Validity};

pub use inner::{
    inner_best_response, Alternative, BestResponse, FreeCell, Multiplier, PairProblem,
    PairSolution, GAP_TOL, MAX_BISECTION_ITERS,
};
pub use optimize::{ascent_step, optimize_weights, OptimizerParams, StepSchedule};
pub use simplex::{project_simplex, project_simplex_into};

const SIMPLEX_TOL: f64 = 1e-9;

/// A point on the K×L probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationWeights(Matrix);

impl AllocationWeights {
    pub fn new(w: Matrix) -> Result<Self> {
        if w.as_slice().iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "allocation weights must be nonnegative".into(),
            ));
        }
        let total = w.sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidParameter(format!(
                "allocation weights must sum to 1, sum to {total}"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(num_arms: usize, num_subpops: usize) -> Self {
        let n = (num_arms * num_subpops) as f64;
        Self(Matrix::filled(num_arms, num_subpops, 1.0 / n))
    }

    #[inline]
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    #[inline]
    pub fn get(&self, arm: usize, subpop: usize) -> f64 {
        self.0[(arm, subpop)]
    }
}

/// Result of the max-min problem for one instance.
#[derive(Debug, Clone, Serialize)]
pub struct ComplexityResult {
    pub t_star: f64,
    pub w_star: AllocationWeights,
    /// `F_μ(w*)`, the max-min weighted squared distance.
    pub f_value: f64,
    pub iterations: usize,
    pub certificate: BestResponse,
}

/// Candidate's cheapest threshold push: `min_{l<M} w_{c,l} (μ_{c,l} − b_l)²`, `+∞` when `M = 0`.
pub fn f_fea(w: &Matrix, means: &Matrix, shape: &ProblemShape, candidate: usize) -> f64 {
    feasibility_piece(w, means, shape, candidate).map_or(f64::INFINITY, |(_, v)| v)
}

fn feasibility_piece(
    w: &Matrix,
    means: &Matrix,
    shape: &ProblemShape,
    candidate: usize,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for l in 0..shape.num_constrained {
        let d = shape.slack(l, means[(candidate, l)]);
        let v = w[(candidate, l)] * d * d;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((l, v));
        }
    }
    best
}

/// `F_μ(w)` together with a supergradient `c` satisfying `F_μ(w) = c·w`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub subgradient: Matrix,
    pub best_response: BestResponse,
}

/// Value of `F_μ(w)` only; no allocation.
pub fn f_value(w: &Matrix, means: &Matrix, shape: &ProblemShape, candidate: usize) -> f64 {
    let mut value = f_fea(w, means, shape, candidate);
    for competitor in (0..means.rows()).filter(|&k| k != candidate) {
        let v = PairProblem::new(w, means, shape, candidate, competitor)
            .solve()
            .value;
        value = value.min(v);
    }
    value
}

/// Full evaluation of `F_μ(w)`: value, active supergradient, and the minimizing alternative.
///
/// Competitors are scanned in index order, then threshold pushes; the first strict
/// minimum wins.
pub fn evaluate(w: &Matrix, means: &Matrix, shape: &ProblemShape, candidate: usize) -> Evaluation {
    let (k, l) = (means.rows(), means.cols());
    let mut best: Option<(f64, usize, PairSolution)> = None;
    for competitor in (0..k).filter(|&c| c != candidate) {
        let sol = PairProblem::new(w, means, shape, candidate, competitor).solve();
        if best.is_none_or(|(v, _, _)| sol.value < v) {
            best = Some((sol.value, competitor, sol));
        }
    }
    let feas = feasibility_piece(w, means, shape, candidate);
    let mut subgradient = Matrix::zeros(k, l);

    let use_feasibility = match (feas, best) {
        (Some((_, fv)), Some((ov, _, _))) => fv < ov,
        (Some(_), None) => true,
        _ => false,
    };

    if use_feasibility {
        let (subpop, _) = feas.expect("checked above");
        let d = shape.slack(subpop, means[(candidate, subpop)]);
        subgradient[(candidate, subpop)] = d * d;
        let value = w[(candidate, subpop)] * d * d;
        return Evaluation {
            value,
            subgradient,
            best_response: BestResponse {
                candidate: Some(candidate),
                alternative: Alternative::Infeasible {
                    subpop,
                    level: shape.thresholds[subpop],
                },
                value,
            },
        };
    }

    let (_, competitor, sol) = best.expect("at least two arms");
    let problem = PairProblem::new(w, means, shape, candidate, competitor);
    let (x, y) = problem.lambda_rows(sol.multiplier);
    let mut value = 0.0;
    for j in 0..l {
        let cx = (means[(candidate, j)] - x[j]).powi(2);
        let cy = (means[(competitor, j)] - y[j]).powi(2);
        subgradient[(candidate, j)] = cx;
        subgradient[(competitor, j)] = cy;
    }
    for j in 0..l {
        value += w[(candidate, j)] * subgradient[(candidate, j)];
    }
    for j in 0..l {
        value += w[(competitor, j)] * subgradient[(competitor, j)];
    }
    Evaluation {
        value,
        subgradient,
        best_response: BestResponse {
            candidate: Some(candidate),
            alternative: Alternative::Overtake {
                competitor,
                candidate_row: x,
                competitor_row: y,
                multiplier: match sol.multiplier {
                    Multiplier::Kkt(eta) => Some(eta),
                    Multiplier::Free(_) => None,
                },
            },
            value,
        },
    }
}

/// Closed-form optimum when no arm is feasible.
#[derive(Debug, Clone, Serialize)]
pub struct InfeasibleSolution {
    pub weights: AllocationWeights,
    /// Cell `(arm, l(arm))` carrying each arm's mass.
    pub cells: Vec<(usize, usize)>,
    /// `½ max_w min_k Σ w (μ − b)²`; equals `1/T*` at unit noise.
    pub inverse_t_star: f64,
}

/// Optimal allocation for the all-infeasible case.
///
/// Each arm's mass goes to its most violated constrained cell `l(k)` (smallest `l`
/// on ties), proportionally to `1/(μ_{k,l(k)} − b)²`, which equalizes the per-arm
/// evidence `w_{k,l(k)} (μ_{k,l(k)} − b)²`.
pub fn infeasible_case_weights(means: &Matrix, shape: &ProblemShape) -> Result<InfeasibleSolution> {
    let (k, l) = (means.rows(), means.cols());
    let mut cells = Vec::with_capacity(k);
    let mut sq = Vec::with_capacity(k);
    for arm in 0..k {
        let mut pick: Option<(usize, f64)> = None;
        for j in 0..shape.num_constrained {
            let d = shape.slack(j, means[(arm, j)]);
            if d < 0.0 && pick.is_none_or(|(_, s)| d * d > s) {
                pick = Some((j, d * d));
            }
        }
        let (j, s) = pick.ok_or(Error::FeasibleSetNotEmpty)?;
        cells.push((arm, j));
        sq.push(s);
    }
    let norm: f64 = sq.iter().map(|s| 1.0 / s).sum();
    let mut w = Matrix::zeros(k, l);
    for (&(arm, j), &s) in cells.iter().zip(&sq) {
        w[(arm, j)] = 1.0 / (s * norm);
    }
    let min_evidence = cells
        .iter()
        .zip(&sq)
        .map(|(&(arm, j), &s)| w[(arm, j)] * s)
        .fold(f64::INFINITY, f64::min);
    Ok(InfeasibleSolution {
        weights: AllocationWeights::new(w)?,
        cells,
        inverse_t_star: 0.5 * min_evidence,
    })
}

/// `min_k Σ_{l<M, μ_{k,l}<b_l} w_{k,l} (μ_{k,l} − b_l)²` and the arm attaining it.
pub fn rescue_value(w: &Matrix, means: &Matrix, shape: &ProblemShape) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for arm in 0..means.rows() {
        let mut v = 0.0;
        for j in 0..shape.num_constrained {
            let d = shape.slack(j, means[(arm, j)]);
            if d < 0.0 {
                v += w[(arm, j)] * d * d;
            }
        }
        if v < best.1 {
            best = (arm, v);
        }
    }
    best
}

fn rescue_response(w: &Matrix, means: &Matrix, shape: &ProblemShape) -> BestResponse {
    let (arm, value) = rescue_value(w, means, shape);
    let cells = (0..shape.num_constrained)
        .filter(|&j| means[(arm, j)] < shape.thresholds[j])
        .collect();
    BestResponse {
        candidate: None,
        alternative: Alternative::Rescue { arm, cells },
        value,
    }
}

/// `T*(μ)` with the case split on whether a feasible arm exists.
pub fn t_star(instance: &BanditInstance, params: &OptimizerParams) -> Result<ComplexityResult> {
    let means = instance.means();
    let shape = instance.shape();
    let variance = shape.noise_sd * shape.noise_sd;
    match instance.validate() {
        Validity::Invalid(v) => Err(Error::InvalidInstance(v.to_string())),
        Validity::AllInfeasible => {
            let sol = infeasible_case_weights(means, shape)?;
            let f_value = 2.0 * sol.inverse_t_star;
            let certificate = rescue_response(sol.weights.as_matrix(), means, shape);
            Ok(ComplexityResult {
                t_star: 2.0 * variance / f_value,
                w_star: sol.weights,
                f_value,
                iterations: 0,
                certificate,
            })
        }
        Validity::BestFeasible { arm } => optimize_weights(means, shape, arm, params),
    }
}

/// `kl(p, q)` between Bernoulli laws, natural log.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub delta: f64,
    /// `T* · kl(δ, 1−δ)`, valid for every δ.
    pub finite: f64,
    /// `T* · ln(1/δ)`, the small-δ rate.
    pub asymptotic: f64,
}

pub fn lower_bound(t_star: f64, delta: f64) -> Result<LowerBound> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(LowerBound {
        delta,
        finite: t_star * bernoulli_kl(delta, 1.0 - delta),
        asymptotic: t_star * (1.0 / delta).ln(),
    })
}
