//! Best response of a single competitor against the candidate arm.
//!
//! For a fixed allocation the cheapest way to make `competitor` beat `candidate`
//! while staying feasible is the convex QP
//!
//! ```text
//! min  Σ_l w_a,l (μ_a,l − x_l)² + Σ_l w_b,l (μ_b,l − y_l)²
//! s.t. Σ_l q_l y_l ≥ Σ_l q_l x_l,   y_l ≥ b_l for l < M
//! ```
//!
//! Stationarity with multiplier `η ≥ 0` on the aggregate constraint gives
//! `x_l(η) = μ_a,l − η q_l / (2 w_a,l)` and
//! `y_l(η) = max(b_l, μ_b,l + η q_l / (2 w_b,l))` (no clip for `l ≥ M`).
//! The constraint gap `g(η) = Σ q (y − x)` is nondecreasing and piecewise linear,
//! so its root is bracketed and bisected; on each probe the root of the current
//! linear piece is tried first, which usually terminates after a few steps.

use serde::Serialize;

use crate::matrix::Matrix;
use crate::model::ProblemShape;

pub const GAP_TOL: f64 = 1e-10;
pub const MAX_BISECTION_ITERS: usize = 200;

/// Zero-weight cell that lets the aggregate constraint be met at no cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FreeCell {
    Candidate(usize),
    Competitor(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    /// Regular KKT solution with aggregate multiplier `η`.
    Kkt(f64),
    /// A zero-weight cell absorbed the aggregate constraint.
    Free(FreeCell),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSolution {
    pub value: f64,
    pub multiplier: Multiplier,
    pub iterations: usize,
}

/// The two-row QP for one (candidate, competitor) pair.
#[derive(Debug, Clone, Copy)]
pub struct PairProblem<'a> {
    pub w_candidate: &'a [f64],
    pub w_competitor: &'a [f64],
    pub mu_candidate: &'a [f64],
    pub mu_competitor: &'a [f64],
    pub q: &'a [f64],
    /// Thresholds of the constrained subpopulations (length `M`).
    pub thresholds: &'a [f64],
}

/// `dλ/dη` for one cell; infinite on a zero-weight cell, so callers must not pair it with `η = 0`.
#[inline]
fn slope(q: f64, w: f64) -> f64 {
    if q > 0.0 {
        q / (2.0 * w)
    } else {
        0.0
    }
}

impl<'a> PairProblem<'a> {
    pub fn new(
        w: &'a Matrix,
        means: &'a Matrix,
        shape: &'a ProblemShape,
        candidate: usize,
        competitor: usize,
    ) -> Self {
        Self {
            w_candidate: w.row(candidate),
            w_competitor: w.row(competitor),
            mu_candidate: means.row(candidate),
            mu_competitor: means.row(competitor),
            q: &shape.q,
            thresholds: &shape.thresholds[..shape.num_constrained],
        }
    }

    #[inline]
    fn num_constrained(&self) -> usize {
        self.thresholds.len()
    }

    pub fn free_cell(&self) -> Option<FreeCell> {
        for (l, &q) in self.q.iter().enumerate() {
            if q > 0.0 && self.w_candidate[l] == 0.0 {
                return Some(FreeCell::Candidate(l));
            }
        }
        for (l, &q) in self.q.iter().enumerate() {
            if q > 0.0 && self.w_competitor[l] == 0.0 {
                return Some(FreeCell::Competitor(l));
            }
        }
        None
    }

    #[inline]
    pub fn candidate_at(&self, l: usize, eta: f64) -> f64 {
        if eta == 0.0 {
            return self.mu_candidate[l];
        }
        self.mu_candidate[l] - eta * slope(self.q[l], self.w_candidate[l])
    }

    #[inline]
    pub fn competitor_at(&self, l: usize, eta: f64) -> f64 {
        let y = if eta == 0.0 {
            self.mu_competitor[l]
        } else {
            self.mu_competitor[l] + eta * slope(self.q[l], self.w_competitor[l])
        };
        if l < self.num_constrained() {
            y.max(self.thresholds[l])
        } else {
            y
        }
    }

    /// `Σ q_l (y_l(η) − x_l(η))`; the aggregate constraint holds iff this is `≥ 0`.
    pub fn gap(&self, eta: f64) -> f64 {
        (0..self.q.len())
            .map(|l| self.q[l] * (self.competitor_at(l, eta) - self.candidate_at(l, eta)))
            .sum()
    }

    /// Cost of lifting the competitor's violated constrained cells to their thresholds.
    pub fn clipping_cost(&self) -> f64 {
        (0..self.num_constrained())
            .filter(|&l| self.mu_competitor[l] < self.thresholds[l])
            .map(|l| self.w_competitor[l] * (self.mu_competitor[l] - self.thresholds[l]).powi(2))
            .sum()
    }

    /// Root of the linear piece of `gap` whose clipping pattern matches `eta`.
    fn piece_root(&self, eta: f64) -> f64 {
        let (mut a, mut b) = (0.0, 0.0);
        for l in 0..self.q.len() {
            let q = self.q[l];
            let sb = slope(q, self.w_competitor[l]);
            let clipped = l < self.num_constrained()
                && self.mu_competitor[l] + eta * sb < self.thresholds[l];
            if clipped {
                a += q * self.thresholds[l];
            } else {
                a += q * self.mu_competitor[l];
                b += q * sb;
            }
            a -= q * self.mu_candidate[l];
            b += q * slope(q, self.w_candidate[l]);
        }
        -a / b
    }

    /// Upper end of the bracket: root of the gap with clipping ignored.
    fn unclipped_root(&self) -> f64 {
        let (mut a, mut b) = (0.0, 0.0);
        for l in 0..self.q.len() {
            let q = self.q[l];
            a += q * (self.mu_competitor[l] - self.mu_candidate[l]);
            b += q * (slope(q, self.w_competitor[l]) + slope(q, self.w_candidate[l]));
        }
        (-a / b).max(0.0)
    }

    /// Objective at the λ rows implied by `multiplier`.
    pub fn objective(&self, multiplier: Multiplier) -> f64 {
        let (x, y) = self.lambda_rows(multiplier);
        objective_of(self, &x, &y)
    }

    pub fn solve(&self) -> PairSolution {
        if let Some(free) = self.free_cell() {
            return PairSolution {
                value: self.clipping_cost(),
                multiplier: Multiplier::Free(free),
                iterations: 0,
            };
        }
        let eta = if self.gap(0.0) >= 0.0 {
            (0.0, 0)
        } else {
            self.find_multiplier()
        };
        let multiplier = Multiplier::Kkt(eta.0);
        PairSolution {
            value: self.kkt_value(eta.0),
            multiplier,
            iterations: eta.1,
        }
    }

    fn kkt_value(&self, eta: f64) -> f64 {
        let mut v = 0.0;
        for l in 0..self.q.len() {
            let dx = self.mu_candidate[l] - self.candidate_at(l, eta);
            v += self.w_candidate[l] * dx * dx;
        }
        for l in 0..self.q.len() {
            let dy = self.mu_competitor[l] - self.competitor_at(l, eta);
            v += self.w_competitor[l] * dy * dy;
        }
        v
    }

    /// Bracketed search for the smallest `η ≥ 0` with `gap(η) ≥ 0`, given `gap(0) < 0`.
    fn find_multiplier(&self) -> (f64, usize) {
        let mut lo = 0.0;
        let mut hi = self.unclipped_root();
        let mut guard = 0;
        while self.gap(hi) < 0.0 && guard < 64 {
            hi = if hi > 0.0 { hi * 2.0 } else { 1.0 };
            guard += 1;
        }
        let scale: f64 = 1.0
            + self
                .q
                .iter()
                .zip(self.mu_candidate.iter().zip(self.mu_competitor))
                .map(|(q, (a, b))| q * (a.abs() + b.abs()))
                .sum::<f64>();
        for iter in 1..=MAX_BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            let root = self.piece_root(mid);
            if root >= lo && root <= hi {
                let g = self.gap(root);
                if g.abs() <= 1e-13 * scale {
                    // Nudge onto the feasible side if rounding left it short.
                    if g < 0.0 {
                        let next = root + root.abs() * 1e-15 + 1e-300;
                        if self.gap(next) >= 0.0 {
                            return (next, iter);
                        }
                    }
                    return (root, iter);
                }
            }
            let g = self.gap(mid);
            if g < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if g.abs() <= GAP_TOL && g >= 0.0 {
                return (mid, iter);
            }
        }
        (hi, MAX_BISECTION_ITERS)
    }

    /// Concrete alternative rows `(λ_candidate, λ_competitor)`.
    pub fn lambda_rows(&self, multiplier: Multiplier) -> (Vec<f64>, Vec<f64>) {
        let n = self.q.len();
        match multiplier {
            Multiplier::Kkt(eta) => (
                (0..n).map(|l| self.candidate_at(l, eta)).collect(),
                (0..n).map(|l| self.competitor_at(l, eta)).collect(),
            ),
            Multiplier::Free(free) => {
                let mut x = self.mu_candidate.to_vec();
                let mut y: Vec<f64> = (0..n).map(|l| self.competitor_at(l, 0.0)).collect();
                let shortfall: f64 = -(0..n).map(|l| self.q[l] * (y[l] - x[l])).sum::<f64>();
                if shortfall > 0.0 {
                    match free {
                        FreeCell::Candidate(l) => x[l] -= shortfall / self.q[l],
                        FreeCell::Competitor(l) => y[l] += shortfall / self.q[l],
                    }
                }
                (x, y)
            }
        }
    }
}

fn objective_of(p: &PairProblem<'_>, x: &[f64], y: &[f64]) -> f64 {
    let mut v = 0.0;
    for l in 0..x.len() {
        v += p.w_candidate[l] * (p.mu_candidate[l] - x[l]).powi(2);
    }
    for l in 0..y.len() {
        v += p.w_competitor[l] * (p.mu_competitor[l] - y[l]).powi(2);
    }
    v
}

/// Nearest alternative found by one best-response computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Alternative {
    /// `competitor` overtakes `candidate` in aggregate while staying feasible.
    Overtake {
        competitor: usize,
        candidate_row: Vec<f64>,
        competitor_row: Vec<f64>,
        /// `None` when a zero-weight cell absorbed the constraint.
        multiplier: Option<f64>,
    },
    /// The candidate is pushed onto the threshold of `subpop`.
    Infeasible { subpop: usize, level: f64 },
    /// Every arm infeasible: `arm` is lifted onto its thresholds, becoming feasible.
    Rescue { arm: usize, cells: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponse {
    pub candidate: Option<usize>,
    pub alternative: Alternative,
    /// Weighted squared distance `Σ w (μ − λ)²` to the alternative.
    pub value: f64,
}

/// Solves the pair QP and materializes the minimizing alternative.
pub fn inner_best_response(
    w: &Matrix,
    means: &Matrix,
    shape: &ProblemShape,
    candidate: usize,
    competitor: usize,
) -> BestResponse {
    assert_ne!(candidate, competitor, "competitor must differ from candidate");
    let problem = PairProblem::new(w, means, shape, candidate, competitor);
    let solution = problem.solve();
    let (candidate_row, competitor_row) = problem.lambda_rows(solution.multiplier);
    let value = objective_of(&problem, &candidate_row, &competitor_row);
    BestResponse {
        candidate: Some(candidate),
        alternative: Alternative::Overtake {
            competitor,
            candidate_row,
            competitor_row,
            multiplier: match solution.multiplier {
                Multiplier::Kkt(eta) => Some(eta),
                Multiplier::Free(_) => None,
            },
        },
        value,
    }
}
