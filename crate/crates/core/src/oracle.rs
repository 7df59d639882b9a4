//! Brute-force reference solvers used to cross-check the fast paths.
//!
//! The oracles never call into `complexity` or `strategies`: the pair QP is solved by
//! enumerating active sets, `F` is assembled from those values, and every
//! max-min problem is maximized by a simplex grid followed by zoomed local
//! grids. [`run_checks`] compares both sides on random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::complexity::{infeasible_case_weights, optimize_weights, OptimizerParams, PairProblem};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::model::{BanditInstance, ProblemShape, Validity};

const FEAS_TOL: f64 = 1e-12;

/// Minimum of the pair QP
///
/// ```text
/// min  Σ w_a (μ_a − x)² + Σ w_b (μ_b − y)²
/// s.t. Σ q y ≥ Σ q x,   y_l ≥ b_l for l < M
/// ```
///
/// by enumerating which threshold constraints and whether the aggregate
/// constraint are tight. Each choice fixes an affine face whose minimizer has a
/// closed form; the smallest objective among the feasible face minimizers is
/// the optimum. A zero-weight cell with `q > 0` makes the aggregate constraint
/// free, leaving only the threshold clipping of the competitor row.
pub fn pair_qp_value(
    w_a: &[f64],
    w_b: &[f64],
    mu_a: &[f64],
    mu_b: &[f64],
    q: &[f64],
    thresholds: &[f64],
) -> f64 {
    let l = q.len();
    let m = thresholds.len();
    let clip_cost: f64 = (0..m)
        .filter(|&j| mu_b[j] < thresholds[j])
        .map(|j| w_b[j] * (mu_b[j] - thresholds[j]).powi(2))
        .sum();
    if (0..l).any(|j| q[j] > 0.0 && (w_a[j] == 0.0 || w_b[j] == 0.0)) {
        return clip_cost;
    }
    let s_a: Vec<f64> = (0..l).map(|j| if q[j] > 0.0 { q[j] / (2.0 * w_a[j]) } else { 0.0 }).collect();
    let s_b: Vec<f64> = (0..l).map(|j| if q[j] > 0.0 { q[j] / (2.0 * w_b[j]) } else { 0.0 }).collect();

    let mut best = f64::INFINITY;
    let mut x = vec![0.0; l];
    let mut y = vec![0.0; l];
    for clipped in 0u32..(1 << m) {
        let is_clipped = |j: usize| j < m && clipped & (1 << j) != 0;
        for aggregate_tight in [false, true] {
            let eta = if aggregate_tight {
                let mut g0 = 0.0;
                let mut slope = 0.0;
                for j in 0..l {
                    g0 -= q[j] * mu_a[j];
                    slope += q[j] * s_a[j];
                    if is_clipped(j) {
                        g0 += q[j] * thresholds[j];
                    } else {
                        g0 += q[j] * mu_b[j];
                        slope += q[j] * s_b[j];
                    }
                }
                if slope <= 0.0 {
                    continue;
                }
                -g0 / slope
            } else {
                0.0
            };
            for j in 0..l {
                x[j] = mu_a[j] - eta * s_a[j];
                y[j] = if is_clipped(j) { thresholds[j] } else { mu_b[j] + eta * s_b[j] };
            }
            let gap: f64 = (0..l).map(|j| q[j] * (y[j] - x[j])).sum();
            let feasible = gap >= -FEAS_TOL && (0..m).all(|j| y[j] >= thresholds[j] - FEAS_TOL);
            if !feasible {
                continue;
            }
            let value: f64 = (0..l)
                .map(|j| w_a[j] * (mu_a[j] - x[j]).powi(2) + w_b[j] * (mu_b[j] - y[j]).powi(2))
                .sum();
            best = best.min(value);
        }
    }
    best
}

/// `F_μ(w)` from its definition: cheapest threshold push of the candidate, or
/// cheapest overtaking by any competitor.
pub fn f_bruteforce(w: &Matrix, means: &Matrix, shape: &ProblemShape, candidate: usize) -> f64 {
    let thresholds = &shape.thresholds[..shape.num_constrained];
    let mut value = f64::INFINITY;
    for (j, &b) in thresholds.iter().enumerate() {
        value = value.min(w[(candidate, j)] * (means[(candidate, j)] - b).powi(2));
    }
    for k in (0..means.rows()).filter(|&k| k != candidate) {
        let v = pair_qp_value(
            w.row(candidate),
            w.row(k),
            means.row(candidate),
            means.row(k),
            &shape.q,
            thresholds,
        );
        value = value.min(v);
    }
    value
}

/// Cheapest way to make some arm feasible when none is: `min_k Σ_{violated l} w (μ − b)²`.
pub fn rescue_bruteforce(w: &Matrix, means: &Matrix, shape: &ProblemShape) -> f64 {
    (0..means.rows())
        .map(|k| {
            (0..shape.num_constrained)
                .map(|j| {
                    let d = means[(k, j)] - shape.thresholds[j];
                    if d < 0.0 {
                        w[(k, j)] * d * d
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Grid resolution of [`maximize_on_simplex`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    /// Coarse grid step is `1 / coarse_divisions`.
    pub coarse_divisions: usize,
    /// Number of best coarse points that get refined.
    pub starts: usize,
    /// Local grids span `±radius` steps per free coordinate.
    pub radius: i64,
    /// Refinement stops once the step falls below this.
    pub min_step: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            coarse_divisions: 20,
            starts: 2,
            radius: 2,
            min_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptimum {
    pub point: Vec<f64>,
    pub value: f64,
}

fn compositions(total: usize, parts: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(rest: usize, idx: usize, buf: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if idx + 1 == buf.len() {
            buf[idx] = rest;
            visit(buf);
            return;
        }
        for v in 0..=rest {
            buf[idx] = v;
            rec(rest - v, idx + 1, buf, visit);
        }
    }
    let mut buf = vec![0; parts];
    rec(total, 0, &mut buf, visit);
}

/// Maximizes `f` over the probability simplex of dimension `n`: full grid at the
/// coarse step, then local grids around the best points with the step halved
/// until `min_step`. At each step the local grid is re-centred until it stops improving.
pub fn maximize_on_simplex(n: usize, grid: &GridParams, mut f: impl FnMut(&[f64]) -> f64) -> SimplexOptimum {
    assert!(n >= 1 && grid.coarse_divisions >= 1 && grid.starts >= 1);
    if n == 1 {
        let value = f(&[1.0]);
        return SimplexOptimum { point: vec![1.0], value };
    }
    let h = 1.0 / grid.coarse_divisions as f64;
    let mut coarse: Vec<(f64, Vec<f64>)> = Vec::with_capacity(grid.starts + 1);
    let mut p = vec![0.0; n];
    compositions(grid.coarse_divisions, n, &mut |c| {
        for (x, &v) in p.iter_mut().zip(c) {
            *x = v as f64 * h;
        }
        let v = f(&p);
        if coarse.len() < grid.starts || v > coarse[coarse.len() - 1].0 {
            let at = coarse.partition_point(|(b, _)| *b >= v);
            coarse.insert(at, (v, p.clone()));
            coarse.truncate(grid.starts);
        }
    });

    let side = (2 * grid.radius + 1) as usize;
    let free = n - 1;
    let box_size = side.pow(free as u32);
    let mut best = SimplexOptimum {
        point: coarse[0].1.clone(),
        value: coarse[0].0,
    };
    let mut trial = vec![0.0; n];
    for (value, point) in coarse {
        let mut center = point;
        let mut center_value = value;
        let mut step = h / 2.0;
        while step >= grid.min_step {
            for _ in 0..50 {
                let mut improved = false;
                let mut next = (center_value, center.clone());
                for idx in 0..box_size {
                    let mut rem = idx;
                    let mut shift_sum = 0.0;
                    for j in 0..free {
                        let off = (rem % side) as i64 - grid.radius;
                        rem /= side;
                        trial[j] = center[j] + off as f64 * step;
                        shift_sum += off as f64 * step;
                    }
                    trial[free] = center[free] - shift_sum;
                    if trial.iter().any(|&v| v < -1e-15) {
                        continue;
                    }
                    for v in trial.iter_mut() {
                        *v = v.max(0.0);
                    }
                    let v = f(&trial);
                    if v > next.0 {
                        next = (v, trial.clone());
                        improved = true;
                    }
                }
                center_value = next.0;
                center = next.1;
                if !improved {
                    break;
                }
            }
            step /= 2.0;
        }
        if center_value > best.value {
            best = SimplexOptimum {
                point: center,
                value: center_value,
            };
        }
    }
    best
}

/// `max_w F_μ(w)` over the whole `K×L` simplex by grid search.
pub fn optimum_oracle(means: &Matrix, shape: &ProblemShape, candidate: usize, grid: &GridParams) -> SimplexOptimum {
    let (k, l) = (means.rows(), means.cols());
    let mut w = Matrix::zeros(k, l);
    maximize_on_simplex(k * l, grid, |p| {
        w.as_mut_slice().copy_from_slice(p);
        f_bruteforce(&w, means, shape, candidate)
    })
}

/// `max_w min_k Σ_{violated l} w (μ − b)²` for an instance with no feasible arm.
///
/// The objective of arm `k` only involves row `k`, so the simplex is searched as
/// a product: a budget per arm (grid over the `K`-simplex) times a split of each
/// budget across the arm's cells (grid over the `L`-simplex, which is linear and
/// therefore solved once per arm).
pub fn infeasible_oracle(means: &Matrix, shape: &ProblemShape) -> SimplexOptimum {
    let (k, l) = (means.rows(), means.cols());
    let grid = GridParams {
        coarse_divisions: 100,
        starts: 3,
        radius: 2,
        min_step: 1e-7,
    };
    let mut splits = Vec::with_capacity(k);
    let mut rates = Vec::with_capacity(k);
    for arm in 0..k {
        let violation: Vec<f64> = (0..l)
            .map(|j| {
                if j < shape.num_constrained && means[(arm, j)] < shape.thresholds[j] {
                    (means[(arm, j)] - shape.thresholds[j]).powi(2)
                } else {
                    0.0
                }
            })
            .collect();
        let best = maximize_on_simplex(l, &grid, |s| s.iter().zip(&violation).map(|(a, b)| a * b).sum());
        rates.push(best.value);
        splits.push(best.point);
    }
    let budgets = maximize_on_simplex(k, &grid, |b| b.iter().zip(&rates).map(|(x, r)| x * r).fold(f64::INFINITY, f64::min));
    let mut point = Vec::with_capacity(k * l);
    for (b, split) in budgets.point.iter().zip(&splits) {
        point.extend(split.iter().map(|s| b * s));
    }
    SimplexOptimum {
        point,
        value: budgets.value,
    }
}

/// Unconstrained Gaussian best-arm problem: `max_w min_{a≠best} Δ_a² w_best w_a / (w_best + w_a)`.
pub fn bai_oracle(arm_means: &[f64], grid: &GridParams) -> SimplexOptimum {
    let best = (0..arm_means.len())
        .max_by(|&a, &b| arm_means[a].total_cmp(&arm_means[b]).then(b.cmp(&a)))
        .expect("at least one arm");
    maximize_on_simplex(arm_means.len(), grid, |w| {
        (0..arm_means.len())
            .filter(|&a| a != best)
            .map(|a| {
                let s = w[best] + w[a];
                if s == 0.0 {
                    0.0
                } else {
                    (arm_means[best] - arm_means[a]).powi(2) * w[best] * w[a] / s
                }
            })
            .fold(f64::INFINITY, f64::min)
    })
}

fn random_q(rng: &mut impl Rng, l: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..l).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut q: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = q[..l - 1].iter().sum();
    q[l - 1] = 1.0 - head;
    q
}

/// One random pair QP: two rows of positive weights (or with zero cells when
/// `zero_cells` is set), means, weights `q` and `M` thresholds.
#[derive(Debug, Clone)]
pub struct PairCase {
    pub w: Matrix,
    pub means: Matrix,
    pub shape: ProblemShape,
}

impl PairCase {
    pub fn random(rng: &mut impl Rng, max_subpops: usize, zero_cells: bool) -> Self {
        let l = rng.random_range(1..=max_subpops);
        let m = rng.random_range(0..=l);
        let mut w: Vec<f64> = (0..2 * l).map(|_| rng.random_range(0.01..1.0)).collect();
        if zero_cells {
            let cell = rng.random_range(0..2 * l);
            w[cell] = 0.0;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        let means: Vec<f64> = (0..2 * l).map(|_| rng.random_range(-2.0..2.0)).collect();
        let thresholds = (0..m).map(|_| rng.random_range(-0.5..0.5)).collect();
        Self {
            w: Matrix::new(2, l, w).expect("2×L"),
            means: Matrix::new(2, l, means).expect("2×L"),
            shape: ProblemShape {
                num_arms: 2,
                q: random_q(rng, l),
                num_constrained: m,
                thresholds,
                noise_sd: 1.0,
            },
        }
    }

    pub fn oracle_value(&self) -> f64 {
        pair_qp_value(
            self.w.row(0),
            self.w.row(1),
            self.means.row(0),
            self.means.row(1),
            &self.shape.q,
            &self.shape.thresholds,
        )
    }

    /// Threshold clipping of the competitor row alone.
    pub fn clipping_cost(&self) -> f64 {
        (0..self.shape.num_constrained)
            .filter(|&j| self.means[(1, j)] < self.shape.thresholds[j])
            .map(|j| self.w[(1, j)] * (self.means[(1, j)] - self.shape.thresholds[j]).powi(2))
            .sum()
    }

    pub fn solver_value(&self) -> f64 {
        PairProblem::new(&self.w, &self.means, &self.shape, 0, 1).solve().value
    }
}

/// Random instance with a unique best feasible arm that clears its thresholds and
/// every feasible rival by at least `margin`.
pub fn random_valid_instance(
    rng: &mut impl Rng,
    max_arms: usize,
    max_subpops: usize,
    max_constrained: usize,
    margin: f64,
) -> BanditInstance {
    loop {
        let k = rng.random_range(2..=max_arms);
        let l = rng.random_range(1..=max_subpops);
        let m = rng.random_range(0..=max_constrained.min(l));
        let means: Vec<f64> = (0..k * l).map(|_| rng.random_range(-1.0..2.0)).collect();
        let means = Matrix::new(k, l, means).expect("K×L");
        let inst = BanditInstance::new(means, random_q(rng, l), m).expect("well-formed");
        let Validity::BestFeasible { arm } = inst.validate() else {
            continue;
        };
        let mu = inst.means();
        let agg = inst.aggregate_means();
        let clears_thresholds = (0..m).all(|j| mu[(arm, j)] >= margin);
        let clears_rivals = inst
            .feasible_set()
            .into_iter()
            .filter(|&a| a != arm)
            .all(|a| agg[arm] - agg[a] >= margin);
        if clears_thresholds && clears_rivals {
            return inst;
        }
    }
}

/// Random instance in which every arm violates at least one constraint by at least `margin`.
pub fn random_infeasible_instance(
    rng: &mut impl Rng,
    max_arms: usize,
    max_subpops: usize,
    margin: f64,
) -> BanditInstance {
    let k = rng.random_range(1..=max_arms);
    let l = rng.random_range(1..=max_subpops);
    let m = rng.random_range(1..=l);
    let mut means: Vec<f64> = (0..k * l).map(|_| rng.random_range(-2.0..1.0)).collect();
    for arm in 0..k {
        let j = rng.random_range(0..m);
        means[arm * l + j] = rng.random_range(-2.0..-margin);
    }
    let means = Matrix::new(k, l, means).expect("K×L");
    BanditInstance::new(means, random_q(rng, l), m).expect("well-formed")
}

/// Worst discrepancies found by [`run_checks`].
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub cases: usize,
    /// Largest `|solver − oracle|` over random pair QPs with positive weights.
    pub max_inner_abs_error: f64,
    /// Zero-weight pair QPs whose solver value differs from the clipping cost.
    pub zero_weight_mismatches: usize,
    /// Largest `|T* − T*_oracle| / T*_oracle` over random instances with a feasible arm.
    pub max_t_star_rel_error: f64,
    /// Same for random instances with no feasible arm.
    pub max_infeasible_rel_error: f64,
}

impl OracleReport {
    pub const INNER_TOL: f64 = 1e-6;
    pub const T_STAR_TOL: f64 = 0.05;
    pub const INFEASIBLE_TOL: f64 = 0.01;

    pub fn passes(&self) -> bool {
        self.max_inner_abs_error <= Self::INNER_TOL
            && self.zero_weight_mismatches == 0
            && self.max_t_star_rel_error <= Self::T_STAR_TOL
            && self.max_infeasible_rel_error <= Self::INFEASIBLE_TOL
    }
}

/// Randomized comparison of the fast solvers against the oracles in this module.
///
/// Runs `cases` instances of each kind: pair QPs (positive weights, L ≤ 3), pair
/// QPs with a zero-weight cell, optimizer instances (K ≤ 3, L ≤ 2, M ≤ 2) and
/// all-infeasible instances (K ≤ 4, L ≤ 2).
pub fn run_checks(seed: u64, cases: usize) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        seed,
        cases,
        max_inner_abs_error: 0.0,
        zero_weight_mismatches: 0,
        max_t_star_rel_error: 0.0,
        max_infeasible_rel_error: 0.0,
    };
    for _ in 0..cases {
        let case = PairCase::random(&mut rng, 3, false);
        let err = (case.solver_value() - case.oracle_value()).abs();
        report.max_inner_abs_error = report.max_inner_abs_error.max(err);

        let zero = PairCase::random(&mut rng, 3, true);
        if zero.solver_value() != zero.clipping_cost() {
            report.zero_weight_mismatches += 1;
        }
    }
    let params = OptimizerParams::default();
    let grid = GridParams::default();
    for _ in 0..cases {
        let inst = random_valid_instance(&mut rng, 3, 2, 2, 0.05);
        let arm = inst.best_feasible_arm().expect("valid instance");
        let fast = optimize_weights(inst.means(), inst.shape(), arm, &params)?;
        let oracle = optimum_oracle(inst.means(), inst.shape(), arm, &grid);
        let oracle_t = 2.0 / oracle.value;
        report.max_t_star_rel_error = report.max_t_star_rel_error.max((fast.t_star - oracle_t).abs() / oracle_t);
    }
    for _ in 0..cases {
        let inst = random_infeasible_instance(&mut rng, 4, 2, 0.05);
        let fast = infeasible_case_weights(inst.means(), inst.shape())?;
        let oracle = infeasible_oracle(inst.means(), inst.shape());
        let err = (2.0 * fast.inverse_t_star - oracle.value).abs() / oracle.value;
        report.max_infeasible_rel_error = report.max_infeasible_rel_error.max(err);
    }
    Ok(report)
}
