//! Measurements shared by the integration and acceptance suites. Each function
//! returns the worst discrepancy it saw so callers can apply their own tolerance.
#![allow(dead_code)]

use fairbai::complexity::{evaluate, f_value, optimize_weights, project_simplex, t_star, OptimizerParams};
use fairbai::model::{replication_stream, sample_observation, StreamPurpose};
use fairbai::oracle::{f_bruteforce, random_valid_instance};
use fairbai::presets::example_instance;
use fairbai::stopping::glr_statistic;
use fairbai::strategies::{
    clipped_projection, exploration_epsilon, initialization_schedule, SamplingRule, TaScs, WeightUpdate,
};
use fairbai::{BanditInstance, EmpiricalState, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_simplex_point(rng: &mut impl Rng, n: usize) -> Matrix {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
    let total: f64 = raw.iter().sum();
    Matrix::new(1, n, raw.iter().map(|v| v / total).collect()).unwrap()
}

fn reshape(m: &Matrix, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, m.as_slice().to_vec()).unwrap()
}

/// Largest `α F(w₁) + (1−α) F(w₂) − F(α w₁ + (1−α) w₂)` over random triples.
pub fn concavity_violation(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let inst = random_valid_instance(&mut rng, 4, 3, 3, 0.0);
        let (k, l) = (inst.num_arms(), inst.num_subpops());
        let cand = inst.best_feasible_arm().unwrap();
        let w1 = reshape(&random_simplex_point(&mut rng, k * l), k, l);
        let w2 = reshape(&random_simplex_point(&mut rng, k * l), k, l);
        let a: f64 = rng.random();
        let mix = Matrix::new(
            k,
            l,
            w1.as_slice().iter().zip(w2.as_slice()).map(|(x, y)| a * x + (1.0 - a) * y).collect(),
        )
        .unwrap();
        let f = |w: &Matrix| f_value(w, inst.means(), inst.shape(), cand);
        worst = worst.max(a * f(&w1) + (1.0 - a) * f(&w2) - f(&mix));
    }
    worst
}

/// Largest `|F(w) − c·w|` and largest `|F(w) − F_oracle(w)|` at random points.
pub fn active_plane_error(seed: u64, trials: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut plane, mut oracle) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let inst = random_valid_instance(&mut rng, 4, 3, 3, 0.0);
        let (k, l) = (inst.num_arms(), inst.num_subpops());
        let cand = inst.best_feasible_arm().unwrap();
        let w = reshape(&random_simplex_point(&mut rng, k * l), k, l);
        let eval = evaluate(&w, inst.means(), inst.shape(), cand);
        plane = plane.max((eval.value - eval.subgradient.dot(&w)).abs());
        oracle = oracle.max((eval.value - f_bruteforce(&w, inst.means(), inst.shape(), cand)).abs());
    }
    (plane, oracle)
}

fn scaled(inst: &BanditInstance, c: f64) -> BanditInstance {
    BanditInstance::new(inst.means().map(|v| c * v), inst.q().to_vec(), inst.num_constrained()).unwrap()
}

/// Largest `|T*(cμ) c² / T*(μ) − 1|` over the two examples and a few random instances, `c ∈ {0.5, 2, 4}`.
pub fn scale_equivariance_error(seed: u64, random_cases: usize) -> f64 {
    let params = OptimizerParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = vec![example_instance(1).unwrap(), example_instance(2).unwrap()];
    instances.extend((0..random_cases).map(|_| random_valid_instance(&mut rng, 3, 2, 2, 0.05)));
    let mut worst = 0.0f64;
    for inst in &instances {
        let base = t_star(inst, &params).unwrap().t_star;
        for c in [0.5, 2.0, 4.0] {
            let t = t_star(&scaled(inst, c), &params).unwrap().t_star;
            worst = worst.max((t * c * c / base - 1.0).abs());
        }
    }
    worst
}

/// Outcome of the C-tracking checks over seeded T-a-SCS runs.
#[derive(Debug, Default)]
pub struct TrackingCheck {
    /// Rounds where some cell's `|N − n₀ − Σ w^ε|` exceeded `KL (1 + √t)`.
    pub bound_violations: usize,
    /// Largest observed ratio deviation / bound.
    pub worst_ratio: f64,
    /// Largest `|Σ cumulative − rounds|`.
    pub mass_error: f64,
    pub rounds_checked: usize,
}

/// Runs T-a-SCS on Example 1 for `runs` seeds, checking the tracking bound after every round.
pub fn tracking_check(runs: u64, rounds: usize) -> TrackingCheck {
    let instance = example_instance(1).unwrap();
    let (k, l) = (instance.num_arms(), instance.num_subpops());
    let kl = (k * l) as f64;
    let n0 = 1;
    let mut out = TrackingCheck::default();
    for seed in 0..runs {
        let mut obs = replication_stream(seed, 0, StreamPurpose::Observations);
        let mut coins = replication_stream(seed, 0, StreamPurpose::Strategy);
        let mut state = EmpiricalState::new(k, l);
        for (a, s) in initialization_schedule(k, l, n0) {
            state.update(a, s, sample_observation(&instance, a, s, &mut obs).unwrap());
        }
        let mut rule = TaScs::new(instance.shape().clone(), WeightUpdate::InLoop);
        for _ in 0..rounds {
            let (a, s) = rule.next_cell(&state, &mut coins).unwrap();
            state.update(a, s, sample_observation(&instance, a, s, &mut obs).unwrap());
            let t = rule.tracker().rounds() as f64;
            let cum = rule.tracker().cumulative();
            out.mass_error = out.mass_error.max((cum.iter().sum::<f64>() - t).abs());
            let dev = cum
                .iter()
                .zip(state.counts())
                .map(|(c, &n)| (n as f64 - n0 as f64 - c).abs())
                .fold(0.0, f64::max);
            let bound = kl * (1.0 + t.sqrt());
            out.worst_ratio = out.worst_ratio.max(dev / bound);
            if dev > bound {
                out.bound_violations += 1;
            }
            out.rounds_checked += 1;
        }
    }
    out
}

/// Largest postcondition error of the simplex and clipped projections on random inputs.
pub fn projection_error(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = rng.random_range(1..10);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = project_simplex(&v);
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        worst = worst.max(p.iter().map(|&x| (-x).max(0.0)).fold(0.0, f64::max));
        let again = project_simplex(&p);
        worst = worst.max(again.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));

        let t = rng.random_range(0..100_000u64);
        let eps = exploration_epsilon(n, t);
        let c = clipped_projection(&p, eps).unwrap();
        worst = worst.max((c.iter().sum::<f64>() - 1.0).abs());
        worst = worst.max(c.iter().map(|&x| (eps - x).max(0.0)).fold(0.0, f64::max));
    }
    worst
}

/// Counts states where `Z(t)` differs from `(t/2) F_μ̂(N/t)` (exact comparison), and
/// the largest gap between that value and the brute-force `F`.
pub fn glr_identity(seed: u64, trials: usize) -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mismatches, mut oracle_gap) = (0, 0.0f64);
    for _ in 0..trials {
        let inst = random_valid_instance(&mut rng, 3, 3, 3, 0.05);
        let (k, l) = (inst.num_arms(), inst.num_subpops());
        let mut state = EmpiricalState::new(k, l);
        for a in 0..k {
            for s in 0..l {
                for _ in 0..rng.random_range(1..20) {
                    let x = inst.means()[(a, s)] + rng.random_range(-0.3..0.3);
                    state.update(a, s, x);
                }
            }
        }
        let means = state.means().unwrap();
        let Some(cand) = fairbai::model::best_feasible_arm(&means, inst.shape()) else {
            continue;
        };
        let t = state.t() as f64;
        let expected = t * 0.5 * f_value(&state.weights(), &means, inst.shape(), cand);
        let z = glr_statistic(&state, inst.shape()).unwrap();
        if z != expected {
            mismatches += 1;
        }
        let brute = t * 0.5 * f_bruteforce(&state.weights(), &means, inst.shape(), cand);
        oracle_gap = oracle_gap.max((z - brute).abs() / brute.max(1.0));
    }
    (mismatches, oracle_gap)
}

/// `optimize_weights` value on random instances next to the brute-force `F` at the returned point.
pub fn optimizer_reports_true_value(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let inst = random_valid_instance(&mut rng, 3, 2, 2, 0.05);
        let cand = inst.best_feasible_arm().unwrap();
        let r = optimize_weights(inst.means(), inst.shape(), cand, &OptimizerParams::default()).unwrap();
        let brute = f_bruteforce(r.w_star.as_matrix(), inst.means(), inst.shape(), cand);
        worst = worst.max((r.f_value - brute).abs());
    }
    worst
}
