//! Structural properties of the max-min objective, the projections, C-tracking
//! and the stopping statistic.

mod common;

use fairbai::complexity::{evaluate, f_value, t_star, OptimizerParams};
use fairbai::oracle::random_valid_instance;
use fairbai::presets::example_instance;
use fairbai::strategies::{clipped_projection, Tracker};
use fairbai::{BanditInstance, Matrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn objective_is_concave() {
    let worst = common::concavity_violation(11, 2000);
    assert!(worst <= 1e-9, "concavity violated by {worst}");
}

#[test]
fn objective_equals_its_active_plane() {
    let (plane, oracle) = common::active_plane_error(12, 2000);
    assert!(plane <= 1e-12, "F − c·w = {plane}");
    assert!(oracle <= 1e-9, "F differs from brute force by {oracle}");
}

#[test]
fn characteristic_time_scales_quadratically() {
    let worst = common::scale_equivariance_error(13, 5);
    assert!(worst <= 0.01, "relative error {worst}");
}

#[test]
fn characteristic_time_is_label_invariant() {
    let inst = example_instance(2).unwrap();
    let params = OptimizerParams::default();
    let base = t_star(&inst, &params).unwrap();
    let perm = [3, 0, 2, 1];
    let permuted = t_star(&inst.permute_arms(&perm), &params).unwrap();
    assert!((permuted.t_star / base.t_star - 1.0).abs() < 0.01);
}

#[test]
fn tracking_stays_within_bound() {
    let check = common::tracking_check(20, 3000);
    assert_eq!(check.rounds_checked, 60_000);
    assert_eq!(check.bound_violations, 0, "worst ratio {}", check.worst_ratio);
    assert!(check.mass_error < 1e-8, "tracker mass drift {}", check.mass_error);
}

#[test]
fn projections_meet_postconditions() {
    let worst = common::projection_error(14, 5000);
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn glr_statistic_is_half_t_times_objective() {
    let (mismatches, gap) = common::glr_identity(15, 300);
    assert_eq!(mismatches, 0);
    assert!(gap < 1e-9, "{gap}");
}

#[test]
fn optimizer_value_is_the_objective_at_its_point() {
    assert!(common::optimizer_reports_true_value(16, 30) < 1e-9);
}

#[test]
fn objective_is_positive_on_valid_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let inst = random_valid_instance(&mut rng, 4, 3, 3, 0.01);
        let (k, l) = (inst.num_arms(), inst.num_subpops());
        let w = Matrix::filled(k, l, 1.0 / (k * l) as f64);
        let cand = inst.best_feasible_arm().unwrap();
        assert!(f_value(&w, inst.means(), inst.shape(), cand) > 0.0);
    }
}

fn instance_strategy() -> impl Strategy<Value = BanditInstance> {
    (2usize..=4, 1usize..=3)
        .prop_flat_map(|(k, l)| {
            (
                Just(k),
                Just(l),
                prop::collection::vec(-1.0f64..2.0, k * l),
                prop::collection::vec(0.1f64..1.0, l),
                0..=l,
            )
        })
        .prop_filter_map("needs a unique best feasible arm", |(k, l, mu, q, m)| {
            let total: f64 = q.iter().sum();
            let mut q: Vec<f64> = q.iter().map(|v| v / total).collect();
            q[l - 1] = 1.0 - q[..l - 1].iter().sum::<f64>();
            let inst = BanditInstance::new(Matrix::new(k, l, mu).ok()?, q, m).ok()?;
            inst.best_feasible_arm().map(|_| inst)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn supergradient_bounds_objective_from_above(inst in instance_strategy(),
                                                 a in prop::collection::vec(0.01f64..1.0, 12),
                                                 b in prop::collection::vec(0.01f64..1.0, 12)) {
        let (k, l) = (inst.num_arms(), inst.num_subpops());
        let n = k * l;
        let norm = |v: &[f64]| {
            let s: f64 = v[..n].iter().sum();
            Matrix::new(k, l, v[..n].iter().map(|x| x / s).collect()).unwrap()
        };
        let (w, v) = (norm(&a), norm(&b));
        let cand = inst.best_feasible_arm().unwrap();
        let eval = evaluate(&w, inst.means(), inst.shape(), cand);
        // Concavity: F(v) ≤ F(w) + c·(v − w) = c·v.
        let fv = f_value(&v, inst.means(), inst.shape(), cand);
        prop_assert!(fv <= eval.subgradient.dot(&v) + 1e-9);
        prop_assert!(eval.value >= 0.0);
    }

    #[test]
    fn clipped_projection_keeps_order_and_floor(v in prop::collection::vec(0.0f64..1.0, 2..10), t in 0u64..10_000) {
        let s: f64 = v.iter().sum();
        prop_assume!(s > 0.0);
        let w: Vec<f64> = v.iter().map(|x| x / s).collect();
        let eps = fairbai::strategies::exploration_epsilon(w.len(), t);
        let c = clipped_projection(&w, eps).unwrap();
        prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..w.len() {
            prop_assert!(c[i] >= eps - 1e-15);
            for j in 0..w.len() {
                if w[i] <= w[j] {
                    prop_assert!(c[i] <= c[j] + 1e-15);
                }
            }
        }
    }

    #[test]
    fn tracker_mass_is_number_of_rounds(rounds in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 1..50)) {
        let mut tracker = Tracker::new(5);
        for r in &rounds {
            let s: f64 = r.iter().sum::<f64>() + 1e-9;
            let w: Vec<f64> = r.iter().map(|x| (x + 1e-9 / 5.0) / s).collect();
            tracker.add(&w);
        }
        prop_assert_eq!(tracker.rounds(), rounds.len() as u64);
        prop_assert!((tracker.cumulative().iter().sum::<f64>() - rounds.len() as f64).abs() < 1e-9);
    }
}
