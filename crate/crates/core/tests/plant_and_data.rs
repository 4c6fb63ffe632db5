use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use prefmpc_core::dataset::{build_pairs, build_pairs_excluding, generate_pool, GenConfig, WeightSampling};
use prefmpc_core::linalg::spectral_radius;
use prefmpc_core::linsys::{default_oscillating_masses, lqr_gain, rollout_lqr, solve_dare, dare_residual};
use prefmpc_core::oracle::{pref_input, pref_settling};
use prefmpc_core::rng;
use prefmpc_core::trajectory::{quad_cost, settling_time};
use prefmpc_core::{Preference, PreferenceOracle};
use proptest::prelude::*;

#[test]
fn scalar_riccati_is_the_golden_ratio() {
    let one = DMatrix::from_element(1, 1, 1.0);
    let p = solve_dare(&one, &one, &one, &one).unwrap();
    assert!((p[(0, 0)] - (1.0 + 5f64.sqrt()) / 2.0).abs() <= 1e-9);
}

#[test]
fn lqr_stabilizes_the_masses_for_random_weights() {
    let sys = default_oscillating_masses();
    for k in 0..50 {
        let mut r = rng::stream(31, 0, k);
        let (q, rr) = WeightSampling::predominantly_diagonal().sample(&mut r, 6, 2).unwrap();
        let p = solve_dare(sys.a(), sys.b(), &q, &rr).unwrap();
        assert!(dare_residual(sys.a(), sys.b(), &q, &rr, &p) <= 1e-9);
        let gain = lqr_gain(sys.a(), sys.b(), &q, &rr).unwrap();
        let rho = spectral_radius(&(sys.a() - sys.b() * gain));
        assert!(rho < 1.0, "draw {k}: spectral radius {rho}");
    }
}

#[test]
fn rollout_cost_matches_the_recursion() {
    let sys = default_oscillating_masses();
    let q = DMatrix::identity(6, 6);
    let rr = DMatrix::identity(2, 2) * 0.5;
    let gain = lqr_gain(sys.a(), sys.b(), &q, &rr).unwrap();
    let x0 = DVector::from_vec(vec![1.0, -0.5, 0.2, 0.0, 0.3, -0.1]);
    let traj = rollout_lqr(&sys, &gain, &x0, 10).unwrap();
    let mut x = x0.clone();
    let mut cost = 0.0;
    for _ in 0..10 {
        let u = -(&gain * &x);
        cost += (x.transpose() * &q * &x)[0] + (u.transpose() * &rr * &u)[0];
        x = sys.a() * &x + sys.b() * &u;
    }
    let got = quad_cost(&traj, &q, &rr).unwrap();
    assert!((got - cost).abs() <= 1e-12 * cost);
}

#[test]
fn pools_are_reproducible() {
    let sys = default_oscillating_masses();
    let mut cfg = GenConfig::quadratic(5);
    cfg.n_t = 6;
    let a = generate_pool(&sys, &cfg).unwrap();
    let b = generate_pool(&sys, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 6);
    assert_eq!(a.horizon(), 10);
    cfg.seed = 6;
    assert_ne!(generate_pool(&sys, &cfg).unwrap(), a);
}

#[test]
fn zero_pairs_give_an_empty_dataset() {
    let sys = default_oscillating_masses();
    let mut cfg = GenConfig::quadratic(0);
    cfg.n_t = 4;
    let pool = Arc::new(generate_pool(&sys, &cfg).unwrap());
    let mut r = rng::stream(0, 2, 0);
    let oracle = PreferenceOracle::Settling { eps: 0.1 };
    let d = build_pairs(&pool, 0, &oracle, &mut r, false).unwrap();
    assert!(d.is_empty());
    assert!(build_pairs(&pool, 13, &oracle, &mut r, false).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampled_pairs_are_distinct_and_labeled(seed in any::<u64>(), n_d in 0usize..30, excluded in 0usize..20) {
        let sys = default_oscillating_masses();
        let mut cfg = GenConfig::settling(seed);
        cfg.n_t = 8;
        let pool = Arc::new(generate_pool(&sys, &cfg).unwrap());
        let oracle = PreferenceOracle::Settling { eps: 0.1 };
        let mut r = rng::stream(seed, 3, 0);
        let held = build_pairs(&pool, excluded, &oracle, &mut r, false).unwrap();
        let d = build_pairs_excluding(&pool, n_d, &oracle, &mut r, false, held.pairs()).unwrap();
        prop_assert_eq!(d.len(), n_d);
        let mut seen = std::collections::BTreeSet::new();
        for p in d.pairs() {
            prop_assert!(p.i != p.j);
            prop_assert!(seen.insert((p.i, p.j)));
            prop_assert!(!held.pairs().iter().any(|h| (h.i, h.j) == (p.i, p.j)));
            let (a, b) = d.trajectories(p);
            prop_assert_eq!(p.p, pref_settling(a, b, 0.1).unwrap());
        }
    }

    #[test]
    fn dropping_ties_leaves_no_tied_pairs(seed in any::<u64>()) {
        let sys = default_oscillating_masses();
        let mut cfg = GenConfig::settling(seed);
        cfg.n_t = 10;
        let pool = Arc::new(generate_pool(&sys, &cfg).unwrap());
        let oracle = PreferenceOracle::Settling { eps: 0.1 };
        let kappa: Vec<usize> = pool.trajectories().iter().map(|t| settling_time(t, 0.1).index).collect();
        let untied = (0..10).flat_map(|i| (0..10).map(move |j| (i, j))).filter(|&(i, j)| i != j && kappa[i] != kappa[j]).count();
        let mut r = rng::stream(seed, 4, 0);
        let d = build_pairs(&pool, untied, &oracle, &mut r, true).unwrap();
        for p in d.pairs() {
            prop_assert_ne!(kappa[p.i], kappa[p.j]);
        }
        prop_assert!(build_pairs(&pool, untied + 1, &oracle, &mut r, true).is_err());
    }

    #[test]
    fn settling_oracle_is_antisymmetric_off_ties(seed in any::<u64>()) {
        let sys = default_oscillating_masses();
        let mut cfg = GenConfig::settling(seed);
        cfg.n_t = 6;
        let pool = generate_pool(&sys, &cfg).unwrap();
        let t = pool.trajectories();
        for i in 0..t.len() {
            for j in 0..t.len() {
                if i == j {
                    continue;
                }
                let forward = pref_settling(&t[i], &t[j], 0.1).unwrap();
                let backward = pref_settling(&t[j], &t[i], 0.1).unwrap();
                let tied = settling_time(&t[i], 0.1) == settling_time(&t[j], 0.1)
                    && pref_input(&t[i], &t[j]) == pref_input(&t[j], &t[i]);
                if !tied {
                    prop_assert_ne!(forward, backward);
                } else {
                    prop_assert_eq!(forward, Preference::First);
                }
            }
        }
    }
}
