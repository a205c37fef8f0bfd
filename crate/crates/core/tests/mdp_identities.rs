mod common;

use proptest::prelude::*;
use rumdp::instance::{generate, GenConfig};
use rumdp::lp::{solve_lp, LinearProgram, Sense};
use rumdp::mdp::{value_of_occupancy, Mdp};

use common::policy_from_index;

fn instance(n: usize, m: usize, seed: u64) -> Mdp {
    generate(&GenConfig::new(n, m, 2, seed)).unwrap().mdp
}

fn random_reward(mdp: &Mdp, seed: u64) -> Vec<f64> {
    // cheap deterministic spread in [-1, 1]
    (0..mdp.n_pairs())
        .map(|i| ((seed as f64 + 1.0) * (i as f64 + 0.5) * 0.618_033_988_75).fract() * 2.0 - 1.0)
        .collect()
}

#[test]
fn evaluation_matches_iterated_bellman_operator() {
    let mdp = instance(5, 3, 7);
    let r = random_reward(&mdp, 3);
    let pi = policy_from_index(&mdp, 101);
    let v = mdp.evaluate_policy(&r, &pi).unwrap();
    let n = mdp.n_states();
    let mut it = vec![0.0; n];
    for _ in 0..10_000 {
        it = (0..n)
            .map(|s| {
                let pair = mdp.pair(s, pi.action(s));
                let row = mdp.transition_row(s, pi.action(s));
                r[pair] + mdp.gamma() * row.iter().zip(&it).map(|(p, x)| p * x).sum::<f64>()
            })
            .collect();
    }
    for (a, b) in v.iter().zip(&it) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn q_function_matches_dense_recomputation() {
    let mdp = instance(5, 3, 9);
    let r = random_reward(&mdp, 4);
    let v: Vec<f64> = (0..5).map(|s| s as f64 * 0.3 - 0.5).collect();
    let q = mdp.q_function(&r, &v).unwrap();
    let t = nalgebra::DMatrix::from_row_slice(mdp.n_pairs(), 5, mdp.transitions());
    let dense = nalgebra::DVector::from_column_slice(&r)
        + mdp.gamma() * (&t * nalgebra::DVector::from_column_slice(&v));
    for (a, b) in q.iter().zip(dense.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

/// max r^T f subject to sum_a f(s', a) - gamma sum T(s, a, s') f(s, a) = alpha(s'), f >= 0.
fn dual_lp(mdp: &Mdp, r: &[f64]) -> (Vec<f64>, f64) {
    let nm = mdp.n_pairs();
    let mut lp = LinearProgram::new(Sense::Maximize, r.to_vec());
    for j in 0..nm {
        lp.nonnegative(j);
    }
    for sp in 0..mdp.n_states() {
        let row = (0..nm)
            .map(|pair| {
                let s = pair / mdp.n_actions();
                let stay = if s == sp { 1.0 } else { 0.0 };
                stay - mdp.gamma() * mdp.transitions()[pair * mdp.n_states() + sp]
            })
            .collect();
        lp.equal(row, mdp.alpha()[sp]);
    }
    let out = solve_lp(&lp).unwrap();
    (out.solution.unwrap(), out.objective_value.unwrap())
}

#[test]
fn optimal_value_matches_dual_lp() {
    for seed in 0..10 {
        let mdp = instance(5, 3, 100 + seed);
        let r = random_reward(&mdp, seed);
        let (pi, v) = mdp.solve_optimal(&r).unwrap();
        let (f_lp, obj) = dual_lp(&mdp, &r);
        let av: f64 = mdp.alpha().iter().zip(v.iter()).map(|(a, x)| a * x).sum();
        assert!((av - obj).abs() < 1e-6, "{av} vs {obj}");
        let f = mdp.occupancy_of(&pi).unwrap();
        for (a, b) in f.iter().zip(&f_lp) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn occupancy_residual_on_random_instances() {
    for seed in 0..20 {
        let mdp = instance(6, 3, seed);
        let f = mdp.occupancy_of(&policy_from_index(&mdp, seed as usize * 37)).unwrap();
        assert!(mdp.occupancy_residual(&f) < 1e-8);
        let e = mdp.build_e_matrix().unwrap();
        let fv = nalgebra::DVector::from_column_slice(&f);
        let alpha = nalgebra::DVector::from_column_slice(mdp.alpha());
        let res = mdp.gamma() * e.transpose() * fv + alpha;
        assert!(res.amax() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_identity_and_validity(
        n in 2usize..7, m in 1usize..4, seed in 0u64..10_000, pidx in 0usize..100_000,
        r in proptest::collection::vec(-5.0f64..5.0, 18..19 * 3),
    ) {
        let mdp = instance(n, m, seed);
        let r = &r[..mdp.n_pairs()];
        let pi = policy_from_index(&mdp, pidx);
        let v = mdp.evaluate_policy(r, &pi).unwrap();
        let f = mdp.occupancy_of(&pi).unwrap();
        let av: f64 = mdp.alpha().iter().zip(v.iter()).map(|(a, x)| a * x).sum();
        prop_assert!((av - value_of_occupancy(r, &f).unwrap()).abs() < 1e-8);
        prop_assert!(f.iter().all(|x| *x >= -1e-9));
        prop_assert!(mdp.occupancy_residual(&f) < 1e-7);
        let mass: f64 = f.iter().sum();
        prop_assert!((mass - 1.0 / (1.0 - mdp.gamma())).abs() < 1e-6);
    }

    #[test]
    fn optimal_policy_properties(
        n in 2usize..7, m in 1usize..4, seed in 0u64..10_000,
        r in proptest::collection::vec(-5.0f64..5.0, 18..19 * 3),
        k in 0.01f64..100.0,
    ) {
        let mdp = instance(n, m, seed);
        let r = &r[..mdp.n_pairs()];
        let (pi, v) = mdp.solve_optimal(r).unwrap();
        let q = mdp.q_function(r, &v).unwrap();
        for s in 0..n {
            for a in 0..m {
                prop_assert!(q[s * m + a] - v[s] <= 1e-8);
            }
            prop_assert!((q[s * m + pi.action(s)] - v[s]).abs() < 1e-10);
        }
        let scaled: Vec<f64> = r.iter().map(|x| x * k).collect();
        prop_assert_eq!(mdp.solve_optimal(&scaled).unwrap().0, pi);
    }

    #[test]
    fn occupancy_round_trips_policy(n in 2usize..7, m in 1usize..4, seed in 0u64..10_000, pidx in 0usize..100_000) {
        let mdp = instance(n, m, seed);
        let pi = policy_from_index(&mdp, pidx);
        let f = mdp.occupancy_of(&pi).unwrap();
        let back = f.deterministic_policy(m);
        let mass = f.state_mass(m);
        for s in 0..n {
            if mass[s] > 1e-12 {
                prop_assert_eq!(back.action(s), pi.action(s));
            }
        }
    }
}
