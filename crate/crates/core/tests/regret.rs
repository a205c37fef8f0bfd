mod common;

use proptest::prelude::*;
use rumdp::enumerate::{brute_force_nondominated, enumerate_gt, NondominatedEntry, NondominatedSet, DEFAULT_MARGIN};
use rumdp::io::load_instance;
use rumdp::mdp::{DeterministicPolicy, Mdp};
use rumdp::regret::{
    evaluate_regret, max_regret, mix_occupancies, solve_icg_nd, solve_xu_mannor, Mixture, DEFAULT_TOL,
};
use rumdp::reward::{box_constraints, RewardPolytope};

use common::{fixture, small_corpus};

/// Largest `(Φw)^T (g - f)` over a grid on the bounding box and all of Γ.
fn grid_lower_bound(f: &[f64], set: &NondominatedSet, poly: &RewardPolytope, per_axis: usize) -> f64 {
    let (lo, hi) = poly.bounding_box();
    let d = poly.dim();
    let total = per_axis.pow(d as u32);
    let mut best = f64::NEG_INFINITY;
    for idx in 0..total {
        let mut k = idx;
        let w: Vec<f64> = (0..d)
            .map(|j| {
                let t = (k % per_axis) as f64 / (per_axis - 1) as f64;
                k /= per_axis;
                lo[j] + t * (hi[j] - lo[j])
            })
            .collect();
        if !poly.contains(&w, 0.0) {
            continue;
        }
        let r = poly.to_full_reward(&w).unwrap();
        let value_f: f64 = r.iter().zip(f).map(|(a, b)| a * b).sum();
        for e in set.entries() {
            let value_g: f64 = r.iter().zip(e.occupancy.iter()).map(|(a, b)| a * b).sum();
            best = best.max(value_g - value_f);
        }
    }
    best
}

#[test]
fn two_arm_box_fixture() {
    let mdp = Mdp::new(1, 2, vec![1.0, 1.0], vec![1.0], 0.9).unwrap();
    let (a, b) = box_constraints(2, 0.0, 1.0);
    let poly = RewardPolytope::with_identity_basis(2, a, b).unwrap();
    let set = enumerate_gt(&mdp, &poly).unwrap();
    assert_eq!(set.len(), 2);
    let pure = &set.get(&rumdp::enumerate::PolicyKey::new(vec![0])).unwrap().occupancy;
    let (pair, value) = max_regret(pure, &set, &poly).unwrap();
    assert!((value - 10.0).abs() < 1e-9);
    assert!((pair.r_w[0] - 0.0).abs() < 1e-9 && (pair.r_w[1] - 1.0).abs() < 1e-9);
    let xm = solve_xu_mannor(&poly, &set).unwrap();
    assert!((xm.regret - 5.0).abs() < 1e-6);
    let Mixture::Weights(c) = &xm.mixture else { panic!() };
    assert!(c.iter().all(|x| (x - 0.5).abs() < 1e-6));
}

#[test]
fn frozen_two_state_fixture() {
    // Values computed independently with numpy/scipy (HiGHS) on the fixture.
    let inst = load_instance(&fixture("two_state.json")).unwrap();
    let (mdp, poly) = (&inst.mdp, &inst.polytope);
    let (pi, v) = mdp.solve_optimal(&poly.to_full_reward(&[0.3, -0.2]).unwrap()).unwrap();
    assert_eq!(pi.actions(), &[0, 0]);
    assert!((v[0] - 2.38356164383562).abs() < 1e-12);
    assert!((v[1] - 2.04109589041096).abs() < 1e-12);
    let f = mdp.occupancy_of(&DeterministicPolicy::new(vec![1, 0])).unwrap();
    assert!((f[1] - 3.67647058823529).abs() < 1e-10);
    assert!((f[2] - 6.32352941176471).abs() < 1e-10);

    let gt = enumerate_gt(mdp, poly).unwrap();
    assert_eq!(gt.len(), 4);
    let xm = solve_xu_mannor(poly, &gt).unwrap();
    assert!((xm.regret - 10.2466914325517).abs() < 1e-6);
    let icg = solve_icg_nd(mdp, poly, &gt, DEFAULT_TOL).unwrap();
    assert!((icg.regret - 10.2466914325517).abs() < 1e-5);
}

#[test]
fn solvers_agree_on_small_corpus() {
    for inst in small_corpus(50) {
        let (mdp, poly) = (&inst.mdp, &inst.polytope);
        let set = brute_force_nondominated(mdp, poly, DEFAULT_MARGIN).unwrap();
        let xm = solve_xu_mannor(poly, &set).unwrap();
        let icg = solve_icg_nd(mdp, poly, &set, DEFAULT_TOL).unwrap();
        assert!((xm.regret - icg.regret).abs() < 1e-5, "{} vs {}", xm.regret, icg.regret);
        assert!((xm.evaluate(&set, poly).unwrap() - xm.regret).abs() < 1e-6);
        assert!((icg.evaluate(&set, poly).unwrap() - icg.regret).abs() < 1e-6);
        assert!(icg.regret >= -1e-8);
        if let Mixture::Weights(c) = &xm.mixture {
            assert!(c.iter().all(|x| *x >= 0.0));
            assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
        // grid lower bound <= regret <= uniform mixture's regret
        let grid = grid_lower_bound(&xm.occupancy, &set, poly, 21);
        assert!(grid <= xm.evaluate(&set, poly).unwrap() + 1e-9);
        let uniform = vec![1.0 / set.len() as f64; set.len()];
        let f_uniform = mix_occupancies(&uniform, &set).unwrap();
        assert!(xm.regret <= evaluate_regret(&f_uniform, &set, poly).unwrap() + 1e-6);
        assert!(grid_lower_bound(&f_uniform, &set, poly, 21) <= evaluate_regret(&f_uniform, &set, poly).unwrap() + 1e-9);
    }
}

#[test]
fn master_bound_never_decreases() {
    for inst in small_corpus(20) {
        let (mdp, poly) = (&inst.mdp, &inst.polytope);
        let set = enumerate_gt(mdp, poly).unwrap();
        let mut last = f64::NEG_INFINITY;
        for cap in 1..8 {
            let delta = match rumdp::regret::solve_icg_nd_capped(mdp, poly, &set, DEFAULT_TOL, cap) {
                Ok(s) => s.regret,
                Err(rumdp::Error::IterationCap { best }) => best.regret,
                Err(e) => panic!("{e}"),
            };
            assert!(delta >= last - 1e-9);
            last = delta;
        }
    }
}

#[test]
fn restricted_regret_is_a_lower_bound() {
    for inst in small_corpus(30) {
        let (mdp, poly) = (&inst.mdp, &inst.polytope);
        let full = enumerate_gt(mdp, poly).unwrap();
        for k in 1..full.len() {
            let sub = full.truncated(k);
            let sol = solve_xu_mannor(poly, &sub).unwrap();
            assert!(sol.regret <= sol.evaluate(&full, poly).unwrap() + 1e-7);
        }
    }
}

#[test]
fn singleton_and_self_regret() {
    let inst = &small_corpus(1)[0];
    let entry = NondominatedEntry::new(&inst.mdp, DeterministicPolicy::new(vec![0, 0]), vec![0.0]).unwrap();
    let set = NondominatedSet::from_entries([entry.clone()]);
    assert!(evaluate_regret(&entry.occupancy, &set, &inst.polytope).unwrap().abs() < 1e-12);
    let icg = solve_icg_nd(&inst.mdp, &inst.polytope, &set, DEFAULT_TOL).unwrap();
    assert!(icg.regret.abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn max_regret_dominates_grid(seed in 0u64..40, mix in proptest::collection::vec(0.0f64..1.0, 1..64)) {
        let inst = &small_corpus(40)[seed as usize];
        let set = enumerate_gt(&inst.mdp, &inst.polytope).unwrap();
        let mut c: Vec<f64> = (0..set.len()).map(|i| mix[i % mix.len()] + 1e-3).collect();
        let total: f64 = c.iter().sum();
        c.iter_mut().for_each(|x| *x /= total);
        let f = mix_occupancies(&c, &set).unwrap();
        let value = evaluate_regret(&f, &set, &inst.polytope).unwrap();
        prop_assert!(grid_lower_bound(&f, &set, &inst.polytope, 11) <= value + 1e-9);
    }
}
