mod common;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rumdp::geometry::{adjacent_reward, default_delta, line_exit_points, reward_opt_region, OptRegion};
use rumdp::instance::{generate, GenConfig, RumdpInstance};
use rumdp::mdp::Mdp;
use rumdp::reward::{box_constraints, RewardPolytope};

fn sample_in_region<R: Rng>(inst: &RumdpInstance, region: &OptRegion, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = inst.polytope.bounding_box();
    let mut out = Vec::new();
    for _ in 0..200_000 {
        if out.len() == count {
            break;
        }
        let w: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| rng.random_range(*l..*h)).collect();
        if inst.polytope.contains(&w, 0.0) && region.contains(&w, 0.0) {
            out.push(w);
        }
    }
    out
}

fn alpha_value(mdp: &Mdp, r: &[f64], pi: &rumdp::mdp::DeterministicPolicy) -> f64 {
    let v = mdp.evaluate_policy(r, pi).unwrap();
    mdp.alpha().iter().zip(v.iter()).map(|(a, x)| a * x).sum()
}

#[test]
fn identity_basis_region_resolves_to_its_policy() {
    let base = generate(&GenConfig::new(2, 2, 2, 5)).unwrap();
    let (a, b) = box_constraints(4, -1.0, 1.0);
    let inst = RumdpInstance {
        polytope: RewardPolytope::with_identity_basis(4, a, b).unwrap(),
        mdp: base.mdp,
        meta: None,
    };
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
    let w = vec![0.4, -0.3, 0.1, 0.7];
    let (pi, _) = inst.mdp.solve_optimal(&w).unwrap();
    let region = reward_opt_region(&inst.mdp, &inst.polytope, &w, &pi).unwrap();
    let points = sample_in_region(&inst, &region, &mut rng, 100);
    assert_eq!(points.len(), 100);
    for p in points {
        assert_eq!(inst.mdp.solve_optimal(&p).unwrap().0, pi);
    }
}

#[test]
fn hyperplanes_reproduce_bellman_slack() {
    for seed in 0..10 {
        let inst = generate(&GenConfig::new(4, 3, 3, seed)).unwrap();
        let w = inst.polytope.chebyshev_center().0.iter().map(|c| c + 0.3).collect::<Vec<_>>();
        let r = inst.polytope.to_full_reward(&w).unwrap();
        let (pi, v) = inst.mdp.solve_optimal(&r).unwrap();
        let q = inst.mdp.q_function(&r, &v).unwrap();
        let region = reward_opt_region(&inst.mdp, &inst.polytope, &w, &pi).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        // the same fixed scale must hold at any other reward too
        let w2: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r2 = inst.polytope.to_full_reward(&w2).unwrap();
        let v2 = inst.mdp.evaluate_policy(&r2, &pi).unwrap();
        let q2 = inst.mdp.q_function(&r2, &v2).unwrap();
        for h in &region.hyperplanes {
            let (s, a) = h.tag;
            let slack = q[s * 3 + a] - v[s];
            assert!((h.eval(&w) * h.scale - slack).abs() < 1e-9);
            let slack2 = q2[s * 3 + a] - v2[s];
            assert!((h.eval(&w2) * h.scale - slack2).abs() < 1e-9);
        }
    }
}

#[test]
fn region_soundness_with_value_ties() {
    for seed in 0..5 {
        let inst = generate(&GenConfig::new(5, 3, 2, 40 + seed)).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let w = inst.polytope.sample_interior(&mut rng);
        let r = inst.polytope.to_full_reward(&w).unwrap();
        let (pi, _) = inst.mdp.solve_optimal(&r).unwrap();
        let region = reward_opt_region(&inst.mdp, &inst.polytope, &w, &pi).unwrap();
        for p in sample_in_region(&inst, &region, &mut rng, 200) {
            let rp = inst.polytope.to_full_reward(&p).unwrap();
            let (got, _) = inst.mdp.solve_optimal(&rp).unwrap();
            if got != pi {
                let gap = alpha_value(&inst.mdp, &rp, &got) - alpha_value(&inst.mdp, &rp, &pi);
                assert!(gap.abs() < 1e-8);
            }
        }
    }
}

#[test]
fn threshold_instance_crosses_to_the_other_policy() {
    // one state, two self-loops; r(a0) = w free in [0, 1], r(a1) = 0.5 fixed
    // through an affine-free basis: r = (w, 0.5 w') with w' pinned to 1
    let mdp = Mdp::new(1, 2, vec![1.0, 1.0], vec![1.0], 0.9).unwrap();
    let a = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    let b = vec![1.0, 0.0, 1.0, -0.999];
    let poly = RewardPolytope::with_basis(2, 2, a, b, vec![1.0, 0.0, 0.0, 0.5]).unwrap();
    let w = vec![0.2, 0.9995];
    let (pi, _) = mdp.solve_optimal(&poly.to_full_reward(&w).unwrap()).unwrap();
    assert_eq!(pi.actions(), &[1]);
    let region = reward_opt_region(&mdp, &poly, &w, &pi).unwrap();
    assert_eq!(region.hyperplanes.len(), 1);
    let next = adjacent_reward(&region, 0, &poly, default_delta(&poly)).unwrap().unwrap();
    let (other, _) = mdp.solve_optimal(&poly.to_full_reward(&next.w).unwrap()).unwrap();
    assert_eq!(other.actions(), &[0]);
    assert!(poly.max_violation(&next.w) <= 1e-7);
}

#[test]
fn neighbor_and_exit_point_soundness() {
    for seed in 0..10 {
        let inst = generate(&GenConfig::new(5, 3, 2, 70 + seed)).unwrap();
        let poly = &inst.polytope;
        let delta = default_delta(poly);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let w = poly.sample_interior(&mut rng);
        let (pi, _) = inst.mdp.solve_optimal(&poly.to_full_reward(&w).unwrap()).unwrap();
        let region = reward_opt_region(&inst.mdp, poly, &w, &pi).unwrap();
        for (h, plane) in region.hyperplanes.iter().enumerate() {
            if let Some(p) = adjacent_reward(&region, h, poly, delta).unwrap() {
                assert!(poly.max_violation(&p.w) <= 1e-7);
                assert!(plane.eval(&p.w) >= delta - 1e-7);
                for (k, other) in region.hyperplanes.iter().enumerate() {
                    if k != h {
                        assert!(other.eval(&p.w) <= 1e-7);
                    }
                }
            }
        }
        for _ in 0..20 {
            let u = {
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let len = (x[0] * x[0] + x[1] * x[1]).sqrt();
                x.iter().map(|v| v / len).collect::<Vec<_>>()
            };
            for p in line_exit_points(&region, poly, &w, &u, delta) {
                assert!(poly.contains(&p, 0.0));
                assert!(region.hyperplanes.iter().any(|h| h.eval(&p) >= delta / 2.0 * (h.normal[0] * u[0] + h.normal[1] * u[1]).abs() - 1e-12));
                assert!(!region.contains(&p, 0.0));
            }
        }
    }
}

#[test]
fn hyperplane_signs_match_independent_slacks() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
    for seed in 0..10 {
        let inst = generate(&GenConfig::new(4, 3, 2, 300 + seed)).unwrap();
        let w0 = inst.polytope.sample_interior(&mut rng);
        let r0 = inst.polytope.to_full_reward(&w0).unwrap();
        let (pi, _) = inst.mdp.solve_optimal(&r0).unwrap();
        let region = reward_opt_region(&inst.mdp, &inst.polytope, &w0, &pi).unwrap();
        for _ in 0..50 {
            let w = inst.polytope.sample_interior(&mut rng);
            let r = inst.polytope.to_full_reward(&w).unwrap();
            let v = inst.mdp.evaluate_policy(&r, &pi).unwrap();
            let q = inst.mdp.q_function(&r, &v).unwrap();
            for h in &region.hyperplanes {
                let slack = q[h.tag.0 * 3 + h.tag.1] - v[h.tag.0];
                if slack.abs() > 1e-9 {
                    assert_eq!(h.eval(&w) > 0.0, slack > 0.0);
                }
            }
        }
    }
}

#[test]
fn hit_and_run_stays_inside() {
    use rumdp::geometry::sample_region;
    for seed in 0..5 {
        let inst = generate(&GenConfig::new(5, 3, 3, 70 + seed)).unwrap();
        let set = rumdp::enumerate::enumerate_gt(&inst.mdp, &inst.polytope).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        for e in set.entries() {
            let region = reward_opt_region(&inst.mdp, &inst.polytope, &e.witness_w, &e.policy).unwrap();
            let points = sample_region(&region, &inst.polytope, &e.witness_w, 50, &mut rng);
            assert_eq!(points.len(), 50);
            for p in &points {
                assert!(inst.polytope.contains(p, 1e-9));
                assert!(region.contains(p, 1e-9));
            }
            // the chain actually moves
            assert!(points.windows(2).any(|w| w[0] != w[1]));
        }
    }
}
