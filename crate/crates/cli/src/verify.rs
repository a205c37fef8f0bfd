//! The oracle suite behind `rumdp verify`.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rumdp::enumerate::{brute_force_nondominated, enumerate_gt, enumerate_pi_witness, DEFAULT_MARGIN};
use rumdp::geometry::{reward_opt_region, sample_region};
use rumdp::instance::RumdpInstance;
use rumdp::io::load_instance;
use rumdp::mdp::DeterministicPolicy;
use rumdp::Error;

use crate::args::{Check, VerifyArgs};
use crate::{CliError, CliResult};

pub const IDENTITY_POLICIES: usize = 100;
pub const REGION_SAMPLES: usize = 20;
const VALUE_TOL: f64 = 1e-8;
const OCCUPANCY_TOL: f64 = 1e-7;

/// Result of one check: `Err` carries the first violation found.
pub type Outcome = Result<String, String>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Value/occupancy identity, occupancy feasibility and Bellman slack of the
/// optimal policy, each at a random reward of the polytope.
pub fn check_identity(inst: &RumdpInstance, policies: usize, seed: u64) -> CliResult<Outcome> {
    let (mdp, poly) = (&inst.mdp, &inst.polytope);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for k in 0..policies {
        let pi = DeterministicPolicy::new(
            (0..mdp.n_states())
                .map(|_| rng.random_range(0..mdp.n_actions()))
                .collect(),
        );
        let w = poly.sample_interior(&mut rng);
        let r = poly.to_full_reward(&w)?;
        let v = mdp.evaluate_policy(&r, &pi)?;
        let f = mdp.occupancy_of(&pi)?;
        let gap = (dot(mdp.alpha(), &v) - dot(&r, &f)).abs();
        if gap >= VALUE_TOL {
            return Ok(Err(format!("policy #{k}: value identity off by {gap:e}")));
        }
        let residual = mdp.occupancy_residual(&f);
        if residual >= OCCUPANCY_TOL {
            return Ok(Err(format!("policy #{k}: occupancy residual {residual:e}")));
        }
        let (_, v_star) = mdp.solve_optimal(&r)?;
        let q = mdp.q_function(&r, &v_star)?;
        for s in 0..mdp.n_states() {
            let best = (0..mdp.n_actions())
                .map(|a| q[mdp.pair(s, a)])
                .fold(f64::NEG_INFINITY, f64::max);
            let slack = (best - v_star[s]).abs();
            if slack > VALUE_TOL {
                return Ok(Err(format!("reward #{k}: Bellman slack {slack:e} in state {s}")));
            }
        }
    }
    Ok(Ok(format!("{policies} policies")))
}

/// Brute force, traversal and witness search find the same policies.
pub fn check_oracles(inst: &RumdpInstance) -> CliResult<Outcome> {
    let (mdp, poly) = (&inst.mdp, &inst.polytope);
    let brute = match brute_force_nondominated(mdp, poly, DEFAULT_MARGIN) {
        Err(e @ Error::InstanceTooLarge { .. }) => {
            return Err(CliError::Usage(format!("{e}; run the other checks with --checks")))
        }
        other => other?,
    };
    let gt = enumerate_gt(mdp, poly)?;
    let pw = enumerate_pi_witness(mdp, poly)?;
    let want = brute.sorted_keys();
    if gt.sorted_keys() != want {
        return Ok(Err(format!("traversal found {} policies, brute force {}", gt.len(), brute.len())));
    }
    if pw.sorted_keys() != want {
        return Ok(Err(format!("witness search found {} policies, brute force {}", pw.len(), brute.len())));
    }
    Ok(Ok(format!("{} nondominated policies", want.len())))
}

/// Samples inside every optimality region re-solve to a policy of equal
/// value, and each region hyperplane has the sign of its Bellman slack.
pub fn check_regions(inst: &RumdpInstance, samples: usize, seed: u64) -> CliResult<Outcome> {
    let (mdp, poly) = (&inst.mdp, &inst.polytope);
    let gamma_set = enumerate_gt(mdp, poly)?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut checked = 0;
    for entry in gamma_set.entries() {
        let region = reward_opt_region(mdp, poly, &entry.witness_w, &entry.policy)?;
        for w in sample_region(&region, poly, &entry.witness_w, samples, &mut rng) {
            let r = poly.to_full_reward(&w)?;
            let v_pi = mdp.evaluate_policy(&r, &entry.policy)?;
            let (_, v_star) = mdp.solve_optimal(&r)?;
            let gap = v_star.iter().zip(v_pi.iter()).fold(0.0_f64, |acc, (a, b)| acc.max(a - b));
            if gap > VALUE_TOL {
                return Ok(Err(format!("policy {:?} loses {gap:e} inside its region", entry.key.actions())));
            }
            let q = mdp.q_function(&r, &v_pi)?;
            for h in &region.hyperplanes {
                let (s, a) = h.tag;
                let slack = q[mdp.pair(s, a)] - v_pi[s];
                if slack.abs() > VALUE_TOL && (h.eval(&w) > 0.0) != (slack > 0.0) {
                    return Ok(Err(format!("hyperplane ({s}, {a}) disagrees with its Bellman slack")));
                }
            }
            checked += 1;
        }
    }
    Ok(Ok(format!("{checked} samples in {} regions", gamma_set.len())))
}

fn is_invalid_instance(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidMdp(_)
            | Error::InvalidDiscount(_)
            | Error::InvalidRewardModel(_)
            | Error::ShapeMismatch { .. }
            | Error::MalformedFile(_)
            | Error::VersionMismatch { .. }
            | Error::InfeasiblePolytope
            | Error::DegeneratePolytope(_)
            | Error::UnboundedPolytope
    )
}

pub fn cmd_verify(args: &VerifyArgs) -> CliResult<()> {
    let inst = match load_instance(&args.instance) {
        Ok(inst) => inst,
        Err(e) if is_invalid_instance(&e) => {
            println!("FAIL load: {e}");
            return Err(CliError::Verification(format!("load: {e}")));
        }
        Err(e) => return Err(e.into()),
    };
    println!("PASS load");
    let checks = if args.checks.is_empty() {
        vec![Check::Identity, Check::Oracles, Check::Regions]
    } else {
        args.checks.clone()
    };
    for check in checks {
        let (name, outcome) = match check {
            Check::Identity => ("identity", check_identity(&inst, IDENTITY_POLICIES, args.seed)?),
            Check::Oracles => ("oracles", check_oracles(&inst)?),
            Check::Regions => ("regions", check_regions(&inst, REGION_SAMPLES, args.seed)?),
        };
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                println!("FAIL {name}: {detail}");
                return Err(CliError::Verification(format!("{name}: {detail}")));
            }
        }
    }
    Ok(())
}
