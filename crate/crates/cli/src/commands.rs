use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rumdp::enumerate::{
    enumerate_approx_gt, enumerate_gt_with, enumerate_pi_witness_timed, EnumerationBudget, GtOptions,
    NondominatedSet,
};
use rumdp::instance::{generate, AlphaMode, GenConfig, PolytopeMode, RumdpInstance};
use rumdp::io::{load_instance, save_instance, GammaDump, RegretReport};
use rumdp::regret::{solve_icg_nd, solve_xu_mannor};

use crate::args::{
    AlphaArg, Cli, Command, EnumMethod, EnumerateArgs, GenerateArgs, PolytopeArg, RegretArgs, RegretMethod,
};
use crate::{bench, verify, CliError, CliResult};

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Enumerate(args) => cmd_enumerate(&args),
        Command::Regret(args) => cmd_regret(&args),
        Command::Verify(args) => verify::cmd_verify(&args),
        Command::Bench(args) => bench::cmd_bench(&args),
    }
}

fn config_for(args: &GenerateArgs, seed: u64) -> GenConfig {
    let mut cfg = GenConfig::new(args.states, args.actions, args.reward_dim, seed);
    cfg.gamma = args.gamma;
    if let Some(k) = args.support {
        cfg.transition_support = k;
    }
    cfg.alpha_mode = match args.alpha {
        AlphaArg::Uniform => AlphaMode::Uniform,
        AlphaArg::PointMass => AlphaMode::PointMass,
    };
    cfg.polytope_mode = match args.polytope {
        PolytopeArg::Box => PolytopeMode::Box,
        PolytopeArg::RandomHalfspaces => PolytopeMode::RandomHalfspaces,
    };
    cfg.box_halfwidth = args.halfwidth;
    cfg
}

/// File name used for instance `seed` inside a corpus directory.
pub fn corpus_file_name(seed: u64) -> String {
    format!("instance-{seed:06}.json")
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    if args.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let configs: Vec<GenConfig> = (0..args.count as u64)
        .map(|i| config_for(args, args.seed.wrapping_add(i)))
        .collect();
    for cfg in &configs {
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let to_dir = args.count > 1 || args.output.is_dir();
    if to_dir {
        fs::create_dir_all(&args.output)?;
    }
    for cfg in &configs {
        let inst = generate(cfg)?;
        let path = if to_dir {
            args.output.join(corpus_file_name(cfg.seed))
        } else {
            args.output.clone()
        };
        save_instance(&inst, &path)?;
    }
    println!("wrote {} instance(s) to {}", configs.len(), args.output.display());
    Ok(())
}

fn write_dump(set: &NondominatedSet, method: &str, path: &Path) -> CliResult<()> {
    fs::write(path, GammaDump::from_set(set, method).to_json()?)?;
    Ok(())
}

/// Runs one enumeration method with the flags' budgets.
pub fn run_enumeration(inst: &RumdpInstance, args: &EnumerateArgs) -> CliResult<NondominatedSet> {
    let (mdp, poly) = (&inst.mdp, &inst.polytope);
    let result = match args.method {
        EnumMethod::Gt => {
            let opts = GtOptions {
                threads: args.threads,
                max_millis: args.max_ms,
                ..Default::default()
            };
            enumerate_gt_with(mdp, poly, &opts)
        }
        EnumMethod::PiWitness => enumerate_pi_witness_timed(mdp, poly, args.max_ms),
        EnumMethod::ApproxGt => {
            let budget = EnumerationBudget {
                max_lines: args.max_lines,
                stall_lines: args.stall_lines,
                max_millis: args.max_ms,
                max_policies: None,
            };
            if !budget.is_bounded() {
                return Err(CliError::Usage(
                    "approx-gt needs --max-lines, --stall-lines or --max-ms".into(),
                ));
            }
            enumerate_approx_gt(mdp, poly, &budget, args.seed)
        }
    };
    Ok(result?)
}

fn cmd_enumerate(args: &EnumerateArgs) -> CliResult<()> {
    let inst = load_instance(&args.instance)?;
    let clock = Instant::now();
    let set = match run_enumeration(&inst, args) {
        Err(CliError::Solver(rumdp::Error::BudgetExceeded { partial })) => {
            write_dump(&partial, args.method.name(), &args.output)?;
            return Err(CliError::Solver(rumdp::Error::BudgetExceeded { partial }));
        }
        other => other?,
    };
    let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
    write_dump(&set, args.method.name(), &args.output)?;
    println!("policies: {}", set.len());
    println!("wall_ms: {wall_ms:.3}");
    Ok(())
}

fn load_gamma(path: &PathBuf, inst: &RumdpInstance) -> CliResult<NondominatedSet> {
    let text = fs::read_to_string(path)?;
    Ok(GammaDump::from_json(&text)?.into_set(&inst.mdp, &inst.polytope)?)
}

fn cmd_regret(args: &RegretArgs) -> CliResult<()> {
    let inst = load_instance(&args.instance)?;
    let set = load_gamma(&args.gamma, &inst)?;
    let solution = match args.method {
        RegretMethod::IcgNd => solve_icg_nd(&inst.mdp, &inst.polytope, &set, args.tol)?,
        RegretMethod::XuMannor => solve_xu_mannor(&inst.polytope, &set)?,
    };
    let report = RegretReport::new(&solution, args.method.name());
    fs::write(&args.output, report.to_json()?)?;
    println!("regret: {:.10e}", solution.regret);
    println!("support: {}", solution.support.len());
    println!("wall_ms: {:.3}", solution.wall_ms);
    Ok(())
}
