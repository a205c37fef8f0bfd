//! Timing runs over a corpus, written as one CSV row per measurement.
//!
//! The exact minimax regret of each instance comes from the full set and the
//! one-shot LP; approximate rows report their error against it.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use rumdp::enumerate::{
    brute_force_nondominated, enumerate_gt_with, enumerate_pi_witness_timed, ApproxSession, GtOptions,
    NondominatedSet, DEFAULT_MARGIN,
};
use rumdp::instance::RumdpInstance;
use rumdp::io::load_instance;
use rumdp::regret::{solve_icg_nd, solve_xu_mannor, DEFAULT_TOL};
use rumdp::Error;
use serde::{Serialize, Serializer};

use crate::args::{BenchArgs, BenchMethod};
use crate::{CliError, CliResult};

pub const CSV_HEADER: &str = "instance_id,n,m,d,gamma,method,gamma_size,wall_ms,mmr,rel_error,lp_count";

/// Below this exact regret the error is reported in absolute terms.
const ABSOLUTE_ERROR_BELOW: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelError {
    /// Exact methods.
    Absent,
    Value(f64),
    /// Threshold or run not reached before the timeout.
    Unmet,
}

impl Serialize for RelError {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RelError::Absent => s.serialize_str(""),
            RelError::Value(x) => s.serialize_f64(*x),
            RelError::Unmet => s.serialize_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub instance_id: String,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub gamma: f64,
    pub method: &'static str,
    pub gamma_size: usize,
    pub wall_ms: f64,
    pub mmr: Option<f64>,
    pub rel_error: RelError,
    pub lp_count: usize,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub methods: Vec<BenchMethod>,
    pub thresholds: Vec<f64>,
    pub timeout_ms: u64,
    pub seed: u64,
    pub threads: usize,
    pub no_timing: bool,
}

impl BenchConfig {
    pub fn new(methods: Vec<BenchMethod>) -> Self {
        BenchConfig {
            methods,
            thresholds: vec![0.10, 0.05, 0.01],
            timeout_ms: 20 * 60 * 1000,
            seed: 0,
            threads: 1,
            no_timing: false,
        }
    }
}

fn elapsed_ms(clock: Instant) -> f64 {
    clock.elapsed().as_secs_f64() * 1e3
}

fn rel_error(achieved: f64, exact: f64) -> f64 {
    let gap = (achieved - exact).max(0.0);
    if exact < ABSOLUTE_ERROR_BELOW {
        gap
    } else {
        gap / exact
    }
}

struct RowMaker<'a> {
    id: &'a str,
    inst: &'a RumdpInstance,
}

impl RowMaker<'_> {
    fn row(&self, method: BenchMethod, gamma_size: usize, wall_ms: f64, lp_count: usize) -> BenchRecord {
        BenchRecord {
            instance_id: self.id.to_string(),
            n: self.inst.mdp.n_states(),
            m: self.inst.mdp.n_actions(),
            d: self.inst.polytope.dim(),
            gamma: self.inst.mdp.gamma(),
            method: method.name(),
            gamma_size,
            wall_ms,
            mmr: None,
            rel_error: RelError::Absent,
            lp_count,
        }
    }

    /// A timed-out exact enumeration.
    fn timed_out(&self, method: BenchMethod, partial: &NondominatedSet, wall_ms: f64) -> BenchRecord {
        BenchRecord {
            rel_error: RelError::Unmet,
            ..self.row(method, partial.len(), wall_ms, partial.stats.lp_count)
        }
    }
}

/// Runs an exact enumerator; a timeout yields the partial set as `Err`.
fn timed_enumeration(
    run: impl FnOnce() -> rumdp::Result<NondominatedSet>,
) -> CliResult<(Result<NondominatedSet, NondominatedSet>, f64)> {
    let clock = Instant::now();
    let out = match run() {
        Ok(set) => Ok(set),
        Err(Error::BudgetExceeded { partial }) => Err(*partial),
        Err(e) => return Err(e.into()),
    };
    Ok((out, elapsed_ms(clock)))
}

/// All rows for one instance, in a fixed order.
pub fn bench_instance(id: &str, inst: &RumdpInstance, seed: u64, cfg: &BenchConfig) -> CliResult<Vec<BenchRecord>> {
    let (mdp, poly) = (&inst.mdp, &inst.polytope);
    let rows = RowMaker { id, inst };
    let wants = |m: BenchMethod| cfg.methods.contains(&m);
    let mut out = Vec::new();

    // The exact set doubles as the reference for every other row.
    let gt_opts = GtOptions {
        max_millis: Some(cfg.timeout_ms),
        ..GtOptions::single_threaded()
    };
    let (reference, gt_ms) = timed_enumeration(|| enumerate_gt_with(mdp, poly, &gt_opts))?;
    if wants(BenchMethod::Gt) {
        out.push(match &reference {
            Ok(set) => rows.row(BenchMethod::Gt, set.len(), gt_ms, set.stats.lp_count),
            Err(partial) => rows.timed_out(BenchMethod::Gt, partial, gt_ms),
        });
    }

    if wants(BenchMethod::PiWitness) {
        let (result, ms) = timed_enumeration(|| enumerate_pi_witness_timed(mdp, poly, Some(cfg.timeout_ms)))?;
        out.push(match &result {
            Ok(set) => rows.row(BenchMethod::PiWitness, set.len(), ms, set.stats.lp_count),
            Err(partial) => rows.timed_out(BenchMethod::PiWitness, partial, ms),
        });
    }

    if wants(BenchMethod::BruteForce) {
        let clock = Instant::now();
        match brute_force_nondominated(mdp, poly, DEFAULT_MARGIN) {
            Ok(set) => out.push(rows.row(BenchMethod::BruteForce, set.len(), elapsed_ms(clock), set.stats.lp_count)),
            Err(Error::InstanceTooLarge { .. }) => {
                eprintln!("{id}: too large for brute force, row skipped");
            }
            Err(e) => return Err(e.into()),
        }
    }

    let Ok(full) = reference else {
        for method in [BenchMethod::XuMannor, BenchMethod::IcgNd] {
            if wants(method) {
                out.push(BenchRecord {
                    rel_error: RelError::Unmet,
                    ..rows.row(method, 0, 0.0, 0)
                });
            }
        }
        if wants(BenchMethod::ApproxGt) {
            for _ in &cfg.thresholds {
                out.push(BenchRecord {
                    rel_error: RelError::Unmet,
                    ..rows.row(BenchMethod::ApproxGt, 0, 0.0, 0)
                });
            }
        }
        return Ok(out);
    };

    let exact = solve_xu_mannor(poly, &full)?;
    if wants(BenchMethod::XuMannor) {
        out.push(BenchRecord {
            mmr: Some(exact.regret),
            ..rows.row(BenchMethod::XuMannor, full.len(), exact.wall_ms, exact.lp_count)
        });
    }
    if wants(BenchMethod::IcgNd) {
        let clock = Instant::now();
        let sol = solve_icg_nd(mdp, poly, &full, DEFAULT_TOL)?;
        out.push(BenchRecord {
            mmr: Some(sol.regret),
            ..rows.row(BenchMethod::IcgNd, full.len(), elapsed_ms(clock), sol.lp_count)
        });
    }

    if wants(BenchMethod::ApproxGt) {
        out.extend(bench_approx(&rows, &full, exact.regret, seed, cfg)?);
    }
    Ok(out)
}

/// Walks lines until each error threshold is met, the timeout passes, or
/// the whole set is found. Only line walking counts toward `wall_ms`; the
/// error evaluation after each productive line is bookkeeping.
fn bench_approx(
    rows: &RowMaker<'_>,
    full: &NondominatedSet,
    exact: f64,
    seed: u64,
    cfg: &BenchConfig,
) -> CliResult<Vec<BenchRecord>> {
    let (mdp, poly) = (&rows.inst.mdp, &rows.inst.polytope);
    let mut session = ApproxSession::new(mdp, poly, seed);
    let mut met: Vec<Option<BenchRecord>> = vec![None; cfg.thresholds.len()];
    let mut walk_ms = 0.0;
    let mut last_mmr = None;
    while met.iter().any(Option::is_none) && walk_ms < cfg.timeout_ms as f64 {
        let clock = Instant::now();
        let added = session.walk_line()?;
        walk_ms += elapsed_ms(clock);
        if added == 0 {
            continue;
        }
        let set = session.set();
        let sol = solve_xu_mannor(poly, set)?;
        let err = rel_error(sol.evaluate(full, poly)?, exact);
        last_mmr = Some(sol.regret);
        for (slot, &threshold) in met.iter_mut().zip(&cfg.thresholds) {
            if slot.is_none() && err < threshold {
                *slot = Some(BenchRecord {
                    mmr: Some(sol.regret),
                    rel_error: RelError::Value(err),
                    ..rows.row(BenchMethod::ApproxGt, set.len(), walk_ms, set.stats.lp_count)
                });
            }
        }
        if set.len() >= full.len() {
            break;
        }
    }
    let set = session.set();
    Ok(met
        .into_iter()
        .map(|slot| {
            slot.unwrap_or_else(|| BenchRecord {
                mmr: last_mmr,
                rel_error: RelError::Unmet,
                ..rows.row(BenchMethod::ApproxGt, set.len(), walk_ms, set.stats.lp_count)
            })
        })
        .collect())
}

/// Benchmarks every instance, concurrently across `cfg.threads` workers.
/// Rows come back in corpus order whatever the thread count.
pub fn run_bench(corpus: &[(String, RumdpInstance)], cfg: &BenchConfig) -> CliResult<Vec<BenchRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let per_instance: Vec<CliResult<Vec<BenchRecord>>> = pool.install(|| {
        corpus
            .par_iter()
            .enumerate()
            .map(|(i, (id, inst))| bench_instance(id, inst, cfg.seed.wrapping_add(i as u64), cfg))
            .collect()
    });
    let mut records = Vec::new();
    for rows in per_instance {
        records.extend(rows?);
    }
    if cfg.no_timing {
        records.iter_mut().for_each(|r| r.wall_ms = 0.0);
    }
    Ok(records)
}

/// Instance files (`*.json`) of a directory, sorted by file name.
pub fn load_corpus(dir: &Path) -> CliResult<Vec<(String, RumdpInstance)>> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("corpus {} is not a directory", dir.display())));
    }
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("corpus {} has no instance files", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((id, load_instance(&p)?))
        })
        .collect()
}

pub fn write_records(records: &[BenchRecord], path: &Path) -> CliResult<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ScatterPoint<'a> {
    instance_id: &'a str,
    method: &'a str,
    gamma_size: usize,
    wall_ms: f64,
    lp_count: usize,
}

/// `(|Γ|, wall_ms)` per completed exact enumeration, for plotting.
pub fn write_scatter(records: &[BenchRecord], path: &Path) -> CliResult<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let enumerators = ["gt", "pi-witness", "brute-force"];
    for r in records
        .iter()
        .filter(|r| enumerators.contains(&r.method) && r.rel_error == RelError::Absent)
    {
        writer.serialize(ScatterPoint {
            instance_id: &r.instance_id,
            method: r.method,
            gamma_size: r.gamma_size,
            wall_ms: r.wall_ms,
            lp_count: r.lp_count,
        })?;
    }
    writer.flush()?;
    Ok(())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    if args.error_thresholds.iter().any(|t| t.is_nan() || *t <= 0.0) {
        return Err(CliError::Usage("error thresholds must be positive".into()));
    }
    let corpus = load_corpus(&args.corpus)?;
    let cfg = BenchConfig {
        methods: args.methods.clone(),
        thresholds: args.error_thresholds.clone(),
        timeout_ms: args.timeout_ms,
        seed: args.seed,
        threads: args.threads,
        no_timing: args.no_timing,
    };
    let records = run_bench(&corpus, &cfg)?;
    fs::create_dir_all(&args.output)?;
    write_records(&records, &args.output.join("bench.csv"))?;
    write_scatter(&records, &args.output.join("scatter.csv"))?;
    for method in &cfg.methods {
        let rows: Vec<&BenchRecord> = records.iter().filter(|r| r.method == method.name()).collect();
        let unmet = rows.iter().filter(|r| r.rel_error == RelError::Unmet).count();
        println!(
            "{:<12} rows {:>5}  median wall_ms {:>10.3}  unmet {}",
            method.name(),
            rows.len(),
            median(rows.iter().map(|r| r.wall_ms).collect()),
            unmet
        );
    }
    Ok(())
}
