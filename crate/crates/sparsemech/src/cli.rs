//! `simulate`, `reduce` and `validate` subcommands.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sparsemech_core::{
    assemble_step_problem, audit_bound, simulate_condition, solve_step_exact, sweep_epsilon, validate_holdout,
    ExactLimits, Mechanism, ReductionResult, Runner, ToleranceMode, Trajectory,
};

use crate::conditions::generate_conditions;
use crate::config::{parse_epsilons, ExperimentConfig, SolverKind};
use crate::error::{read_to_string, write, Error, Result};
use crate::formats::{
    load_mechanism, mechanism_sha256, parse_result, parse_sidecar, parse_trajectory_csv, write_audit_csv,
    write_curve_csv, write_result, write_sidecar, write_step_problem_csv, write_trace_csv, write_trajectory_csv,
    Provenance, ResultHeader, TrajectoryMeta,
};
use crate::runner::ThreadPool;

#[derive(Debug, Parser)]
#[command(name = "sparsemech", version, about = "Learn a reduced reaction mechanism from simulated trajectories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one trajectory per condition.
    Simulate(Common),
    /// Select reactions on the training conditions for every epsilon.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Also write the step problem and search tree of `<condition>:<t>`.
        #[arg(long, value_name = "ID:T")]
        dump_step: Option<String>,
    },
    /// Check reduced mechanisms on the held-out conditions.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Validate this result file instead of every epsilon in the config.
        #[arg(long)]
        result: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated list replacing `epsilons`.
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long, value_parser = ["exact", "relaxed"])]
    pub solver: Option<String>,
    #[arg(long, value_parser = ["relative", "paper-literal"])]
    pub tolerance_mode: Option<String>,
    /// Worker threads (default: available processors).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

/// Loaded configuration plus everything derived from it.
struct Context {
    cfg: ExperimentConfig,
    mech: Mechanism,
    mech_hash: String,
    prov: Provenance,
    pool: ThreadPool,
}

impl Context {
    fn load(common: &Common) -> Result<Self> {
        let mut cfg = ExperimentConfig::load(&common.config)?;
        if let Some(e) = &common.epsilon {
            cfg.epsilons = parse_epsilons(e)?;
        }
        if let Some(s) = &common.solver {
            cfg.solver = SolverKind::parse(s).expect("clap checked the value");
        }
        if let Some(m) = &common.tolerance_mode {
            cfg.tolerance_mode = ToleranceMode::parse(m).expect("clap checked the value");
        }
        if let Some(d) = &common.output_dir {
            cfg.output_dir = d.clone();
        }
        cfg.refresh_canonical();
        let mech = load_mechanism(&cfg.mechanism_path)?;
        let pool = match common.workers {
            Some(0) => return Err(Error::Config("--workers must be at least 1".into())),
            Some(n) => ThreadPool::new(n),
            None => ThreadPool::available(),
        };
        Ok(Self { mech_hash: mechanism_sha256(&mech), prov: Provenance::new(&cfg.config_sha256()), cfg, mech, pool })
    }

    fn dir(&self, sub: &str) -> PathBuf {
        self.cfg.output_dir.join(sub)
    }

    fn log(&self, msg: &str) {
        let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let path = self.cfg.output_dir.join("sparsemech.log");
        if std::fs::create_dir_all(&self.cfg.output_dir).is_ok() {
            if let Ok(mut f) = std::fs::OpenOptions::new().create(true).append(true).open(path) {
                let _ = writeln!(f, "[{secs}] {msg}");
            }
        }
    }

    fn split(&self) -> Result<(Vec<u64>, Vec<u64>)> {
        let conds = generate_conditions(&self.mech, &self.cfg.conditions, &self.cfg.generator(&self.mech)?)?;
        self.cfg.split(&conds)
    }

    fn load_trajectories(&self, ids: &[u64]) -> Result<Vec<Trajectory>> {
        let dir = self.dir("trajectories");
        ids.iter()
            .map(|id| {
                let meta_path = dir.join(format!("cond_{id}.meta"));
                let csv_path = dir.join(format!("cond_{id}.csv"));
                if !meta_path.is_file() || !csv_path.is_file() {
                    return Err(Error::Config(format!(
                        "no trajectory for condition {id} in {} (run `simulate` first)",
                        dir.display()
                    )));
                }
                let meta = parse_sidecar(&read_to_string(&meta_path)?, &meta_path.display().to_string())?;
                if meta.mechanism_sha256 != self.mech_hash {
                    return Err(Error::Config(format!(
                        "{} was generated from a different mechanism",
                        csv_path.display()
                    )));
                }
                if meta.condition_id != *id {
                    return Err(Error::Config(format!(
                        "{} holds condition {}",
                        meta_path.display(),
                        meta.condition_id
                    )));
                }
                parse_trajectory_csv(&self.mech, &read_to_string(&csv_path)?, &meta, &csv_path.display().to_string())
            })
            .collect()
    }

    fn result_path(&self, epsilon: f64) -> PathBuf {
        self.dir("results").join(format!("result_eps_{epsilon:?}.txt"))
    }
}

pub fn cmd_simulate(common: &Common) -> Result<String> {
    let ctx = Context::load(common)?;
    let conds = generate_conditions(&ctx.mech, &ctx.cfg.conditions, &ctx.cfg.generator(&ctx.mech)?)?;
    let settings = ctx.cfg.settings();
    ctx.log(&format!("simulate: {} conditions, {} workers", conds.len(), ctx.pool.workers()));
    let trajectories = ctx.pool.map(&conds, &|c| simulate_condition(&ctx.mech, c, &settings));
    let dir = ctx.dir("trajectories");
    let mut clipped = 0;
    for tr in trajectories {
        let tr = tr?;
        clipped += tr.clipped;
        let meta = TrajectoryMeta::new(&tr, &settings, &ctx.mech_hash);
        write(&dir.join(format!("cond_{}.csv", tr.condition_id)), &write_trajectory_csv(&ctx.mech, &tr))?;
        write(&dir.join(format!("cond_{}.meta", tr.condition_id)), &write_sidecar(&meta, &ctx.prov))?;
    }
    let mut out = format!("wrote {} trajectories to {}\n", conds.len(), dir.display());
    if clipped > 0 {
        let _ = writeln!(out, "warning: {clipped} concentrations were clipped at zero");
    }
    Ok(out)
}

/// Outcome of `reduce`: stdout text and whether any epsilon failed.
pub struct ReduceOutcome {
    pub summary: String,
    pub failed: bool,
}

pub fn cmd_reduce(common: &Common, dump_step: Option<&str>) -> Result<ReduceOutcome> {
    let ctx = Context::load(common)?;
    let (train, _) = ctx.split()?;
    if train.is_empty() {
        return Err(Error::Config("the training set is empty".into()));
    }
    let trajectories = ctx.load_trajectories(&train)?;
    let cfg = ctx.cfg.reduce_config();
    ctx.log(&format!(
        "reduce: {} training conditions, epsilons {:?}, solver {}",
        train.len(),
        ctx.cfg.epsilons,
        cfg.solver.name()
    ));

    if let Some(spec) = dump_step {
        dump(&ctx, &trajectories, spec, &cfg)?;
    }

    let sweep = sweep_epsilon(&ctx.mech, &trajectories, &ctx.cfg.epsilons, &cfg, &ctx.pool)?;
    let header = ResultHeader { provenance: ctx.prov.clone(), mechanism_sha256: ctx.mech_hash.clone() };
    let mut summary =
        String::from("epsilon,union_size,support_size,violations,degenerate_steps,node_limit_steps,status\n");
    let mut failed = false;
    let mut table = String::new();
    ctx.prov.write_comment(&mut table);
    for (epsilon, res) in &sweep.results {
        match res {
            Ok(res) => {
                let audit = audit_bound(&ctx.mech, &trajectories, res, *epsilon, res.tolerance_mode)?;
                write(&ctx.result_path(*epsilon), &write_result(res, &header))?;
                write(
                    &ctx.dir("results").join(format!("audit_eps_{epsilon:?}.csv")),
                    &write_audit_csv(&audit, &ctx.prov),
                )?;
                let limited = res.node_limit_steps();
                let _ = writeln!(
                    summary,
                    "{epsilon:?},{},{},{},{},{limited},ok",
                    res.union_support.len(),
                    res.support.len(),
                    audit.violation_count,
                    res.degenerate_steps.len()
                );
                if limited > 0 {
                    eprintln!(
                        "warning: epsilon {epsilon:?}: {limited} step(s) stopped at the node limit; incumbents used"
                    );
                }
                if audit.violation_count > 0 {
                    eprintln!(
                        "warning: epsilon {epsilon:?}: {} training step(s) violate the bound with the final support",
                        audit.violation_count
                    );
                }
            }
            Err(e) => {
                failed = true;
                eprintln!("error: epsilon {epsilon:?}: {e}");
                let _ = writeln!(summary, "{epsilon:?},,,,,,failed");
            }
        }
    }
    for v in &sweep.monotonicity_violations {
        failed = true;
        eprintln!(
            "error: condition {} t={}: exact cardinality rose from {} to {} between epsilon {:?} and {:?}",
            v.condition_id, v.t, v.cardinality_low, v.cardinality_high, v.epsilon_low, v.epsilon_high
        );
    }
    table.push_str(&summary);
    write(&ctx.dir("results").join("summary.csv"), &table)?;
    ctx.log("reduce: done");
    Ok(ReduceOutcome { summary, failed })
}

fn dump(ctx: &Context, trajectories: &[Trajectory], spec: &str, cfg: &sparsemech_core::ReduceConfig) -> Result<()> {
    let bad = || Error::Config(format!("--dump-step expects <condition>:<t>, got `{spec}`"));
    let (j, t) = spec.split_once(':').ok_or_else(bad)?;
    let (j, t): (u64, usize) = (j.parse().map_err(|_| bad())?, t.parse().map_err(|_| bad())?);
    let tr = trajectories
        .iter()
        .find(|tr| tr.condition_id == j)
        .ok_or_else(|| Error::Config(format!("condition {j} is not in the training set")))?;
    let p = assemble_step_problem(&ctx.mech, tr, t, cfg.epsilon, cfg.tolerance_mode)?;
    let dir = ctx.dir("debug");
    write(&dir.join(format!("step_{j}_{t}.csv")), &write_step_problem_csv(&p))?;
    if !p.degenerate {
        let limits = ExactLimits { trace: true, node_limit: ctx.cfg.node_limit, ..Default::default() };
        let sol = solve_step_exact(&p, &limits)?;
        write(&dir.join(format!("trace_{j}_{t}.csv")), &write_trace_csv(&sol.trace))?;
    }
    Ok(())
}

fn load_result(ctx: &Context, path: &Path) -> Result<ReductionResult> {
    if !path.is_file() {
        return Err(Error::Config(format!("result file {} not found (run `reduce` first)", path.display())));
    }
    let (header, res) = parse_result(&read_to_string(path)?, &path.display().to_string())?;
    if header.mechanism_sha256 != ctx.mech_hash || res.n_reactions != ctx.mech.n_reactions() {
        return Err(Error::Config(format!("{} was produced for a different mechanism", path.display())));
    }
    Ok(res)
}

pub fn cmd_validate(common: &Common, result: Option<&Path>) -> Result<String> {
    let ctx = Context::load(common)?;
    let (_, holdout) = ctx.split()?;
    if holdout.is_empty() {
        return Err(Error::Config("the holdout set is empty".into()));
    }
    let trajectories = ctx.load_trajectories(&holdout)?;
    let results: Vec<ReductionResult> = match result {
        Some(p) => vec![load_result(&ctx, p)?],
        None => ctx.cfg.epsilons.iter().map(|e| load_result(&ctx, &ctx.result_path(*e))).collect::<Result<_>>()?,
    };
    let dir = ctx.dir("validation");
    let mut summary = String::from("epsilon,condition_id,steps,satisfied,violations,max_ratio\n");
    for res in &results {
        if let Some(id) = res.training_conditions.iter().find(|id| holdout.contains(id)) {
            return Err(Error::Config(format!(
                "holdout condition {id} was used to train the result for epsilon {:?}",
                res.epsilon
            )));
        }
        let report = validate_holdout(&ctx.mech, &trajectories, res, res.epsilon, res.tolerance_mode)?;
        let e = res.epsilon;
        write(&dir.join(format!("holdout_eps_{e:?}.csv")), &write_audit_csv(&report, &ctx.prov))?;
        for id in &holdout {
            write(&dir.join(format!("curve_eps_{e:?}_cond_{id}.csv")), &write_curve_csv(&report, *id, &ctx.prov))?;
            let rows: Vec<_> = report.rows.iter().filter(|r| r.condition_id == *id).collect();
            let bad = rows.iter().filter(|r| !r.satisfied).count();
            let ratio = rows.iter().filter(|r| r.tau > 0.0).map(|r| r.d / r.tau).fold(0.0, f64::max);
            let _ = writeln!(summary, "{e:?},{id},{},{},{bad},{ratio:?}", rows.len(), rows.len() - bad);
        }
    }
    let mut table = String::new();
    ctx.prov.write_comment(&mut table);
    table.push_str(&summary);
    write(&dir.join("summary.csv"), &table)?;
    ctx.log("validate: done");
    Ok(summary)
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let outcome = match &cli.command {
        Command::Simulate(c) => cmd_simulate(c).map(|s| (s, false)),
        Command::Reduce { common, dump_step } => {
            cmd_reduce(common, dump_step.as_deref()).map(|o| (o.summary, o.failed))
        }
        Command::Validate { common, result } => cmd_validate(common, result.as_deref()).map(|s| (s, false)),
    };
    match outcome {
        Ok((text, failed)) => {
            print!("{text}");
            u8::from(failed)
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
