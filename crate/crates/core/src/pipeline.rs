//! Reduction over a training set: per-step selection, union, pruning,
//! bound audit and holdout validation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exact::{solve_step_exact, ExactLimits, ExactStatus};
use crate::kinetics::Trajectory;
use crate::mechanism::Mechanism;
use crate::relaxed::{
    default_theta_grid, round_randomized, round_threshold_with, solve_relaxed_fixed, Fix, RelaxedSettings,
    RelaxedStatus,
};
use crate::selection::{
    assemble_step_problem, fitting_error, normalization, tolerance, SelectionOrigin, SelectionVector, ToleranceMode,
    DEFAULT_FEAS_TOL,
};

/// Maps a function over a slice, possibly in parallel. Output order must
/// match input order.
pub trait Runner {
    fn map<T: Sync, R: Send>(&self, items: &[T], f: &(dyn Fn(&T) -> R + Sync)) -> Vec<R>;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Runner for Sequential {
    fn map<T: Sync, R: Send>(&self, items: &[T], f: &(dyn Fn(&T) -> R + Sync)) -> Vec<R> {
        items.iter().map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rounding {
    Threshold { theta_grid: Vec<f64> },
    Randomized { draws: usize, seed: u64 },
}

impl Default for Rounding {
    fn default() -> Self {
        Rounding::Threshold { theta_grid: default_theta_grid() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    Exact(ExactLimits),
    Relaxed { settings: RelaxedSettings, rounding: Rounding },
}

impl SolverChoice {
    pub fn exact() -> Self {
        SolverChoice::Exact(ExactLimits::default())
    }

    pub fn relaxed() -> Self {
        SolverChoice::Relaxed { settings: RelaxedSettings::default(), rounding: Rounding::default() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Exact(_) => "exact",
            SolverChoice::Relaxed { .. } => "relaxed",
        }
    }

    fn feas_tol(&self) -> f64 {
        match self {
            SolverChoice::Exact(l) => l.feas_tol,
            SolverChoice::Relaxed { settings, .. } => settings.feas_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReduceConfig {
    pub epsilon: f64,
    pub tolerance_mode: ToleranceMode,
    pub solver: SolverChoice,
    /// Reactions selected at fewer than this many `(condition, t)` steps are dropped.
    pub prune_min_count: usize,
}

impl ReduceConfig {
    pub fn new(epsilon: f64, solver: SolverChoice) -> Self {
        Self { epsilon, tolerance_mode: ToleranceMode::Relative, solver, prune_min_count: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// Exact solver proved optimality.
    Optimal,
    /// Exact solver stopped at its node limit; the incumbent is used.
    NodeLimit,
    /// Relaxation converged and was rounded.
    Rounded,
    /// Relaxation hit its iteration limit; its iterate was rounded anyway.
    RoundedUnconverged,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepStatus::Optimal => "optimal",
            StepStatus::NodeLimit => "node_limit",
            StepStatus::Rounded => "rounded",
            StepStatus::RoundedUnconverged => "rounded_unconverged",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "optimal" => Some(StepStatus::Optimal),
            "node_limit" => Some(StepStatus::NodeLimit),
            "rounded" => Some(StepStatus::Rounded),
            "rounded_unconverged" => Some(StepStatus::RoundedUnconverged),
            _ => None,
        }
    }
}

/// Outcome of one `(condition, t)` selection.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub condition_id: u64,
    pub t: usize,
    pub support: Vec<usize>,
    pub status: StepStatus,
    /// Branch-and-bound nodes or coordinate-descent sweeps.
    pub work: usize,
    /// Relaxed objective, when the relaxed solver ran.
    pub relaxed_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    pub n_reactions: usize,
    /// Final support after pruning, ascending.
    pub support: Vec<usize>,
    /// Union of all per-step supports before pruning.
    pub union_support: Vec<usize>,
    /// Per-step records sorted by `(condition_id, t)`.
    pub steps: Vec<StepRecord>,
    /// Number of steps selecting each reaction.
    pub frequency: Vec<usize>,
    pub degenerate_steps: Vec<(u64, usize)>,
    pub training_conditions: Vec<u64>,
    pub epsilon: f64,
    pub tolerance_mode: ToleranceMode,
    pub solver: &'static str,
    pub prune_min_count: usize,
}

impl ReductionResult {
    pub fn per_step_supports(&self) -> BTreeMap<(u64, usize), &[usize]> {
        self.steps.iter().map(|s| ((s.condition_id, s.t), s.support.as_slice())).collect()
    }

    pub fn selection(&self) -> SelectionVector {
        SelectionVector::from_support(self.n_reactions, &self.support, SelectionOrigin::Union)
            .expect("support ids are in range")
    }

    pub fn node_limit_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.status == StepStatus::NodeLimit).count()
    }
}

enum StepOutcome {
    Solved(StepRecord),
    Degenerate(u64, usize),
    InfeasibleAtFull(u64, usize),
    Failed(Error),
}

fn step_seed(seed: u64, condition_id: u64, t: usize) -> u64 {
    seed ^ condition_id.rotate_left(32) ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn solve_one(mech: &Mechanism, traj: &Trajectory, t: usize, cfg: &ReduceConfig) -> StepOutcome {
    let p = match assemble_step_problem(mech, traj, t, cfg.epsilon, cfg.tolerance_mode) {
        Ok(p) => p,
        Err(e) => return StepOutcome::Failed(e),
    };
    if p.degenerate {
        return StepOutcome::Degenerate(traj.condition_id, t);
    }
    if p.infeasible_at_full {
        return StepOutcome::InfeasibleAtFull(traj.condition_id, t);
    }
    let record = |support: Vec<usize>, status, work, relaxed_objective| StepRecord {
        condition_id: traj.condition_id,
        t,
        support,
        status,
        work,
        relaxed_objective,
    };
    match &cfg.solver {
        SolverChoice::Exact(limits) => match solve_step_exact(&p, limits) {
            Ok(sol) => match (sol.status, sol.w) {
                (ExactStatus::Optimal, Some(w)) => {
                    StepOutcome::Solved(record(w.support(), StepStatus::Optimal, sol.nodes_explored, None))
                }
                (ExactStatus::NodeLimit, Some(w)) => {
                    StepOutcome::Solved(record(w.support(), StepStatus::NodeLimit, sol.nodes_explored, None))
                }
                _ => StepOutcome::InfeasibleAtFull(traj.condition_id, t),
            },
            Err(e) => StepOutcome::Failed(e),
        },
        SolverChoice::Relaxed { settings, rounding } => {
            let sol = solve_relaxed_fixed(&p, &vec![Fix::Free; p.n_reactions()], settings);
            let status = match sol.status {
                RelaxedStatus::Converged => StepStatus::Rounded,
                RelaxedStatus::MaxIter => StepStatus::RoundedUnconverged,
                RelaxedStatus::Infeasible => return StepOutcome::InfeasibleAtFull(traj.condition_id, t),
            };
            let rounded = match rounding {
                Rounding::Threshold { theta_grid } => round_threshold_with(&sol.w, &p, theta_grid, settings.feas_tol),
                Rounding::Randomized { draws, seed } => {
                    round_randomized(&sol.w, &p, *draws, step_seed(*seed, traj.condition_id, t))
                }
            };
            match rounded {
                Ok(w) => StepOutcome::Solved(record(w.support(), status, sol.iterations, Some(sol.objective))),
                Err(Error::Infeasible { .. }) => StepOutcome::InfeasibleAtFull(traj.condition_id, t),
                Err(e) => StepOutcome::Failed(e),
            }
        }
    }
}

fn check_training(mech: &Mechanism, trajectories: &[Trajectory]) -> Result<()> {
    if trajectories.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    for tr in trajectories {
        if let Some(x) = tr.states.first() {
            if x.len() != mech.n_species() {
                return Err(Error::DimensionMismatch {
                    expected: mech.n_species(),
                    found: x.len(),
                    what: "trajectory state",
                });
            }
        }
        if let Some(r) = tr.rates.first() {
            if r.len() != mech.n_reactions() {
                return Err(Error::DimensionMismatch {
                    expected: mech.n_reactions(),
                    found: r.len(),
                    what: "trajectory rates",
                });
            }
        }
    }
    let mut ids: Vec<u64> = trajectories.iter().map(|t| t.condition_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("duplicate condition ids in the trajectory set".into()));
    }
    Ok(())
}

/// Solves every step of every training trajectory, unions the supports and
/// drops rarely selected reactions.
pub fn reduce<R: Runner>(
    mech: &Mechanism,
    trajectories: &[Trajectory],
    cfg: &ReduceConfig,
    runner: &R,
) -> Result<ReductionResult> {
    check_training(mech, trajectories)?;
    if !(cfg.epsilon.is_finite() && cfg.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    let tasks: Vec<(usize, usize)> =
        trajectories.iter().enumerate().flat_map(|(j, tr)| (1..=tr.horizon()).map(move |t| (j, t))).collect();
    let outcomes = runner.map(&tasks, &|&(j, t)| solve_one(mech, &trajectories[j], t, cfg));

    let mut steps = Vec::with_capacity(outcomes.len());
    let mut degenerate = Vec::new();
    let mut infeasible = Vec::new();
    for outcome in outcomes {
        match outcome {
            StepOutcome::Solved(rec) => steps.push(rec),
            StepOutcome::Degenerate(j, t) => degenerate.push((j, t)),
            StepOutcome::InfeasibleAtFull(j, t) => infeasible.push((j, t)),
            StepOutcome::Failed(e) => return Err(e),
        }
    }
    if !infeasible.is_empty() {
        infeasible.sort_unstable();
        return Err(Error::InfeasibleSteps { steps: infeasible });
    }
    steps.sort_by_key(|s| (s.condition_id, s.t));
    degenerate.sort_unstable();

    let n = mech.n_reactions();
    let mut frequency = vec![0usize; n];
    for s in &steps {
        for &i in &s.support {
            frequency[i] += 1;
        }
    }
    let union_support: Vec<usize> = (0..n).filter(|&i| frequency[i] > 0).collect();
    let support: Vec<usize> = union_support.iter().copied().filter(|&i| frequency[i] >= cfg.prune_min_count).collect();
    let mut training_conditions: Vec<u64> = trajectories.iter().map(|t| t.condition_id).collect();
    training_conditions.sort_unstable();

    Ok(ReductionResult {
        n_reactions: n,
        support,
        union_support,
        steps,
        frequency,
        degenerate_steps: degenerate,
        training_conditions,
        epsilon: cfg.epsilon,
        tolerance_mode: cfg.tolerance_mode,
        solver: cfg.solver.name(),
        prune_min_count: cfg.prune_min_count,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub condition_id: u64,
    pub t: usize,
    /// Fitting error of the reduced mechanism.
    pub d: f64,
    pub tau: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub violation_count: usize,
    /// Largest `d / tau` over the rows (0 when every `d` is 0).
    pub max_ratio: f64,
    pub degenerate_steps: Vec<(u64, usize)>,
}

impl AuditReport {
    pub fn satisfied_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        (self.rows.len() - self.violation_count) as f64 / self.rows.len() as f64
    }

    /// `(t, d, tau)` for one condition, in time order.
    pub fn curve(&self, condition_id: u64) -> Vec<(usize, f64, f64)> {
        self.rows.iter().filter(|r| r.condition_id == condition_id).map(|r| (r.t, r.d, r.tau)).collect()
    }

    pub fn condition_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.rows.iter().map(|r| r.condition_id).collect();
        ids.dedup();
        ids
    }
}

/// Evaluates a fixed support on every non-degenerate step of `trajectories`.
pub fn audit_support(
    mech: &Mechanism,
    trajectories: &[Trajectory],
    support: &[usize],
    epsilon: f64,
    mode: ToleranceMode,
    feas_tol: f64,
) -> Result<AuditReport> {
    let w = SelectionVector::from_support(mech.n_reactions(), support, SelectionOrigin::Union)?;
    let mut order: Vec<&Trajectory> = trajectories.iter().collect();
    order.sort_by_key(|t| t.condition_id);
    let mut rows = Vec::new();
    let mut degenerate = Vec::new();
    for tr in order {
        for t in 1..=tr.horizon() {
            let norm = normalization(tr, t)?;
            let d = fitting_error(mech, tr, t, &w)?;
            let tau = match tolerance(epsilon, norm, mode) {
                Some(tau) if norm > 0.0 => tau,
                Some(tau) => {
                    // quiescent: kept only when nothing moved
                    let moved = tr.state(t + 1).iter().zip(tr.state(t)).any(|(a, b)| a != b);
                    if moved {
                        degenerate.push((tr.condition_id, t));
                        continue;
                    }
                    tau
                }
                None => {
                    degenerate.push((tr.condition_id, t));
                    continue;
                }
            };
            rows.push(AuditRow { condition_id: tr.condition_id, t, d, tau, satisfied: d <= tau + feas_tol });
        }
    }
    let violation_count = rows.iter().filter(|r| !r.satisfied).count();
    let max_ratio = rows.iter().fold(0.0_f64, |m, r| {
        let ratio = if r.d == 0.0 {
            0.0
        } else if r.tau == 0.0 {
            f64::INFINITY
        } else {
            r.d / r.tau
        };
        m.max(ratio)
    });
    Ok(AuditReport { rows, violation_count, max_ratio, degenerate_steps: degenerate })
}

/// Re-checks the final support against the tolerance at every training step.
pub fn audit_bound(
    mech: &Mechanism,
    trajectories: &[Trajectory],
    result: &ReductionResult,
    epsilon: f64,
    mode: ToleranceMode,
) -> Result<AuditReport> {
    audit_support(mech, trajectories, &result.support, epsilon, mode, DEFAULT_FEAS_TOL)
}

/// Same computation as [`audit_bound`] on conditions not used for training.
pub fn validate_holdout(
    mech: &Mechanism,
    holdout: &[Trajectory],
    result: &ReductionResult,
    epsilon: f64,
    mode: ToleranceMode,
) -> Result<AuditReport> {
    if holdout.is_empty() {
        return Err(Error::EmptyInput("holdout set"));
    }
    audit_support(mech, holdout, &result.support, epsilon, mode, DEFAULT_FEAS_TOL)
}

/// A step whose exact cardinality grew when epsilon increased.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub condition_id: u64,
    pub t: usize,
    pub epsilon_low: f64,
    pub epsilon_high: f64,
    pub cardinality_low: usize,
    pub cardinality_high: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// One entry per epsilon, ascending.
    pub results: Vec<(f64, Result<ReductionResult>)>,
    /// Filled for the exact solver only.
    pub monotonicity_violations: Vec<MonotonicityViolation>,
}

impl SweepReport {
    /// `(epsilon, union size)` for every successful run.
    pub fn union_sizes(&self) -> Vec<(f64, usize)> {
        self.results.iter().filter_map(|(e, r)| r.as_ref().ok().map(|r| (*e, r.support.len()))).collect()
    }
}

/// Runs [`reduce`] for each epsilon; failures are kept per epsilon.
pub fn sweep_epsilon<R: Runner>(
    mech: &Mechanism,
    trajectories: &[Trajectory],
    epsilons: &[f64],
    base: &ReduceConfig,
    runner: &R,
) -> Result<SweepReport> {
    if epsilons.is_empty() {
        return Err(Error::EmptyInput("epsilon list"));
    }
    let mut sorted = epsilons.to_vec();
    if let Some(e) = sorted.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::InvalidArgument(format!("epsilon {e} must be positive")));
    }
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("epsilon values must be distinct".into()));
    }
    let results: Vec<(f64, Result<ReductionResult>)> = sorted
        .iter()
        .map(|&epsilon| {
            let cfg = ReduceConfig { epsilon, ..base.clone() };
            (epsilon, reduce(mech, trajectories, &cfg, runner))
        })
        .collect();

    let mut violations = Vec::new();
    if matches!(base.solver, SolverChoice::Exact(_)) {
        for pair in results.windows(2) {
            let ((e_lo, Ok(lo)), (e_hi, Ok(hi))) = (&pair[0], &pair[1]) else { continue };
            let hi_steps: BTreeMap<(u64, usize), &StepRecord> =
                hi.steps.iter().map(|s| ((s.condition_id, s.t), s)).collect();
            for s in &lo.steps {
                let Some(h) = hi_steps.get(&(s.condition_id, s.t)) else { continue };
                if s.status != StepStatus::Optimal || h.status != StepStatus::Optimal {
                    continue;
                }
                if h.support.len() > s.support.len() {
                    violations.push(MonotonicityViolation {
                        condition_id: s.condition_id,
                        t: s.t,
                        epsilon_low: *e_lo,
                        epsilon_high: *e_hi,
                        cardinality_low: s.support.len(),
                        cardinality_high: h.support.len(),
                    });
                }
            }
        }
    }
    Ok(SweepReport { results, monotonicity_violations: violations })
}

/// Feasibility slack used by the configured solver.
pub fn solver_feas_tol(cfg: &ReduceConfig) -> f64 {
    cfg.solver.feas_tol()
}
