//! Acceptance suite. Runs every criterion in order, prints one line per
//! criterion and exits nonzero if any of them fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsemech::cli::{cmd_reduce, cmd_simulate, cmd_validate, Common};
use sparsemech::conditions::generate_conditions;
use sparsemech::config::ExperimentConfig;
use sparsemech::formats::{load_mechanism, parse_result};
use sparsemech::runner::ThreadPool;
use sparsemech_core::exact::brute_force_oracle;
use sparsemech_core::relaxed::default_theta_grid;
use sparsemech_core::*;

const FEAS: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

struct Experiment {
    mech: Mechanism,
    train: Vec<Trajectory>,
    holdout: Vec<Trajectory>,
}

fn experiment(conf: &str, substeps: Option<usize>) -> Experiment {
    let cfg = ExperimentConfig::load(&data(conf)).unwrap();
    let mech = load_mechanism(&cfg.mechanism_path).unwrap();
    let conds = generate_conditions(&mech, &cfg.conditions, &cfg.generator(&mech).unwrap()).unwrap();
    let (train_ids, holdout_ids) = cfg.split(&conds).unwrap();
    let mut settings = cfg.settings();
    if let Some(s) = substeps {
        settings.substeps = s;
    }
    let all = ThreadPool::available().map(&conds, &|c| simulate_condition(&mech, c, &settings).unwrap());
    let pick = |ids: &[u64]| all.iter().filter(|t| ids.contains(&t.condition_id)).cloned().collect::<Vec<_>>();
    Experiment { train: pick(&train_ids), holdout: pick(&holdout_ids), mech }
}

fn common(conf: &str, out: &Path, epsilon: Option<&str>) -> Common {
    Common {
        config: data(conf),
        epsilon: epsilon.map(String::from),
        solver: None,
        tolerance_mode: None,
        workers: None,
        output_dir: Some(out.to_path_buf()),
    }
}

// ---------------------------------------------------------------------------
// random step problems

fn random_problem(rng: &mut ChaCha8Rng) -> StepProblem {
    let ns = rng.random_range(1..=6usize);
    let nr = rng.random_range(1..=12usize);
    let mut a: Vec<f64> = (0..ns * nr).map(|_| rng.random_range(-1.0..1.0)).collect();
    for i in 0..nr {
        if rng.random_bool(0.15) {
            for s in 0..ns {
                a[s * nr + i] = 0.0;
            }
        }
    }
    let noise = if rng.random_bool(0.3) { 1.0 } else { 0.2 };
    let mut b: Vec<f64> = (0..ns).map(|_| rng.random_range(-noise..noise)).collect();
    for i in 0..nr {
        if rng.random_bool(0.5) {
            for s in 0..ns {
                b[s] += a[s * nr + i];
            }
        }
    }
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let frac = if rng.random_bool(0.25) { rng.random_range(0.0..0.05) } else { rng.random_range(0.0..1.1) };
    StepProblem::new(DenseMatrix::from_row_major(ns, nr, a), b, frac * bn).unwrap()
}

fn random_problems() -> Vec<StepProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
    (0..300).map(|_| random_problem(&mut rng)).collect()
}

fn criterion_1() -> Outcome {
    let problems = random_problems();
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut infeasible = 0;
    for (k, p) in problems.iter().enumerate() {
        let oracle = brute_force_oracle(p).unwrap();
        let exact = solve_step_exact(p, &ExactLimits::default()).unwrap();
        if oracle.status == ExactStatus::Infeasible {
            infeasible += 1;
        }
        let same = exact.status == oracle.status && exact.cardinality == oracle.cardinality;
        let feasible = exact.w.as_ref().is_none_or(|w| p.is_feasible(w.weights(), FEAS));
        if !same || !feasible {
            mismatches.push(k);
        }
    }
    let elapsed = start.elapsed();
    let pass =
        mismatches.is_empty() && infeasible > 0 && infeasible < problems.len() && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{} instances ({} infeasible), {} mismatches {:?}, {:.2?}",
            problems.len(),
            infeasible,
            mismatches.len(),
            mismatches,
            elapsed
        ),
    )
}

fn criterion_2() -> Outcome {
    let problems = random_problems();
    let grid = default_theta_grid();
    let mut checked = 0;
    let mut violations = Vec::new();
    for (k, p) in problems.iter().enumerate() {
        let exact = solve_step_exact(p, &ExactLimits::default()).unwrap();
        let relaxed = solve_step_relaxed(p, 1e-8, 100_000).unwrap();
        let threshold = round_threshold(&relaxed.w, p, &grid);
        let randomized = round_randomized(&relaxed.w, p, 64, k as u64);
        if exact.status == ExactStatus::Infeasible {
            // the box relaxation may still be feasible; no rounding can be
            if threshold.is_ok() || randomized.is_ok() {
                violations.push(format!("#{k} rounding returned a support for an infeasible instance"));
            }
            continue;
        }
        checked += 1;
        let card = exact.cardinality as f64;
        if relaxed.objective > card + 1e-6 {
            violations.push(format!("#{k} relaxed {} > exact {card}", relaxed.objective));
        }
        for (name, r) in [("threshold", threshold), ("randomized", randomized)] {
            match r {
                Ok(w) if p.is_feasible(w.weights(), FEAS) && w.support().len() >= exact.cardinality => {}
                Ok(w) => violations.push(format!("#{k} {name} rounding {:?} vs exact {card}", w.support())),
                Err(e) => violations.push(format!("#{k} {name} rounding failed: {e}")),
            }
        }
    }
    outcome(violations.is_empty(), format!("{checked} feasible instances, violations {violations:?}"))
}

// ---------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    let mut clipped = 0;
    for conf in ["desk.conf", "planted.conf"] {
        let ex = experiment(conf, Some(1));
        let ones = SelectionVector::ones(ex.mech.n_reactions(), SelectionOrigin::Union);
        for tr in ex.train.iter().chain(&ex.holdout) {
            clipped += tr.clipped;
            for t in 1..=tr.horizon() {
                worst = worst.max(fitting_error(&ex.mech, tr, t, &ones).unwrap());
                steps += 1;
            }
        }
    }
    outcome(worst <= 1e-12 && clipped == 0, format!("{steps} steps, max error {worst:e}, clipped {clipped}"))
}

// ---------------------------------------------------------------------------

const SWEEP: [f64; 3] = [0.05, 0.1, 0.2];

fn nonincreasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn criterion_4() -> Outcome {
    let pool = ThreadPool::available();
    let mut lines = Vec::new();
    let mut pass = true;

    // every step of the planted benchmark
    let planted = experiment("planted.conf", None);
    let sweep =
        sweep_epsilon(&planted.mech, &planted.train, &SWEEP, &ReduceConfig::new(0.05, SolverChoice::exact()), &pool)
            .unwrap();
    let unions: Vec<usize> = sweep.union_sizes().iter().map(|u| u.1).collect();
    let steps: usize = sweep.results.iter().map(|(_, r)| r.as_ref().map_or(0, |r| r.steps.len())).sum();
    let limited: usize = sweep.results.iter().map(|(_, r)| r.as_ref().map_or(0, |r| r.node_limit_steps())).sum();
    let ok = sweep.results.iter().all(|r| r.1.is_ok()) && sweep.monotonicity_violations.is_empty() && limited == 0;
    pass &= ok && nonincreasing(&unions);
    lines.push(format!(
        "planted exact: {steps} step solves, {} violations, unions {unions:?}",
        sweep.monotonicity_violations.len()
    ));

    // desk benchmark: exact on every 20th step of every training condition
    let desk = experiment("desk.conf", None);
    let conds: Vec<&Trajectory> = desk.train.iter().collect();
    let mut cards: BTreeMap<(u64, usize), Vec<(usize, ExactStatus)>> = BTreeMap::new();
    let mut sub_unions = Vec::new();
    for eps in SWEEP {
        let tasks: Vec<(&Trajectory, usize)> =
            conds.iter().flat_map(|tr| (1..=tr.horizon()).step_by(20).map(move |t| (*tr, t))).collect();
        let sols = pool.map(&tasks, &|(tr, t)| {
            let p = assemble_step_problem(&desk.mech, tr, *t, eps, ToleranceMode::Relative).unwrap();
            solve_step_exact(&p, &ExactLimits::default()).unwrap()
        });
        let mut union = BTreeSet::new();
        for ((tr, t), sol) in tasks.iter().zip(sols) {
            if let Some(w) = &sol.w {
                union.extend(w.support());
            }
            cards.entry((tr.condition_id, *t)).or_default().push((sol.cardinality, sol.status));
        }
        sub_unions.push(union.len());
    }
    let optimal = cards.values().filter(|v| v.iter().all(|c| c.1 == ExactStatus::Optimal)).count();
    let bad: Vec<_> = cards
        .iter()
        .filter(|(_, v)| v.iter().all(|c| c.1 == ExactStatus::Optimal))
        .filter(|(_, v)| v.windows(2).any(|w| w[1].0 > w[0].0))
        .map(|(k, _)| *k)
        .collect();
    pass &= bad.is_empty() && optimal == cards.len() && nonincreasing(&sub_unions);
    lines.push(format!(
        "desk exact subsample: {} steps ({optimal} optimal at every epsilon), violations {bad:?}, unions {sub_unions:?}",
        cards.len()
    ));

    // reported only: rounding is a heuristic and carries no monotonicity claim
    let relaxed =
        sweep_epsilon(&desk.mech, &desk.train, &SWEEP, &ReduceConfig::new(0.05, SolverChoice::relaxed()), &pool)
            .unwrap();
    let unions: Vec<usize> = relaxed.union_sizes().iter().map(|u| u.1).collect();
    lines.push(format!("desk relaxed (all steps, informational): unions {unions:?}"));
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let ex = experiment("planted.conf", None);
    let res = reduce(&ex.mech, &ex.train, &ReduceConfig::new(0.05, SolverChoice::exact()), &Sequential).unwrap();
    let dominant: Vec<usize> = (0..8).collect();
    let missing: Vec<usize> = dominant.iter().copied().filter(|i| !res.union_support.contains(i)).collect();
    let others: Vec<usize> = res.union_support.iter().copied().filter(|i| !dominant.contains(i)).collect();

    // ground truth: the planted set is feasible everywhere and the per-step
    // optimum agrees with enumeration
    let mut planted_infeasible = 0;
    let mut oracle_mismatch = 0;
    let mut compared = 0;
    let per_step = res.per_step_supports();
    for tr in &ex.train {
        for t in 1..=tr.horizon() {
            let p = assemble_step_problem(&ex.mech, tr, t, 0.05, ToleranceMode::Relative).unwrap();
            if p.residual_norm_of_support(&dominant) > p.tau + FEAS {
                planted_infeasible += 1;
            }
            if t % 10 == 1 {
                compared += 1;
                let oracle = brute_force_oracle(&p).unwrap();
                if per_step.get(&(tr.condition_id, t)).map(|s| s.len()) != Some(oracle.cardinality) {
                    oracle_mismatch += 1;
                }
            }
        }
    }
    let pass = missing.is_empty() && others.len() <= 4 && planted_infeasible == 0 && oracle_mismatch == 0;
    outcome(
        pass,
        format!(
            "union {:?}, missing dominant {missing:?}, {} others; planted set infeasible at {planted_infeasible} steps; \
             {oracle_mismatch}/{compared} brute-force mismatches",
            res.union_support,
            others.len()
        ),
    )
}

// ---------------------------------------------------------------------------

struct DeskRun {
    result: String,
    support: String,
    validation: String,
}

fn run_desk(out: &Path) -> (DeskRun, String) {
    let c = common("desk.conf", out, Some("0.2"));
    cmd_simulate(&c).unwrap();
    let reduced = cmd_reduce(&c, None).unwrap();
    assert!(!reduced.failed, "reduce failed: {}", reduced.summary);
    let summary = cmd_validate(&c, None).unwrap();
    let result = std::fs::read_to_string(out.join("results/result_eps_0.2.txt")).unwrap();
    let support = result.lines().find(|l| l.starts_with("support=")).unwrap().to_string();
    let validation = std::fs::read_to_string(out.join("validation/holdout_eps_0.2.csv")).unwrap();
    (DeskRun { result, support, validation }, summary)
}

fn criterion_6(out: &Path) -> Outcome {
    let start = Instant::now();
    let (run, _) = run_desk(out);
    let elapsed = start.elapsed();
    let rows: Vec<&str> = run.validation.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    let satisfied = rows.iter().filter(|l| l.ends_with(",true")).count();
    let fraction = satisfied as f64 / rows.len().max(1) as f64;

    let mut curves_ok = true;
    for id in [46, 47] {
        let text =
            std::fs::read_to_string(out.join(format!("validation/curve_eps_0.2_cond_{id}.csv"))).unwrap_or_default();
        let mut body = text.lines().filter(|l| !l.starts_with('#'));
        curves_ok &= body.next() == Some("t,D,bound");
        let points: Vec<Vec<f64>> = body.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        curves_ok &= points.len() == 200 && points.iter().all(|p| p.len() == 3 && p[1] >= 0.0 && p[2] >= 0.0);
    }
    let (_, res) = parse_result(&run.result, "result").unwrap();
    let pass = !rows.is_empty() && fraction >= 0.95 && curves_ok && elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "union {} of 58, holdout {satisfied}/{} satisfied ({:.1}%), curve files {}, {:.2?}",
            res.support.len(),
            rows.len(),
            100.0 * fraction,
            if curves_ok { "ok" } else { "malformed" },
            elapsed
        ),
    )
}

// ---------------------------------------------------------------------------

/// Species split into consumed-only and produced-only groups, so every row of
/// every step matrix has one sign.
fn sign_consistent_case(seed: u64) -> (Mechanism, Vec<Trajectory>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_in = rng.random_range(2..=4usize);
    let n_out = rng.random_range(2..=4usize);
    let names: Vec<String> = (0..n_in + n_out).map(|i| format!("S{i}")).collect();
    let n_rxn = rng.random_range(6..=14usize);
    let reactions: Vec<Reaction> = (0..n_rxn)
        .map(|id| {
            let mut reactants = BTreeMap::new();
            reactants.insert(rng.random_range(0..n_in), 1);
            if rng.random_bool(0.4) {
                *reactants.entry(rng.random_range(0..n_in)).or_insert(0) += 1;
            }
            let mut products = BTreeMap::new();
            products.insert(n_in + rng.random_range(0..n_out), rng.random_range(1..=2u32));
            let k = 10f64.powf(rng.random_range(-2.0..1.0));
            Reaction::new(id, reactants, products, k)
        })
        .collect();
    let mech = Mechanism::new(names, reactions).unwrap();
    let settings = SimulationSettings { dt: 1e-3, horizon: 60, substeps: 1, ..Default::default() };
    let trajectories = (0..3)
        .map(|id| {
            let x0: Vec<f64> = (0..n_in + n_out)
                .map(|s| if s < n_in { rng.random_range(0.5..2.0) } else { rng.random_range(0.0..0.5) })
                .collect();
            simulate_condition(&mech, &Condition::new(id, x0, n_rxn), &settings).unwrap()
        })
        .collect();
    (mech, trajectories)
}

/// `A -> B` and `B -> A` at equal rate constants plus an independent
/// `C -> D`. Condition 0 sits at `A = B`, where the pair cancels; condition
/// 1 starts with almost no `B`, so only `A -> B` is ever selected there.
fn canceling_case() -> (Mechanism, Vec<Trajectory>) {
    let names = ["A", "B", "C", "D"].map(String::from).to_vec();
    let rxn =
        |id, from: usize, to: usize, k| Reaction::new(id, BTreeMap::from([(from, 1)]), BTreeMap::from([(to, 1)]), k);
    let mech = Mechanism::new(names, vec![rxn(0, 0, 1, 1.0), rxn(1, 1, 0, 1.0), rxn(2, 2, 3, 0.5)]).unwrap();
    let settings = SimulationSettings { dt: 1e-3, horizon: 20, substeps: 1, ..Default::default() };
    let conds = [Condition::new(0, vec![1.0, 1.0, 1.0, 0.0], 3), Condition::new(1, vec![1.0, 0.0, 0.0, 0.0], 3)];
    let trajectories = conds.iter().map(|c| simulate_condition(&mech, c, &settings).unwrap()).collect();
    (mech, trajectories)
}

fn criterion_7() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut total_rows = 0;
    let mut total_violations = 0;
    for seed in 0..12 {
        let (mech, trs) = sign_consistent_case(seed);
        for solver in [SolverChoice::exact(), SolverChoice::relaxed()] {
            for eps in SWEEP {
                let res = reduce(&mech, &trs, &ReduceConfig::new(eps, solver.clone()), &Sequential).unwrap();
                let audit = audit_bound(&mech, &trs, &res, eps, ToleranceMode::Relative).unwrap();
                total_rows += audit.rows.len();
                total_violations += audit.violation_count;
            }
        }
    }
    pass &= total_violations == 0 && total_rows > 0;
    lines.push(format!(
        "sign-consistent suite: 12 mechanisms x 2 solvers x 3 epsilons, {total_violations}/{total_rows} rows violated"
    ));

    let (mech, trs) = canceling_case();
    match reduce(&mech, &trs, &ReduceConfig::new(0.05, SolverChoice::exact()), &Sequential) {
        Ok(res) => {
            let audit = audit_bound(&mech, &trs, &res, 0.05, ToleranceMode::Relative).unwrap();
            // recompute the flagged rows independently
            let honest = audit.rows.iter().all(|row| {
                let tr = trs.iter().find(|t| t.condition_id == row.condition_id).unwrap();
                let p = assemble_step_problem(&mech, tr, row.t, 0.05, ToleranceMode::Relative).unwrap();
                let d = p.residual_norm_of_support(&res.support);
                (d - row.d).abs() <= 1e-12 && row.satisfied == (d <= p.tau + FEAS)
            });
            let per_step_ok = res.steps.iter().all(|s| {
                let tr = trs.iter().find(|t| t.condition_id == s.condition_id).unwrap();
                let p = assemble_step_problem(&mech, tr, s.t, 0.05, ToleranceMode::Relative).unwrap();
                p.residual_norm_of_support(&s.support) <= p.tau + FEAS
            });
            pass &= audit.violation_count > 0 && honest && per_step_ok;
            lines.push(format!(
                "canceling pair: union {:?}, {} of {} rows flagged, max D/tau {:.2}, rows recomputed {}",
                res.support,
                audit.violation_count,
                audit.rows.len(),
                audit.max_ratio,
                if honest { "match" } else { "DIFFER" }
            ));
        }
        Err(e) => {
            pass = false;
            lines.push(format!("canceling pair: pipeline error {e}"));
        }
    }
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------------------

fn criterion_8(first_desk: &Path, scratch: &Path) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;

    let mut planted = Vec::new();
    for k in 0..2 {
        let out = scratch.join(format!("planted_{k}"));
        let c = common("planted.conf", &out, None);
        cmd_simulate(&c).unwrap();
        let reduced = cmd_reduce(&c, None).unwrap();
        assert!(!reduced.failed);
        planted.push(std::fs::read(out.join("results/result_eps_0.05.txt")).unwrap());
    }
    let same = planted[0] == planted[1];
    pass &= same;
    lines.push(format!("planted result files {}", if same { "identical" } else { "DIFFER" }));

    let (again, _) = run_desk(&scratch.join("desk_again"));
    let first_result = std::fs::read_to_string(first_desk.join("results/result_eps_0.2.txt")).unwrap();
    let first_validation = std::fs::read_to_string(first_desk.join("validation/holdout_eps_0.2.csv")).unwrap();
    let first_support = first_result.lines().find(|l| l.starts_with("support=")).unwrap();
    let same = first_result == again.result && first_validation == again.validation && first_support == again.support;
    pass &= same;
    lines.push(format!("desk result and holdout files {}", if same { "identical" } else { "DIFFER" }));
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------------------

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let desk = scratch.path().join("desk");
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("exact solver matches brute force", Box::new(criterion_1)),
        ("relaxation sandwich", Box::new(criterion_2)),
        ("noiseless consistency", Box::new(criterion_3)),
        ("epsilon monotonicity", Box::new(criterion_4)),
        ("planted support recovery", Box::new(criterion_5)),
        ("desk-scale replication", Box::new(|| criterion_6(&desk))),
        ("audit honesty", Box::new(criterion_7)),
        ("determinism", Box::new(|| criterion_8(&desk, scratch.path()))),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} ({}) [{:.1?}]",
            k + 1,
            name,
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
