//! Exact minimum-cardinality selection by branch-and-bound.
//!
//! The search runs in two phases. Phase one is a best-first branch-and-bound
//! on the box relaxation (see [`crate::relaxed`]) that proves the optimal
//! cardinality `k*`. Phase two walks supports of size `k*` in lexicographic
//! order, pruned by the same relaxation, so that the returned support is the
//! lexicographically smallest optimum, the same rule the brute-force oracle
//! applies.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::relaxed::{default_theta_grid, solve_relaxed_fixed, Fix, RelaxedSettings, RelaxedStatus};
use crate::selection::{SelectionOrigin, SelectionVector, StepProblem, DEFAULT_FEAS_TOL};

/// Largest instance the enumeration oracle accepts.
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactStatus {
    /// The cardinality is proven minimal.
    Optimal,
    Infeasible,
    /// The search stopped before the cardinality was proven.
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactLimits {
    pub node_limit: usize,
    pub feas_tol: f64,
    /// Record every node in [`ExactSolution::trace`].
    pub trace: bool,
}

impl Default for ExactLimits {
    fn default() -> Self {
        Self { node_limit: 100_000, feas_tol: DEFAULT_FEAS_TOL, trace: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceNode {
    pub node: usize,
    pub phase: u8,
    pub lower_bound: f64,
    pub fixed_one: Vec<usize>,
    pub fixed_zero: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    /// Best binary selection found; `None` when no feasible support is known.
    pub w: Option<SelectionVector>,
    pub cardinality: usize,
    pub status: ExactStatus,
    pub nodes_explored: usize,
    /// Incumbent cardinality minus the best proven bound.
    pub gap: f64,
    /// Certified relaxation bound at the root.
    pub root_bound: f64,
    /// `w` is the lexicographically smallest optimal support. False when the
    /// tie-break search ran out of nodes.
    pub lex_minimal: bool,
    pub trace: Vec<TraceNode>,
}

impl ExactSolution {
    pub fn support(&self) -> Vec<usize> {
        self.w.as_ref().map(|w| w.support()).unwrap_or_default()
    }
}

/// Forward selection from `start`: keep adding the allowed reaction whose
/// inclusion gives the smallest residual until the tolerance is met.
pub(crate) fn greedy_complete(
    p: &StepProblem,
    start: Vec<usize>,
    allowed: &[bool],
    feas_tol: f64,
) -> Option<Vec<usize>> {
    let m = p.n_species();
    let mut in_set = vec![false; p.n_reactions()];
    let mut r = p.b.clone();
    let mut set = start;
    for &i in &set {
        in_set[i] = true;
        for (s, rs) in r.iter_mut().enumerate() {
            *rs -= p.a.get(s, i);
        }
    }
    let mut trial = vec![0.0; m];
    loop {
        if norm2(&r) <= p.tau + feas_tol {
            return Some(drop_redundant(p, set, feas_tol));
        }
        let mut best: Option<(f64, usize)> = None;
        for j in 0..p.n_reactions() {
            if in_set[j] || !allowed[j] {
                continue;
            }
            for (s, ts) in trial.iter_mut().enumerate() {
                *ts = r[s] - p.a.get(s, j);
            }
            let d = norm2(&trial);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        let (_, j) = best?;
        in_set[j] = true;
        set.push(j);
        for (s, rs) in r.iter_mut().enumerate() {
            *rs -= p.a.get(s, j);
        }
    }
}

/// Backward elimination: repeatedly removes the reaction whose removal
/// leaves the smallest residual, as long as the tolerance still holds.
pub(crate) fn drop_redundant(p: &StepProblem, mut set: Vec<usize>, feas_tol: f64) -> Vec<usize> {
    set.sort_unstable();
    let m = p.n_species();
    let mut r = p.b.clone();
    for &i in &set {
        for (s, rs) in r.iter_mut().enumerate() {
            *rs -= p.a.get(s, i);
        }
    }
    let mut trial = vec![0.0; m];
    loop {
        let mut best: Option<(f64, usize)> = None;
        for (k, &i) in set.iter().enumerate() {
            for (s, ts) in trial.iter_mut().enumerate() {
                *ts = r[s] + p.a.get(s, i);
            }
            let d = norm2(&trial);
            if d <= p.tau + feas_tol && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, k));
            }
        }
        let Some((_, k)) = best else { return set };
        let i = set.remove(k);
        for (s, rs) in r.iter_mut().enumerate() {
            *rs += p.a.get(s, i);
        }
    }
}

/// Greedy upper bound; `None` if the full mechanism misses the tolerance.
pub fn greedy_incumbent(p: &StepProblem) -> Option<SelectionVector> {
    let allowed: Vec<bool> = p.zero_columns().iter().map(|z| !z).collect();
    let s = greedy_complete(p, Vec::new(), &allowed, DEFAULT_FEAS_TOL)?;
    SelectionVector::from_support(p.n_reactions(), &s, SelectionOrigin::Exact).ok()
}

/// Enumerates every support by increasing size, each size in lexicographic
/// order, and returns the first feasible one.
pub fn brute_force_oracle(p: &StepProblem) -> Result<ExactSolution> {
    brute_force_oracle_with(p, DEFAULT_FEAS_TOL)
}

pub fn brute_force_oracle_with(p: &StepProblem, feas_tol: f64) -> Result<ExactSolution> {
    let n = p.n_reactions();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { n_reactions: n, limit: BRUTE_FORCE_LIMIT });
    }
    let mut visited = 0usize;
    for k in 0..=n {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            visited += 1;
            if p.residual_norm_of_support(&combo) <= p.tau + feas_tol {
                let w = SelectionVector::from_support(n, &combo, SelectionOrigin::Exact)?;
                return Ok(ExactSolution {
                    w: Some(w),
                    cardinality: k,
                    status: ExactStatus::Optimal,
                    nodes_explored: visited,
                    gap: 0.0,
                    root_bound: f64::NAN,
                    lex_minimal: true,
                    trace: Vec::new(),
                });
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }
    Ok(ExactSolution {
        w: None,
        cardinality: 0,
        status: ExactStatus::Infeasible,
        nodes_explored: visited,
        gap: 0.0,
        root_bound: f64::NAN,
        lex_minimal: true,
        trace: Vec::new(),
    })
}

/// Advances `combo` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

struct Node {
    bound: usize,
    lower_bound: f64,
    id: usize,
    fixes: Vec<Fix>,
    branch_var: Option<usize>,
    lambda: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first, then oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other.lower_bound.total_cmp(&self.lower_bound).then_with(|| other.id.cmp(&self.id))
    }
}

enum Eval {
    /// The fixed-to-one set is itself feasible.
    Integral(Vec<usize>),
    Pruned,
    Open {
        lower_bound: f64,
        bound: usize,
        branch_var: Option<usize>,
        lambda: f64,
        heuristic: Option<Vec<usize>>,
    },
}

struct Search<'a> {
    p: &'a StepProblem,
    limits: &'a ExactLimits,
    relax: RelaxedSettings,
    grid: Vec<f64>,
    nodes: usize,
    trace: Vec<TraceNode>,
}

const BOUND_MARGIN: f64 = 1e-6;

fn lex_less(a: &[usize], b: &[usize]) -> bool {
    (a.len(), a) < (b.len(), b)
}

impl Search<'_> {
    fn record(&mut self, phase: u8, lower_bound: f64, fixes: &[Fix]) {
        if self.limits.trace {
            let fixed_one = fixes.iter().enumerate().filter(|(_, f)| **f == Fix::One).map(|(i, _)| i).collect();
            let fixed_zero = fixes.iter().enumerate().filter(|(_, f)| **f == Fix::Zero).map(|(i, _)| i).collect();
            self.trace.push(TraceNode { node: self.nodes, phase, lower_bound, fixed_one, fixed_zero });
        }
    }

    fn evaluate(&mut self, fixes: &[Fix], lambda_hint: f64, phase: u8, cutoff: Option<f64>) -> Eval {
        self.nodes += 1;
        let ones: Vec<usize> = fixes.iter().enumerate().filter(|(_, f)| **f == Fix::One).map(|(i, _)| i).collect();
        if self.p.residual_norm_of_support(&ones) <= self.p.tau + self.limits.feas_tol {
            self.record(phase, ones.len() as f64, fixes);
            return Eval::Integral(ones);
        }
        if !fixes.contains(&Fix::Free) {
            self.record(phase, f64::INFINITY, fixes);
            return Eval::Pruned;
        }
        let settings = RelaxedSettings { lambda_hint: Some(lambda_hint), cutoff, ..self.relax.clone() };
        let sol = solve_relaxed_fixed(self.p, fixes, &settings);
        self.record(phase, sol.lower_bound, fixes);
        if sol.lower_bound.is_infinite() {
            return Eval::Pruned;
        }
        let lb = sol.lower_bound.max(ones.len() as f64);
        let bound = libm::ceil(lb - BOUND_MARGIN).max(0.0) as usize;
        let w = sol.w.weights();

        // cheap incumbent: threshold the relaxed weights over the free variables
        let mut heuristic: Option<Vec<usize>> = None;
        if sol.status != RelaxedStatus::Infeasible {
            for &theta in &self.grid {
                let s: Vec<usize> = (0..w.len())
                    .filter(|&i| fixes[i] == Fix::One || (fixes[i] == Fix::Free && w[i] >= theta))
                    .collect();
                if heuristic.as_ref().is_some_and(|h| h.len() <= s.len()) {
                    continue;
                }
                if self.p.residual_norm_of_support(&s) <= self.p.tau + self.limits.feas_tol {
                    heuristic = Some(drop_redundant(self.p, s, self.limits.feas_tol));
                }
            }
        }

        let mut branch_var = None;
        let mut best_dist = f64::INFINITY;
        for (i, f) in fixes.iter().enumerate() {
            if *f != Fix::Free {
                continue;
            }
            let d = (w[i] - 0.5).abs();
            if w[i] > 0.0 && w[i] < 1.0 && d < best_dist {
                best_dist = d;
                branch_var = Some(i);
            }
        }
        if branch_var.is_none() {
            branch_var = (0..fixes.len())
                .filter(|&i| fixes[i] == Fix::Free)
                .max_by(|&a, &b| w[a].total_cmp(&w[b]).then_with(|| b.cmp(&a)));
        }
        Eval::Open { lower_bound: lb, bound, branch_var, lambda: sol.lambda, heuristic }
    }
}

/// Solves `min |w|_0 s.t. ||b - A w||_2 <= tau` over binary `w`.
pub fn solve_step_exact(p: &StepProblem, limits: &ExactLimits) -> Result<ExactSolution> {
    p.check_solvable()?;
    if limits.node_limit == 0 {
        return Err(Error::InvalidArgument("node limit must be at least 1".into()));
    }
    let n = p.n_reactions();
    let zero = p.zero_columns();
    let mut search = Search {
        p,
        limits,
        relax: RelaxedSettings { tol: 1e-7, max_iter: 5_000, feas_tol: limits.feas_tol, ..RelaxedSettings::default() },
        grid: default_theta_grid(),
        nodes: 0,
        trace: Vec::new(),
    };
    let root_fixes: Vec<Fix> = zero.iter().map(|z| if *z { Fix::Zero } else { Fix::Free }).collect();

    let allowed: Vec<bool> = zero.iter().map(|z| !z).collect();
    let mut incumbent: Option<Vec<usize>> = greedy_complete(p, Vec::new(), &allowed, limits.feas_tol);
    let offer = |inc: &mut Option<Vec<usize>>, cand: Vec<usize>| {
        if inc.as_ref().is_none_or(|c| lex_less(&cand, c)) {
            *inc = Some(cand);
        }
    };

    // Phase 1: best-first search for the optimal cardinality.
    let root_bound;
    let mut open_bound = f64::INFINITY;
    let mut hit_limit = false;
    let mut heap = BinaryHeap::new();
    match search.evaluate(&root_fixes, 1.0, 1, None) {
        Eval::Integral(s) => {
            root_bound = s.len() as f64;
            offer(&mut incumbent, s);
        }
        Eval::Pruned => root_bound = f64::INFINITY,
        Eval::Open { lower_bound, bound, branch_var, lambda, heuristic } => {
            root_bound = lower_bound;
            if let Some(h) = heuristic {
                offer(&mut incumbent, h);
            }
            heap.push(Node { bound, lower_bound, id: 0, fixes: root_fixes.clone(), branch_var, lambda });
        }
    }
    let mut next_id = 1;
    while let Some(node) = heap.pop() {
        if incumbent.as_ref().is_some_and(|c| node.bound >= c.len()) {
            continue;
        }
        if search.nodes >= limits.node_limit {
            open_bound = open_bound.min(node.lower_bound);
            hit_limit = true;
            break;
        }
        let Some(var) = node.branch_var else { continue };
        for value in [Fix::One, Fix::Zero] {
            let mut fixes = node.fixes.clone();
            fixes[var] = value;
            // a bound of len - 1 + margin already prunes the child
            let cutoff = incumbent.as_ref().map(|c| c.len() as f64 - 1.0 + 2.0 * BOUND_MARGIN);
            match search.evaluate(&fixes, node.lambda, 1, cutoff) {
                Eval::Integral(s) => offer(&mut incumbent, s),
                Eval::Pruned => {}
                Eval::Open { lower_bound, bound, branch_var, lambda, heuristic } => {
                    if let Some(h) = heuristic {
                        offer(&mut incumbent, h);
                    }
                    if incumbent.as_ref().is_none_or(|c| bound < c.len()) {
                        heap.push(Node { bound, lower_bound, id: next_id, fixes, branch_var, lambda });
                        next_id += 1;
                    }
                }
            }
        }
    }
    if hit_limit {
        for node in heap.iter() {
            open_bound = open_bound.min(node.lower_bound);
        }
    }

    let Some(best) = incumbent else {
        let status = if hit_limit { ExactStatus::NodeLimit } else { ExactStatus::Infeasible };
        return Ok(ExactSolution {
            w: None,
            cardinality: 0,
            status,
            nodes_explored: search.nodes,
            gap: if hit_limit { f64::INFINITY } else { 0.0 },
            root_bound,
            lex_minimal: !hit_limit,
            trace: search.trace,
        });
    };
    if hit_limit {
        let proven = libm::ceil(open_bound - BOUND_MARGIN).max(0.0);
        let gap = (best.len() as f64 - proven).max(0.0);
        return Ok(ExactSolution {
            w: Some(SelectionVector::from_support(n, &best, SelectionOrigin::Exact)?),
            cardinality: best.len(),
            status: if gap == 0.0 { ExactStatus::Optimal } else { ExactStatus::NodeLimit },
            nodes_explored: search.nodes,
            gap,
            root_bound,
            lex_minimal: false,
            trace: search.trace,
        });
    }

    // Phase 2: lexicographically smallest support of the optimal size, on a
    // tenth of the node budget.
    let budget = search.nodes + (limits.node_limit / 10).max(1);
    let (best, complete) = lex_refine(&mut search, &root_fixes, best, budget);
    Ok(ExactSolution {
        cardinality: best.len(),
        w: Some(SelectionVector::from_support(n, &best, SelectionOrigin::Exact)?),
        status: ExactStatus::Optimal,
        nodes_explored: search.nodes,
        gap: 0.0,
        root_bound,
        lex_minimal: complete,
        trace: search.trace,
    })
}

/// Depth-first include-first walk over reaction ids. Visiting order equals
/// lexicographic order of the resulting supports, so the first feasible leaf
/// is the answer and any node whose smallest completion is not below the
/// incumbent ends the walk.
fn lex_refine(search: &mut Search<'_>, root_fixes: &[Fix], incumbent: Vec<usize>, budget: usize) -> (Vec<usize>, bool) {
    let k = incumbent.len();
    let n = root_fixes.len();
    let best = incumbent;
    // explicit stack of (fixes, next index to decide, lambda)
    let mut stack = vec![(root_fixes.to_vec(), 0usize, 1.0f64)];
    while let Some((fixes, idx, lambda)) = stack.pop() {
        let ones: Vec<usize> = (0..idx).filter(|&i| fixes[i] == Fix::One).collect();
        if ones.len() > k {
            continue;
        }
        let free: Vec<usize> = (idx..n).filter(|&i| fixes[i] == Fix::Free).collect();
        let need = k - ones.len();
        if free.len() < need {
            continue;
        }
        let mut smallest = ones.clone();
        smallest.extend_from_slice(&free[..need]);
        if !lex_less(&smallest, &best) {
            // every later node in the walk completes to a larger support
            return (best, true);
        }
        if search.nodes >= budget {
            return (best, false);
        }
        if need == 0 {
            search.nodes += 1;
            if search.p.residual_norm_of_support(&ones) <= search.p.tau + search.limits.feas_tol {
                return (ones, true);
            }
            continue;
        }
        // restrict the remaining free variables to those not yet decided
        let mut node_fixes = fixes.clone();
        for f in node_fixes.iter_mut().take(idx) {
            if *f == Fix::Free {
                *f = Fix::Zero;
            }
        }
        let mut child_lambda = lambda;
        if idx > 0 {
            match search.evaluate(&node_fixes, lambda, 2, Some(k as f64 + 2.0 * BOUND_MARGIN)) {
                Eval::Integral(s) => {
                    // a feasible set of at most k ones is optimal; it is only
                    // reachable here with exactly k elements
                    if s.len() == k && lex_less(&s, &best) {
                        return (s, true);
                    }
                    continue;
                }
                Eval::Pruned => continue,
                Eval::Open { bound, lambda, .. } => {
                    if bound > k {
                        continue;
                    }
                    child_lambda = lambda;
                }
            }
        }
        let next = free[0];
        let mut exclude = node_fixes.clone();
        exclude[next] = Fix::Zero;
        let mut include = node_fixes;
        include[next] = Fix::One;
        // LIFO: push exclude first so include is explored first
        stack.push((exclude, next + 1, child_lambda));
        stack.push((include, next + 1, child_lambda));
    }
    (best, true)
}
