//! Box relaxation of the selection problem and rounding back to binary.
//!
//! The relaxation `min sum(w) s.t. ||b - A w||_2 <= tau, 0 <= w <= 1` is
//! solved through its Lagrangian in the squared constraint: for a multiplier
//! `lambda >= 0` the inner problem
//!
//! ```text
//! min_{w in box}  sum(w) + lambda * (||b - A w||^2 - tau^2)
//! ```
//!
//! is a box-constrained convex quadratic, minimised here by cyclic exact
//! coordinate descent. The constraint residual is monotone in `lambda`, so
//! `lambda` is bracketed by doubling and then bisected until the residual
//! meets `tau`.
//!
//! Every inner solve also yields a certified lower bound on the relaxed
//! optimum: the Lagrangian value minus the Frank-Wolfe gap of the inner
//! iterate. Branch-and-bound prunes on that bound only, so an inexact inner
//! solve can weaken pruning but never make it wrong.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::exact::{drop_redundant, greedy_complete, solve_step_exact, ExactLimits};
use crate::linalg::{dot, norm2};
use crate::selection::{SelectionOrigin, SelectionVector, StepProblem, DEFAULT_FEAS_TOL};

/// Per-variable restriction imposed by a caller such as branch-and-bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fix {
    Free,
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxedStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSettings {
    /// Inner stationarity and outer residual-matching tolerance (scaled units).
    pub tol: f64,
    /// Coordinate-descent sweeps allowed per multiplier value.
    pub max_iter: usize,
    /// Absolute slack on the norm constraint.
    pub feas_tol: f64,
    /// Doubling stops once `lambda` exceeds this (scaled units).
    pub lambda_cap: f64,
    /// Maximum number of bisection steps.
    pub max_bisections: usize,
    /// Starting multiplier; 1 when absent.
    pub lambda_hint: Option<f64>,
    /// Stop as soon as the certified lower bound reaches this value. The
    /// result then has status `MaxIter` and its point is not a solution.
    pub cutoff: Option<f64>,
}

impl Default for RelaxedSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100_000,
            feas_tol: DEFAULT_FEAS_TOL,
            lambda_cap: 1e12,
            max_bisections: 200,
            lambda_hint: None,
            cutoff: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub w: SelectionVector,
    /// `sum(w)` including variables fixed to one.
    pub objective: f64,
    /// Projected-gradient norm of the Lagrangian plus the constraint
    /// complementarity residual, in scaled units.
    pub kkt_residual: f64,
    /// Total coordinate-descent sweeps.
    pub iterations: usize,
    pub status: RelaxedStatus,
    /// Certified lower bound on the relaxed optimum (`+inf` when the
    /// relaxation is certified infeasible).
    pub lower_bound: f64,
    /// Final multiplier in scaled units.
    pub lambda: f64,
}

/// Solves the relaxation of `p` with default settings other than `tol` and `max_iter`.
pub fn solve_step_relaxed(p: &StepProblem, tol: f64, max_iter: usize) -> Result<RelaxedSolution> {
    p.check_solvable()?;
    let settings = RelaxedSettings { tol, max_iter, ..RelaxedSettings::default() };
    Ok(solve_relaxed_fixed(p, &vec![Fix::Free; p.n_reactions()], &settings))
}

struct Inner<'a> {
    cols: &'a [Vec<f64>],
    col_sq: &'a [f64],
    b: &'a [f64],
    tau: f64,
}

struct InnerResult {
    w: Vec<f64>,
    r: Vec<f64>,
    sweeps: usize,
    pg: f64,
    converged: bool,
    /// Certified lower bound on `min_box L(w, lambda)`.
    dual_value: f64,
}

impl Inner<'_> {
    fn residual(&self, w: &[f64]) -> Vec<f64> {
        let mut r = self.b.to_vec();
        for (c, wi) in self.cols.iter().zip(w) {
            if *wi != 0.0 {
                for (rs, cs) in r.iter_mut().zip(c) {
                    *rs -= cs * wi;
                }
            }
        }
        r
    }

    fn projected_gradient(&self, lambda: f64, w: &[f64], r: &[f64]) -> (f64, Vec<f64>) {
        let mut pg: f64 = 0.0;
        let mut grads = Vec::with_capacity(w.len());
        for (c, wi) in self.cols.iter().zip(w) {
            let g = 1.0 - 2.0 * lambda * dot(c, r);
            let p = if *wi <= 0.0 {
                g.min(0.0)
            } else if *wi >= 1.0 {
                g.max(0.0)
            } else {
                g
            };
            pg = pg.max(p.abs());
            grads.push(g);
        }
        (pg, grads)
    }

    fn solve(&self, lambda: f64, mut w: Vec<f64>, tol: f64, max_sweeps: usize) -> InnerResult {
        let mut r = self.residual(&w);
        // round-off in 1 - 2 lambda a.r grows with lambda
        let pg_tol = tol.max(1e-14 * lambda);
        let mut sweeps = 0;
        let mut converged = false;
        if lambda > 0.0 {
            while sweeps < max_sweeps {
                sweeps += 1;
                let mut worst: f64 = 0.0;
                for (i, c) in self.cols.iter().enumerate() {
                    let h = 2.0 * lambda * self.col_sq[i];
                    let g = 1.0 - 2.0 * lambda * dot(c, &r);
                    let wi = w[i];
                    let pg = if wi <= 0.0 {
                        g.min(0.0)
                    } else if wi >= 1.0 {
                        g.max(0.0)
                    } else {
                        g
                    };
                    worst = worst.max(pg.abs());
                    if pg == 0.0 {
                        continue;
                    }
                    let next = if h > 0.0 { (wi - g / h).clamp(0.0, 1.0) } else { 0.0 };
                    let step = next - wi;
                    if step != 0.0 {
                        for (rs, cs) in r.iter_mut().zip(c) {
                            *rs -= cs * step;
                        }
                        w[i] = next;
                    }
                }
                if worst <= pg_tol {
                    converged = true;
                    break;
                }
                // refresh the residual now and then to stop drift
                if sweeps % 64 == 0 {
                    r = self.residual(&w);
                }
            }
        } else {
            w.iter_mut().for_each(|v| *v = 0.0);
            converged = true;
        }
        r = self.residual(&w);
        let (pg, grads) = self.projected_gradient(lambda, &w, &r);
        let rho2 = dot(&r, &r);
        let value = w.iter().sum::<f64>() + lambda * (rho2 - self.tau * self.tau);
        let fw_gap: f64 = grads.iter().zip(&w).map(|(g, wi)| if *g < 0.0 { g * (wi - 1.0) } else { g * wi }).sum();
        InnerResult { w, r, sweeps, pg, converged: converged || pg <= pg_tol, dual_value: value - fw_gap.max(0.0) }
    }
}

/// Solves the relaxation with some variables pinned by `fixes`.
///
/// Pinned variables keep their value; zero columns are left at zero.
pub fn solve_relaxed_fixed(p: &StepProblem, fixes: &[Fix], settings: &RelaxedSettings) -> RelaxedSolution {
    let n = p.n_reactions();
    assert_eq!(fixes.len(), n, "one fix per reaction");
    let mut b_reduced = p.b.clone();
    let mut base = 0.0;
    let mut free = Vec::new();
    for (i, f) in fixes.iter().enumerate() {
        match f {
            Fix::One => {
                base += 1.0;
                for (s, bs) in b_reduced.iter_mut().enumerate() {
                    *bs -= p.a.get(s, i);
                }
            }
            Fix::Free => {
                if (0..p.n_species()).any(|s| p.a.get(s, i) != 0.0) {
                    free.push(i);
                }
            }
            Fix::Zero => {}
        }
    }

    let assemble = |w_free: &[f64]| -> Vec<f64> {
        let mut w: Vec<f64> = fixes.iter().map(|f| if *f == Fix::One { 1.0 } else { 0.0 }).collect();
        for (k, &i) in free.iter().enumerate() {
            w[i] = w_free[k];
        }
        w
    };

    let b_norm = norm2(&b_reduced);
    let col_norms: Vec<f64> = free.iter().map(|&i| norm2(&p.a.column(i))).collect();
    let scale = col_norms.iter().fold(b_norm.max(p.tau), |m, v| m.max(*v));

    let finish = |w_free: &[f64], status, kkt, iterations, lower_bound: f64, lambda| {
        let w = assemble(w_free);
        let objective: f64 = w.iter().sum();
        let lower_bound = if lower_bound.is_finite() && lower_bound > objective { objective } else { lower_bound };
        RelaxedSolution {
            w: SelectionVector::fractional(w, SelectionOrigin::Relaxed).expect("box-feasible iterate"),
            objective,
            kkt_residual: kkt,
            iterations,
            status,
            lower_bound,
            lambda,
        }
    };

    // Leaving every free variable at zero already satisfies the constraint.
    if b_norm <= p.tau || scale == 0.0 {
        return finish(&vec![0.0; free.len()], RelaxedStatus::Converged, 0.0, 0, base, 0.0);
    }
    if free.is_empty() {
        let status =
            if b_norm <= p.tau + settings.feas_tol { RelaxedStatus::Converged } else { RelaxedStatus::Infeasible };
        let lb = if status == RelaxedStatus::Infeasible { f64::INFINITY } else { base };
        return finish(&[], status, 0.0, 0, lb, 0.0);
    }

    let cols: Vec<Vec<f64>> = free.iter().map(|&i| p.a.column(i).iter().map(|v| v / scale).collect()).collect();
    let col_sq: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    let b_scaled: Vec<f64> = b_reduced.iter().map(|v| v / scale).collect();
    let tau = p.tau / scale;
    let feas = settings.feas_tol / scale;
    let inner = Inner { cols: &cols, col_sq: &col_sq, b: &b_scaled, tau };
    let n_free = free.len() as f64;

    let mut iterations = 0usize;
    let mut best_lb: f64 = 0.0;
    let mut all_converged = true;
    let mut eval = |lambda: f64, warm: Vec<f64>, iterations: &mut usize, best_lb: &mut f64| -> (InnerResult, f64) {
        let res = inner.solve(lambda, warm, settings.tol, settings.max_iter);
        *iterations += res.sweeps;
        *best_lb = best_lb.max(res.dual_value);
        all_converged &= res.converged;
        let rho = norm2(&res.r);
        (res, rho)
    };
    let certified_infeasible = |lb: f64| lb > n_free * (1.0 + 1e-9) + 1e-9;
    let cut = |lb: f64| settings.cutoff.is_some_and(|c| base + lb >= c);

    // Bracket: hi is feasible, lo is not.
    let start = settings.lambda_hint.filter(|l| l.is_finite() && *l > 0.0).unwrap_or(1.0);
    let (mut first, rho_first) = eval(start, vec![0.0; free.len()], &mut iterations, &mut best_lb);
    if cut(best_lb) {
        let mut out = finish(&first.w, RelaxedStatus::MaxIter, first.pg, iterations, base + best_lb, start);
        out.lower_bound = base + best_lb;
        return out;
    }
    let (mut lo, mut hi);
    let (mut lo_lambda, mut hi_lambda);
    if rho_first > tau {
        lo_lambda = start;
        let mut lambda = start;
        loop {
            lambda *= 2.0;
            let warm = first.w.clone();
            let (res, rho) = eval(lambda, warm, &mut iterations, &mut best_lb);
            if certified_infeasible(best_lb) {
                return finish(&res.w, RelaxedStatus::Infeasible, res.pg, iterations, f64::INFINITY, lambda);
            }
            if cut(best_lb) {
                let mut out = finish(&res.w, RelaxedStatus::MaxIter, res.pg, iterations, base + best_lb, lambda);
                out.lower_bound = base + best_lb;
                return out;
            }
            if rho <= tau {
                hi = res;
                hi_lambda = lambda;
                lo = first;
                break;
            }
            if lambda > settings.lambda_cap {
                return finish(&res.w, RelaxedStatus::Infeasible, res.pg, iterations, base + best_lb, lambda);
            }
            lo_lambda = lambda;
            first = res;
        }
    } else {
        hi_lambda = start;
        let mut lambda = start;
        let mut found = None;
        for _ in 0..60 {
            lambda *= 0.5;
            let (res, rho) = eval(lambda, first.w.clone(), &mut iterations, &mut best_lb);
            if cut(best_lb) {
                let mut out = finish(&first.w, RelaxedStatus::MaxIter, res.pg, iterations, base + best_lb, hi_lambda);
                out.lower_bound = base + best_lb;
                return out;
            }
            if rho > tau {
                found = Some((res, lambda));
                break;
            }
            hi_lambda = lambda;
            first = res;
        }
        hi = first;
        match found {
            Some((res, lambda)) => {
                lo = res;
                lo_lambda = lambda;
            }
            None => {
                let (res, _) = eval(0.0, vec![0.0; free.len()], &mut iterations, &mut best_lb);
                lo = res;
                lo_lambda = 0.0;
            }
        }
    }

    // Bisect on the residual.
    let band = settings.tol * tau.max(1.0);
    let accept = |rho: f64| rho <= tau + feas.min(band) && rho >= tau - band;
    let mut final_state: Option<(Vec<f64>, f64)> = None;
    if accept(norm2(&hi.r)) {
        final_state = Some((hi.w.clone(), hi_lambda));
    }
    let mut bisections = 0;
    while final_state.is_none() && bisections < settings.max_bisections {
        bisections += 1;
        let mid = if lo_lambda > 0.0 && hi_lambda / lo_lambda > 4.0 {
            libm::sqrt(lo_lambda * hi_lambda)
        } else {
            0.5 * (lo_lambda + hi_lambda)
        };
        if mid <= lo_lambda || mid >= hi_lambda {
            break;
        }
        let (res, rho) = eval(mid, hi.w.clone(), &mut iterations, &mut best_lb);
        if cut(best_lb) && !accept(rho) {
            let mut out = finish(&hi.w, RelaxedStatus::MaxIter, res.pg, iterations, base + best_lb, hi_lambda);
            out.lower_bound = base + best_lb;
            return out;
        }
        if accept(rho) {
            final_state = Some((res.w, mid));
            break;
        }
        if rho > tau {
            lo = res;
            lo_lambda = mid;
        } else {
            hi = res;
            hi_lambda = mid;
        }
    }
    let (w_free, lambda) = match final_state {
        Some(state) => state,
        None => (interpolate(&hi, &lo, tau), hi_lambda),
    };

    let r = inner.residual(&w_free);
    let (pg, _) = inner.projected_gradient(lambda, &w_free, &r);
    let rho = norm2(&r);
    let slack = if lambda > 0.0 { (rho - tau).abs() } else { (rho - tau).max(0.0) };
    let kkt = pg.max(slack);
    let feasible = rho <= tau + feas;
    let status = if !feasible || !all_converged {
        RelaxedStatus::MaxIter
    } else if kkt <= band.max(1e-14 * lambda) {
        RelaxedStatus::Converged
    } else {
        RelaxedStatus::MaxIter
    };
    finish(&w_free, status, kkt, iterations, base + best_lb, lambda)
}

/// Point on the segment from the feasible iterate `hi` towards the
/// infeasible `lo` where the residual reaches `tau`.
fn interpolate(hi: &InnerResult, lo: &InnerResult, tau: f64) -> Vec<f64> {
    let d: Vec<f64> = lo.r.iter().zip(&hi.r).map(|(l, h)| l - h).collect();
    let qa = dot(&d, &d);
    let qb = 2.0 * dot(&hi.r, &d);
    let qc = dot(&hi.r, &hi.r) - tau * tau;
    let theta = if qa > 0.0 {
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        ((-qb + libm::sqrt(disc)) / (2.0 * qa)).clamp(0.0, 1.0) * (1.0 - 1e-12)
    } else {
        0.0
    };
    hi.w.iter().zip(&lo.w).map(|(h, l)| (h + theta * (l - h)).clamp(0.0, 1.0)).collect()
}

/// Default threshold grid `0.9, 0.8, ..., 0.1`.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=9).rev().map(|k| k as f64 / 10.0).collect()
}

/// Rounds fractional weights by scanning thresholds, keeping the smallest
/// feasible support after backward elimination; falls back to greedy
/// completion of the lowest-threshold support.
pub fn round_threshold(w: &SelectionVector, p: &StepProblem, theta_grid: &[f64]) -> Result<SelectionVector> {
    round_threshold_with(w, p, theta_grid, DEFAULT_FEAS_TOL)
}

pub fn round_threshold_with(
    w: &SelectionVector,
    p: &StepProblem,
    theta_grid: &[f64],
    feas_tol: f64,
) -> Result<SelectionVector> {
    check_len(w, p)?;
    if let Some(t) = theta_grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidArgument(alloc::format!("threshold {t} outside (0, 1)")));
    }
    let zero = p.zero_columns();
    let support_at = |theta: f64| -> Vec<usize> {
        w.weights().iter().enumerate().filter(|(i, v)| **v >= theta && !zero[*i]).map(|(i, _)| i).collect()
    };
    let mut best: Option<Vec<usize>> = None;
    for &theta in theta_grid {
        let s = support_at(theta);
        if p.residual_norm_of_support(&s) <= p.tau + feas_tol {
            let s = drop_redundant(p, s, feas_tol);
            if best.as_ref().is_none_or(|b| s.len() < b.len()) {
                best = Some(s);
            }
        }
    }
    // the grid never contains 1, so check the integral part directly too
    if best.is_none() && theta_grid.is_empty() {
        let s = support_at(1.0);
        if p.residual_norm_of_support(&s) <= p.tau + feas_tol {
            best = Some(s);
        }
    }
    let support = match best {
        Some(s) => s,
        None => {
            let lowest = theta_grid.iter().copied().fold(f64::INFINITY, f64::min);
            let start = if lowest.is_finite() { support_at(lowest) } else { support_at(1.0) };
            let allowed: Vec<bool> = zero.iter().map(|z| !z).collect();
            match greedy_complete(p, start, &allowed, feas_tol)
                .or_else(|| greedy_complete(p, Vec::new(), &allowed, feas_tol))
            {
                Some(s) => s,
                // only reachable when the full mechanism misses the tolerance
                None => {
                    let limits = ExactLimits { feas_tol, ..ExactLimits::default() };
                    let exact = solve_step_exact(p, &limits)?;
                    if exact.w.is_none() {
                        return Err(Error::Infeasible { condition_id: p.condition_id, t: p.t });
                    }
                    exact.support()
                }
            }
        }
    };
    SelectionVector::from_support(p.n_reactions(), &support, SelectionOrigin::RoundedThreshold)
}

/// Bernoulli rounding: draws `draws` binary vectors with `P(w_i = 1) = w_i`
/// and keeps the smallest feasible one after backward elimination (ties:
/// lexicographically smallest support). Falls back to [`round_threshold`] with the default grid.
pub fn round_randomized(w: &SelectionVector, p: &StepProblem, draws: usize, seed: u64) -> Result<SelectionVector> {
    check_len(w, p)?;
    if draws == 0 {
        return Err(Error::InvalidArgument("randomized rounding needs at least one draw".into()));
    }
    let zero = p.zero_columns();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut best: Option<Vec<usize>> = None;
    for _ in 0..draws {
        let mut s = Vec::new();
        for (i, wi) in w.weights().iter().enumerate() {
            let u: f64 = rng.random();
            if u < *wi && !zero[i] {
                s.push(i);
            }
        }
        if p.residual_norm_of_support(&s) > p.tau + DEFAULT_FEAS_TOL {
            continue;
        }
        let s = drop_redundant(p, s, DEFAULT_FEAS_TOL);
        if best.as_ref().is_none_or(|b| (s.len(), &s) < (b.len(), b)) {
            best = Some(s);
        }
    }
    match best {
        Some(s) => SelectionVector::from_support(p.n_reactions(), &s, SelectionOrigin::RoundedRandomized),
        None => {
            let fallback = round_threshold(w, p, &default_theta_grid())?;
            SelectionVector::from_support(p.n_reactions(), &fallback.support(), SelectionOrigin::RoundedRandomized)
        }
    }
}

fn check_len(w: &SelectionVector, p: &StepProblem) -> Result<()> {
    if w.len() != p.n_reactions() {
        return Err(Error::DimensionMismatch { expected: p.n_reactions(), found: w.len(), what: "selection" });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn problem(rows: usize, cols: usize, a: &[f64], b: &[f64], tau: f64) -> StepProblem {
        StepProblem::new(DenseMatrix::from_row_major(rows, cols, a.to_vec()), b.to_vec(), tau).unwrap()
    }

    #[test]
    fn loose_tolerance_gives_zero() {
        let p = problem(2, 2, &[1.0, 0.0, 0.0, 1.0], &[0.3, 0.4], 0.5);
        let s = solve_step_relaxed(&p, 1e-8, 100_000).unwrap();
        assert_eq!(s.status, RelaxedStatus::Converged);
        assert_eq!(s.objective, 0.0);
        assert!(s.w.weights().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_column_closed_form() {
        // b = (0.6, 0.8), a = b, tau = 0.9: need ||b|| (1 - w) <= tau, so w = 0.1
        let p = problem(2, 1, &[0.6, 0.8], &[0.6, 0.8], 0.9);
        let s = solve_step_relaxed(&p, 1e-10, 100_000).unwrap();
        assert_eq!(s.status, RelaxedStatus::Converged);
        assert!((s.w.weights()[0] - 0.1).abs() < 1e-8, "{:?}", s.w);
        assert!(s.lower_bound <= s.objective + 1e-12);
        assert!(s.lower_bound > 0.1 - 1e-6);
    }

    #[test]
    fn half_length_column() {
        // a = b / 2: need ||b|| (1 - w/2) <= tau; with ||b|| = 1, tau = 0.7, w = 0.6
        let p = problem(2, 2, &[0.3, 0.0, 0.4, 0.0], &[0.6, 0.8], 0.7);
        let s = solve_step_relaxed(&p, 1e-10, 100_000).unwrap();
        assert_eq!(s.status, RelaxedStatus::Converged);
        assert!((s.w.weights()[0] - 0.6).abs() < 1e-7);
        assert_eq!(s.w.weights()[1], 0.0);
    }

    #[test]
    fn infeasible_relaxation_detected() {
        // only column is orthogonal to b
        let p = problem(2, 1, &[1.0, 0.0], &[0.0, 1.0], 0.5);
        let s = solve_step_relaxed(&p, 1e-8, 100_000).unwrap();
        assert_eq!(s.status, RelaxedStatus::Infeasible);
        assert!(s.lower_bound.is_infinite());
    }

    #[test]
    fn pinned_coordinates_stay() {
        let p = problem(2, 3, &[1.0, 0.5, 0.0, 0.0, 0.5, 1.0], &[1.0, 1.0], 0.1);
        let fixes = [Fix::One, Fix::Free, Fix::Zero];
        let s = solve_relaxed_fixed(&p, &fixes, &RelaxedSettings::default());
        assert_eq!(s.w.weights()[0], 1.0);
        assert_eq!(s.w.weights()[2], 0.0);
    }

    #[test]
    fn threshold_rounding_fixed_point() {
        let p = problem(2, 2, &[1.0, 0.0, 0.0, 1.0], &[1.0, 1.0], 0.1);
        let w = SelectionVector::from_support(2, &[0, 1], SelectionOrigin::Exact).unwrap();
        let r = round_threshold(&w, &p, &default_theta_grid()).unwrap();
        assert_eq!(r.support(), vec![0, 1]);
        let empty = problem(2, 2, &[1.0, 0.0, 0.0, 1.0], &[0.1, 0.1], 1.0);
        let z = SelectionVector::fractional(vec![0.0, 0.0], SelectionOrigin::Relaxed).unwrap();
        assert!(round_threshold(&z, &empty, &default_theta_grid()).unwrap().support().is_empty());
    }

    #[test]
    fn threshold_falls_back_to_greedy() {
        let p = problem(2, 2, &[1.0, 0.0, 0.0, 1.0], &[1.0, 1.0], 0.1);
        let w = SelectionVector::fractional(vec![0.05, 0.0], SelectionOrigin::Relaxed).unwrap();
        let r = round_threshold(&w, &p, &default_theta_grid()).unwrap();
        assert_eq!(r.support(), vec![0, 1]);
    }

    #[test]
    fn randomized_rounding_binary_input_unchanged() {
        let p = problem(2, 3, &[1.0, 0.0, 0.2, 0.0, 1.0, 0.2], &[1.0, 1.0], 0.1);
        let w = SelectionVector::from_support(3, &[0, 1], SelectionOrigin::Exact).unwrap();
        let r = round_randomized(&w, &p, 16, 9).unwrap();
        assert_eq!(r.support(), vec![0, 1]);
        let frac = SelectionVector::fractional(vec![0.7, 0.6, 0.4], SelectionOrigin::Relaxed).unwrap();
        assert_eq!(round_randomized(&frac, &p, 32, 5).unwrap(), round_randomized(&frac, &p, 32, 5).unwrap());
    }

    #[test]
    fn rounding_rejects_infeasible_instance() {
        let p = problem(2, 1, &[1.0, 0.0], &[0.0, 1.0], 0.5);
        let w = SelectionVector::fractional(vec![0.5], SelectionOrigin::Relaxed).unwrap();
        assert!(matches!(round_threshold(&w, &p, &default_theta_grid()), Err(Error::Infeasible { .. })));
    }
}
