//! Per-step selection instances.
//!
//! For a trajectory step `t` the masked fitting error of a selection `w` is
//! `|| X_{t+1} - X_t - M (w .* r_t) dt ||_2`. Folding the rates and the
//! sampling time into the columns of `A` (column `i` is `M_i r_{i,t} dt`)
//! turns this into `|| b - A w ||_2` with `b = X_{t+1} - X_t`, which is what
//! both solvers consume.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kinetics::Trajectory;
use crate::linalg::{norm2, DenseMatrix};
use crate::mechanism::Mechanism;

/// Default absolute slack on the norm constraint.
pub const DEFAULT_FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionKind {
    Binary,
    Fractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionOrigin {
    Exact,
    Relaxed,
    RoundedThreshold,
    RoundedRandomized,
    Union,
}

/// Per-reaction weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionVector {
    w: Vec<f64>,
    kind: SelectionKind,
    origin: SelectionOrigin,
}

impl SelectionVector {
    /// Binary vector with ones exactly on `support`.
    pub fn from_support(n: usize, support: &[usize], origin: SelectionOrigin) -> Result<Self> {
        let mut w = vec![0.0; n];
        for &i in support {
            if i >= n {
                return Err(Error::ReactionOutOfRange { id: i, n_reactions: n });
            }
            w[i] = 1.0;
        }
        Ok(Self { w, kind: SelectionKind::Binary, origin })
    }

    pub fn ones(n: usize, origin: SelectionOrigin) -> Self {
        Self { w: vec![1.0; n], kind: SelectionKind::Binary, origin }
    }

    pub fn zeros(n: usize, origin: SelectionOrigin) -> Self {
        Self { w: vec![0.0; n], kind: SelectionKind::Binary, origin }
    }

    /// Fractional weights; every entry must lie in `[0, 1]`.
    pub fn fractional(w: Vec<f64>, origin: SelectionOrigin) -> Result<Self> {
        if let Some(v) = w.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::InvalidArgument(format!("selection weight {v} outside [0, 1]")));
        }
        Ok(Self { w, kind: SelectionKind::Fractional, origin })
    }

    /// Binary weights; every entry must be exactly 0 or 1.
    pub fn binary(w: Vec<f64>, origin: SelectionOrigin) -> Result<Self> {
        if let Some(v) = w.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(Error::InvalidArgument(format!("binary selection has entry {v}")));
        }
        Ok(Self { w, kind: SelectionKind::Binary, origin })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn kind(&self) -> SelectionKind {
        self.kind
    }

    pub fn origin(&self) -> SelectionOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_integral(&self) -> bool {
        self.w.iter().all(|v| *v == 0.0 || *v == 1.0)
    }

    /// Reaction ids with a nonzero weight, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.w.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(i, _)| i).collect()
    }

    /// Sum of weights; the number of selected reactions for binary vectors.
    pub fn cardinality(&self) -> f64 {
        self.w.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ToleranceMode {
    /// `tau = epsilon * N_t`
    #[default]
    Relative,
    /// `tau = epsilon / N_t`
    PaperLiteral,
}

impl ToleranceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ToleranceMode::Relative => "relative",
            ToleranceMode::PaperLiteral => "paper-literal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relative" => Some(ToleranceMode::Relative),
            "paper-literal" => Some(ToleranceMode::PaperLiteral),
            _ => None,
        }
    }
}

/// One selection instance `min |w|_0  s.t.  ||b - A w||_2 <= tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProblem {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub tau: f64,
    pub t: usize,
    pub condition_id: u64,
    /// `N_t = ||r_t||_2 dt`
    pub normalization: f64,
    /// Set when the tolerance collapses (`N_t = 0`) and the step must be skipped.
    pub degenerate: bool,
    /// Set when even the full mechanism misses the tolerance.
    pub infeasible_at_full: bool,
}

impl StepProblem {
    /// Builds a free-standing instance (used for synthetic problems).
    pub fn new(a: DenseMatrix, b: Vec<f64>, tau: f64) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: b.len(), what: "b" });
        }
        if !a.all_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("step problem data must be finite".into()));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be finite and nonnegative, got {tau}")));
        }
        let mut p = Self {
            a,
            b,
            tau,
            t: 0,
            condition_id: 0,
            normalization: f64::NAN,
            degenerate: false,
            infeasible_at_full: false,
        };
        p.infeasible_at_full = !p.is_feasible(&vec![1.0; p.n_reactions()], DEFAULT_FEAS_TOL);
        Ok(p)
    }

    pub fn n_species(&self) -> usize {
        self.a.rows()
    }

    pub fn n_reactions(&self) -> usize {
        self.a.cols()
    }

    /// `||b - A w||_2`
    pub fn residual_norm(&self, w: &[f64]) -> f64 {
        norm2(&self.a.residual(&self.b, w))
    }

    pub fn residual_norm_of_support(&self, support: &[usize]) -> f64 {
        let mut r = self.b.clone();
        for &i in support {
            for (s, rs) in r.iter_mut().enumerate() {
                *rs -= self.a.get(s, i);
            }
        }
        norm2(&r)
    }

    pub fn is_feasible(&self, w: &[f64], feas_tol: f64) -> bool {
        self.residual_norm(w) <= self.tau + feas_tol
    }

    /// Reactions whose column is identically zero (zero rate or zero net stoichiometry).
    pub fn zero_columns(&self) -> Vec<bool> {
        (0..self.n_reactions()).map(|i| (0..self.n_species()).all(|s| self.a.get(s, i) == 0.0)).collect()
    }

    pub fn check_solvable(&self) -> Result<()> {
        if self.degenerate {
            return Err(Error::DegenerateStep { condition_id: self.condition_id, t: self.t });
        }
        Ok(())
    }
}

fn check_selection(mech: &Mechanism, w: &[f64]) -> Result<()> {
    if w.len() != mech.n_reactions() {
        return Err(Error::DimensionMismatch { expected: mech.n_reactions(), found: w.len(), what: "selection" });
    }
    Ok(())
}

/// `|| X_{t+1} - X_t - M (w .* r_t) dt ||_2`, evaluated directly from the
/// trajectory. Accepts fractional weights.
pub fn fitting_error(mech: &Mechanism, traj: &Trajectory, t: usize, w: &SelectionVector) -> Result<f64> {
    traj.check_step(t)?;
    check_selection(mech, w.weights())?;
    let x0 = traj.state(t);
    let x1 = traj.state(t + 1);
    let r = traj.rate(t);
    let m = mech.stoich();
    let masked: Vec<f64> = r.iter().zip(w.weights()).map(|(ri, wi)| wi * ri).collect();
    let residual: Vec<f64> = (0..mech.n_species())
        .map(|s| {
            let predicted: f64 =
                masked.iter().enumerate().map(|(i, mr)| m.get(s, i) as f64 * mr).sum::<f64>() * traj.dt;
            (x1[s] - x0[s]) - predicted
        })
        .collect();
    Ok(norm2(&residual))
}

/// `N_t = ||r_t||_2 * dt`
pub fn normalization(traj: &Trajectory, t: usize) -> Result<f64> {
    traj.check_step(t)?;
    Ok(norm2(traj.rate(t)) * traj.dt)
}

pub fn tolerance(epsilon: f64, normalization: f64, mode: ToleranceMode) -> Option<f64> {
    match mode {
        ToleranceMode::Relative => Some(epsilon * normalization),
        ToleranceMode::PaperLiteral if normalization > 0.0 => Some(epsilon / normalization),
        ToleranceMode::PaperLiteral => None,
    }
}

/// Builds the `(A, b, tau)` instance for step `t` of `traj`.
///
/// Quiescent steps (`N_t = 0`) get `tau = 0` in relative mode and are flagged
/// degenerate when `b != 0`; in paper-literal mode they are always degenerate.
pub fn assemble_step_problem(
    mech: &Mechanism,
    traj: &Trajectory,
    t: usize,
    epsilon: f64,
    mode: ToleranceMode,
) -> Result<StepProblem> {
    traj.check_step(t)?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let ns = mech.n_species();
    let nr = mech.n_reactions();
    let r = traj.rate(t);
    if r.len() != nr || traj.state(t).len() != ns {
        return Err(Error::DimensionMismatch { expected: nr, found: r.len(), what: "trajectory rates" });
    }
    let m = mech.stoich();
    let mut a = DenseMatrix::zeros(ns, nr);
    for s in 0..ns {
        for (i, ri) in r.iter().enumerate() {
            a.set(s, i, m.get(s, i) as f64 * ri * traj.dt);
        }
    }
    let x0 = traj.state(t);
    let x1 = traj.state(t + 1);
    let b: Vec<f64> = x1.iter().zip(x0).map(|(n, o)| n - o).collect();
    let norm = norm2(r) * traj.dt;
    let (tau, degenerate) = match tolerance(epsilon, norm, mode) {
        Some(tau) => (tau, norm == 0.0 && b.iter().any(|v| *v != 0.0)),
        None => (0.0, true),
    };
    let mut p = StepProblem {
        a,
        b,
        tau,
        t,
        condition_id: traj.condition_id,
        normalization: norm,
        degenerate,
        infeasible_at_full: false,
    };
    p.infeasible_at_full = !degenerate && !p.is_feasible(&vec![1.0; nr], DEFAULT_FEAS_TOL);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{simulate_trajectory, Condition, SimulationSettings};
    use crate::mechanism::Reaction;
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;

    fn a_to_b(k: f64) -> Mechanism {
        let re: BTreeMap<usize, u32> = [(0, 1)].into_iter().collect();
        let pr: BTreeMap<usize, u32> = [(1, 1)].into_iter().collect();
        Mechanism::new(vec!["A".to_string(), "B".to_string()], vec![Reaction::new(0, re, pr, k)]).unwrap()
    }

    fn one_step(k: f64, x0: f64) -> (Mechanism, Trajectory) {
        let m = a_to_b(k);
        let c = Condition::new(0, vec![x0, 0.0], 1);
        let tr =
            simulate_trajectory(&m, &c, &SimulationSettings { dt: 0.1, horizon: 1, ..Default::default() }).unwrap();
        (m, tr)
    }

    #[test]
    fn hand_computed_step() {
        let (m, tr) = one_step(2.0, 1.0);
        assert!((tr.state(2)[0] - 0.8).abs() < 1e-15);
        let full = SelectionVector::ones(1, SelectionOrigin::Exact);
        assert!(fitting_error(&m, &tr, 1, &full).unwrap() < 1e-12);
        let empty = SelectionVector::zeros(1, SelectionOrigin::Exact);
        let d = fitting_error(&m, &tr, 1, &empty).unwrap();
        assert!((d - 0.282_842_712_474_619).abs() < 1e-12);
        // r = 2, so N = 2 * 0.1.
        assert!((normalization(&tr, 1).unwrap() - 0.2).abs() < 1e-15);
        let p = assemble_step_problem(&m, &tr, 1, 0.2, ToleranceMode::Relative).unwrap();
        assert!((p.tau - 0.04).abs() < 1e-15);
        assert!(!p.degenerate && !p.infeasible_at_full);
    }

    #[test]
    fn hand_computed_step_rate_six() {
        let (m, tr) = one_step(2.0, 3.0);
        assert!((tr.rate(1)[0] - 6.0).abs() < 1e-15);
        assert!((tr.state(2)[0] - 2.4).abs() < 1e-15);
        assert!((tr.state(2)[1] - 0.6).abs() < 1e-15);
        assert!((normalization(&tr, 1).unwrap() - 0.6).abs() < 1e-15);
        let p = assemble_step_problem(&m, &tr, 1, 0.2, ToleranceMode::Relative).unwrap();
        assert!((p.tau - 0.12).abs() < 1e-15);
        let lit = assemble_step_problem(&m, &tr, 1, 0.2, ToleranceMode::PaperLiteral).unwrap();
        assert!((lit.tau - 0.2 / 0.6).abs() < 1e-15);
    }

    #[test]
    fn normalization_examples() {
        let tr = Trajectory {
            condition_id: 0,
            dt: 0.1,
            states: vec![vec![0.0; 2]; 2],
            rates: vec![vec![3.0, 4.0]],
            clipped: 0,
        };
        assert!((normalization(&tr, 1).unwrap() - 0.5).abs() < 1e-15);
        let quiet = Trajectory { rates: vec![vec![0.0, 0.0]], ..tr };
        assert_eq!(normalization(&quiet, 1).unwrap(), 0.0);
    }

    #[test]
    fn quiescent_steps() {
        let (m, _) = one_step(1.0, 1.0);
        let still = Trajectory {
            condition_id: 4,
            dt: 0.1,
            states: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            rates: vec![vec![0.0]],
            clipped: 0,
        };
        let p = assemble_step_problem(&m, &still, 1, 0.1, ToleranceMode::Relative).unwrap();
        assert_eq!(p.tau, 0.0);
        assert!(!p.degenerate);
        assert!(p.is_feasible(&[0.0], 0.0));

        let noisy = Trajectory { states: vec![vec![0.0, 1.0], vec![0.0, 1.01]], ..still.clone() };
        let p = assemble_step_problem(&m, &noisy, 1, 0.1, ToleranceMode::Relative).unwrap();
        assert!(p.degenerate);
        assert!(p.check_solvable().is_err());

        let lit = assemble_step_problem(&m, &still, 1, 0.1, ToleranceMode::PaperLiteral).unwrap();
        assert!(lit.degenerate);
    }

    #[test]
    fn range_and_argument_errors() {
        let (m, tr) = one_step(1.0, 1.0);
        let w = SelectionVector::ones(1, SelectionOrigin::Exact);
        assert!(fitting_error(&m, &tr, 0, &w).is_err());
        assert!(fitting_error(&m, &tr, 2, &w).is_err());
        assert!(assemble_step_problem(&m, &tr, 1, 0.0, ToleranceMode::Relative).is_err());
        assert!(SelectionVector::fractional(vec![1.5], SelectionOrigin::Relaxed).is_err());
        assert!(SelectionVector::binary(vec![0.5], SelectionOrigin::Exact).is_err());
    }

    #[test]
    fn support_and_cardinality() {
        let w = SelectionVector::from_support(5, &[1, 3], SelectionOrigin::Union).unwrap();
        assert_eq!(w.support(), vec![1, 3]);
        assert_eq!(w.cardinality(), 2.0);
        assert_eq!(w.kind(), SelectionKind::Binary);
        assert!(SelectionVector::from_support(2, &[2], SelectionOrigin::Union).is_err());
    }
}
