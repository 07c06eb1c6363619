//! Sparse reaction selection for chemical mechanism reduction.
//!
//! Given trajectories of a detailed mass-action mechanism, every time step
//! and condition yields a selection problem: find the fewest reactions whose
//! one-step Euler prediction stays within a normalized tolerance of the
//! observed concentration change. The union of the per-step selections forms
//! the reduced mechanism, which is then audited on the training data and
//! validated on held-out conditions.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the command
//! line and thread pools live in the `sparsemech` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod exact;
pub mod kinetics;
pub mod linalg;
pub mod mechanism;
pub mod pipeline;
pub mod relaxed;
pub mod selection;

pub use error::{Error, Result};
pub use exact::{brute_force_oracle, greedy_incumbent, solve_step_exact, ExactLimits, ExactSolution, ExactStatus};
pub use kinetics::{
    generate_dataset, reaction_rates, simulate_condition, simulate_trajectory, Condition, NoiseSpec,
    SimulationSettings, Trajectory,
};
pub use linalg::DenseMatrix;
pub use mechanism::{build_stoichiometric_matrix, Mechanism, Reaction, Restriction, Species, StoichMatrix};
pub use pipeline::{
    audit_bound, reduce, sweep_epsilon, validate_holdout, AuditReport, AuditRow, ReduceConfig, ReductionResult,
    Rounding, Runner, Sequential, SolverChoice, StepRecord, StepStatus, SweepReport,
};
pub use relaxed::{
    round_randomized, round_threshold, solve_step_relaxed, RelaxedSettings, RelaxedSolution, RelaxedStatus,
};
pub use selection::{
    assemble_step_problem, fitting_error, normalization, SelectionKind, SelectionOrigin, SelectionVector, StepProblem,
    ToleranceMode,
};
