//! Mixed-integer linear programming kernel.
//!
//! Models are built with [`MilpModel`], solved by [`solve_lp`] (relaxation)
//! or [`solve_milp`] (branch-and-bound), and can be written in LP text format
//! for cross-checks with external solvers.

mod bnb;
mod linearize;
mod lp_format;
mod lu;
mod model;
mod simplex;

use std::collections::BTreeMap;

use thiserror::Error;

pub use bnb::solve_milp;
pub use linearize::{linearize_bin_times_free, linearize_bin_times_nonneg};
pub use lp_format::{read_solution, write_lp};
pub use model::{BigMClass, ConId, Constraint, MilpModel, Sense, VarId, VarKind, Variable};

use simplex::{LpProblem, LpStatus, Simplex};

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("big-M value must be positive and finite, got {0}")]
    BadBigM(f64),
    #[error("no big-M registered for class {0:?}")]
    MissingBigM(BigMClass),
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("solution file line {line}: {msg}")]
    SolutionParse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// How branch-and-bound picks the branching variable and the next node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BranchingRule {
    /// Most fractional binary, lowest index on ties; best bound, FIFO on ties.
    MostFractional,
    /// Pseudocosts with strong-branching initialization; best bound with
    /// plunging, deepest node on ties.
    #[default]
    Reliability,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub relative_gap: f64,
    pub node_limit: usize,
    pub branching: BranchingRule,
    /// Accepted for reproducibility records; the search itself uses no randomness.
    pub deterministic_seed: u64,
    /// Optional complete assignment tried as the first incumbent.
    pub start: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            relative_gap: 1e-6,
            node_limit: 1_000_000,
            branching: BranchingRule::default(),
            deterministic_seed: 0,
            start: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub best_bound: f64,
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub stats: SolveStats,
}

impl MilpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == MilpStatus::Optimal
    }

    pub(crate) fn without_values(status: MilpStatus, stats: SolveStats) -> Self {
        MilpSolution { status, values: Vec::new(), objective: f64::NAN, stats }
    }

    /// Values keyed by variable name, for reporting and LP-format round trips.
    pub fn named_values(&self, model: &MilpModel) -> BTreeMap<String, f64> {
        model.vars.iter().zip(&self.values).map(|(v, &x)| (v.name.clone(), x)).collect()
    }
}

pub(crate) fn lp_status(st: LpStatus) -> MilpStatus {
    match st {
        LpStatus::Optimal => MilpStatus::Optimal,
        LpStatus::Infeasible => MilpStatus::Infeasible,
        LpStatus::Unbounded => MilpStatus::Unbounded,
        LpStatus::IterationLimit | LpStatus::Numerical => MilpStatus::IterationLimit,
    }
}

pub(crate) fn unscaled(p: &LpProblem, s: &Simplex) -> Vec<f64> {
    (0..p.n).map(|j| p.unscale_x(j, s.x[j])).collect()
}

/// Solves the LP relaxation of `model` (binaries relaxed to `[0, 1]`).
pub fn solve_lp(model: &MilpModel) -> Result<MilpSolution, MilpError> {
    solve_lp_with(model, &SolverOptions::default())
}

pub fn solve_lp_with(model: &MilpModel, opts: &SolverOptions) -> Result<MilpSolution, MilpError> {
    model.check()?;
    let p = LpProblem::from_model(model);
    let mut s = Simplex::new(&p);
    s.set_primal_tol(opts.feasibility_tol);
    let st = s.solve();
    let stats = SolveStats { nodes: 0, lp_iterations: s.iterations, best_bound: f64::NAN };
    if st != LpStatus::Optimal {
        return Ok(MilpSolution::without_values(lp_status(st), stats));
    }
    let values = unscaled(&p, &s);
    let objective = model.objective(&values);
    Ok(MilpSolution {
        status: MilpStatus::Optimal,
        values,
        objective,
        stats: SolveStats { best_bound: objective, ..stats },
    })
}
