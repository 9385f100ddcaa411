//! Network, generator and demand data for a study case.

mod fixtures;
mod format;
mod validate;

use thiserror::Error;

pub use fixtures::{builtin_case, builtin_text, BUILTIN_NAMES};
pub use format::{load_case, load_case_file, serialize_case};
pub use validate::{validate_case, ValidationReport};

pub type NodeId = u32;

#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub id: String,
    pub from_node: NodeId,
    pub to_node: NodeId,
    /// Thermal capacity (MW).
    pub f_max: f64,
    /// Series reactance (p.u.).
    pub reactance: f64,
    /// Mean time to failure (h).
    pub mttf: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub id: String,
    pub node: NodeId,
    /// Energy cost (€/MWh).
    pub cost: f64,
    /// Corrective re-dispatch cost (€/MWh).
    pub corrective_cost: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_down: f64,
    pub ramp_up: f64,
    /// Largest downward move during emergency control without disconnection (MW).
    pub emergency_ramp: f64,
    pub mttf: f64,
    /// Fixed severity charged when the unit is disconnected (€).
    pub disconnect_fee: f64,
    /// Settled market schedule, used by the incremental objective.
    pub p_market: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demand {
    pub id: String,
    pub node: NodeId,
    /// Scheduled load (MW).
    pub p0: f64,
    /// Value of lost load (€/MWh).
    pub voll: f64,
}

/// How contingency probabilities are obtained for this case.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbabilitySource {
    FromMttf,
    /// No-outage event first, then lines, then generators, in case order.
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub name: String,
    pub nodes: Vec<NodeId>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub demands: Vec<Demand>,
    pub horizon_hours: f64,
    pub slack_node: NodeId,
    pub probabilities: ProbabilitySource,
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("case file line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("case file: {0}")]
    Syntax(String),
    #[error("invalid case: {}", .0.errors.join("; "))]
    Invalid(ValidationReport),
    #[error("unknown built-in case {0:?} (known: irep-3bus, irep-6bus)")]
    UnknownBuiltin(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Case {
    pub fn node_index(&self, n: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&m| m == n)
    }

    pub fn total_load(&self) -> f64 {
        self.demands.iter().map(|d| d.p0).sum()
    }

    /// Σ v_d·p0·horizon + Σ w_g, the severity of losing everything.
    pub fn max_severity(&self) -> f64 {
        self.demands.iter().map(|d| d.voll * d.p0 * self.horizon_hours).sum::<f64>()
            + self.generators.iter().map(|g| g.disconnect_fee).sum::<f64>()
    }

    /// Nodal load (MW) indexed like `nodes`.
    pub fn nodal_load(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.nodes.len()];
        for d in &self.demands {
            if let Some(i) = self.node_index(d.node) {
                v[i] += d.p0;
            }
        }
        v
    }

    /// Endpoint indices of each line.
    pub fn line_ends(&self) -> Vec<(usize, usize)> {
        self.lines
            .iter()
            .map(|l| (self.node_index(l.from_node).unwrap_or(0), self.node_index(l.to_node).unwrap_or(0)))
            .collect()
    }

    pub fn slack_index(&self) -> usize {
        self.node_index(self.slack_node).unwrap_or(0)
    }

    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }
}
