//! The real-time security management MILP: model construction, the N-1
//! benchmark variant, strategy extraction and the incremental objective.

mod build;
mod incremental;
mod strategy;
mod varmap;

use thiserror::Error;

use crate::milp::MilpError;

pub use build::{build_case_a, build_rtp, build_with, severity_model, BuildSpec, Scope};
pub use incremental::{objective_incremental, IncrementalKind};
pub use strategy::{extract_strategy, Strategy, StrategyError};
pub use varmap::{BehaviorVars, EventVars, VarKey, VariableMap};

#[derive(Debug, Error)]
pub enum RtpError {
    #[error("behavior set must have exactly the working and failing elements")]
    BadBehaviors,
    #[error("contingency set is missing the no-outage event")]
    MissingPseudo,
    #[error("probability {0} out of [0, 1]")]
    BadProbability(f64),
    #[error("severity threshold must be nonnegative, got {0}")]
    BadThreshold(f64),
    #[error("generator {0} has no market schedule (p_market) for the incremental objective")]
    MissingMarket(String),
    #[error("fee vector length {got} does not match {expected} generators")]
    FeeLength { expected: usize, got: usize },
    #[error("solution is not optimal ({0})")]
    NotOptimal(String),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// Up/down fees per generator for the incremental settlement objective.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementalFees {
    pub preventive_up: Vec<f64>,
    pub preventive_down: Vec<f64>,
    pub corrective_up: Vec<f64>,
    pub corrective_down: Vec<f64>,
}

impl IncrementalFees {
    /// Symmetric fees equal to each unit's energy and corrective prices.
    pub fn from_case(case: &crate::case::Case) -> Self {
        let c: Vec<f64> = case.generators.iter().map(|g| g.cost).collect();
        let r: Vec<f64> = case.generators.iter().map(|g| g.corrective_cost).collect();
        IncrementalFees { preventive_up: c.clone(), preventive_down: c, corrective_up: r.clone(), corrective_down: r }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub enum ObjectiveVariant {
    #[default]
    NetCost,
    Incremental(IncrementalFees),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RtpOptions {
    pub s_max: f64,
    pub epsilon: f64,
    pub allow_relax_working: bool,
    pub allow_relax_failing: bool,
    pub objective: ObjectiveVariant,
}

impl Default for RtpOptions {
    fn default() -> Self {
        RtpOptions {
            s_max: f64::INFINITY,
            epsilon: 0.0,
            allow_relax_working: false,
            allow_relax_failing: true,
            objective: ObjectiveVariant::NetCost,
        }
    }
}

impl RtpOptions {
    pub fn severity(s_max: f64, epsilon: f64) -> Self {
        RtpOptions { s_max, epsilon, ..Default::default() }
    }

    pub fn check(&self) -> Result<(), RtpError> {
        if !(self.s_max >= 0.0) {
            return Err(RtpError::BadThreshold(self.s_max));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(RtpError::BadProbability(self.epsilon));
        }
        Ok(())
    }
}
