//! Probabilistic real-time security management of a transmission system:
//! a chance-constrained security-constrained dispatch that weighs preventive
//! against corrective control when corrective actions may fail.

pub mod case;
pub mod milp;
pub mod multiarea;
pub mod report;
pub mod rtp;
pub mod scenario;
pub mod terminal;
