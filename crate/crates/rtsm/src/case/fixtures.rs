use super::{load_case, Case, CaseError};

pub const BUILTIN_NAMES: [&str; 2] = ["irep-3bus", "irep-6bus"];

const THREE_BUS: &str = include_str!("../../fixtures/irep-3bus.toml");
const SIX_BUS: &str = include_str!("../../fixtures/irep-6bus.toml");

/// Case-file text of a bundled fixture.
pub fn builtin_text(name: &str) -> Result<&'static str, CaseError> {
    match name {
        "irep-3bus" => Ok(THREE_BUS),
        "irep-6bus" => Ok(SIX_BUS),
        other => Err(CaseError::UnknownBuiltin(other.to_string())),
    }
}

pub fn builtin_case(name: &str) -> Result<Case, CaseError> {
    load_case(builtin_text(name)?)
}
