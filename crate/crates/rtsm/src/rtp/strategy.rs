use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::Case;
use crate::milp::{MilpSolution, MilpStatus};
use crate::scenario::{ContingencySet, Outage};

use super::varmap::VariableMap;

const TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("solution is not optimal ({0:?})")]
    NotOptimal(MilpStatus),
    #[error("{constraint} violated for {generator}{event}: {detail}")]
    Violation { constraint: &'static str, generator: String, event: String, detail: String },
    #[error("unknown generator {0}")]
    UnknownGenerator(String),
    #[error("unknown outage event {0}")]
    UnknownEvent(String),
    #[error("missing value for {0}")]
    Missing(String),
    #[error("strategy file: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Preventive dispatch plus a corrective schedule per outage event (MW).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Strategy {
    pub preventive: Vec<f64>,
    pub corrective: BTreeMap<Outage, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyFile {
    preventive: BTreeMap<String, f64>,
    #[serde(default)]
    corrective: BTreeMap<String, BTreeMap<String, f64>>,
}

fn outage_of(case: &Case, label: &str) -> Option<Outage> {
    if let Some(l) = case.lines.iter().position(|l| l.id == label) {
        return Some(Outage::Line(l));
    }
    case.generator_index(label).map(Outage::Generator)
}

fn outage_label(case: &Case, o: Outage) -> String {
    match o {
        Outage::None => "none".into(),
        Outage::Line(l) => case.lines[l].id.clone(),
        Outage::Generator(g) => case.generators[g].id.clone(),
    }
}

impl Strategy {
    /// Every corrective schedule equals the preventive dispatch (outaged unit at 0).
    pub fn preventive_only(preventive: Vec<f64>, cs: &ContingencySet) -> Self {
        let corrective = cs
            .outages()
            .map(|c| {
                let row = preventive.iter().enumerate().map(|(g, &p)| if c.gen_available(g) { p } else { 0.0 }).collect();
                (c.outage, row)
            })
            .collect();
        Strategy { preventive, corrective }
    }

    /// Corrective schedule of `outage`; the preventive point when none is given.
    pub fn corrective_for(&self, outage: Outage) -> Vec<f64> {
        match self.corrective.get(&outage) {
            Some(row) => row.clone(),
            None => self
                .preventive
                .iter()
                .enumerate()
                .map(|(g, &p)| if outage == Outage::Generator(g) { 0.0 } else { p })
                .collect(),
        }
    }

    /// Checks bounds, availability and ramp coupling against `case`.
    pub fn validate(&self, case: &Case, cs: &ContingencySet) -> Result<(), StrategyError> {
        let ng = case.generators.len();
        if self.preventive.len() != ng {
            return Err(StrategyError::Missing(format!("preventive dispatch of {} units", ng)));
        }
        let viol = |constraint, g: usize, event: String, detail: String| StrategyError::Violation {
            constraint,
            generator: case.generators[g].id.clone(),
            event,
            detail,
        };
        for (g, gen) in case.generators.iter().enumerate() {
            let p = self.preventive[g];
            if !(p >= gen.p_min - TOL && p <= gen.p_max + TOL) {
                return Err(viol(
                    "preventive generation limits",
                    g,
                    String::new(),
                    format!("{p} MW outside [{}, {}]", gen.p_min, gen.p_max),
                ));
            }
        }
        for (&o, row) in &self.corrective {
            let c = cs.find(o).filter(|c| !c.is_pseudo()).ok_or_else(|| StrategyError::UnknownEvent(outage_label(case, o)))?;
            if row.len() != ng {
                return Err(StrategyError::Missing(format!("corrective dispatch of {} units", ng)));
            }
            let ev = format!(" after outage of {}", outage_label(case, o));
            for (g, gen) in case.generators.iter().enumerate() {
                let pc = row[g];
                let p0 = self.preventive[g];
                if !c.gen_available(g) {
                    if pc.abs() > TOL {
                        return Err(viol("outaged unit output", g, ev, format!("{pc} MW, must be 0")));
                    }
                    continue;
                }
                if !(pc >= gen.p_min - TOL && pc <= gen.p_max + TOL) {
                    return Err(viol(
                        "corrective generation limits",
                        g,
                        ev,
                        format!("{pc} MW outside [{}, {}]", gen.p_min, gen.p_max),
                    ));
                }
                if pc - p0 > gen.ramp_up + TOL {
                    return Err(viol("corrective ramp-up limit", g, ev, format!("{pc} − {p0} > {}", gen.ramp_up)));
                }
                if p0 - pc > gen.ramp_down + TOL {
                    return Err(viol("corrective ramp-down limit", g, ev, format!("{p0} − {pc} > {}", gen.ramp_down)));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self, case: &Case) -> String {
        let ids = |row: &[f64]| -> BTreeMap<String, f64> {
            case.generators.iter().zip(row).map(|(g, &v)| (g.id.clone(), v)).collect()
        };
        let file = StrategyFile {
            preventive: ids(&self.preventive),
            corrective: self.corrective.iter().map(|(&o, row)| (outage_label(case, o), ids(row))).collect(),
        };
        toml::to_string(&file).expect("strategy serializes")
    }

    pub fn from_toml(case: &Case, text: &str) -> Result<Self, StrategyError> {
        let file: StrategyFile = toml::from_str(text).map_err(|e| StrategyError::Parse(e.to_string()))?;
        let row = |map: &BTreeMap<String, f64>, what: &str| -> Result<Vec<f64>, StrategyError> {
            if let Some(k) = map.keys().find(|k| case.generator_index(k).is_none()) {
                return Err(StrategyError::UnknownGenerator(k.clone()));
            }
            case.generators
                .iter()
                .map(|g| map.get(&g.id).copied().ok_or_else(|| StrategyError::Missing(format!("{what} {}", g.id))))
                .collect()
        };
        let preventive = row(&file.preventive, "preventive")?;
        let mut corrective = BTreeMap::new();
        for (label, map) in &file.corrective {
            let o = outage_of(case, label).ok_or_else(|| StrategyError::UnknownEvent(label.clone()))?;
            // the outaged unit may be left out of its own row
            let mut m = map.clone();
            if let Outage::Generator(g) = o {
                m.entry(case.generators[g].id.clone()).or_insert(0.0);
            }
            corrective.insert(o, row(&m, &format!("corrective[{label}]"))?);
        }
        Ok(Strategy { preventive, corrective })
    }

    pub fn load(case: &Case, path: &Path) -> Result<Self, StrategyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| StrategyError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(case, &text)
    }
}

/// Reads P^0 and P^c from an optimal solution.
pub fn extract_strategy(sol: &MilpSolution, map: &VariableMap) -> Result<Strategy, StrategyError> {
    if !sol.is_optimal() {
        return Err(StrategyError::NotOptimal(sol.status));
    }
    let clean = |x: f64| if x.abs() < 1e-9 { 0.0 } else { x };
    let preventive = map.p0.iter().map(|&v| clean(sol.value(v))).collect();
    let corrective = map
        .events
        .iter()
        .map(|e| (e.outage, e.corrective.iter().map(|&v| clean(sol.value(v))).collect()))
        .collect();
    Ok(Strategy { preventive, corrective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::builtin_case;
    use crate::scenario::{build_contingencies, ProbabilityMode};

    fn setup() -> (Case, ContingencySet) {
        let case = builtin_case("irep-3bus").unwrap();
        let cs = build_contingencies(&case, &(&case.probabilities).into()).unwrap();
        (case, cs)
    }

    #[test]
    fn toml_round_trip() {
        let (case, cs) = setup();
        let s = Strategy::preventive_only(vec![77.5, 10.0, 12.5], &cs);
        let back = Strategy::from_toml(&case, &s.to_toml(&case)).unwrap();
        assert_eq!(back, s);
        s.validate(&case, &cs).unwrap();
    }

    #[test]
    fn ramp_violation_names_constraint() {
        let (case, cs) = setup();
        let mut s = Strategy::preventive_only(vec![45.0, 10.0, 45.0], &cs);
        s.corrective.get_mut(&Outage::Line(0)).unwrap()[2] = 100.0;
        let e = s.validate(&case, &cs).unwrap_err().to_string();
        assert!(e.contains("corrective generation limits"), "{e}");
        s.corrective.get_mut(&Outage::Line(0)).unwrap()[2] = 0.0;
        let e = s.validate(&case, &cs).unwrap_err().to_string();
        assert!(e.contains("corrective generation limits"), "{e}");
    }

    #[test]
    fn outaged_unit_must_be_off() {
        let (case, cs) = setup();
        let mut s = Strategy::preventive_only(vec![45.0, 10.0, 45.0], &cs);
        s.corrective.get_mut(&Outage::Generator(0)).unwrap()[0] = 5.0;
        let e = s.validate(&case, &cs).unwrap_err().to_string();
        assert!(e.contains("outaged unit output"), "{e}");
    }

    #[test]
    fn unknown_generator_rejected() {
        let (case, _) = setup();
        let r = Strategy::from_toml(&case, "[preventive]\ng1 = 1.0\ng2 = 1.0\ng3 = 1.0\ng9 = 2.0\n");
        assert!(matches!(r, Err(StrategyError::UnknownGenerator(_))));
        let _ = ProbabilityMode::FromMttf;
    }
}
