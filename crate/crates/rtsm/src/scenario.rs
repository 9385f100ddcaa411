//! Contingency and corrective-control behavior sets.

use std::fmt;

use thiserror::Error;

use crate::case::{Case, ProbabilitySource};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("component {0} has mttf {1} h, not above the horizon {2} h")]
    MttfTooShort(String, f64, f64),
    #[error("probability {0} out of [0, 1]")]
    OutOfRange(f64),
    #[error("explicit probabilities: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("explicit probabilities sum to {0}, not 1 within 1e-3")]
    BadSum(f64),
    #[error("unknown component {0}")]
    UnknownComponent(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outage {
    None,
    Line(usize),
    Generator(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Line(usize),
    Generator(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Contingency {
    /// 1-based event number; 1 is the no-outage event.
    pub id: usize,
    pub outage: Outage,
    pub pi: f64,
}

impl Contingency {
    pub fn is_pseudo(&self) -> bool {
        self.outage == Outage::None
    }

    /// τ: 1 for a generator outage.
    pub fn is_gen_outage(&self) -> bool {
        matches!(self.outage, Outage::Generator(_))
    }

    pub fn line_available(&self, l: usize) -> bool {
        self.outage != Outage::Line(l)
    }

    pub fn gen_available(&self, g: usize) -> bool {
        self.outage != Outage::Generator(g)
    }

    /// Short label such as `L2` or `G1` (1-based), `none` for the pseudo event.
    pub fn label(&self, case: &Case) -> String {
        match self.outage {
            Outage::None => "none".into(),
            Outage::Line(l) => case.lines[l].id.clone(),
            Outage::Generator(g) => case.generators[g].id.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContingencySet {
    pub contingencies: Vec<Contingency>,
    num_lines: usize,
    num_generators: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProbabilityMode {
    FromMttf,
    Explicit(Vec<f64>),
}

impl From<&ProbabilitySource> for ProbabilityMode {
    fn from(p: &ProbabilitySource) -> Self {
        match p {
            ProbabilitySource::FromMttf => ProbabilityMode::FromMttf,
            ProbabilitySource::Explicit(v) => ProbabilityMode::Explicit(v.clone()),
        }
    }
}

/// Single-outage events for every line and generator, preceded by the
/// no-outage event.
pub fn build_contingencies(case: &Case, mode: &ProbabilityMode) -> Result<ContingencySet, ScenarioError> {
    let nl = case.lines.len();
    let ng = case.generators.len();
    let outages: Vec<Outage> = std::iter::once(Outage::None)
        .chain((0..nl).map(Outage::Line))
        .chain((0..ng).map(Outage::Generator))
        .collect();
    let pis = match mode {
        ProbabilityMode::FromMttf => {
            let h = case.horizon_hours;
            let mut p = Vec::with_capacity(nl + ng);
            for (id, mttf) in case
                .lines
                .iter()
                .map(|l| (&l.id, l.mttf))
                .chain(case.generators.iter().map(|g| (&g.id, g.mttf)))
            {
                if !(mttf > h) {
                    return Err(ScenarioError::MttfTooShort(id.clone(), mttf, h));
                }
                p.push(h / mttf);
            }
            let mut pis = Vec::with_capacity(1 + p.len());
            pis.push(p.iter().map(|q| 1.0 - q).product());
            for i in 0..p.len() {
                let others: f64 = p.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, q)| 1.0 - q).product();
                pis.push(p[i] * others);
            }
            // the single-outage events are not exhaustive on their own; the
            // multiple-outage remainder is folded in proportionally
            let total: f64 = pis.iter().sum();
            pis.iter().map(|x| x / total).collect()
        }
        ProbabilityMode::Explicit(v) => {
            if v.len() != outages.len() {
                return Err(ScenarioError::LengthMismatch { expected: outages.len(), got: v.len() });
            }
            if let Some(&bad) = v.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
                return Err(ScenarioError::OutOfRange(bad));
            }
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > 1e-3 {
                return Err(ScenarioError::BadSum(s));
            }
            v.clone()
        }
    };
    let contingencies = outages
        .into_iter()
        .zip(pis)
        .enumerate()
        .map(|(k, (outage, pi))| Contingency { id: k + 1, outage, pi })
        .collect();
    Ok(ContingencySet { contingencies, num_lines: nl, num_generators: ng })
}

impl ContingencySet {
    pub fn len(&self) -> usize {
        self.contingencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contingencies.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Contingency> {
        self.contingencies.iter()
    }

    /// Outage events only (c ≥ 2).
    pub fn outages(&self) -> impl Iterator<Item = &Contingency> {
        self.contingencies.iter().filter(|c| !c.is_pseudo())
    }

    pub fn pseudo(&self) -> &Contingency {
        self.contingencies.iter().find(|c| c.is_pseudo()).expect("pseudo-contingency present")
    }

    pub fn find(&self, outage: Outage) -> Option<&Contingency> {
        self.contingencies.iter().find(|c| c.outage == outage)
    }

    /// a_i^c for the event at position `k`.
    pub fn availability(&self, k: usize, component: Component) -> Result<u8, ScenarioError> {
        let c = self
            .contingencies
            .get(k)
            .ok_or_else(|| ScenarioError::UnknownComponent(format!("contingency #{k}")))?;
        match component {
            Component::Line(l) if l < self.num_lines => Ok(c.line_available(l) as u8),
            Component::Generator(g) if g < self.num_generators => Ok(c.gen_available(g) as u8),
            other => Err(ScenarioError::UnknownComponent(format!("{other:?}"))),
        }
    }

    /// Keeps the pseudo-contingency and the outages accepted by `keep`,
    /// with unchanged probabilities.
    pub fn restricted(&self, keep: impl Fn(&Contingency) -> bool) -> ContingencySet {
        ContingencySet {
            contingencies: self.contingencies.iter().filter(|c| c.is_pseudo() || keep(c)).cloned().collect(),
            num_lines: self.num_lines,
            num_generators: self.num_generators,
        }
    }

    pub fn total_probability(&self) -> f64 {
        self.contingencies.iter().map(|c| c.pi).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Behavior {
    Working,
    Failing,
}

impl Behavior {
    pub const BOTH: [Behavior; 2] = [Behavior::Working, Behavior::Failing];

    pub fn tag(self) -> &'static str {
        match self {
            Behavior::Working => "W",
            Behavior::Failing => "F",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Behavior::Working => "working",
            Behavior::Failing => "failing",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BehaviorSet {
    pub working: f64,
    pub failing: f64,
}

impl BehaviorSet {
    pub fn pi(&self, b: Behavior) -> f64 {
        match b {
            Behavior::Working => self.working,
            Behavior::Failing => self.failing,
        }
    }
}

pub fn behavior_set(p_fail: f64) -> Result<BehaviorSet, ScenarioError> {
    if !(0.0..=1.0).contains(&p_fail) {
        return Err(ScenarioError::OutOfRange(p_fail));
    }
    Ok(BehaviorSet { working: 1.0 - p_fail, failing: p_fail })
}
