//! Two-operator study: boundary dispatch from a system OPF, one security
//! subproblem per area, then a merged system-wide severity evaluation.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::case::{Case, NodeId};
use crate::milp::{solve_lp, solve_milp, MilpModel, MilpSolution, Sense, SolverOptions, VarId};
use crate::rtp::{build_with, BuildSpec, RtpError, RtpOptions, Scope, Strategy, VariableMap};
use crate::scenario::{Behavior, BehaviorSet, ContingencySet, Outage};
use crate::terminal::{evaluate_with, EvalError, EvalScope, RemovalRule, StrategyEvaluation};

#[derive(Debug, Error)]
pub enum AreaError {
    #[error("node {0} is not assigned to any area")]
    Unassigned(NodeId),
    #[error("node {0} is assigned to more than one area")]
    Overlap(NodeId),
    #[error("unknown node {0} in partition")]
    UnknownNode(NodeId),
    #[error("unknown area {0}")]
    UnknownArea(String),
    #[error("boundary dispatch covers {got} of {expected} generators")]
    Boundary { expected: usize, got: usize },
    #[error("generator {0} is controlled by more than one area strategy")]
    OverlappingStrategies(String),
    #[error("generator {0} is controlled by no area strategy")]
    UncoveredGenerator(String),
    #[error("system OPF is {0}")]
    Opf(String),
    #[error(transparent)]
    Rtp(#[from] RtpError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Milp(#[from] crate::milp::MilpError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Area {
    pub id: String,
    pub nodes: Vec<NodeId>,
}

/// Node partition with the derived ownership of every element.
#[derive(Clone, Debug, PartialEq)]
pub struct AreaPartition {
    pub areas: Vec<Area>,
    /// Area index of every node, in case order.
    pub node_area: Vec<usize>,
    pub interconnectors: Vec<usize>,
}

impl AreaPartition {
    pub fn new(case: &Case, areas: Vec<Area>) -> Result<Self, AreaError> {
        let mut node_area = vec![usize::MAX; case.nodes.len()];
        for (a, area) in areas.iter().enumerate() {
            for &n in &area.nodes {
                let i = case.node_index(n).ok_or(AreaError::UnknownNode(n))?;
                if node_area[i] != usize::MAX {
                    return Err(AreaError::Overlap(n));
                }
                node_area[i] = a;
            }
        }
        if let Some(i) = node_area.iter().position(|&a| a == usize::MAX) {
            return Err(AreaError::Unassigned(case.nodes[i]));
        }
        let interconnectors = case
            .line_ends()
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| node_area[a] != node_area[b])
            .map(|(l, _)| l)
            .collect();
        Ok(AreaPartition { areas, node_area, interconnectors })
    }

    pub fn area_index(&self, id: &str) -> Result<usize, AreaError> {
        self.areas.iter().position(|a| a.id == id).ok_or_else(|| AreaError::UnknownArea(id.into()))
    }

    pub fn node_in(&self, case: &Case, node: NodeId, area: usize) -> bool {
        case.node_index(node).is_some_and(|i| self.node_area[i] == area)
    }

    pub fn generator_area(&self, case: &Case, g: usize) -> usize {
        self.node_area[case.node_index(case.generators[g].node).unwrap_or(0)]
    }

    pub fn demand_area(&self, case: &Case, d: usize) -> usize {
        self.node_area[case.node_index(case.demands[d].node).unwrap_or(0)]
    }

    /// Whether line `l` has at least one end in `area`.
    pub fn line_touches(&self, case: &Case, l: usize, area: usize) -> bool {
        let (a, b) = case.line_ends()[l];
        self.node_area[a] == area || self.node_area[b] == area
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AreaPolicy {
    SeverityControlled { s_max: f64, epsilon: f64 },
    N1Benchmark,
}

/// Minimum-cost DC dispatch with pre-contingency limits only.
pub fn system_opf(case: &Case) -> Result<Vec<f64>, AreaError> {
    let mut m = MilpModel::new();
    let ends = case.line_ends();
    let p: Vec<VarId> =
        case.generators.iter().map(|g| m.add_var(format!("P0_{}", g.id), g.p_min, g.p_max, g.cost)).collect();
    let slack = case.slack_index();
    let theta: Vec<VarId> = (0..case.nodes.len())
        .map(|i| {
            let v = m.add_var(format!("th_{i}"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
            if i == slack {
                m.fix(v, 0.0);
            }
            v
        })
        .collect();
    let f: Vec<VarId> =
        case.lines.iter().map(|l| m.add_var(format!("f_{}", l.id), -l.f_max, l.f_max, 0.0)).collect();
    for (l, line) in case.lines.iter().enumerate() {
        let (a, b) = ends[l];
        let x = line.reactance;
        m.add_con(format!("pf_{l}"), vec![(f[l], 1.0), (theta[a], -1.0 / x), (theta[b], 1.0 / x)], Sense::Eq, 0.0);
    }
    let load = case.nodal_load();
    for i in 0..case.nodes.len() {
        let mut t: Vec<(VarId, f64)> = Vec::new();
        for (g, gen) in case.generators.iter().enumerate() {
            if gen.node == case.nodes[i] {
                t.push((p[g], 1.0));
            }
        }
        for (l, &(a, b)) in ends.iter().enumerate() {
            if a == i {
                t.push((f[l], -1.0));
            }
            if b == i {
                t.push((f[l], 1.0));
            }
        }
        m.add_con(format!("bal_{i}"), t, Sense::Eq, load[i]);
    }
    let sol = solve_lp(&m)?;
    if !sol.is_optimal() {
        return Err(AreaError::Opf(format!("{:?}", sol.status).to_lowercase()));
    }
    Ok(p.iter().map(|&v| sol.value(v)).collect())
}

/// Outages of lines touching the area and of the area's own units, with
/// their system-wide probabilities.
pub fn area_contingencies(case: &Case, partition: &AreaPartition, area: usize, cs: &ContingencySet) -> ContingencySet {
    cs.restricted(|c| match c.outage {
        Outage::None => true,
        Outage::Line(l) => partition.line_touches(case, l, area),
        Outage::Generator(g) => partition.generator_area(case, g) == area,
    })
}

/// Model scope of one area operator.
pub fn area_scope(case: &Case, partition: &AreaPartition, area: usize, boundary: &[f64], policy: AreaPolicy) -> Scope {
    let ends = case.line_ends();
    let foreign_line: Vec<bool> = ends
        .iter()
        .map(|&(a, b)| partition.node_area[a] != area && partition.node_area[b] != area)
        .collect();
    let own_gen: Vec<bool> =
        (0..case.generators.len()).map(|g| partition.generator_area(case, g) == area).collect();
    let n1 = policy == AreaPolicy::N1Benchmark;
    Scope {
        fixed_dispatch: own_gen.iter().zip(boundary).map(|(&own, &p)| if own { None } else { Some(p) }).collect(),
        cost_generators: own_gen.clone(),
        demand_weight: (0..case.demands.len())
            .map(|d| if partition.demand_area(case, d) == area { 1.0 } else { 0.0 })
            .collect(),
        gen_weight: own_gen.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect(),
        frozen_lines: if n1 { vec![false; case.lines.len()] } else { foreign_line.clone() },
        unmonitored_lines: if n1 { foreign_line } else { vec![false; case.lines.len()] },
    }
}

pub fn build_area_subproblem(
    case: &Case,
    partition: &AreaPartition,
    area: usize,
    boundary: &[f64],
    policy: AreaPolicy,
    cs: &ContingencySet,
    bs: &BehaviorSet,
) -> Result<(MilpModel, VariableMap, ContingencySet), AreaError> {
    if boundary.len() != case.generators.len() {
        return Err(AreaError::Boundary { expected: case.generators.len(), got: boundary.len() });
    }
    let acs = area_contingencies(case, partition, area, cs);
    let scope = area_scope(case, partition, area, boundary, policy);
    let mut spec = match policy {
        AreaPolicy::SeverityControlled { s_max, epsilon } => BuildSpec::rtp(case, &RtpOptions::severity(s_max, epsilon)),
        AreaPolicy::N1Benchmark => BuildSpec::case_a(case),
    };
    spec.scope = scope;
    let (m, map) = build_with(case, &acs, bs, &spec)?;
    Ok((m, map, acs))
}

/// One solved area subproblem.
#[derive(Clone, Debug)]
pub struct AreaRun {
    pub area: usize,
    pub policy: AreaPolicy,
    pub contingencies: ContingencySet,
    pub strategy: Strategy,
    pub solution: MilpSolution,
}

pub fn solve_area(
    case: &Case,
    partition: &AreaPartition,
    area: usize,
    boundary: &[f64],
    policy: AreaPolicy,
    cs: &ContingencySet,
    bs: &BehaviorSet,
    opts: &SolverOptions,
) -> Result<AreaRun, AreaError> {
    let (m, map, acs) = build_area_subproblem(case, partition, area, boundary, policy, cs, bs)?;
    let solution = solve_milp(&m, opts)?;
    let strategy = crate::rtp::extract_strategy(&solution, &map)
        .map_err(|e| AreaError::Rtp(RtpError::NotOptimal(e.to_string())))?;
    Ok(AreaRun { area, policy, contingencies: acs, strategy, solution })
}

/// Combines per-area strategies: each area's units follow that area's
/// preventive point and, for the area's own events, its corrective schedule.
pub fn merge_strategies(
    case: &Case,
    partition: &AreaPartition,
    cs: &ContingencySet,
    runs: &[AreaRun],
) -> Result<Strategy, AreaError> {
    let ng = case.generators.len();
    let mut owner: Vec<Option<usize>> = vec![None; ng];
    for (r, run) in runs.iter().enumerate() {
        for (g, slot) in owner.iter_mut().enumerate() {
            if partition.generator_area(case, g) == run.area {
                if slot.is_some() {
                    return Err(AreaError::OverlappingStrategies(case.generators[g].id.clone()));
                }
                *slot = Some(r);
            }
        }
    }
    let owner: Vec<usize> = owner
        .iter()
        .enumerate()
        .map(|(g, o)| o.ok_or_else(|| AreaError::UncoveredGenerator(case.generators[g].id.clone())))
        .collect::<Result<_, _>>()?;
    let preventive: Vec<f64> = (0..ng).map(|g| runs[owner[g]].strategy.preventive[g]).collect();
    let mut corrective = BTreeMap::new();
    for c in cs.outages() {
        let row = (0..ng)
            .map(|g| {
                if !c.gen_available(g) {
                    return 0.0;
                }
                let run = &runs[owner[g]];
                match run.strategy.corrective.get(&c.outage) {
                    Some(r) => r[g],
                    None => preventive[g],
                }
            })
            .collect();
        corrective.insert(c.outage, row);
    }
    Ok(Strategy { preventive, corrective })
}

/// Severity of one (event, behavior) pair split by area.
#[derive(Clone, Debug, PartialEq)]
pub struct AreaSeverityRow {
    pub contingency: usize,
    pub label: String,
    pub behavior: Behavior,
    pub weight: f64,
    pub by_area: Vec<f64>,
}

impl AreaSeverityRow {
    pub fn total(&self) -> f64 {
        self.by_area.iter().sum()
    }
}

/// System-wide minimum severity of a merged strategy, split by area.
pub fn merge_and_min_severity(
    case: &Case,
    partition: &AreaPartition,
    cs: &ContingencySet,
    bs: &BehaviorSet,
    strategy: &Strategy,
) -> Result<(StrategyEvaluation, Vec<AreaSeverityRow>), AreaError> {
    let ev = evaluate_with(case, cs, bs, strategy, RemovalRule::FirstRound, &EvalScope::whole(case))?;
    let h = case.horizon_hours;
    let rows = ev
        .rows
        .iter()
        .zip(&ev.states)
        .map(|(r, st)| {
            let mut by_area = vec![0.0; partition.areas.len()];
            for (d, dem) in case.demands.iter().enumerate() {
                by_area[partition.demand_area(case, d)] += dem.voll * h * (dem.p0 - st.served_load[d]);
            }
            for (g, gen) in case.generators.iter().enumerate() {
                if st.disconnected[g] {
                    by_area[partition.generator_area(case, g)] += gen.disconnect_fee;
                }
            }
            for v in &mut by_area {
                if v.abs() < 1e-9 {
                    *v = 0.0;
                }
            }
            AreaSeverityRow {
                contingency: r.contingency,
                label: r.label.clone(),
                behavior: r.behavior,
                weight: r.weight,
                by_area,
            }
        })
        .collect();
    Ok((ev, rows))
}

/// Workflow description read from a TOML file.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Workflow {
    pub case: String,
    #[serde(default = "default_pfail")]
    pub p_fail: f64,
    pub areas: Vec<AreaSpec>,
    /// Optional system-wide severity-controlled run for comparison.
    #[serde(default)]
    pub system: Option<PolicySpec>,
}

fn default_pfail() -> f64 {
    0.2
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    pub id: String,
    pub nodes: Vec<NodeId>,
    #[serde(flatten)]
    pub policy: PolicySpec,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct PolicySpec {
    pub policy: String,
    #[serde(default)]
    pub s_max: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl PolicySpec {
    pub fn to_policy(&self, case: &Case) -> Result<AreaPolicy, String> {
        match self.policy.as_str() {
            "severity" => Ok(AreaPolicy::SeverityControlled {
                s_max: self.s_max.unwrap_or_else(|| case.max_severity()),
                epsilon: self.epsilon.unwrap_or(0.0),
            }),
            "n1-benchmark" => Ok(AreaPolicy::N1Benchmark),
            other => Err(format!("unknown policy {other:?} (expected severity or n1-benchmark)")),
        }
    }
}

impl Workflow {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}
