//! Independent evaluation of a fixed strategy: terminal state per outage
//! event and behavior, and the aggregate risk measures.

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

use crate::case::Case;
use crate::milp::{solve_lp, solve_milp, MilpError, MilpModel, Sense, SolverOptions, VarId};
use crate::rtp::{Strategy, StrategyError};
use crate::scenario::{Behavior, BehaviorSet, Contingency, ContingencySet, Outage};

const INF: f64 = f64::INFINITY;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("internal: {0}")]
    Internal(String),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// How overloaded lines are taken out before emergency control.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RemovalRule {
    /// One pass on the post-contingency flows, as the optimization model does.
    #[default]
    FirstRound,
    /// Repeat until no line in service is overloaded.
    Cascade,
}

/// Which severity terms count and which lines carry limits.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalScope {
    pub demand_weight: Vec<f64>,
    pub gen_weight: Vec<f64>,
    pub monitored: Vec<bool>,
}

impl EvalScope {
    pub fn whole(case: &Case) -> Self {
        EvalScope {
            demand_weight: vec![1.0; case.demands.len()],
            gen_weight: vec![1.0; case.generators.len()],
            monitored: vec![true; case.lines.len()],
        }
    }
}

impl From<&crate::rtp::Scope> for EvalScope {
    fn from(s: &crate::rtp::Scope) -> Self {
        EvalScope {
            demand_weight: s.demand_weight.clone(),
            gen_weight: s.gen_weight.clone(),
            monitored: s.unmonitored_lines.iter().map(|u| !u).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerminalState {
    pub served_load: Vec<f64>,
    pub gen_output: Vec<f64>,
    pub disconnected: Vec<bool>,
    /// Lines taken out by the overload rule (the outaged line is not listed).
    pub removed_lines: Vec<bool>,
    /// Post-contingency flows before any removal.
    pub flows: Vec<f64>,
    /// Terminal flows after emergency control.
    pub terminal_flows: Vec<f64>,
    pub severity: f64,
}

/// Σ v_d (p0 − served) T + Σ w_g over disconnected units.
pub fn severity(case: &Case, served: &[f64], disconnected: &[bool]) -> f64 {
    let shed: f64 = case.demands.iter().zip(served).map(|(d, s)| d.voll * (d.p0 - s) * case.horizon_hours).sum();
    let units: f64 = case.generators.iter().zip(disconnected).filter(|(_, &y)| y).map(|(g, _)| g.disconnect_fee).sum();
    shed + units
}

fn ends(case: &Case) -> Vec<(usize, usize)> {
    case.line_ends()
}

/// Connected components of the network restricted to `in_service` lines.
fn islands(case: &Case, in_service: &[bool]) -> Vec<usize> {
    let n = case.nodes.len();
    let e = ends(case);
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for (l, &(a, b)) in e.iter().enumerate() {
                if !in_service[l] {
                    continue;
                }
                let v = if a == u { b } else if b == u { a } else { continue };
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    q.push_back(v);
                }
            }
        }
        next += 1;
    }
    comp
}

/// DC flows for nodal injections; each island is first balanced by scaling
/// down whichever of its generation or load is larger.
fn dc_flows(case: &Case, in_service: &[bool], gen: &[f64]) -> Result<Vec<f64>, EvalError> {
    let n = case.nodes.len();
    let comp = islands(case, in_service);
    let ncomp = comp.iter().max().map_or(0, |m| m + 1);
    let mut g_node = vec![0.0; n];
    for (g, gg) in case.generators.iter().enumerate() {
        g_node[case.node_index(gg.node).unwrap_or(0)] += gen[g];
    }
    let d_node = case.nodal_load();
    let mut gsum = vec![0.0; ncomp];
    let mut dsum = vec![0.0; ncomp];
    for i in 0..n {
        gsum[comp[i]] += g_node[i];
        dsum[comp[i]] += d_node[i];
    }
    let inj: Vec<f64> = (0..n)
        .map(|i| {
            let (gs, ds) = (gsum[comp[i]], dsum[comp[i]]);
            if (gs - ds).abs() <= 1e-9 * gs.max(ds).max(1.0) {
                g_node[i] - d_node[i]
            } else if gs > ds {
                g_node[i] * ds / gs - d_node[i]
            } else {
                g_node[i] - d_node[i] * gs / ds
            }
        })
        .collect();
    let e = ends(case);
    let mut m = MilpModel::new();
    let mut seen = vec![false; ncomp];
    let theta: Vec<VarId> = (0..n)
        .map(|i| {
            let v = m.add_var(format!("th_{i}"), -INF, INF, 0.0);
            if !seen[comp[i]] {
                seen[comp[i]] = true;
                m.fix(v, 0.0);
            }
            v
        })
        .collect();
    let f: Vec<VarId> = (0..case.lines.len())
        .map(|l| {
            let v = m.add_var(format!("f_{l}"), -INF, INF, 0.0);
            if !in_service[l] {
                m.fix(v, 0.0);
            }
            v
        })
        .collect();
    for (l, line) in case.lines.iter().enumerate() {
        if in_service[l] {
            let (a, b) = e[l];
            let x = line.reactance;
            m.add_con(format!("pf_{l}"), vec![(f[l], 1.0), (theta[a], -1.0 / x), (theta[b], 1.0 / x)], Sense::Eq, 0.0);
        }
    }
    for i in 0..n {
        let mut t = Vec::new();
        for (l, &(a, b)) in e.iter().enumerate() {
            if a == i {
                t.push((f[l], 1.0));
            }
            if b == i {
                t.push((f[l], -1.0));
            }
        }
        m.add_con(format!("bal_{i}"), t, Sense::Eq, inj[i]);
    }
    let sol = solve_lp(&m)?;
    if !sol.is_optimal() {
        return Err(EvalError::Internal(format!("DC power flow: {:?}", sol.status)));
    }
    Ok(f.iter().map(|&v| sol.value(v)).collect())
}

fn overloaded(case: &Case, flow: f64, l: usize) -> bool {
    flow.abs() > case.lines[l].f_max * (1.0 + 1e-3)
}

/// Output each unit holds when the emergency stage starts.
pub fn fixed_injections(contingency: &Contingency, behavior: Behavior, strategy: &Strategy) -> Vec<f64> {
    let row = match (behavior, contingency.outage) {
        (_, Outage::None) | (Behavior::Failing, _) => strategy.preventive.clone(),
        (Behavior::Working, o) => strategy.corrective_for(o),
    };
    row.iter().enumerate().map(|(g, &p)| if contingency.gen_available(g) { p } else { 0.0 }).collect()
}

pub fn terminal_state(
    case: &Case,
    contingency: &Contingency,
    behavior: Behavior,
    strategy: &Strategy,
    rule: RemovalRule,
    scope: &EvalScope,
) -> Result<TerminalState, EvalError> {
    let nl = case.lines.len();
    let ng = case.generators.len();
    let base = fixed_injections(contingency, behavior, strategy);
    let mut in_service: Vec<bool> = (0..nl).map(|l| contingency.line_available(l)).collect();
    let flows = dc_flows(case, &in_service, &base)?;
    let mut removed = vec![false; nl];
    let intact = behavior == Behavior::Failing && contingency.is_gen_outage();
    if !intact {
        let mut current = flows.clone();
        loop {
            let mut any = false;
            for l in 0..nl {
                if in_service[l] && scope.monitored[l] && overloaded(case, current[l], l) {
                    in_service[l] = false;
                    removed[l] = true;
                    any = true;
                }
            }
            if !any || rule == RemovalRule::FirstRound {
                break;
            }
            current = dc_flows(case, &in_service, &base)?;
        }
    }

    // emergency control: shed load, ramp down within ΔP^e or disconnect
    let e = ends(case);
    let mut m = MilpModel::new();
    let h = case.horizon_hours;
    let theta: Vec<VarId> =
        (0..case.nodes.len()).map(|i| m.add_var(format!("th_{i}"), -INF, INF, 0.0)).collect();
    let f: Vec<VarId> = (0..nl)
        .map(|l| {
            let fm = case.lines[l].f_max;
            let (lo, hi) = match (in_service[l], scope.monitored[l]) {
                (false, _) => (0.0, 0.0),
                (true, true) => (-fm, fm),
                (true, false) => (-INF, INF),
            };
            m.add_var(format!("f_{l}"), lo, hi, 0.0)
        })
        .collect();
    for (l, line) in case.lines.iter().enumerate() {
        if in_service[l] {
            let (a, b) = e[l];
            let x = line.reactance;
            m.add_con(format!("pf_{l}"), vec![(f[l], 1.0), (theta[a], -1.0 / x), (theta[b], 1.0 / x)], Sense::Eq, 0.0);
        }
    }
    let mut offset = 0.0;
    let served: Vec<VarId> = case
        .demands
        .iter()
        .enumerate()
        .map(|(d, dem)| {
            let v = dem.voll * h * scope.demand_weight[d];
            offset += v * dem.p0;
            m.add_var(format!("d_{d}"), 0.0, dem.p0, -v)
        })
        .collect();
    let mut out = Vec::with_capacity(ng);
    let mut y = Vec::with_capacity(ng);
    for (g, gen) in case.generators.iter().enumerate() {
        let p = m.add_var(format!("p_{g}"), 0.0, INF, 0.0);
        let yy = m.add_binary(format!("y_{g}"), gen.disconnect_fee * scope.gen_weight[g]);
        let b = base[g];
        if !contingency.gen_available(g) {
            m.fix(p, 0.0);
            m.fix(yy, 0.0);
        } else {
            let floor = (b - gen.emergency_ramp).max(gen.p_min);
            m.add_con(format!("up_{g}"), vec![(p, 1.0), (yy, b)], Sense::Le, b);
            m.add_con(format!("dn_{g}"), vec![(p, 1.0), (yy, floor)], Sense::Ge, floor);
        }
        out.push(p);
        y.push(yy);
    }
    for i in 0..case.nodes.len() {
        let node = case.nodes[i];
        let mut t: Vec<(VarId, f64)> = Vec::new();
        for (g, gen) in case.generators.iter().enumerate() {
            if gen.node == node {
                t.push((out[g], 1.0));
            }
        }
        for (d, dem) in case.demands.iter().enumerate() {
            if dem.node == node {
                t.push((served[d], -1.0));
            }
        }
        for (l, &(a, b)) in e.iter().enumerate() {
            if a == i {
                t.push((f[l], -1.0));
            }
            if b == i {
                t.push((f[l], 1.0));
            }
        }
        m.add_con(format!("bal_{i}"), t, Sense::Eq, 0.0);
    }
    m.obj_offset = offset;
    let sol = solve_milp(&m, &SolverOptions::default())?;
    if !sol.is_optimal() {
        return Err(EvalError::Internal(format!("emergency control: {:?}", sol.status)));
    }
    let clean = |x: f64| if x.abs() < 1e-9 { 0.0 } else { x };
    let served_load: Vec<f64> = served.iter().map(|&v| clean(sol.value(v))).collect();
    let disconnected: Vec<bool> = y.iter().map(|&v| sol.value(v) > 0.5).collect();
    let sev: f64 = case
        .demands
        .iter()
        .enumerate()
        .map(|(d, dem)| dem.voll * h * scope.demand_weight[d] * (dem.p0 - served_load[d]))
        .sum::<f64>()
        + case
            .generators
            .iter()
            .enumerate()
            .filter(|&(g, _)| disconnected[g])
            .map(|(g, gen)| gen.disconnect_fee * scope.gen_weight[g])
            .sum::<f64>();
    Ok(TerminalState {
        served_load,
        gen_output: out.iter().map(|&v| clean(sol.value(v))).collect(),
        disconnected,
        removed_lines: removed,
        flows,
        terminal_flows: f.iter().map(|&v| clean(sol.value(v))).collect(),
        severity: if sev.abs() < 1e-9 { 0.0 } else { sev },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeverityRow {
    pub contingency: usize,
    pub outage: Outage,
    pub label: String,
    pub behavior: Behavior,
    pub severity: f64,
    /// Severity as a share of the maximum possible, in percent.
    pub percent: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyEvaluation {
    pub preventive_cost: f64,
    pub expected_corrective_cost: f64,
    pub expected_severity: f64,
    pub rows: Vec<SeverityRow>,
    pub states: Vec<TerminalState>,
}

impl StrategyEvaluation {
    pub fn operating_cost(&self) -> f64 {
        self.preventive_cost + self.expected_corrective_cost
    }

    pub fn total_cost(&self) -> f64 {
        self.operating_cost() + self.expected_severity
    }

    /// Probability that severity does not exceed `s`.
    pub fn prob_leq(&self, s: f64) -> f64 {
        self.rows.iter().filter(|r| r.severity <= s).map(|r| r.weight).sum()
    }

    /// Probability mass of (event, behavior) pairs above `s_max` is within `eps`.
    pub fn chance_ok(&self, s_max: f64, eps: f64) -> bool {
        let viol: f64 = self.rows.iter().filter(|r| r.severity > s_max + 1e-6).map(|r| r.weight).sum();
        viol <= eps + 1e-12
    }

    pub fn severity_of(&self, outage: Outage, behavior: Behavior) -> Option<f64> {
        self.rows.iter().find(|r| r.outage == outage && r.behavior == behavior).map(|r| r.severity)
    }

    /// contingency,label,behavior,severity_eur,severity_pct,weight
    pub fn to_csv(&self) -> String {
        let mut s = String::from("contingency,label,behavior,severity_eur,severity_pct,weight\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.2},{:.2},{:e}",
                r.contingency,
                r.label,
                r.behavior.tag(),
                r.severity,
                r.percent,
                r.weight
            );
        }
        s
    }
}

/// Σ_c π_c Σ_g c^r_g (P^c − P^0), the outaged unit included.
pub fn expected_corrective_cost(case: &Case, cs: &ContingencySet, strategy: &Strategy, priced: &[bool]) -> f64 {
    cs.outages()
        .map(|c| {
            let row = strategy.corrective_for(c.outage);
            c.pi * case
                .generators
                .iter()
                .enumerate()
                .filter(|&(g, _)| priced[g])
                .map(|(g, gen)| gen.corrective_cost * (row[g] - strategy.preventive[g]))
                .sum::<f64>()
        })
        .sum()
}

pub fn evaluate_strategy(
    case: &Case,
    cs: &ContingencySet,
    bs: &BehaviorSet,
    strategy: &Strategy,
) -> Result<StrategyEvaluation, EvalError> {
    evaluate_with(case, cs, bs, strategy, RemovalRule::FirstRound, &EvalScope::whole(case))
}

pub fn evaluate_with(
    case: &Case,
    cs: &ContingencySet,
    bs: &BehaviorSet,
    strategy: &Strategy,
    rule: RemovalRule,
    scope: &EvalScope,
) -> Result<StrategyEvaluation, EvalError> {
    strategy.validate(case, cs)?;
    let smax = case.max_severity();
    let mut rows = Vec::new();
    let mut states = Vec::new();
    for c in cs.iter() {
        for b in Behavior::BOTH {
            let st = terminal_state(case, c, b, strategy, rule, scope)?;
            rows.push(SeverityRow {
                contingency: c.id,
                outage: c.outage,
                label: c.label(case),
                behavior: b,
                severity: st.severity,
                percent: if smax > 0.0 { 100.0 * st.severity / smax } else { 0.0 },
                weight: c.pi * bs.pi(b),
            });
            states.push(st);
        }
    }
    let preventive_cost = case.generators.iter().zip(&strategy.preventive).map(|(g, p)| g.cost * p).sum();
    let expected_severity = rows.iter().map(|r| r.weight * r.severity).sum();
    Ok(StrategyEvaluation {
        preventive_cost,
        expected_corrective_cost: expected_corrective_cost(case, cs, strategy, &vec![true; case.generators.len()]),
        expected_severity,
        rows,
        states,
    })
}
