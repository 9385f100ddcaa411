use std::collections::{BTreeSet, HashSet};

use super::{Case, ProbabilitySource};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks every structural and numeric invariant of `case`.
pub fn validate_case(case: &Case) -> ValidationReport {
    let mut r = ValidationReport::default();
    let err = |r: &mut ValidationReport, m: String| r.errors.push(m);

    if case.nodes.is_empty() {
        err(&mut r, "no nodes".into());
    }
    let nodes: HashSet<_> = case.nodes.iter().copied().collect();
    if nodes.len() != case.nodes.len() {
        err(&mut r, "duplicate node ids".into());
    }
    if !nodes.contains(&case.slack_node) && !case.nodes.is_empty() {
        err(&mut r, format!("slack node {} does not exist", case.slack_node));
    }
    if !(case.horizon_hours > 0.0) {
        err(&mut r, format!("horizon_h must be positive, got {}", case.horizon_hours));
    }
    if case.generators.is_empty() {
        err(&mut r, "no generators".into());
    }
    if case.demands.is_empty() {
        err(&mut r, "no demands".into());
    }

    let mut ids = HashSet::new();
    for id in case.lines.iter().map(|l| &l.id).chain(case.generators.iter().map(|g| &g.id)).chain(case.demands.iter().map(|d| &d.id)) {
        if !ids.insert(id) {
            err(&mut r, format!("duplicate component id {id}"));
        }
    }

    for l in &case.lines {
        for n in [l.from_node, l.to_node] {
            if !nodes.contains(&n) {
                err(&mut r, format!("line {} references nonexistent node {n}", l.id));
            }
        }
        if l.from_node == l.to_node {
            err(&mut r, format!("line {} connects node {} to itself", l.id, l.from_node));
        }
        if !(l.f_max > 0.0) {
            err(&mut r, format!("line {}: f_max must be positive", l.id));
        }
        if !(l.reactance > 0.0) {
            err(&mut r, format!("line {}: reactance must be positive", l.id));
        }
        if !(l.mttf > 0.0) {
            err(&mut r, format!("line {}: mttf must be positive", l.id));
        }
    }
    for g in &case.generators {
        if !nodes.contains(&g.node) {
            err(&mut r, format!("generator {} references nonexistent node {}", g.id, g.node));
        }
        if !(0.0 <= g.p_min && g.p_min <= g.p_max) {
            err(&mut r, format!("generator {}: need 0 <= p_min <= p_max, got {} / {}", g.id, g.p_min, g.p_max));
        }
        for (name, v) in [("ramp_down", g.ramp_down), ("ramp_up", g.ramp_up), ("emergency_ramp", g.emergency_ramp), ("disconnect_fee", g.disconnect_fee)] {
            if !(v >= 0.0) {
                err(&mut r, format!("generator {}: {name} must be nonnegative", g.id));
            }
        }
        if !(g.mttf > 0.0) {
            err(&mut r, format!("generator {}: mttf must be positive", g.id));
        }
        if let Some(pm) = g.p_market {
            if !(g.p_min <= pm && pm <= g.p_max) {
                err(&mut r, format!("generator {}: p_market {pm} outside [p_min, p_max]", g.id));
            }
        }
        if !g.cost.is_finite() || !g.corrective_cost.is_finite() {
            err(&mut r, format!("generator {}: costs must be finite", g.id));
        }
    }
    for d in &case.demands {
        if !nodes.contains(&d.node) {
            err(&mut r, format!("demand {} references nonexistent node {}", d.id, d.node));
        }
        if !(d.p0 >= 0.0) {
            err(&mut r, format!("demand {}: load must be nonnegative", d.id));
        }
        if !(d.voll >= 0.0) {
            err(&mut r, format!("demand {}: voll must be nonnegative", d.id));
        }
    }
    if let ProbabilitySource::Explicit(p) = &case.probabilities {
        let want = 1 + case.lines.len() + case.generators.len();
        if p.len() != want {
            err(&mut r, format!("explicit probabilities: expected {want} values, got {}", p.len()));
        }
    }

    if r.errors.is_empty() && !connected(case) {
        r.warnings.push("network graph is disconnected".into());
    }
    r
}

fn connected(case: &Case) -> bool {
    let n = case.nodes.len();
    if n <= 1 {
        return true;
    }
    let ends = case.line_ends();
    let mut seen = BTreeSet::from([0usize]);
    let mut stack = vec![0usize];
    while let Some(u) = stack.pop() {
        for &(a, b) in &ends {
            let v = if a == u { b } else if b == u { a } else { continue };
            if seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen.len() == n
}
