//! Branch-and-bound over binary variables.
//!
//! Models whose constraint graph falls apart into independent blocks (after
//! fixed variables are substituted) are solved block by block. Within a
//! block the search follows [`BranchingRule`]: either most-fractional
//! branching with FIFO best-bound selection, or reliability branching
//! (pseudocosts once a variable has enough history, strong branching before
//! that) with plunging into a child of the node just branched on while that
//! child stays close to the best bound. Children are warm-started from the
//! parent's final basis and re-solved with the dual simplex.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use super::model::{Constraint, MilpModel, VarId, VarKind};
use super::simplex::{LpProblem, LpStatus, Simplex, St};
use super::{lp_status, unscaled, BranchingRule, MilpError, MilpSolution, MilpStatus, SolveStats, SolverOptions};

/// Pseudocost observations needed before strong branching is skipped.
const RELIABLE: usize = 4;
/// Strong-branching candidates evaluated per node at most.
const MAX_STRONG: usize = 10;
/// Candidates without improvement before strong branching stops early.
const LOOKAHEAD: usize = 4;
/// Dual simplex iterations allowed per strong-branching child.
const STRONG_ITERATIONS: usize = 200;

struct Node {
    bound: f64,
    /// Tie-break among equal bounds, larger first.
    order: u64,
    depth: usize,
    fixes: Vec<(usize, f64)>,
    basis: Rc<Vec<St>>,
    origin: Option<Origin>,
}

/// The branching that created a node, for pseudocost updates.
#[derive(Clone, Copy)]
struct Origin {
    var: usize,
    up: bool,
    parent_obj: f64,
    distance: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| self.order.cmp(&other.order))
    }
}

#[derive(Clone, Copy, Default)]
struct Pseudocost {
    sum: [f64; 2],
    count: [usize; 2],
}

enum Branching {
    /// Both children are infeasible or cut off.
    Prune,
    /// One child is infeasible or cut off: fix the variable the other way.
    Fix(usize, f64),
    /// Children carry valid lower bounds: strong-branching objectives where
    /// known, the parent's objective otherwise.
    Branch { var: usize, down: f64, up: f64 },
}

struct Search<'a> {
    model: &'a MilpModel,
    p: &'a LpProblem,
    opts: &'a SolverOptions,
    binaries: Vec<usize>,
    pseudo: Vec<Pseudocost>,
    incumbent: Option<(f64, Vec<f64>)>,
    lp_iterations: usize,
}

fn fractionality(v: f64) -> f64 {
    (v - v.floor()).min(v.ceil() - v)
}

impl<'a> Search<'a> {
    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - self.opts.relative_gap * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn apply_fixes(&self, s: &mut Simplex, fixes: &[(usize, f64)]) {
        for &j in &self.binaries {
            s.lb[j] = self.p.lb[j];
            s.ub[j] = self.p.ub[j];
        }
        for &(j, v) in fixes {
            let sv = self.p.scale_bound(j, v);
            s.lb[j] = sv;
            s.ub[j] = sv;
        }
    }

    fn fractional(&self, x: &[f64]) -> Vec<usize> {
        let tol = self.opts.integrality_tol;
        (0..self.binaries.len()).filter(|&k| fractionality(x[self.binaries[k]]) > tol).collect()
    }

    /// Rounds binaries and accepts the point if it replays within tolerance.
    fn try_incumbent(&mut self, x: &[f64]) -> bool {
        let mut v = x.to_vec();
        for &j in &self.binaries {
            v[j] = v[j].round();
        }
        let viol = self.model.max_violation(&v);
        if viol > self.opts.feasibility_tol * 100.0 {
            return false;
        }
        let obj = self.model.objective(&v);
        if self.incumbent.as_ref().is_none_or(|(o, _)| obj < *o - 1e-12 * o.abs().max(1.0)) {
            self.incumbent = Some((obj, v));
            return true;
        }
        false
    }

    fn solve_node(&mut self, s: &mut Simplex, fixes: &[(usize, f64)], basis: &[St]) -> LpStatus {
        self.apply_fixes(s, fixes);
        s.set_basis(basis);
        let before = s.iterations;
        let st = s.solve();
        self.lp_iterations += s.iterations - before;
        st
    }

    /// Integral LP point that fails the replay check: re-solve with every
    /// binary held at its rounded value and offer that point instead.
    fn polish_integral(&mut self, s: &mut Simplex, x: &[f64], basis: &[St]) {
        let fixes: Vec<(usize, f64)> = self.binaries.iter().map(|&j| (j, x[j].round())).collect();
        if self.solve_node(s, &fixes, basis) == LpStatus::Optimal {
            let y = unscaled(self.p, s);
            self.try_incumbent(&y);
        }
    }

    fn record(&mut self, k: usize, up: bool, gain: f64, distance: f64) {
        if !gain.is_finite() || distance <= 0.0 {
            return;
        }
        let d = usize::from(up);
        self.pseudo[k].sum[d] += gain.max(0.0) / distance;
        self.pseudo[k].count[d] += 1;
    }

    fn pseudocost(&self, k: usize, up: bool, mean: [f64; 2]) -> f64 {
        let d = usize::from(up);
        let pc = &self.pseudo[k];
        if pc.count[d] == 0 {
            mean[d]
        } else {
            pc.sum[d] / pc.count[d] as f64
        }
    }

    fn mean_pseudocost(&self) -> [f64; 2] {
        let mut out = [1.0; 2];
        for (d, o) in out.iter_mut().enumerate() {
            let (s, n) = self.pseudo.iter().fold((0.0, 0), |(s, n), p| (s + p.sum[d], n + p.count[d]));
            if n > 0 {
                *o = s / n as f64;
            }
        }
        out
    }

    /// Child objective after fixing binary `k` to `v`, with a small
    /// iteration budget. `None` when the child is infeasible or cut off.
    fn probe(&mut self, s: &mut Simplex, fixes: &[(usize, f64)], basis: &[St], k: usize, v: f64, parent: f64) -> Option<f64> {
        let mut f = fixes.to_vec();
        f.push((self.binaries[k], v));
        let keep = s.max_iterations;
        s.max_iterations = STRONG_ITERATIONS;
        let st = self.solve_node(s, &f, basis);
        s.max_iterations = keep;
        match st {
            LpStatus::Optimal => {
                let obj = self.model.objective(&unscaled(self.p, s)).max(parent);
                (obj < self.cutoff()).then_some(obj)
            }
            LpStatus::Infeasible => None,
            _ => Some(parent),
        }
    }

    fn select(&mut self, s: &mut Simplex, fixes: &[(usize, f64)], basis: &[St], x: &[f64], obj: f64) -> Branching {
        let cand = self.fractional(x);
        if self.opts.branching == BranchingRule::MostFractional {
            let mut best = cand[0];
            for &k in &cand[1..] {
                if fractionality(x[self.binaries[k]]) > fractionality(x[self.binaries[best]]) {
                    best = k;
                }
            }
            return Branching::Branch { var: best, down: obj, up: obj };
        }
        let mean = self.mean_pseudocost();
        let score = |d: f64, u: f64| d.max(1e-6) * u.max(1e-6);
        let mut ranked: Vec<(f64, usize)> = cand
            .iter()
            .map(|&k| {
                let v = x[self.binaries[k]];
                let (fd, fu) = (v - v.floor(), v.ceil() - v);
                (score(fd * self.pseudocost(k, false, mean), fu * self.pseudocost(k, true, mean)), k)
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let mut best: Option<(f64, usize, f64, f64)> = None;
        let mut strong = 0;
        let mut stale = 0;
        for &(est, k) in &ranked {
            let v = x[self.binaries[k]];
            let (fd, fu) = (v - v.floor(), v.ceil() - v);
            let pc = &self.pseudo[k];
            let reliable = pc.count[0].min(pc.count[1]) >= RELIABLE;
            let (sc, down, up) = if reliable || strong >= MAX_STRONG || stale >= LOOKAHEAD {
                if !reliable && best.is_some() {
                    continue;
                }
                // pseudocost estimates only rank; the children inherit the parent bound
                (est, obj, obj)
            } else {
                strong += 1;
                let dn = self.probe(s, fixes, basis, k, 0.0, obj);
                let upo = self.probe(s, fixes, basis, k, 1.0, obj);
                match (dn, upo) {
                    (None, None) => return Branching::Prune,
                    (None, Some(_)) => return Branching::Fix(self.binaries[k], 1.0),
                    (Some(_), None) => return Branching::Fix(self.binaries[k], 0.0),
                    (Some(d), Some(u)) => {
                        self.record(k, false, d - obj, fd);
                        self.record(k, true, u - obj, fu);
                        (score(d - obj, u - obj), d, u)
                    }
                }
            };
            if best.is_none_or(|(b, ..)| sc > b) {
                best = Some((sc, k, down, up));
                stale = 0;
            } else {
                stale += 1;
            }
        }
        let (_, k, down, up) = best.expect("at least one fractional candidate");
        Branching::Branch { var: k, down, up }
    }

    /// Fractional diving: repeatedly fix the least fractional binary to its
    /// nearest value, flipping once on infeasibility.
    fn dive(&mut self, s: &mut Simplex, start_fixes: &[(usize, f64)], basis: &[St], max_depth: usize) {
        let tol = self.opts.integrality_tol;
        let mut fixes = start_fixes.to_vec();
        let mut basis = basis.to_vec();
        for _ in 0..max_depth {
            let st = self.solve_node(s, &fixes, &basis);
            if st != LpStatus::Optimal {
                return;
            }
            let x = unscaled(self.p, s);
            if self.model.objective(&x) >= self.cutoff() {
                return;
            }
            basis = s.basis();
            let mut pick: Option<(usize, f64)> = None;
            for &j in &self.binaries {
                let f = fractionality(x[j]);
                if f > tol && pick.is_none_or(|(_, bf)| f < bf) {
                    pick = Some((j, f));
                }
            }
            let Some((j, _)) = pick else {
                if !self.try_incumbent(&x) {
                    self.polish_integral(s, &x, &basis);
                }
                return;
            };
            let r = x[j].round();
            fixes.push((j, r));
            let st = self.solve_node(s, &fixes, &basis);
            if st != LpStatus::Optimal {
                fixes.pop();
                fixes.push((j, 1.0 - r));
            }
        }
    }
}

/// Solves `model` to optimality within `opts.relative_gap`.
pub fn solve_milp(model: &MilpModel, opts: &SolverOptions) -> Result<MilpSolution, MilpError> {
    model.check()?;
    let blocks = components(model);
    if blocks.len() <= 1 {
        return solve_block(model, opts);
    }
    let mut values: Vec<f64> = model.vars.iter().map(|v| if v.lb == v.ub { v.lb } else { 0.0 }).collect();
    let mut stats = SolveStats::default();
    let mut status = MilpStatus::Optimal;
    let mut bound = model.objective(&values);
    for vars in &blocks {
        let (sub, map) = restrict(model, vars, &values);
        let sub_opts = SolverOptions {
            start: opts.start.as_ref().filter(|s| s.len() == model.vars.len()).map(|s| map.iter().map(|&j| s[j]).collect()),
            ..opts.clone()
        };
        let sol = solve_block(&sub, &sub_opts)?;
        stats.nodes += sol.stats.nodes;
        stats.lp_iterations += sol.stats.lp_iterations;
        bound += sol.stats.best_bound;
        match sol.status {
            MilpStatus::Optimal => {}
            MilpStatus::IterationLimit if sol.values.is_empty() => {
                return Ok(MilpSolution::without_values(MilpStatus::IterationLimit, stats));
            }
            MilpStatus::IterationLimit => status = MilpStatus::IterationLimit,
            other => return Ok(MilpSolution::without_values(other, stats)),
        }
        for (k, &j) in map.iter().enumerate() {
            values[j] = sol.values[k];
        }
    }
    stats.best_bound = bound;
    let objective = model.objective(&values);
    Ok(MilpSolution { status, values, objective, stats })
}

/// Groups the variables that are not fixed into connected blocks of the
/// constraint graph. Blocks are ordered by their smallest variable index.
fn components(model: &MilpModel) -> Vec<Vec<usize>> {
    let n = model.vars.len();
    let free: Vec<bool> = model.vars.iter().map(|v| v.lb != v.ub).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for c in &model.cons {
        let mut first: Option<usize> = None;
        for &(v, a) in &c.terms {
            if a == 0.0 || !free[v.0] {
                continue;
            }
            match first {
                None => first = Some(v.0),
                Some(f) => {
                    let (a, b) = (root(&mut parent, f), root(&mut parent, v.0));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut index = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for j in 0..n {
        if !free[j] {
            continue;
        }
        let r = root(&mut parent, j);
        if index[r] == usize::MAX {
            index[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[index[r]].push(j);
    }
    blocks
}

/// The sub-model on `vars`, with every other variable held at `values`.
/// Returns the sub-model and its variable-to-original index map.
fn restrict(model: &MilpModel, vars: &[usize], values: &[f64]) -> (MilpModel, Vec<usize>) {
    let mut local = vec![usize::MAX; model.vars.len()];
    let mut sub = MilpModel::new();
    for (k, &j) in vars.iter().enumerate() {
        local[j] = k;
        sub.vars.push(model.vars[j].clone());
    }
    for c in &model.cons {
        if !c.terms.iter().any(|&(v, a)| a != 0.0 && local[v.0] != usize::MAX) {
            continue;
        }
        let mut rhs = c.rhs;
        let mut terms = Vec::new();
        for &(v, a) in &c.terms {
            if local[v.0] != usize::MAX {
                terms.push((VarId(local[v.0]), a));
            } else {
                rhs -= a * values[v.0];
            }
        }
        sub.cons.push(Constraint { name: c.name.clone(), terms, sense: c.sense, rhs });
    }
    (sub, vars.to_vec())
}

fn solve_block(model: &MilpModel, opts: &SolverOptions) -> Result<MilpSolution, MilpError> {
    let p = LpProblem::from_model(model);
    let binaries: Vec<usize> =
        (0..model.vars.len()).filter(|&j| model.vars[j].kind == VarKind::Binary).collect();
    let pseudo = vec![Pseudocost::default(); binaries.len()];
    let mut search = Search { model, p: &p, opts, binaries, pseudo, incumbent: None, lp_iterations: 0 };
    if let Some(start) = &opts.start {
        if start.len() == model.vars.len() {
            search.try_incumbent(start);
        }
    }

    let mut s = Simplex::new(&p);
    s.set_primal_tol(opts.feasibility_tol);
    let root_basis = s.basis();
    let st = search.solve_node(&mut s, &[], &root_basis);
    if st != LpStatus::Optimal {
        let status = if st == LpStatus::Infeasible { MilpStatus::Infeasible } else { lp_status(st) };
        return Ok(finish(&search, status, 0, f64::NAN));
    }
    let root_x = unscaled(&p, &s);
    let root_obj = model.objective(&root_x);
    let root_basis = Rc::new(s.basis());

    if !search.fractional(&root_x).is_empty() {
        search.dive(&mut s, &[], &root_basis, search.binaries.len() + 1);
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 1usize;
    let fifo = opts.branching == BranchingRule::MostFractional;
    let order = |depth: usize, id: usize| if fifo { u64::MAX - id as u64 } else { ((depth as u64) << 32) | id as u64 };
    let mut current =
        Some(Node { bound: root_obj, order: order(0, 0), depth: 0, fixes: Vec::new(), basis: root_basis, origin: None });
    let mut nodes = 0usize;
    // a node whose LP could not be settled leaves optimality unproven
    let mut abandoned = false;
    let mut abandoned_bound = f64::INFINITY;

    loop {
        let node = match current.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(n) => n,
                None => break,
            },
        };
        if node.bound >= search.cutoff() {
            continue;
        }
        if nodes >= opts.node_limit {
            let open = heap.iter().map(|n: &Node| n.bound).fold(node.bound, f64::min);
            let status = MilpStatus::IterationLimit;
            return Ok(finish(&search, status, nodes, open.min(abandoned_bound)));
        }
        nodes += 1;
        let mut fixes = node.fixes;
        let basis = node.basis;
        let mut origin = node.origin;
        let branched = loop {
            let st = search.solve_node(&mut s, &fixes, &basis);
            match st {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => break None,
                LpStatus::Unbounded => return Ok(finish(&search, MilpStatus::Unbounded, nodes, f64::NEG_INFINITY)),
                _ => {
                    abandoned = true;
                    abandoned_bound = abandoned_bound.min(node.bound);
                    break None;
                }
            }
            let x = unscaled(&p, &s);
            let obj = model.objective(&x).max(node.bound);
            if let Some(o) = origin.take() {
                search.record(o.var, o.up, obj - o.parent_obj, o.distance);
            }
            if obj >= search.cutoff() {
                break None;
            }
            if search.fractional(&x).is_empty() {
                if !search.try_incumbent(&x) {
                    let b = s.basis();
                    search.polish_integral(&mut s, &x, &b);
                }
                break None;
            }
            let here = s.basis();
            match search.select(&mut s, &fixes, &here, &x, obj) {
                Branching::Prune => break None,
                Branching::Fix(j, v) => fixes.push((j, v)),
                Branching::Branch { var, down, up } => break Some((var, x[search.binaries[var]], obj, down, up, here)),
            }
        };
        let Some((k, v, obj, down, up, here)) = branched else {
            continue;
        };
        let j = search.binaries[k];
        let here = Rc::new(here);
        let mut children: Vec<Node> = [(0.0, down, v), (1.0, up, 1.0 - v)]
            .into_iter()
            .map(|(val, est, distance)| {
                let mut f = fixes.clone();
                f.push((j, val));
                let n = Node {
                    bound: est.max(obj),
                    order: order(node.depth + 1, next_id),
                    depth: node.depth + 1,
                    fixes: f,
                    basis: Rc::clone(&here),
                    origin: Some(Origin { var: k, up: val == 1.0, parent_obj: obj, distance }),
                };
                next_id += 1;
                n
            })
            .collect();
        if fifo {
            heap.extend(children);
            continue;
        }
        // plunge into the more promising child while it stays near the best bound
        children.sort_by(|a, b| a.bound.total_cmp(&b.bound).then(b.order.cmp(&a.order)));
        let first = children.remove(0);
        heap.extend(children);
        let open = heap.peek().map_or(f64::INFINITY, |n| n.bound);
        let plunge = match &search.incumbent {
            None => true,
            Some((inc, _)) => first.bound <= open + 0.25 * (inc - open).max(0.0),
        };
        if plunge {
            current = Some(first);
        } else {
            heap.push(first);
        }
    }

    let best_bound = match &search.incumbent {
        Some((o, _)) => o.min(abandoned_bound),
        None => abandoned_bound,
    };
    let status = match (&search.incumbent, abandoned) {
        (_, true) => MilpStatus::IterationLimit,
        (Some(_), false) => MilpStatus::Optimal,
        (None, false) => MilpStatus::Infeasible,
    };
    Ok(finish(&search, status, nodes, best_bound))
}

fn finish(search: &Search, status: MilpStatus, nodes: usize, best_bound: f64) -> MilpSolution {
    let stats = SolveStats { nodes, lp_iterations: search.lp_iterations, best_bound };
    match &search.incumbent {
        Some((obj, x)) if status != MilpStatus::Infeasible && status != MilpStatus::Unbounded => MilpSolution {
            status,
            values: x.clone(),
            objective: *obj,
            stats,
        },
        _ => MilpSolution::without_values(status, stats),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Sense;

    #[test]
    fn pure_lp_matches_relaxation() {
        let mut m = MilpModel::new();
        let x = m.add_var("x", 0.0, 10.0, -1.0);
        m.add_con("c", vec![(x, 2.0)], Sense::Le, 7.0);
        let s = solve_milp(&m, &SolverOptions::default()).unwrap();
        let l = crate::milp::solve_lp(&m).unwrap();
        assert!((s.objective - l.objective).abs() < 1e-12);
    }

    #[test]
    fn cover_pair() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a", 1.0);
        let b = m.add_binary("b", 1.0);
        m.add_con("c", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 1.0);
        let s = solve_milp(&m, &SolverOptions::default()).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack_two_items() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a", -3.0);
        let b = m.add_binary("b", -2.0);
        m.add_con("cap", vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0);
        let s = solve_milp(&m, &SolverOptions::default()).unwrap();
        assert!((s.objective + 3.0).abs() < 1e-9);
        assert_eq!(s.value(a), 1.0);
        assert_eq!(s.value(b), 0.0);
    }

    #[test]
    fn infeasible_binary_model() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a", 0.0);
        m.add_con("half", vec![(a, 2.0)], Sense::Eq, 1.0);
        let s = solve_milp(&m, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
    }

    #[test]
    fn independent_blocks_are_solved_separately() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a", -3.0);
        let b = m.add_binary("b", -2.0);
        let c = m.add_binary("c", -1.0);
        let d = m.add_binary("d", -4.0);
        let x = m.add_var("x", 2.0, 2.0, 1.0);
        m.add_con("ab", vec![(a, 1.0), (b, 1.0), (x, 1.0)], Sense::Le, 3.0);
        m.add_con("cd", vec![(c, 1.0), (d, 1.0), (x, -1.0)], Sense::Le, -1.0);
        assert_eq!(components(&m).len(), 2);
        let s = solve_milp(&m, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.objective - (-3.0 - 4.0 + 2.0)).abs() < 1e-9);
        assert_eq!((s.value(a), s.value(b), s.value(c), s.value(d)), (1.0, 0.0, 0.0, 1.0));
        assert_eq!(s.value(x), 2.0);
    }
}
