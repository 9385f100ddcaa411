//! Bounded revised simplex over the computational form `A x − r = 0`,
//! `l ≤ (x, r) ≤ u`, with a primal (phase 1/2) and a dual driver.
//!
//! Pricing is Dantzig with a Harris two-pass ratio test. After a run of
//! degenerate pivots the driver switches to Bland's rule, which cannot cycle.

use super::lu::{Factor, SparseVec};
use super::model::{MilpModel, Sense};

pub(crate) const INF: f64 = f64::INFINITY;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum St {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable resting at zero.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Numerical,
}

/// Scaled computational form of a model's LP relaxation.
pub(crate) struct LpProblem {
    pub n: usize,
    pub m: usize,
    cols: Vec<SparseVec>,
    logicals: Vec<SparseVec>,
    pub cost: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    col_scale: Vec<f64>,
}

fn pow2_round(x: f64) -> f64 {
    if !(x.is_finite() && x > 0.0) {
        return 1.0;
    }
    2f64.powi(x.log2().round() as i32)
}

impl LpProblem {
    pub fn from_model(model: &MilpModel) -> Self {
        let n = model.vars.len();
        let m = model.cons.len();
        // merge duplicate terms row by row, then transpose
        let mut cols: Vec<SparseVec> = vec![SparseVec::default(); n];
        for (i, c) in model.cons.iter().enumerate() {
            let mut terms: Vec<(usize, f64)> = c.terms.iter().map(|&(v, a)| (v.0, a)).collect();
            terms.sort_by_key(|t| t.0);
            let mut k = 0;
            while k < terms.len() {
                let j = terms[k].0;
                let mut a = 0.0;
                while k < terms.len() && terms[k].0 == j {
                    a += terms[k].1;
                    k += 1;
                }
                if a != 0.0 {
                    cols[j].push(i, a);
                }
            }
        }
        let (row_scale, col_scale) = geometric_scaling(&cols, m, 6);
        for (j, col) in cols.iter_mut().enumerate() {
            for (&i, v) in col.idx.iter().zip(col.val.iter_mut()) {
                *v *= row_scale[i] * col_scale[j];
            }
        }
        let mut cost = Vec::with_capacity(n + m);
        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        for (j, v) in model.vars.iter().enumerate() {
            cost.push(v.obj * col_scale[j]);
            lb.push(v.lb / col_scale[j]);
            ub.push(v.ub / col_scale[j]);
        }
        let mut logicals = Vec::with_capacity(m);
        for (i, c) in model.cons.iter().enumerate() {
            let (lo, hi) = match c.sense {
                Sense::Le => (-INF, c.rhs),
                Sense::Ge => (c.rhs, INF),
                Sense::Eq => (c.rhs, c.rhs),
            };
            cost.push(0.0);
            lb.push(lo * row_scale[i]);
            ub.push(hi * row_scale[i]);
            let mut e = SparseVec::default();
            e.push(i, -1.0);
            logicals.push(e);
        }
        LpProblem { n, m, cols, logicals, cost, lb, ub, col_scale }
    }

    #[inline]
    pub fn col(&self, j: usize) -> &SparseVec {
        if j < self.n {
            &self.cols[j]
        } else {
            &self.logicals[j - self.n]
        }
    }

    /// Converts an original-space bound of structural `j` into scaled space.
    pub fn scale_bound(&self, j: usize, v: f64) -> f64 {
        v / self.col_scale[j]
    }

    pub fn unscale_x(&self, j: usize, v: f64) -> f64 {
        v * self.col_scale[j]
    }
}

fn geometric_scaling(cols: &[SparseVec], m: usize, passes: usize) -> (Vec<f64>, Vec<f64>) {
    let n = cols.len();
    let mut r = vec![1.0; m];
    let mut s = vec![1.0; n];
    for _ in 0..passes {
        let mut rmin = vec![INF; m];
        let mut rmax = vec![0.0f64; m];
        for (j, col) in cols.iter().enumerate() {
            for (&i, &v) in col.idx.iter().zip(&col.val) {
                let a = (v * s[j]).abs();
                rmin[i] = rmin[i].min(a);
                rmax[i] = rmax[i].max(a);
            }
        }
        for i in 0..m {
            if rmax[i] > 0.0 {
                r[i] = pow2_round(1.0 / (rmin[i] * rmax[i]).sqrt());
            }
        }
        for (j, col) in cols.iter().enumerate() {
            let mut cmin = INF;
            let mut cmax = 0.0f64;
            for (&i, &v) in col.idx.iter().zip(&col.val) {
                let a = (v * r[i]).abs();
                cmin = cmin.min(a);
                cmax = cmax.max(a);
            }
            if cmax > 0.0 {
                s[j] = pow2_round(1.0 / (cmin * cmax).sqrt());
            }
        }
    }
    (r, s)
}

pub(crate) struct Tolerances {
    pub primal: f64,
    pub dual: f64,
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { primal: 1e-7, dual: 1e-9, pivot: 1e-9 }
    }
}

const REFACTOR_EVERY: usize = 80;
const DEGENERATE_SWITCH: usize = 60;

/// Simplex state over an [`LpProblem`] with its own (node-local) bounds.
pub(crate) struct Simplex<'a> {
    p: &'a LpProblem,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub status: Vec<St>,
    head: Vec<usize>,
    pub x: Vec<f64>,
    factor: Option<Factor>,
    tol: Tolerances,
    pub iterations: usize,
    /// Per-solve iteration budget.
    pub max_iterations: usize,
    budget_end: usize,
    bland: bool,
    degenerate: usize,
}

fn nonbasic_status(lb: f64, ub: f64) -> St {
    if lb > -INF {
        St::Lower
    } else if ub < INF {
        St::Upper
    } else {
        St::Free
    }
}

impl<'a> Simplex<'a> {
    pub fn new(p: &'a LpProblem) -> Self {
        let nt = p.n + p.m;
        let mut s = Simplex {
            p,
            lb: p.lb.clone(),
            ub: p.ub.clone(),
            status: vec![St::Lower; nt],
            head: Vec::new(),
            x: vec![0.0; nt],
            factor: None,
            tol: Tolerances::default(),
            iterations: 0,
            max_iterations: 20_000 + 20 * nt,
            budget_end: 20_000 + 20 * nt,
            bland: false,
            degenerate: 0,
        };
        s.slack_basis();
        s
    }

    pub fn set_primal_tol(&mut self, t: f64) {
        self.tol.primal = t;
    }

    fn slack_basis(&mut self) {
        let n = self.p.n;
        for j in 0..n {
            self.status[j] = nonbasic_status(self.lb[j], self.ub[j]);
        }
        self.head = (n..n + self.p.m).collect();
        for j in n..n + self.p.m {
            self.status[j] = St::Basic;
        }
        self.factor = None;
    }

    /// Installs a previously saved status vector; falls back to the slack
    /// basis when it does not describe a basis of the right size.
    pub fn set_basis(&mut self, status: &[St]) {
        let basic = status.iter().filter(|&&s| s == St::Basic).count();
        if status.len() != self.status.len() || basic != self.p.m {
            self.slack_basis();
            return;
        }
        self.status.copy_from_slice(status);
        self.head = (0..status.len()).filter(|&j| status[j] == St::Basic).collect();
        self.fix_nonbasic_status();
        self.factor = None;
    }

    /// Keeps nonbasic statuses consistent with the current bounds.
    fn fix_nonbasic_status(&mut self) {
        for j in 0..self.status.len() {
            let s = self.status[j];
            let (l, u) = (self.lb[j], self.ub[j]);
            let ok = match s {
                St::Basic => true,
                St::Lower => l > -INF,
                St::Upper => u < INF,
                St::Free => l == -INF && u == INF,
            };
            if !ok {
                self.status[j] = nonbasic_status(l, u);
            }
        }
    }

    pub fn basis(&self) -> Vec<St> {
        self.status.clone()
    }

    fn refactor(&mut self) -> bool {
        for _attempt in 0..4 {
            let cols: Vec<&SparseVec> = self.head.iter().map(|&j| self.p.col(j)).collect();
            match Factor::new(self.p.m, &cols) {
                Ok(f) => {
                    self.factor = Some(f);
                    return true;
                }
                Err(sing) => {
                    // swap dependent columns for logicals of the unpivoted rows
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[pos];
                        let v = self.x[out];
                        self.status[out] = if self.lb[out] > -INF && (self.ub[out] == INF || (v - self.lb[out]).abs() <= (self.ub[out] - v).abs()) {
                            St::Lower
                        } else if self.ub[out] < INF {
                            St::Upper
                        } else {
                            St::Free
                        };
                        let logical = self.p.n + row;
                        self.head[pos] = logical;
                        self.status[logical] = St::Basic;
                    }
                }
            }
        }
        false
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            St::Lower => self.lb[j],
            St::Upper => self.ub[j],
            St::Free => 0.0,
            St::Basic => self.x[j],
        }
    }

    fn compute_x(&mut self) {
        let m = self.p.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.status.len() {
            if self.status[j] != St::Basic {
                let v = self.nonbasic_value(j);
                self.x[j] = v;
                if v != 0.0 {
                    let c = self.p.col(j);
                    for (&i, &a) in c.idx.iter().zip(&c.val) {
                        rhs[i] -= a * v;
                    }
                }
            }
        }
        self.factor.as_ref().expect("factor").ftran(&mut rhs);
        for (k, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[k];
        }
    }

    fn ensure_factor(&mut self) -> bool {
        let stale = match &self.factor {
            None => true,
            Some(f) => f.num_etas() >= REFACTOR_EVERY,
        };
        if stale {
            if !self.refactor() {
                return false;
            }
            self.compute_x();
        }
        true
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lb[j] - self.tol.primal {
            self.lb[j] - v
        } else if v > self.ub[j] + self.tol.primal {
            v - self.ub[j]
        } else {
            0.0
        }
    }

    fn duals(&self, cb: &[f64]) -> Vec<f64> {
        let mut y = cb.to_vec();
        self.factor.as_ref().expect("factor").btran(&mut y);
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.p.cost[j] };
        c - self.p.col(j).dot_dense(y)
    }

    fn column_dense(&self, j: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.p.m];
        let c = self.p.col(j);
        for (&i, &v) in c.idx.iter().zip(&c.val) {
            a[i] = v;
        }
        a
    }

    fn pivot_in(&mut self, pos: usize, q: usize, alpha: &[f64]) {
        self.factor.as_mut().expect("factor").update(pos, alpha);
        self.head[pos] = q;
        self.status[q] = St::Basic;
    }

    fn note_step(&mut self, t: f64) {
        if t.abs() < 1e-12 {
            self.degenerate += 1;
            if self.degenerate > DEGENERATE_SWITCH {
                self.bland = true;
            }
        } else {
            self.degenerate = 0;
            self.bland = false;
        }
    }

    /// Primal simplex from the current basis (phase 1 when infeasible).
    pub fn primal(&mut self) -> LpStatus {
        let m = self.p.m;
        let nt = self.status.len();
        if self.factor.is_none() {
            if !self.refactor() {
                return LpStatus::Numerical;
            }
            self.compute_x();
        }
        loop {
            if self.iterations >= self.budget_end {
                return LpStatus::IterationLimit;
            }
            if !self.ensure_factor() {
                return LpStatus::Numerical;
            }
            let mut cb = vec![0.0; m];
            let mut phase1 = false;
            for (k, &j) in self.head.iter().enumerate() {
                let v = self.x[j];
                if v < self.lb[j] - self.tol.primal {
                    cb[k] = -1.0;
                    phase1 = true;
                } else if v > self.ub[j] + self.tol.primal {
                    cb[k] = 1.0;
                    phase1 = true;
                }
            }
            if !phase1 {
                for (k, &j) in self.head.iter().enumerate() {
                    cb[k] = self.p.cost[j];
                }
            }
            let y = self.duals(&cb);

            // pricing
            let mut best: Option<(usize, f64)> = None;
            let mut best_score = 0.0;
            for j in 0..nt {
                let st = self.status[j];
                if st == St::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y, phase1);
                let dir = match st {
                    St::Lower if d < -self.tol.dual => 1.0,
                    St::Upper if d > self.tol.dual => -1.0,
                    St::Free if d.abs() > self.tol.dual => -d.signum(),
                    _ => continue,
                };
                if self.bland {
                    best = Some((j, dir));
                    break;
                }
                if d.abs() > best_score {
                    best_score = d.abs();
                    best = Some((j, dir));
                }
            }
            let Some((q, dir)) = best else {
                if phase1 {
                    return LpStatus::Infeasible;
                }
                return LpStatus::Optimal;
            };

            let mut alpha = self.column_dense(q);
            self.factor.as_ref().expect("factor").ftran(&mut alpha);

            // ratio test: basic k changes at rate delta_k = -dir * alpha_k per unit step
            let range = self.ub[q] - self.lb[q];
            let tp = self.tol.primal;
            let mut t_max = range;
            let mut blockers: Vec<(usize, f64, f64, bool)> = Vec::new(); // (pos, exact ratio, |delta|, to_upper)
            for k in 0..m {
                let delta = -dir * alpha[k];
                if delta.abs() < self.tol.pivot {
                    continue;
                }
                let j = self.head[k];
                let v = self.x[j];
                let (l, u) = (self.lb[j], self.ub[j]);
                let (exact, relaxed, to_upper) = if v < l - tp {
                    if phase1 && delta > 0.0 {
                        ((l - v) / delta, (l - v) / delta, false)
                    } else {
                        continue;
                    }
                } else if v > u + tp {
                    if phase1 && delta < 0.0 {
                        ((u - v) / delta, (u - v) / delta, true)
                    } else {
                        continue;
                    }
                } else if delta > 0.0 {
                    if u == INF {
                        continue;
                    }
                    ((u - v) / delta, (u + tp - v) / delta, true)
                } else {
                    if l == -INF {
                        continue;
                    }
                    ((l - v) / delta, (l - tp - v) / delta, false)
                };
                if self.bland {
                    if exact < t_max {
                        t_max = exact;
                    }
                } else if relaxed < t_max {
                    t_max = relaxed;
                }
                blockers.push((k, exact.max(0.0), delta.abs(), to_upper));
            }
            if t_max == INF {
                if phase1 {
                    return LpStatus::Numerical;
                }
                return LpStatus::Unbounded;
            }
            // second pass
            let mut leave: Option<(usize, f64, bool)> = None;
            if self.bland {
                let mut best_idx = usize::MAX;
                for &(k, r, _, up) in &blockers {
                    if r <= t_max + 1e-15 && self.head[k] < best_idx {
                        best_idx = self.head[k];
                        leave = Some((k, r, up));
                    }
                }
            } else {
                let mut best_mag = 0.0;
                for &(k, r, mag, up) in &blockers {
                    if r <= t_max && (mag > best_mag || (mag == best_mag && leave.is_some_and(|(lk, _, _)| self.head[k] < self.head[lk]))) {
                        best_mag = mag;
                        leave = Some((k, r, up));
                    }
                }
            }
            self.iterations += 1;
            match leave {
                Some((k, t, to_upper)) if t < range || range == INF => {
                    let step = dir * t;
                    for kk in 0..m {
                        let j = self.head[kk];
                        self.x[j] -= alpha[kk] * step;
                    }
                    self.x[q] += step;
                    let out = self.head[k];
                    self.x[out] = if to_upper { self.ub[out] } else { self.lb[out] };
                    self.status[out] = if to_upper { St::Upper } else { St::Lower };
                    self.pivot_in(k, q, &alpha);
                    self.note_step(t);
                }
                _ => {
                    // bound flip of the entering variable
                    let step = dir * range;
                    for kk in 0..m {
                        let j = self.head[kk];
                        self.x[j] -= alpha[kk] * step;
                    }
                    self.status[q] = if dir > 0.0 { St::Upper } else { St::Lower };
                    self.x[q] = self.nonbasic_value(q);
                    self.note_step(range);
                }
            }
        }
    }

    fn is_dual_feasible(&mut self) -> bool {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.p.cost[j]).collect();
        let y = self.duals(&cb);
        let mut flipped = false;
        for j in 0..self.status.len() {
            let st = self.status[j];
            if st == St::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.reduced_cost(j, &y, false);
            let bad = match st {
                St::Lower => d < -self.tol.dual,
                St::Upper => d > self.tol.dual,
                St::Free => d.abs() > self.tol.dual,
                St::Basic => false,
            };
            if bad {
                if st == St::Lower && self.ub[j] < INF {
                    self.status[j] = St::Upper;
                    flipped = true;
                } else if st == St::Upper && self.lb[j] > -INF {
                    self.status[j] = St::Lower;
                    flipped = true;
                } else {
                    return false;
                }
            }
        }
        if flipped {
            self.compute_x();
        }
        true
    }

    /// Dual simplex from a dual feasible basis.
    pub fn dual(&mut self) -> LpStatus {
        let m = self.p.m;
        let nt = self.status.len();
        loop {
            if self.iterations >= self.budget_end {
                return LpStatus::IterationLimit;
            }
            if !self.ensure_factor() {
                return LpStatus::Numerical;
            }
            // leaving row
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for (k, &j) in self.head.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf > 0.0 {
                    if self.bland {
                        if leave.is_none_or(|(lk, _)| j < self.head[lk]) {
                            leave = Some((k, inf));
                        }
                    } else if inf > worst {
                        worst = inf;
                        leave = Some((k, inf));
                    }
                }
            }
            let Some((p, _)) = leave else {
                return LpStatus::Optimal;
            };
            let out = self.head[p];
            let increase = self.x[out] < self.lb[out];
            let target = if increase { self.lb[out] } else { self.ub[out] };
            let s = if increase { 1.0 } else { -1.0 };

            let mut rho = vec![0.0; m];
            rho[p] = 1.0;
            self.factor.as_ref().expect("factor").btran(&mut rho);
            let cb: Vec<f64> = self.head.iter().map(|&j| self.p.cost[j]).collect();
            let y = self.duals(&cb);

            let mut cands: Vec<(usize, f64, f64)> = Vec::new(); // (j, |d|/|a|, |a|)
            let mut r_max = INF;
            for j in 0..nt {
                let st = self.status[j];
                if st == St::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let a = self.p.col(j).dot_dense(&rho);
                if a.abs() < self.tol.pivot {
                    continue;
                }
                let ok = match st {
                    St::Lower => a * s < 0.0,
                    St::Upper => a * s > 0.0,
                    St::Free => true,
                    St::Basic => false,
                };
                if !ok {
                    continue;
                }
                let d = self.reduced_cost(j, &y, false);
                let ratio = d.abs() / a.abs();
                let relaxed = (d.abs() + self.tol.dual) / a.abs();
                if self.bland {
                    r_max = r_max.min(ratio);
                } else {
                    r_max = r_max.min(relaxed);
                }
                cands.push((j, ratio, a.abs()));
            }
            if cands.is_empty() {
                return LpStatus::Infeasible;
            }
            let mut q = usize::MAX;
            let mut best_mag = 0.0;
            for &(j, r, mag) in &cands {
                if r <= r_max + if self.bland { 1e-15 } else { 0.0 } {
                    let better = if self.bland { q == usize::MAX } else { mag > best_mag };
                    if better {
                        best_mag = mag;
                        q = j;
                    }
                }
            }
            let mut alpha = self.column_dense(q);
            self.factor.as_ref().expect("factor").ftran(&mut alpha);
            if alpha[p].abs() < self.tol.pivot {
                // stale factorization; rebuild and retry
                if !self.refactor() {
                    return LpStatus::Numerical;
                }
                self.compute_x();
                self.iterations += 1;
                continue;
            }
            let dq = (self.x[out] - target) / alpha[p];
            for k in 0..m {
                let j = self.head[k];
                self.x[j] -= alpha[k] * dq;
            }
            self.x[q] += dq;
            self.x[out] = target;
            self.status[out] = if increase { St::Lower } else { St::Upper };
            self.pivot_in(p, q, &alpha);
            self.iterations += 1;
            self.note_step(dq);
        }
    }

    /// Solves from the installed basis: dual simplex when that basis is dual
    /// feasible, primal otherwise, and a primal clean-up pass at the end.
    pub fn solve(&mut self) -> LpStatus {
        self.budget_end = self.iterations + self.max_iterations;
        self.bland = false;
        self.degenerate = 0;
        if !self.refactor() {
            return LpStatus::Numerical;
        }
        self.compute_x();
        let mut st = if self.is_dual_feasible() { self.dual() } else { self.primal() };
        if st == LpStatus::Optimal || st == LpStatus::Numerical {
            // recompute from a fresh factorization and polish
            if self.refactor() {
                self.compute_x();
                st = self.primal();
            } else {
                st = LpStatus::Numerical;
            }
        }
        if st == LpStatus::Numerical {
            self.budget_end = self.iterations + self.max_iterations;
            self.slack_basis();
            self.bland = false;
            self.degenerate = 0;
            if self.refactor() {
                self.compute_x();
                st = self.primal();
            }
        }
        st
    }
}
