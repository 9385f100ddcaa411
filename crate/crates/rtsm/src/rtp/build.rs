use crate::case::Case;
use crate::milp::{linearize_bin_times_free, linearize_bin_times_nonneg, BigMClass, MilpModel, Sense, VarId};
use crate::scenario::{Behavior, BehaviorSet, ContingencySet};

use super::incremental::{objective_incremental, IncrementalKind};
use super::varmap::{BehaviorVars, EventVars, VariableMap};
use super::{ObjectiveVariant, RtpError, RtpOptions, Strategy};

const INF: f64 = f64::INFINITY;

/// Which parts of the system a model controls, prices and polices.
/// The default covers the whole system.
#[derive(Clone, Debug, PartialEq)]
pub struct Scope {
    /// Generators held at a given point in every state.
    pub fixed_dispatch: Vec<Option<f64>>,
    /// Generators whose costs enter the objective.
    pub cost_generators: Vec<bool>,
    /// Multipliers on v_d and w_g in the severity definition.
    pub demand_weight: Vec<f64>,
    pub gen_weight: Vec<f64>,
    /// Lines that may never be relaxed.
    pub frozen_lines: Vec<bool>,
    /// Lines without post-contingency limits.
    pub unmonitored_lines: Vec<bool>,
}

impl Scope {
    pub fn whole(case: &Case) -> Self {
        let ng = case.generators.len();
        let nl = case.lines.len();
        Scope {
            fixed_dispatch: vec![None; ng],
            cost_generators: vec![true; ng],
            demand_weight: vec![1.0; case.demands.len()],
            gen_weight: vec![1.0; ng],
            frozen_lines: vec![false; nl],
            unmonitored_lines: vec![false; nl],
        }
    }
}

/// Full description of a model variant.
#[derive(Clone, Debug)]
pub struct BuildSpec {
    pub opts: RtpOptions,
    /// Include the chance-constraint pair.
    pub chance: bool,
    pub severity_objective: bool,
    pub cost_objective: bool,
    pub scope: Scope,
    /// Fix preventive and corrective dispatch to this strategy.
    pub fixed_strategy: Option<Strategy>,
}

impl BuildSpec {
    pub fn rtp(case: &Case, opts: &RtpOptions) -> Self {
        BuildSpec {
            opts: opts.clone(),
            chance: true,
            severity_objective: true,
            cost_objective: true,
            scope: Scope::whole(case),
            fixed_strategy: None,
        }
    }

    /// N-1 benchmark: no severity term, no chance pair, working behavior strict.
    pub fn case_a(case: &Case) -> Self {
        BuildSpec {
            opts: RtpOptions { allow_relax_working: false, allow_relax_failing: true, ..RtpOptions::default() },
            chance: false,
            severity_objective: false,
            cost_objective: true,
            scope: Scope::whole(case),
            fixed_strategy: None,
        }
    }
}

pub fn build_rtp(
    case: &Case,
    cs: &ContingencySet,
    bs: &BehaviorSet,
    opts: &RtpOptions,
) -> Result<(MilpModel, VariableMap), RtpError> {
    build_with(case, cs, bs, &BuildSpec::rtp(case, opts))
}

pub fn build_case_a(case: &Case, cs: &ContingencySet, bs: &BehaviorSet) -> Result<(MilpModel, VariableMap), RtpError> {
    build_with(case, cs, bs, &BuildSpec::case_a(case))
}

/// Minimum expected severity with the dispatch fixed to `strategy`.
pub fn severity_model(
    case: &Case,
    cs: &ContingencySet,
    bs: &BehaviorSet,
    strategy: &Strategy,
    opts: &RtpOptions,
    scope: &Scope,
) -> Result<(MilpModel, VariableMap), RtpError> {
    let spec = BuildSpec {
        opts: RtpOptions { objective: ObjectiveVariant::NetCost, ..opts.clone() },
        chance: false,
        severity_objective: true,
        cost_objective: false,
        scope: scope.clone(),
        fixed_strategy: Some(strategy.clone()),
    };
    build_with(case, cs, bs, &spec)
}

fn check_inputs(cs: &ContingencySet, bs: &BehaviorSet, opts: &RtpOptions) -> Result<(), RtpError> {
    opts.check()?;
    for p in [bs.working, bs.failing] {
        if !(0.0..=1.0).contains(&p) {
            return Err(RtpError::BadProbability(p));
        }
    }
    if ((bs.working + bs.failing) - 1.0).abs() > 1e-9 {
        return Err(RtpError::BadBehaviors);
    }
    if !cs.iter().any(|c| c.is_pseudo()) {
        return Err(RtpError::MissingPseudo);
    }
    Ok(())
}

struct Ctx<'a> {
    case: &'a Case,
    ends: Vec<(usize, usize)>,
    slack: usize,
    m_flow: f64,
    m_angle: f64,
    m_gen: f64,
    m_sev: f64,
}

impl Ctx<'_> {
    /// Adds θ (slack fixed) for every node.
    fn angles(&self, m: &mut MilpModel, prefix: &str) -> Vec<VarId> {
        (0..self.case.nodes.len())
            .map(|n| {
                let v = m.add_var(format!("{prefix}_{}", self.case.nodes[n]), -INF, INF, 0.0);
                if n == self.slack {
                    m.fix(v, 0.0);
                }
                v
            })
            .collect()
    }

    /// `flow − (θ_from − θ_to)/X = 0`.
    fn ohm(&self, m: &mut MilpModel, name: String, l: usize, flow: VarId, theta: &[VarId]) {
        let x = self.case.lines[l].reactance;
        let (a, b) = self.ends[l];
        m.add_con(name, vec![(flow, 1.0), (theta[a], -1.0 / x), (theta[b], 1.0 / x)], Sense::Eq, 0.0);
    }

    /// Terms of `Σ_g inj − Σ_ℓ β f` at node `n`, flows leaving at the from end.
    fn flow_terms(&self, n: usize, flows: &[VarId]) -> Vec<(VarId, f64)> {
        let mut t = Vec::new();
        for (l, &(a, b)) in self.ends.iter().enumerate() {
            if a == n {
                t.push((flows[l], -1.0));
            }
            if b == n {
                t.push((flows[l], 1.0));
            }
        }
        t
    }

    fn gens_at(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        let node = self.case.nodes[n];
        (0..self.case.generators.len()).filter(move |&g| self.case.generators[g].node == node)
    }

    fn demands_at(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        let node = self.case.nodes[n];
        (0..self.case.demands.len()).filter(move |&d| self.case.demands[d].node == node)
    }
}

/// Builds any model variant described by `spec`.
pub fn build_with(
    case: &Case,
    cs: &ContingencySet,
    bs: &BehaviorSet,
    spec: &BuildSpec,
) -> Result<(MilpModel, VariableMap), RtpError> {
    check_inputs(cs, bs, &spec.opts)?;
    let nl = case.lines.len();
    let ng = case.generators.len();
    let sum_fmax: f64 = case.lines.iter().map(|l| l.f_max).sum();
    let sum_pmax: f64 = case.generators.iter().map(|g| g.p_max).sum();
    let ctx = Ctx {
        case,
        ends: case.line_ends(),
        slack: case.slack_index(),
        m_flow: sum_fmax.max(sum_pmax).max(1.0),
        m_angle: case.lines.iter().map(|l| l.f_max * l.reactance).sum::<f64>().max(1.0),
        m_gen: case.generators.iter().map(|g| g.p_max).fold(0.0, f64::max).max(1.0),
        m_sev: case.max_severity().max(1.0),
    };
    let scope = &spec.scope;
    let mut m = MilpModel::new();
    m.set_big_m(BigMClass::Flow, ctx.m_flow)?;
    m.set_big_m(BigMClass::Angle, ctx.m_angle)?;
    m.set_big_m(BigMClass::Generator, ctx.m_gen)?;
    m.set_big_m(BigMClass::Severity, ctx.m_sev)?;

    let priced = |g: usize| spec.cost_objective && scope.cost_generators[g];

    // pre-contingency state
    let p0: Vec<VarId> = case
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            let v = m.add_var(format!("P0_{}", gen.id), gen.p_min, gen.p_max, if priced(g) { gen.cost } else { 0.0 });
            if let Some(s) = &spec.fixed_strategy {
                m.fix(v, s.preventive[g]);
            } else if let Some(x) = scope.fixed_dispatch[g] {
                m.fix(v, x);
            }
            v
        })
        .collect();
    let theta0 = ctx.angles(&mut m, "th0");
    let flow0: Vec<VarId> =
        case.lines.iter().map(|l| m.add_var(format!("f0_{}", l.id), -l.f_max, l.f_max, 0.0)).collect();
    for l in 0..nl {
        ctx.ohm(&mut m, format!("pf0_{}", case.lines[l].id), l, flow0[l], &theta0);
    }
    let load = case.nodal_load();
    for n in 0..case.nodes.len() {
        let mut t: Vec<(VarId, f64)> = ctx.gens_at(n).map(|g| (p0[g], 1.0)).collect();
        t.extend(ctx.flow_terms(n, &flow0));
        m.add_con(format!("bal0_{}", case.nodes[n]), t, Sense::Eq, load[n]);
    }

    let mut events = Vec::new();
    let mut chance_terms = Vec::new();
    for (k, c) in cs.contingencies.iter().enumerate() {
        if c.is_pseudo() {
            continue;
        }
        let tag = c.label(case);
        let tau = c.is_gen_outage();

        // corrective re-dispatch
        let mut pc = Vec::with_capacity(ng);
        for (g, gen) in case.generators.iter().enumerate() {
            let avail = c.gen_available(g);
            let (lo, hi) = if avail { (gen.p_min, gen.p_max) } else { (0.0, 0.0) };
            let cost = if priced(g) { c.pi * gen.corrective_cost } else { 0.0 };
            let v = m.add_var(format!("Pc_{tag}_{}", gen.id), lo, hi, cost);
            m.add_obj(p0[g], -cost);
            if let Some(s) = &spec.fixed_strategy {
                let x = s.corrective.get(&c.outage).map_or(if avail { s.preventive[g] } else { 0.0 }, |row| row[g]);
                m.fix(v, x);
            } else if let (true, Some(x)) = (avail, scope.fixed_dispatch[g]) {
                m.fix(v, x);
            }
            if avail {
                m.add_con(format!("rup_{tag}_{}", gen.id), vec![(v, 1.0), (p0[g], -1.0)], Sense::Le, gen.ramp_up);
                m.add_con(format!("rdn_{tag}_{}", gen.id), vec![(p0[g], 1.0), (v, -1.0)], Sense::Le, gen.ramp_down);
            }
            pc.push(v);
        }

        let mut behaviors = Vec::with_capacity(2);
        for b in Behavior::BOTH {
            let pb = bs.pi(b);
            let st = format!("{tag}{}", b.tag());
            let failing = b == Behavior::Failing;

            // post-contingency network
            let theta = ctx.angles(&mut m, &format!("th_{st}"));
            let flow: Vec<VarId> = (0..nl).map(|l| m.add_var(format!("f_{st}_{}", case.lines[l].id), -INF, INF, 0.0)).collect();
            for l in 0..nl {
                if c.line_available(l) {
                    ctx.ohm(&mut m, format!("pf_{st}_{}", case.lines[l].id), l, flow[l], &theta);
                } else {
                    m.fix(flow[l], 0.0);
                }
            }
            let mut delta = Vec::new();
            for n in 0..case.nodes.len() {
                let mut t: Vec<(VarId, f64)> = Vec::new();
                for g in ctx.gens_at(n) {
                    if failing {
                        if c.gen_available(g) {
                            t.push((p0[g], 1.0));
                        }
                    } else {
                        t.push((pc[g], 1.0));
                    }
                }
                t.extend(ctx.flow_terms(n, &flow));
                if failing {
                    let d = m.add_var(format!("delta_{st}_{}", case.nodes[n]), -INF, INF, 0.0);
                    let mut dt = vec![(d, 1.0)];
                    if tau {
                        for g in ctx.gens_at(n).filter(|&g| c.gen_available(g)) {
                            dt.push((pc[g], -1.0));
                            dt.push((p0[g], 1.0));
                        }
                    }
                    m.add_con(format!("dlt_{st}_{}", case.nodes[n]), dt, Sense::Eq, 0.0);
                    t.push((d, 1.0));
                    delta.push(d);
                }
                m.add_con(format!("bal_{st}_{}", case.nodes[n]), t, Sense::Eq, load[n]);
            }

            // overload logic
            let mut lambda = vec![None; nl];
            let mut sign = vec![None; nl];
            // the network stays intact after a failed response to a unit outage
            let intact = failing && tau;
            for (l, line) in case.lines.iter().enumerate() {
                if !c.line_available(l) || scope.unmonitored_lines[l] || intact {
                    continue;
                }
                let relaxable = !scope.frozen_lines[l]
                    && if failing { spec.opts.allow_relax_failing } else { spec.opts.allow_relax_working };
                let lam = m.add_binary(format!("lam_{st}_{}", line.id), 0.0);
                lambda[l] = Some(lam);
                let f = flow[l];
                let fm = line.f_max;
                if !relaxable {
                    m.fix(lam, 0.0);
                    m.vars[f.0].lb = -fm;
                    m.vars[f.0].ub = fm;
                    continue;
                }
                let mf = ctx.m_flow;
                let eps = 1e-3 * fm;
                let p = m.add_binary(format!("p_{st}_{}", line.id), 0.0);
                sign[l] = Some(p);
                let id = &line.id;
                m.add_con(format!("ovu_{st}_{id}"), vec![(f, 1.0), (lam, -mf)], Sense::Le, fm);
                m.add_con(format!("ovl_{st}_{id}"), vec![(f, -1.0), (lam, -mf)], Sense::Le, fm);
                m.add_con(format!("sgu_{st}_{id}"), vec![(f, 1.0), (p, -mf)], Sense::Le, 0.0);
                m.add_con(format!("sgl_{st}_{id}"), vec![(f, -1.0), (p, mf)], Sense::Le, mf);
                m.add_con(format!("lmu_{st}_{id}"), vec![(lam, 1.0), (f, -1.0 / (fm + eps)), (p, mf)], Sense::Le, mf);
                m.add_con(format!("lml_{st}_{id}"), vec![(lam, 1.0), (f, 1.0 / (fm + eps)), (p, -mf)], Sense::Le, 0.0);
            }

            // terminal state
            let theta_hat = ctx.angles(&mut m, &format!("tth_{st}"));
            let flow_hat: Vec<VarId> =
                (0..nl).map(|l| m.add_var(format!("tf_{st}_{}", case.lines[l].id), -INF, INF, 0.0)).collect();
            let mut angle_diff = vec![None; nl];
            let mut angle_prod = vec![None; nl];
            for (l, line) in case.lines.iter().enumerate() {
                let tf = flow_hat[l];
                let id = &line.id;
                if !c.line_available(l) {
                    m.fix(tf, 0.0);
                    continue;
                }
                let removable = lambda[l].filter(|&lam| m.vars[lam.0].ub > 0.0);
                match removable {
                    Some(lam) => {
                        let (a, bn) = ctx.ends[l];
                        let x = line.reactance;
                        let phi = m.add_var(format!("phi_{st}_{id}"), -ctx.m_angle, ctx.m_angle, 0.0);
                        m.add_con(
                            format!("dth_{st}_{id}"),
                            vec![(phi, 1.0), (theta_hat[a], -1.0), (theta_hat[bn], 1.0)],
                            Sense::Eq,
                            0.0,
                        );
                        let tt = linearize_bin_times_free(&mut m, &format!("tt_{st}_{id}"), lam, phi, ctx.m_angle)?;
                        m.add_con(
                            format!("tpf_{st}_{id}"),
                            vec![(tf, 1.0), (phi, -1.0 / x), (tt, 1.0 / x)],
                            Sense::Eq,
                            0.0,
                        );
                        m.add_con(format!("tfu_{st}_{id}"), vec![(tf, 1.0), (lam, line.f_max)], Sense::Le, line.f_max);
                        m.add_con(format!("tfl_{st}_{id}"), vec![(tf, -1.0), (lam, line.f_max)], Sense::Le, line.f_max);
                        angle_diff[l] = Some(phi);
                        angle_prod[l] = Some(tt);
                    }
                    None => {
                        ctx.ohm(&mut m, format!("tpf_{st}_{id}"), l, tf, &theta_hat);
                        if !scope.unmonitored_lines[l] {
                            m.vars[tf.0].lb = -line.f_max;
                            m.vars[tf.0].ub = line.f_max;
                        }
                    }
                }
            }

            let demand_hat: Vec<VarId> =
                case.demands.iter().map(|d| m.add_var(format!("tD_{st}_{}", d.id), 0.0, d.p0, 0.0)).collect();
            let mut gen_hat = Vec::with_capacity(ng);
            let mut disconnect = Vec::with_capacity(ng);
            let mut gen_prod = vec![None; ng];
            for (g, gen) in case.generators.iter().enumerate() {
                let tp = m.add_var(format!("tP_{st}_{}", gen.id), 0.0, INF, 0.0);
                let y = m.add_binary(format!("y_{st}_{}", gen.id), 0.0);
                gen_hat.push(tp);
                disconnect.push(y);
                if !c.gen_available(g) {
                    m.fix(tp, 0.0);
                    m.fix(y, 0.0);
                    continue;
                }
                let base = if failing { p0[g] } else { pc[g] };
                let id = &gen.id;
                let pt = linearize_bin_times_nonneg(&mut m, &format!("pt_{st}_{id}"), y, base, ctx.m_gen)?;
                gen_prod[g] = Some(pt);
                m.add_con(format!("tgu_{st}_{id}"), vec![(tp, 1.0), (pt, 1.0), (base, -1.0)], Sense::Le, 0.0);
                m.add_con(
                    format!("tgd_{st}_{id}"),
                    vec![(tp, -1.0), (pt, -1.0), (base, 1.0), (y, gen.emergency_ramp)],
                    Sense::Le,
                    gen.emergency_ramp,
                );
                m.add_con(format!("tgm_{st}_{id}"), vec![(tp, -1.0), (y, -gen.p_min)], Sense::Le, -gen.p_min);
            }
            for n in 0..case.nodes.len() {
                let mut t: Vec<(VarId, f64)> = ctx.gens_at(n).map(|g| (gen_hat[g], 1.0)).collect();
                t.extend(ctx.flow_terms(n, &flow_hat));
                t.extend(ctx.demands_at(n).map(|d| (demand_hat[d], -1.0)));
                m.add_con(format!("tbal_{st}_{}", case.nodes[n]), t, Sense::Eq, 0.0);
            }

            // severity and chance constraint
            let sev_obj = if spec.severity_objective { c.pi * pb } else { 0.0 };
            let s = m.add_var(format!("s_{st}"), 0.0, INF, sev_obj);
            let h = case.horizon_hours;
            let mut t = vec![(s, -1.0)];
            let mut rhs = 0.0;
            for (d, dem) in case.demands.iter().enumerate() {
                let v = dem.voll * h * scope.demand_weight[d];
                if v != 0.0 {
                    t.push((demand_hat[d], -v));
                    rhs -= v * dem.p0;
                }
            }
            for (g, gen) in case.generators.iter().enumerate() {
                let w = gen.disconnect_fee * scope.gen_weight[g];
                if w != 0.0 {
                    t.push((disconnect[g], w));
                }
            }
            m.add_con(format!("sev_{st}"), t, Sense::Le, rhs);
            let mut gamma = None;
            if spec.chance && spec.opts.s_max.is_finite() {
                let gm = m.add_binary(format!("gam_{st}"), 0.0);
                m.add_con(format!("cc1_{st}"), vec![(s, 1.0), (gm, -ctx.m_sev)], Sense::Le, spec.opts.s_max);
                chance_terms.push((gm, c.pi * pb));
                gamma = Some(gm);
            }

            behaviors.push(BehaviorVars {
                behavior: b,
                theta,
                flow,
                delta,
                lambda,
                sign,
                theta_hat,
                flow_hat,
                gen_hat,
                demand_hat,
                disconnect,
                severity: s,
                gamma,
                angle_diff,
                angle_prod,
                gen_prod,
            });
        }
        events.push(EventVars { index: k, outage: c.outage, pi: c.pi, corrective: pc, behaviors });
    }
    if !chance_terms.is_empty() {
        m.add_con("cc2", chance_terms, Sense::Le, spec.opts.epsilon);
    }

    let mut map = VariableMap {
        p0,
        theta0,
        flow0,
        events,
        market_dev: Vec::new(),
        corrective_dev: Vec::new(),
    };
    if let ObjectiveVariant::Incremental(fees) = &spec.opts.objective {
        if spec.cost_objective {
            objective_incremental(&mut m, &mut map, case, IncrementalKind::Preventive, fees, &scope.cost_generators)?;
            objective_incremental(&mut m, &mut map, case, IncrementalKind::Corrective, fees, &scope.cost_generators)?;
        }
    }
    Ok((m, map))
}
