#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rtsm::case::Case;
use rtsm::milp::{
    linearize_bin_times_free, linearize_bin_times_nonneg, solve_lp, solve_milp, MilpModel, Sense, SolverOptions,
    VarId, VarKind,
};
use rtsm::multiarea::{area_scope, build_area_subproblem, AreaPartition, AreaPolicy, AreaRun};
use rtsm::report::{model_severities, ModelSeverity};
use rtsm::rtp::{severity_model, RtpOptions};
use rtsm::scenario::{BehaviorSet, ContingencySet};
use rtsm::terminal::{evaluate_with, EvalScope, RemovalRule, StrategyEvaluation};

/// Random bounded model that is feasible at a hidden point.
pub fn random_model(rng: &mut ChaCha8Rng, nbin: usize) -> MilpModel {
    let ncont = rng.random_range(1..=4);
    let mut m = MilpModel::new();
    let mut point = Vec::new();
    for i in 0..nbin {
        m.add_binary(format!("b{i}"), rng.random_range(-10..=10) as f64);
        point.push(rng.random_range(0..=1) as f64);
    }
    for i in 0..ncont {
        let ub = rng.random_range(1..=10) as f64;
        m.add_var(format!("x{i}"), 0.0, ub, rng.random_range(-5..=5) as f64);
        point.push(rng.random_range(0.0..ub));
    }
    let n = nbin + ncont;
    for r in 0..rng.random_range(2..=6) {
        let mut terms = Vec::new();
        for j in 0..n {
            let a = rng.random_range(-5..=5) as f64;
            if rng.random_bool(0.6) && a != 0.0 {
                terms.push((VarId(j), a));
            }
        }
        if terms.is_empty() {
            continue;
        }
        let act: f64 = terms.iter().map(|(v, a)| a * point[v.0]).sum();
        let (sense, rhs) = match rng.random_range(0..3) {
            0 => (Sense::Le, act.ceil() + rng.random_range(0..3) as f64),
            1 => (Sense::Ge, act.floor() - rng.random_range(0..3) as f64),
            _ => (Sense::Le, act + 1.0),
        };
        m.add_con(format!("r{r}"), terms, sense, rhs);
    }
    m
}

pub fn enumerate(m: &MilpModel) -> Option<f64> {
    let bins: Vec<usize> = (0..m.vars.len()).filter(|&j| m.vars[j].kind == VarKind::Binary).collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut f = m.clone();
        for (k, &j) in bins.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            f.vars[j].lb = v;
            f.vars[j].ub = v;
        }
        let s = solve_lp(&f).unwrap();
        if s.is_optimal() {
            best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective)));
        }
    }
    best
}

/// Min and max of `aux` with every other variable fixed.
pub fn aux_range(m: &MilpModel, aux: VarId) -> (f64, f64) {
    let mut lo = m.clone();
    for v in &mut lo.vars {
        v.obj = 0.0;
    }
    lo.vars[aux.0].obj = 1.0;
    let mut hi = lo.clone();
    hi.vars[aux.0].obj = -1.0;
    let a = solve_lp(&lo).unwrap();
    let b = solve_lp(&hi).unwrap();
    assert!(a.is_optimal() && b.is_optimal());
    (a.objective, -b.objective)
}

/// Largest gap between the linearized product and λθ over λ ∈ {0, 1} and an
/// integer θ grid in [−10, 10].
pub fn bin_times_free_grid_error() -> f64 {
    let big = 10.0;
    let mut worst = 0.0f64;
    for lam in [0.0, 1.0] {
        for k in -10..=10 {
            let theta = k as f64;
            let mut m = MilpModel::new();
            let l = m.add_binary("lam", 0.0);
            let t = m.add_var("theta", -big, big, 0.0);
            m.fix(l, lam);
            m.fix(t, theta);
            let aux = linearize_bin_times_free(&mut m, "prod", l, t, big).unwrap();
            let (lo, hi) = aux_range(&m, aux);
            worst = worst.max((lo - lam * theta).abs()).max((hi - lam * theta).abs());
        }
    }
    worst
}

/// Same for y·P with P on a half-MW grid in [0, 8].
pub fn bin_times_nonneg_grid_error() -> f64 {
    let big = 8.0;
    let mut worst = 0.0f64;
    for y in [0.0, 1.0] {
        for k in 0..=16 {
            let p = k as f64 * 0.5;
            let mut m = MilpModel::new();
            let b = m.add_binary("y", 0.0);
            let x = m.add_var("p", 0.0, big, 0.0);
            m.fix(b, y);
            m.fix(x, p);
            let aux = linearize_bin_times_nonneg(&mut m, "prod", b, x, big).unwrap();
            let (lo, hi) = aux_range(&m, aux);
            worst = worst.max((lo - y * p).abs()).max((hi - y * p).abs());
        }
    }
    worst
}

/// Severities held by an area model; the N-1 policy gets a severity pass with
/// its strategy fixed.
pub fn area_model_severities(
    case: &Case,
    part: &AreaPartition,
    boundary: &[f64],
    cs: &ContingencySet,
    bs: &BehaviorSet,
    run: &AreaRun,
) -> Vec<ModelSeverity> {
    match run.policy {
        AreaPolicy::SeverityControlled { .. } => {
            // the build is deterministic, so the map indexes the run's solution
            let (m, map, _) = build_area_subproblem(case, part, run.area, boundary, run.policy, cs, bs).unwrap();
            assert_eq!(m.num_vars(), run.solution.values.len());
            model_severities(&run.solution, &map, bs)
        }
        AreaPolicy::N1Benchmark => {
            let scope = area_scope(case, part, run.area, boundary, run.policy);
            let ropts = RtpOptions { allow_relax_working: false, ..RtpOptions::default() };
            let (m, map) = severity_model(case, &run.contingencies, bs, &run.strategy, &ropts, &scope).unwrap();
            let sol = solve_milp(&m, &SolverOptions::default()).unwrap();
            assert!(sol.is_optimal());
            model_severities(&sol, &map, bs)
        }
    }
}

/// Oracle evaluation of an area run under that area's monitoring scope.
pub fn area_oracle(case: &Case, part: &AreaPartition, boundary: &[f64], bs: &BehaviorSet, run: &AreaRun) -> StrategyEvaluation {
    let scope = EvalScope::from(&area_scope(case, part, run.area, boundary, run.policy));
    evaluate_with(case, &run.contingencies, bs, &run.strategy, RemovalRule::FirstRound, &scope).unwrap()
}

/// Largest excess of oracle over model severity, and the expected-severity gap.
pub fn oracle_gaps(ev: &StrategyEvaluation, model: &[ModelSeverity]) -> (f64, f64) {
    let excess = model
        .iter()
        .map(|m| ev.severity_of(m.outage, m.behavior).unwrap() - m.severity)
        .fold(f64::NEG_INFINITY, f64::max);
    let expected: f64 = model.iter().map(|m| m.weight * m.severity).sum();
    (excess, (ev.expected_severity - expected).abs())
}
