use std::collections::HashSet;
use std::time::Instant;

use rtsm::case::{builtin_case, Case};
use rtsm::milp::{solve_milp, MilpModel, SolverOptions};
use rtsm::rtp::{
    build_case_a, build_rtp, build_with, extract_strategy, BuildSpec, IncrementalFees, ObjectiveVariant, RtpOptions,
};
use rtsm::scenario::{behavior_set, build_contingencies, BehaviorSet, ContingencySet, Outage};

fn setup() -> (Case, ContingencySet, BehaviorSet) {
    let case = builtin_case("irep-3bus").unwrap();
    let cs = build_contingencies(&case, &(&case.probabilities).into()).unwrap();
    (case, cs, behavior_set(0.2).unwrap())
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn case_a_dispatch_and_cost() {
    let (case, cs, bs) = setup();
    let (m, map) = build_case_a(&case, &cs, &bs).unwrap();
    let t = Instant::now();
    let sol = solve_milp(&m, &SolverOptions::default()).unwrap();
    eprintln!("case A: {:?} nodes {} in {:?}", sol.status, sol.stats.nodes, t.elapsed());
    let s = extract_strategy(&sol, &map).unwrap();
    assert!(close(&s.preventive, &[77.5, 10.0, 12.5], 1e-4), "{:?}", s.preventive);
    let prev: f64 = s.preventive.iter().zip(&case.generators).map(|(p, g)| p * g.cost).sum();
    assert!((prev - 2325.0).abs() < 1e-3);
    assert!((sol.objective - prev - 0.55).abs() < 0.01, "obj {}", sol.objective);
    let row = &s.corrective[&Outage::Generator(0)];
    assert!(close(&row[1..], &[50.0, 50.0], 1e-4), "{row:?}");
    assert!(!s.corrective.contains_key(&Outage::None));
}

#[test]
fn case_b_dispatch() {
    let (case, cs, bs) = setup();
    let (m, map) = build_rtp(&case, &cs, &bs, &RtpOptions::severity(14000.0, 0.0)).unwrap();
    let sol = solve_milp(&m, &SolverOptions::default()).unwrap();
    let s = extract_strategy(&sol, &map).unwrap();
    assert!(close(&s.preventive, &[45.0, 10.0, 45.0], 1e-4), "{:?}", s.preventive);
    assert!(close(&s.corrective[&Outage::Line(0)], &[55.0, 10.0, 35.0], 1e-4));
}

#[test]
fn inactive_threshold_gives_case_a_dispatch() {
    let (case, cs, bs) = setup();
    let (m, map) = build_rtp(&case, &cs, &bs, &RtpOptions::severity(case.max_severity(), 0.0)).unwrap();
    let sol = solve_milp(&m, &SolverOptions::default()).unwrap();
    let s = extract_strategy(&sol, &map).unwrap();
    assert!(close(&s.preventive, &[77.5, 10.0, 12.5], 1e-4), "{:?}", s.preventive);
}

#[test]
fn working_relaxation_does_not_change_case_b() {
    let (case, cs, bs) = setup();
    let mut objs = Vec::new();
    for relax in [false, true] {
        let opts = RtpOptions { allow_relax_working: relax, ..RtpOptions::severity(14000.0, 0.0) };
        let (m, map) = build_rtp(&case, &cs, &bs, &opts).unwrap();
        let sol = solve_milp(&m, &SolverOptions::default()).unwrap();
        let s = extract_strategy(&sol, &map).unwrap();
        assert!(close(&s.preventive, &[45.0, 10.0, 45.0], 1e-4), "relax {relax}: {:?}", s.preventive);
        objs.push(sol.objective);
    }
    assert!((objs[0] - objs[1]).abs() <= 1e-6 * objs[0].abs());
}

#[test]
fn vacuous_chance_with_zero_threshold_equals_case_a_plus_severity() {
    let (case, cs, bs) = setup();
    let (m1, _) = build_rtp(&case, &cs, &bs, &RtpOptions::severity(0.0, 1.0)).unwrap();
    let mut spec = BuildSpec::case_a(&case);
    spec.severity_objective = true;
    let (m2, _) = build_with(&case, &cs, &bs, &spec).unwrap();
    let a = solve_milp(&m1, &SolverOptions::default()).unwrap();
    let b = solve_milp(&m2, &SolverOptions::default()).unwrap();
    assert!((a.objective - b.objective).abs() <= 1e-6 * a.objective.abs(), "{} vs {}", a.objective, b.objective);
}

#[test]
fn zero_demand_is_free() {
    let (mut case, _, bs) = setup();
    case.demands[0].p0 = 0.0;
    for g in &mut case.generators {
        g.p_min = 0.0;
    }
    let cs = build_contingencies(&case, &(&case.probabilities).into()).unwrap();
    let (m, map) = build_rtp(&case, &cs, &bs, &RtpOptions::severity(14000.0, 0.0)).unwrap();
    let sol = solve_milp(&m, &SolverOptions::default()).unwrap();
    assert!(sol.is_optimal());
    assert!(sol.objective.abs() < 1e-9);
    assert!(extract_strategy(&sol, &map).unwrap().preventive.iter().all(|p| p.abs() < 1e-9));
}

#[test]
fn incremental_objective_with_market_at_optimum() {
    let (mut case, cs, bs) = setup();
    for (g, p) in case.generators.iter_mut().zip([45.0, 10.0, 45.0]) {
        g.p_market = Some(p);
    }
    let fees = IncrementalFees::from_case(&case);
    let opts =
        RtpOptions { objective: ObjectiveVariant::Incremental(fees), ..RtpOptions::severity(14000.0, 0.0) };
    let (m, map) = build_rtp(&case, &cs, &bs, &opts).unwrap();
    let sol = solve_milp(&m, &SolverOptions::default()).unwrap();
    let s = extract_strategy(&sol, &map).unwrap();
    // the market point is secure, so there is no reason to deviate from it
    assert!(close(&s.preventive, &[45.0, 10.0, 45.0], 1e-4), "{:?}", s.preventive);
    for &(up, dn) in &map.market_dev {
        assert!(sol.value(up).abs() < 1e-7 && sol.value(dn).abs() < 1e-7);
    }
}

#[test]
fn missing_market_schedule_is_rejected() {
    let (case, cs, bs) = setup();
    let opts = RtpOptions {
        objective: ObjectiveVariant::Incremental(IncrementalFees::from_case(&case)),
        ..RtpOptions::default()
    };
    assert!(build_rtp(&case, &cs, &bs, &opts).is_err());
}

/// Closed-form size of the severity model (working relaxation off).
fn census(case: &Case, cs: &ContingencySet) -> (usize, usize) {
    let (n, l, g, d) = (case.nodes.len(), case.lines.len(), case.generators.len(), case.demands.len());
    let mut vars = g + n + l;
    let mut cons = l + n;
    for c in cs.outages() {
        let (la, ga) = if c.is_gen_outage() { (l, g - 1) } else { (l - 1, g) };
        vars += g;
        cons += 2 * ga;
        // working: λ held at 0, terminal flows follow angles
        vars += n + l + la + n + l + d + 2 * g + ga + 2;
        cons += la + n + la + n + 6 * ga + 2;
        if c.is_gen_outage() {
            // failing: network intact, no overload logic
            vars += n + l + n + n + l + d + 2 * g + ga + 2;
            cons += l + n + n + l + n + 6 * ga + 2;
        } else {
            // failing: λ, p, φ, λ·φ per line in service
            vars += n + l + n + 2 * la + n + l + 2 * la + d + 2 * g + ga + 2;
            cons += la + n + n + 6 * la + 8 * la + n + 6 * ga + 2;
        }
    }
    (vars, cons + 1)
}

#[test]
fn model_size_matches_closed_form() {
    let (case, cs, bs) = setup();
    let (m, _) = build_rtp(&case, &cs, &bs, &RtpOptions::severity(14000.0, 0.0)).unwrap();
    assert_eq!((m.num_vars(), m.num_cons()), census(&case, &cs));
    let six = builtin_case("irep-6bus").unwrap();
    let cs6 = build_contingencies(&six, &(&six.probabilities).into()).unwrap();
    let (m6, _) = build_rtp(&six, &cs6, &bs, &RtpOptions::severity(12125.0, 0.0)).unwrap();
    assert_eq!((m6.num_vars(), m6.num_cons()), census(&six, &cs6));
}

#[test]
fn build_is_deterministic_and_map_is_bijective() {
    let (case, cs, bs) = setup();
    let opts = RtpOptions::severity(14000.0, 0.0);
    let (m1, map): (MilpModel, _) = build_rtp(&case, &cs, &bs, &opts).unwrap();
    let (m2, _) = build_rtp(&case, &cs, &bs, &opts).unwrap();
    assert_eq!(m1, m2);
    let entries = map.entries();
    let vars: HashSet<usize> = entries.iter().map(|(_, v)| v.0).collect();
    let keys: HashSet<_> = entries.iter().map(|(k, _)| k.clone()).collect();
    assert_eq!(entries.len(), vars.len());
    assert_eq!(entries.len(), keys.len());
    let aux = (0..m1.num_vars()).filter(|j| !vars.contains(j)).count();
    assert_eq!(aux, 0, "unmapped variables");
    let symbols: HashSet<&str> = entries.iter().map(|(k, _)| k.symbol).collect();
    for s in ["P0", "Pc", "f", "theta", "delta", "lambda", "p", "gamma", "y", "s", "P_hat", "f_hat", "theta_hat"] {
        assert!(symbols.contains(s), "symbol {s} missing");
    }
}
