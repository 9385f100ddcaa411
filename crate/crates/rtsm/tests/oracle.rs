use rtsm::case::builtin_case;
use rtsm::report::{run_solve, Policy, RunRecord, SolveOptions};
use rtsm::rtp::Strategy;
use rtsm::scenario::{behavior_set, build_contingencies, Behavior, Outage};
use rtsm::terminal::{evaluate_strategy, evaluate_with, EvalScope, RemovalRule};

fn table(ev: &rtsm::terminal::StrategyEvaluation) -> Vec<f64> {
    ev.rows.iter().filter(|r| r.behavior == Behavior::Failing && r.outage != Outage::None).map(|r| r.severity).collect()
}

fn case_b_strategy(cs: &rtsm::scenario::ContingencySet) -> Strategy {
    let mut s = Strategy::preventive_only(vec![45.0, 10.0, 45.0], cs);
    s.corrective.insert(Outage::Line(0), vec![55.0, 10.0, 35.0]);
    s.corrective.insert(Outage::Generator(0), vec![0.0, 50.0, 50.0]);
    s.corrective.insert(Outage::Generator(1), vec![82.5, 0.0, 17.5]);
    s.corrective.insert(Outage::Generator(2), vec![65.0, 35.0, 0.0]);
    s
}

#[test]
fn case_a_and_b_severity_tables() {
    let case = builtin_case("irep-3bus").unwrap();
    let cs = build_contingencies(&case, &(&case.probabilities).into()).unwrap();
    let bs = behavior_set(0.2).unwrap();
    let mut a = case_b_strategy(&cs);
    a.preventive = vec![77.5, 10.0, 12.5];
    let ea = evaluate_strategy(&case, &cs, &bs, &a).unwrap();
    assert_eq!(table(&ea), vec![27250.0, 34250.0, 34250.0, 23250.0, 3000.0, 3750.0]);
    assert!((ea.expected_severity - 14.7).abs() < 0.05, "{}", ea.expected_severity);
    assert!(!ea.chance_ok(14000.0, 0.0));

    let b = case_b_strategy(&cs);
    let eb = evaluate_strategy(&case, &cs, &bs, &b).unwrap();
    assert_eq!(table(&eb), vec![0.0, 0.0, 0.0, 13500.0, 3000.0, 13500.0]);
    assert!((eb.preventive_cost - 2650.0).abs() < 1e-9);
    assert!(eb.chance_ok(14000.0, 0.0));
    assert!((eb.total_cost() - eb.operating_cost() - eb.expected_severity).abs() < 1e-12);
}

#[test]
fn preventive_only_strategy_pays_only_for_outaged_units() {
    let case = builtin_case("irep-3bus").unwrap();
    let cs = build_contingencies(&case, &(&case.probabilities).into()).unwrap();
    let s = Strategy::preventive_only(vec![45.0, 10.0, 45.0], &cs);
    let ev = evaluate_strategy(&case, &cs, &behavior_set(0.2).unwrap(), &s).unwrap();
    // the outaged unit's own term remains; with symmetric rows it is the only one
    let own: f64 = cs
        .outages()
        .filter_map(|c| match c.outage {
            Outage::Generator(g) => Some(-c.pi * case.generators[g].corrective_cost * s.preventive[g]),
            _ => None,
        })
        .sum();
    assert!((ev.expected_corrective_cost - own).abs() < 1e-12);
}

#[test]
fn invalid_strategy_names_the_constraint() {
    let case = builtin_case("irep-3bus").unwrap();
    let cs = build_contingencies(&case, &(&case.probabilities).into()).unwrap();
    let s = Strategy::preventive_only(vec![5.0, 10.0, 45.0], &cs);
    let e = evaluate_strategy(&case, &cs, &behavior_set(0.2).unwrap(), &s).unwrap_err().to_string();
    assert!(e.contains("preventive generation limits"), "{e}");
}

fn check_agreement(case_name: &str, rec: &RunRecord) {
    let ev = rec.evaluation.as_ref().unwrap();
    for m in &rec.model_severity {
        let o = ev.severity_of(m.outage, m.behavior).unwrap();
        assert!(o <= m.severity + 1e-4, "{case_name} {:?} {:?}: oracle {o} > model {}", m.outage, m.behavior, m.severity);
    }
    let model = rec.model_expected_severity();
    assert!((ev.expected_severity - model).abs() <= 1e-4, "{case_name}: oracle {} model {model}", ev.expected_severity);
}

#[test]
fn oracle_agrees_with_three_bus_runs() {
    let case = builtin_case("irep-3bus").unwrap();
    let runs = [
        SolveOptions { policy: Policy::N1Benchmark, ..Default::default() },
        SolveOptions { s_max: Some(14000.0), ..Default::default() },
        SolveOptions { s_max: Some(14000.0), relax_working: true, ..Default::default() },
        SolveOptions { s_max: Some(14000.0), epsilon: 1e-5, ..Default::default() },
        SolveOptions { s_max: Some(14000.0), epsilon: 1e-2, ..Default::default() },
        SolveOptions::default(),
    ];
    for opts in runs {
        let rec = run_solve(&case, &opts).unwrap();
        assert!(rec.is_optimal());
        check_agreement("irep-3bus", &rec);
    }
}

#[test]
fn oracle_agrees_with_six_bus_system_run() {
    let case = builtin_case("irep-6bus").unwrap();
    let rec = run_solve(&case, &SolveOptions { s_max: Some(12125.0), ..Default::default() }).unwrap();
    assert!(rec.is_optimal());
    check_agreement("irep-6bus", &rec);
}

#[test]
fn cascade_closure_never_removes_fewer_lines() {
    let case = builtin_case("irep-6bus").unwrap();
    let cs = build_contingencies(&case, &(&case.probabilities).into()).unwrap();
    let bs = behavior_set(0.2).unwrap();
    let s = Strategy::preventive_only(vec![100.0, 10.0, 35.0, 10.0, 5.0], &cs);
    let scope = EvalScope::whole(&case);
    let first = evaluate_with(&case, &cs, &bs, &s, RemovalRule::FirstRound, &scope).unwrap();
    let full = evaluate_with(&case, &cs, &bs, &s, RemovalRule::Cascade, &scope).unwrap();
    for (a, b) in first.states.iter().zip(&full.states) {
        for (x, y) in a.removed_lines.iter().zip(&b.removed_lines) {
            assert!(!x || *y);
        }
    }
}
