mod common;

use common::{area_model_severities, area_oracle, oracle_gaps};
use rtsm::case::{builtin_case, Case};
use rtsm::milp::SolverOptions;
use rtsm::multiarea::{merge_and_min_severity, merge_strategies, solve_area, system_opf, Area, AreaPartition, AreaPolicy};
use rtsm::scenario::{behavior_set, build_contingencies};

fn partition(case: &Case) -> AreaPartition {
    AreaPartition::new(
        case,
        vec![Area { id: "A".into(), nodes: vec![1, 2, 3] }, Area { id: "B".into(), nodes: vec![4, 5, 6] }],
    )
    .unwrap()
}

#[test]
fn area_runs_keep_b_secure_and_agree_with_oracle() {
    let case = builtin_case("irep-6bus").unwrap();
    let cs = build_contingencies(&case, &(&case.probabilities).into()).unwrap();
    let bs = behavior_set(0.2).unwrap();
    let part = partition(&case);
    let boundary = system_opf(&case).unwrap();
    let opts = SolverOptions::default();

    let b = solve_area(&case, &part, 1, &boundary, AreaPolicy::N1Benchmark, &cs, &bs, &opts).unwrap();
    assert!(b.solution.is_optimal());
    assert!((b.strategy.preventive[3] - 10.0).abs() < 1e-4 && (b.strategy.preventive[4] - 5.0).abs() < 1e-4);
    // area A's units stay at the boundary point
    for g in 0..3 {
        assert!((b.strategy.preventive[g] - boundary[g]).abs() < 1e-9);
    }

    let policy = AreaPolicy::SeverityControlled { s_max: 5625.0, epsilon: 0.0 };
    let a = solve_area(&case, &part, 0, &boundary, policy, &cs, &bs, &opts).unwrap();
    assert!(a.solution.is_optimal());
    let load: f64 = case.demands.iter().map(|d| d.p0).sum();
    assert!((a.strategy.preventive.iter().sum::<f64>() - load).abs() < 1e-4);

    for run in [&a, &b] {
        let model = area_model_severities(&case, &part, &boundary, &cs, &bs, run);
        let ev = area_oracle(&case, &part, &boundary, &bs, run);
        let (excess, gap) = oracle_gaps(&ev, &model);
        assert!(excess <= 1e-4, "area {}: oracle exceeds model by {excess}", run.area);
        assert!(gap <= 1e-4, "area {}: expected severity off by {gap}", run.area);
    }

    let merged = merge_strategies(&case, &part, &cs, &[a, b]).unwrap();
    let (_, rows) = merge_and_min_severity(&case, &part, &cs, &bs, &merged).unwrap();
    assert_eq!(rows.len(), 2 * cs.len());
    assert!(rows.iter().all(|r| r.by_area[1] == 0.0), "area B severity in merged run");
}
