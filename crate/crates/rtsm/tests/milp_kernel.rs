mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{bin_times_free_grid_error, bin_times_nonneg_grid_error, enumerate, random_model};
use rtsm::milp::{read_solution, solve_milp, write_lp, BranchingRule, MilpStatus, SolverOptions};

fn exact() -> SolverOptions {
    SolverOptions { relative_gap: 0.0, ..SolverOptions::default() }
}

#[test]
fn branch_and_bound_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..30 {
        let nbin = 1 + case % 12;
        let m = random_model(&mut rng, nbin);
        let want = enumerate(&m);
        for rule in [BranchingRule::MostFractional, BranchingRule::Reliability] {
            let got = solve_milp(&m, &SolverOptions { branching: rule, ..exact() }).unwrap();
            match want {
                Some(w) => {
                    assert_eq!(got.status, MilpStatus::Optimal, "model {case} {rule:?}");
                    assert!((got.objective - w).abs() <= 1e-7, "model {case} {rule:?}: {} vs {w}", got.objective);
                    assert!(m.max_violation(&got.values) < 1e-6, "model {case} {rule:?}");
                }
                None => assert_eq!(got.status, MilpStatus::Infeasible, "model {case} {rule:?}"),
            }
        }
    }
}

#[test]
fn binary_products_are_exact_on_a_grid() {
    assert!(bin_times_free_grid_error() < 1e-9);
    assert!(bin_times_nonneg_grid_error() < 1e-9);
}

#[test]
fn lp_file_round_trip_of_a_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = random_model(&mut rng, 4);
    let text = write_lp(&m);
    assert!(text.contains("Subject To") && text.contains("Binary"));
    let sol = solve_milp(&m, &exact()).unwrap();
    let listing: String = m.vars.iter().zip(&sol.values).map(|(v, x)| format!("{} {x}\n", v.name)).collect();
    let back = read_solution(&m, &listing).unwrap();
    assert_eq!(back, sol.values);
}
