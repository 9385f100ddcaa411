use crate::case::Case;
use crate::milp::{MilpModel, Sense};
use crate::scenario::Outage;

use super::varmap::VariableMap;
use super::{IncrementalFees, RtpError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IncrementalKind {
    /// Deviations of P^0 from the settled market schedule.
    Preventive,
    /// Deviations of P^c from P^0, per outage event.
    Corrective,
}

/// Replaces the net-cost term of `kind` by fee-weighted up/down deviations.
/// Only generators flagged in `priced` are affected. Fees must be nonnegative
/// for the max-linearization to be tight.
pub fn objective_incremental(
    model: &mut MilpModel,
    map: &mut VariableMap,
    case: &Case,
    kind: IncrementalKind,
    fees: &IncrementalFees,
    priced: &[bool],
) -> Result<(), RtpError> {
    let ng = case.generators.len();
    for v in [&fees.preventive_up, &fees.preventive_down, &fees.corrective_up, &fees.corrective_down] {
        if v.len() != ng {
            return Err(RtpError::FeeLength { expected: ng, got: v.len() });
        }
    }
    match kind {
        IncrementalKind::Preventive => {
            let mut market = Vec::with_capacity(ng);
            for (g, gen) in case.generators.iter().enumerate() {
                if priced[g] {
                    market.push(gen.p_market.ok_or_else(|| RtpError::MissingMarket(gen.id.clone()))?);
                } else {
                    market.push(0.0);
                }
            }
            map.market_dev.clear();
            for (g, gen) in case.generators.iter().enumerate() {
                let p0 = map.p0[g];
                let (up_fee, dn_fee) = if priced[g] {
                    model.add_obj(p0, -gen.cost);
                    (fees.preventive_up[g], fees.preventive_down[g])
                } else {
                    (0.0, 0.0)
                };
                let up = model.add_var(format!("PMup_{}", gen.id), 0.0, f64::INFINITY, up_fee);
                let dn = model.add_var(format!("PMdn_{}", gen.id), 0.0, f64::INFINITY, dn_fee);
                if priced[g] {
                    model.add_con(format!("mdu_{}", gen.id), vec![(up, 1.0), (p0, -1.0)], Sense::Ge, -market[g]);
                    model.add_con(format!("mdd_{}", gen.id), vec![(dn, 1.0), (p0, 1.0)], Sense::Ge, market[g]);
                }
                map.market_dev.push((up, dn));
            }
        }
        IncrementalKind::Corrective => {
            map.corrective_dev.clear();
            for e in &map.events {
                let mut devs = Vec::with_capacity(ng);
                for (g, gen) in case.generators.iter().enumerate() {
                    let pc = e.corrective[g];
                    let p0 = map.p0[g];
                    let net = e.pi * gen.corrective_cost;
                    let active = priced[g] && e.outage != Outage::Generator(g);
                    if priced[g] {
                        model.add_obj(pc, -net);
                        model.add_obj(p0, net);
                    }
                    let (uf, df) = if active {
                        (e.pi * fees.corrective_up[g], e.pi * fees.corrective_down[g])
                    } else {
                        (0.0, 0.0)
                    };
                    let tag = format!("{}_{}", e.index + 1, gen.id);
                    let up = model.add_var(format!("Pcup_{tag}"), 0.0, f64::INFINITY, uf);
                    let dn = model.add_var(format!("Pcdn_{tag}"), 0.0, f64::INFINITY, df);
                    if active {
                        model.add_con(format!("cdu_{tag}"), vec![(up, 1.0), (pc, -1.0), (p0, 1.0)], Sense::Ge, 0.0);
                        model.add_con(format!("cdd_{tag}"), vec![(dn, 1.0), (pc, 1.0), (p0, -1.0)], Sense::Ge, 0.0);
                    }
                    devs.push((up, dn));
                }
                map.corrective_dev.push(devs);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::builtin_case;
    use crate::milp::solve_lp;
    use crate::rtp::VariableMap;

    fn one_unit(market: f64, p0: f64) -> (MilpModel, VariableMap, Case) {
        let mut case = builtin_case("irep-3bus").unwrap();
        case.generators.truncate(1);
        case.generators[0].p_market = Some(market);
        let mut m = MilpModel::new();
        let v = m.add_var("P0_g1", 0.0, 100.0, case.generators[0].cost);
        m.fix(v, p0);
        let map = VariableMap {
            p0: vec![v],
            theta0: vec![],
            flow0: vec![],
            events: vec![],
            market_dev: vec![],
            corrective_dev: vec![],
        };
        (m, map, case)
    }

    fn fees(up: f64, dn: f64) -> IncrementalFees {
        IncrementalFees {
            preventive_up: vec![up],
            preventive_down: vec![dn],
            corrective_up: vec![up],
            corrective_down: vec![dn],
        }
    }

    #[test]
    fn upward_deviation_priced_at_up_fee() {
        let (mut m, mut map, case) = one_unit(40.0, 50.0);
        objective_incremental(&mut m, &mut map, &case, IncrementalKind::Preventive, &fees(2.0, 3.0), &[true]).unwrap();
        let sol = solve_lp(&m).unwrap();
        assert!((sol.objective - 20.0).abs() < 1e-9);
        let (m2, mut map2, case2) = one_unit(60.0, 50.0);
        let mut m2 = m2;
        objective_incremental(&mut m2, &mut map2, &case2, IncrementalKind::Preventive, &fees(2.0, 3.0), &[true])
            .unwrap();
        assert!((solve_lp(&m2).unwrap().objective - 30.0).abs() < 1e-9);
    }

    #[test]
    fn on_schedule_costs_nothing() {
        let (mut m, mut map, case) = one_unit(50.0, 50.0);
        objective_incremental(&mut m, &mut map, &case, IncrementalKind::Preventive, &fees(2.0, 3.0), &[true]).unwrap();
        let sol = solve_lp(&m).unwrap();
        assert!(sol.objective.abs() < 1e-9);
        assert!(sol.value(map.market_dev[0].0).abs() < 1e-9);
        assert!(sol.value(map.market_dev[0].1).abs() < 1e-9);
    }

    #[test]
    fn missing_market_is_an_error() {
        let (mut m, mut map, mut case) = one_unit(50.0, 50.0);
        case.generators[0].p_market = None;
        let r = objective_incremental(&mut m, &mut map, &case, IncrementalKind::Preventive, &fees(1.0, 1.0), &[true]);
        assert!(matches!(r, Err(RtpError::MissingMarket(_))));
    }
}
