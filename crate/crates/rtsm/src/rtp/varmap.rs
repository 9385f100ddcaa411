use crate::milp::VarId;
use crate::scenario::{Behavior, Outage};

/// Variables of one (contingency, behavior) pair.
#[derive(Clone, Debug)]
pub struct BehaviorVars {
    pub behavior: Behavior,
    /// Post-contingency angles and flows.
    pub theta: Vec<VarId>,
    pub flow: Vec<VarId>,
    /// Nodal balance slack (failing behavior only).
    pub delta: Vec<VarId>,
    /// Removal indicator per line; `None` for the outaged line.
    pub lambda: Vec<Option<VarId>>,
    /// Flow-sign indicator, present where λ is not fixed to 0.
    pub sign: Vec<Option<VarId>>,
    pub theta_hat: Vec<VarId>,
    pub flow_hat: Vec<VarId>,
    pub gen_hat: Vec<VarId>,
    pub demand_hat: Vec<VarId>,
    pub disconnect: Vec<VarId>,
    pub severity: VarId,
    pub gamma: Option<VarId>,
    /// Angle difference across each removable line and its λ product.
    pub angle_diff: Vec<Option<VarId>>,
    pub angle_prod: Vec<Option<VarId>>,
    /// y × base-point product per available generator.
    pub gen_prod: Vec<Option<VarId>>,
}

/// Variables of one outage event.
#[derive(Clone, Debug)]
pub struct EventVars {
    /// Position in the contingency set.
    pub index: usize,
    pub outage: Outage,
    pub pi: f64,
    pub corrective: Vec<VarId>,
    pub behaviors: Vec<BehaviorVars>,
}

impl EventVars {
    pub fn behavior(&self, b: Behavior) -> &BehaviorVars {
        self.behaviors.iter().find(|v| v.behavior == b).expect("both behaviors built")
    }
}

/// Index of every model variable by role.
#[derive(Clone, Debug)]
pub struct VariableMap {
    pub p0: Vec<VarId>,
    pub theta0: Vec<VarId>,
    pub flow0: Vec<VarId>,
    pub events: Vec<EventVars>,
    /// Incremental-objective deviation variables (up, down) per generator.
    pub market_dev: Vec<(VarId, VarId)>,
    /// Corrective deviation variables (up, down) per event and generator.
    pub corrective_dev: Vec<Vec<(VarId, VarId)>>,
}

/// (symbol, indices) key of a variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarKey {
    pub symbol: &'static str,
    pub indices: Vec<usize>,
}

impl VariableMap {
    pub fn event(&self, outage: Outage) -> Option<&EventVars> {
        self.events.iter().find(|e| e.outage == outage)
    }

    /// Every mapped variable with its key.
    pub fn entries(&self) -> Vec<(VarKey, VarId)> {
        let mut out = Vec::new();
        let mut put = |symbol: &'static str, indices: Vec<usize>, v: VarId| out.push((VarKey { symbol, indices }, v));
        for (g, &v) in self.p0.iter().enumerate() {
            put("P0", vec![g], v);
        }
        for (n, &v) in self.theta0.iter().enumerate() {
            put("theta0", vec![n], v);
        }
        for (l, &v) in self.flow0.iter().enumerate() {
            put("f0", vec![l], v);
        }
        for (g, &(u, d)) in self.market_dev.iter().enumerate() {
            put("P_M_up", vec![g], u);
            put("P_M_down", vec![g], d);
        }
        for (k, e) in self.events.iter().enumerate() {
            let c = e.index;
            for (g, &v) in e.corrective.iter().enumerate() {
                put("Pc", vec![c, g], v);
            }
            if let Some(devs) = self.corrective_dev.get(k) {
                for (g, &(u, d)) in devs.iter().enumerate() {
                    put("Pc_up", vec![c, g], u);
                    put("Pc_down", vec![c, g], d);
                }
            }
            for bv in &e.behaviors {
                let b = bv.behavior as usize;
                let many = |v: &[VarId]| v.iter().copied().enumerate().collect::<Vec<_>>();
                let opt = |v: &[Option<VarId>]| v.iter().enumerate().filter_map(|(i, x)| x.map(|x| (i, x))).collect::<Vec<_>>();
                for (sym, list) in [
                    ("theta", many(&bv.theta)),
                    ("f", many(&bv.flow)),
                    ("delta", many(&bv.delta)),
                    ("lambda", opt(&bv.lambda)),
                    ("p", opt(&bv.sign)),
                    ("theta_hat", many(&bv.theta_hat)),
                    ("f_hat", many(&bv.flow_hat)),
                    ("P_hat", many(&bv.gen_hat)),
                    ("Pd_hat", many(&bv.demand_hat)),
                    ("y", many(&bv.disconnect)),
                    ("phi", opt(&bv.angle_diff)),
                    ("theta_tilde", opt(&bv.angle_prod)),
                    ("P_tilde", opt(&bv.gen_prod)),
                ] {
                    for (i, v) in list {
                        put(sym, vec![c, b, i], v);
                    }
                }
                put("s", vec![c, b], bv.severity);
                if let Some(g) = bv.gamma {
                    put("gamma", vec![c, b], g);
                }
            }
        }
        out
    }
}
