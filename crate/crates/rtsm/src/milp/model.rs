use std::collections::BTreeMap;
use std::fmt;

use super::MilpError;

/// Index of a variable inside a [`MilpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Index of a constraint inside a [`MilpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

/// Constraint classes whose big-M constant is registered centrally.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BigMClass {
    Flow,
    Angle,
    Generator,
    Severity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub kind: VarKind,
    pub obj: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Minimization model with continuous and binary variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    pub vars: Vec<Variable>,
    pub cons: Vec<Constraint>,
    pub obj_offset: f64,
    pub big_m: BTreeMap<BigMClass, f64>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, obj: f64) -> VarId {
        self.vars.push(Variable { name: name.into(), lb, ub, kind: VarKind::Continuous, obj });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        self.vars.push(Variable { name: name.into(), lb: 0.0, ub: 1.0, kind: VarKind::Binary, obj });
        VarId(self.vars.len() - 1)
    }

    pub fn add_con(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> ConId {
        self.cons.push(Constraint { name: name.into(), terms, sense, rhs });
        ConId(self.cons.len() - 1)
    }

    pub fn set_obj(&mut self, v: VarId, c: f64) {
        self.vars[v.0].obj = c;
    }

    pub fn add_obj(&mut self, v: VarId, c: f64) {
        self.vars[v.0].obj += c;
    }

    pub fn fix(&mut self, v: VarId, value: f64) {
        self.vars[v.0].lb = value;
        self.vars[v.0].ub = value;
    }

    pub fn set_big_m(&mut self, class: BigMClass, value: f64) -> Result<(), MilpError> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(MilpError::BadBigM(value));
        }
        self.big_m.insert(class, value);
        Ok(())
    }

    pub fn big_m(&self, class: BigMClass) -> Result<f64, MilpError> {
        self.big_m.get(&class).copied().ok_or(MilpError::MissingBigM(class))
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_cons(&self) -> usize {
        self.cons.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.obj_offset + self.vars.iter().zip(x).map(|(v, &xi)| v.obj * xi).sum::<f64>()
    }

    /// Checks the structural invariants: declared variables, binary bounds, finite data.
    pub fn check(&self) -> Result<(), MilpError> {
        for v in &self.vars {
            if v.lb.is_nan() || v.ub.is_nan() || !v.obj.is_finite() {
                return Err(MilpError::Malformed(format!("variable {} has non-finite data", v.name)));
            }
            if v.lb > v.ub {
                return Err(MilpError::Malformed(format!(
                    "variable {} has lb {} > ub {}",
                    v.name, v.lb, v.ub
                )));
            }
            if v.kind == VarKind::Binary && (v.lb < 0.0 || v.ub > 1.0) {
                return Err(MilpError::Malformed(format!("binary {} bounds outside [0,1]", v.name)));
            }
        }
        for c in &self.cons {
            if !c.rhs.is_finite() {
                return Err(MilpError::Malformed(format!("constraint {} has non-finite rhs", c.name)));
            }
            for &(v, a) in &c.terms {
                if v.0 >= self.vars.len() {
                    return Err(MilpError::Malformed(format!(
                        "constraint {} references undeclared variable {}",
                        c.name, v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(MilpError::Malformed(format!("constraint {} has non-finite coefficient", c.name)));
                }
            }
        }
        Ok(())
    }

    /// Largest bound, row or integrality violation of `x`, used for solution replay.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &xi) in self.vars.iter().zip(x) {
            worst = worst.max(v.lb - xi).max(xi - v.ub);
            if v.kind == VarKind::Binary {
                worst = worst.max((xi - xi.round()).abs());
            }
        }
        for c in &self.cons {
            worst = worst.max(c.violation(x));
        }
        worst
    }
}
