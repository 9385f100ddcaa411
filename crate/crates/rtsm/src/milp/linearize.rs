//! Exact linear encodings of binary × continuous products.

use super::model::{MilpModel, Sense, VarId};
use super::MilpError;

/// Adds `aux = lam · theta` for a binary `lam` and a free `theta` with
/// `|theta| ≤ m` implied by the rest of the model.
pub fn linearize_bin_times_free(
    model: &mut MilpModel,
    name: &str,
    lam: VarId,
    theta: VarId,
    m: f64,
) -> Result<VarId, MilpError> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(MilpError::BadBigM(m));
    }
    let aux = model.add_var(name, f64::NEG_INFINITY, f64::INFINITY, 0.0);
    model.add_con(format!("{name}_ub"), vec![(aux, 1.0), (lam, -m)], Sense::Le, 0.0);
    model.add_con(format!("{name}_lb"), vec![(aux, 1.0), (lam, m)], Sense::Ge, 0.0);
    model.add_con(format!("{name}_cu"), vec![(aux, 1.0), (theta, -1.0), (lam, m)], Sense::Le, m);
    model.add_con(format!("{name}_cl"), vec![(aux, 1.0), (theta, -1.0), (lam, -m)], Sense::Ge, -m);
    Ok(aux)
}

/// Adds `aux = y · p` for a binary `y` and a nonnegative `p ≤ m`.
pub fn linearize_bin_times_nonneg(
    model: &mut MilpModel,
    name: &str,
    y: VarId,
    p: VarId,
    m: f64,
) -> Result<VarId, MilpError> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(MilpError::BadBigM(m));
    }
    let aux = model.add_var(name, 0.0, f64::INFINITY, 0.0);
    model.add_con(format!("{name}_ub"), vec![(aux, 1.0), (y, -m)], Sense::Le, 0.0);
    model.add_con(format!("{name}_cu"), vec![(aux, 1.0), (p, -1.0), (y, m)], Sense::Le, m);
    model.add_con(format!("{name}_cl"), vec![(aux, 1.0), (p, -1.0), (y, -m)], Sense::Ge, -m);
    Ok(aux)
}
