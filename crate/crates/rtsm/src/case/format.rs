//! Case-file format: one TOML document with `[network]`, `[[generators]]`,
//! `[[demands]]` and `[options]`. Field names carry their units.

use serde::{Deserialize, Serialize};

use super::{validate_case, Case, CaseError, Demand, Generator, Line, NodeId, ProbabilitySource};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    name: String,
    network: NetworkSection,
    #[serde(default)]
    generators: Vec<GeneratorRow>,
    #[serde(default)]
    demands: Vec<DemandRow>,
    options: OptionsSection,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    nodes: Vec<NodeId>,
    slack_node: Option<NodeId>,
    #[serde(default)]
    lines: Vec<LineRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRow {
    id: String,
    from_node: NodeId,
    to_node: NodeId,
    f_max_mw: f64,
    reactance_pu: f64,
    mttf_h: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorRow {
    id: String,
    node: NodeId,
    cost_eur_per_mwh: f64,
    corrective_cost_eur_per_mwh: f64,
    p_min_mw: f64,
    p_max_mw: f64,
    ramp_down_mw: f64,
    ramp_up_mw: f64,
    emergency_ramp_mw: f64,
    mttf_h: f64,
    disconnect_fee_eur: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_market_mw: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandRow {
    id: String,
    node: NodeId,
    load_mw: f64,
    voll_eur_per_mwh: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptionsSection {
    horizon_h: f64,
    /// "from_mttf" or "explicit"
    probabilities: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    explicit_probabilities: Vec<f64>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

/// Parses and validates a case document.
pub fn load_case(text: &str) -> Result<Case, CaseError> {
    let file: CaseFile = toml::from_str(text).map_err(|e| match e.span() {
        Some(span) => {
            let (line, column) = line_col(text, span.start);
            CaseError::Parse { line, column, msg: e.message().to_string() }
        }
        None => CaseError::Syntax(e.message().to_string()),
    })?;
    let probabilities = match file.options.probabilities.as_str() {
        "from_mttf" => ProbabilitySource::FromMttf,
        "explicit" => ProbabilitySource::Explicit(file.options.explicit_probabilities),
        other => {
            return Err(CaseError::Syntax(format!(
                "options.probabilities must be \"from_mttf\" or \"explicit\", got {other:?}"
            )))
        }
    };
    if file.network.nodes.is_empty() {
        return Err(CaseError::Syntax("no nodes".into()));
    }
    let slack_node = file.network.slack_node.unwrap_or_else(|| *file.network.nodes.iter().min().unwrap());
    let case = Case {
        name: file.name,
        nodes: file.network.nodes,
        lines: file
            .network
            .lines
            .into_iter()
            .map(|l| Line {
                id: l.id,
                from_node: l.from_node,
                to_node: l.to_node,
                f_max: l.f_max_mw,
                reactance: l.reactance_pu,
                mttf: l.mttf_h,
            })
            .collect(),
        generators: file
            .generators
            .into_iter()
            .map(|g| Generator {
                id: g.id,
                node: g.node,
                cost: g.cost_eur_per_mwh,
                corrective_cost: g.corrective_cost_eur_per_mwh,
                p_min: g.p_min_mw,
                p_max: g.p_max_mw,
                ramp_down: g.ramp_down_mw,
                ramp_up: g.ramp_up_mw,
                emergency_ramp: g.emergency_ramp_mw,
                mttf: g.mttf_h,
                disconnect_fee: g.disconnect_fee_eur,
                p_market: g.p_market_mw,
            })
            .collect(),
        demands: file
            .demands
            .into_iter()
            .map(|d| Demand { id: d.id, node: d.node, p0: d.load_mw, voll: d.voll_eur_per_mwh })
            .collect(),
        horizon_hours: file.options.horizon_h,
        slack_node,
        probabilities,
    };
    let report = validate_case(&case);
    if !report.errors.is_empty() {
        return Err(CaseError::Invalid(report));
    }
    Ok(case)
}

pub fn load_case_file(path: &std::path::Path) -> Result<Case, CaseError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CaseError::Io { path: path.display().to_string(), source })?;
    load_case(&text)
}

/// Writes `case` in the case-file format; `load_case` reads it back unchanged.
pub fn serialize_case(case: &Case) -> String {
    let (probabilities, explicit_probabilities) = match &case.probabilities {
        ProbabilitySource::FromMttf => ("from_mttf".to_string(), Vec::new()),
        ProbabilitySource::Explicit(p) => ("explicit".to_string(), p.clone()),
    };
    let file = CaseFile {
        name: case.name.clone(),
        network: NetworkSection {
            nodes: case.nodes.clone(),
            slack_node: Some(case.slack_node),
            lines: case
                .lines
                .iter()
                .map(|l| LineRow {
                    id: l.id.clone(),
                    from_node: l.from_node,
                    to_node: l.to_node,
                    f_max_mw: l.f_max,
                    reactance_pu: l.reactance,
                    mttf_h: l.mttf,
                })
                .collect(),
        },
        generators: case
            .generators
            .iter()
            .map(|g| GeneratorRow {
                id: g.id.clone(),
                node: g.node,
                cost_eur_per_mwh: g.cost,
                corrective_cost_eur_per_mwh: g.corrective_cost,
                p_min_mw: g.p_min,
                p_max_mw: g.p_max,
                ramp_down_mw: g.ramp_down,
                ramp_up_mw: g.ramp_up,
                emergency_ramp_mw: g.emergency_ramp,
                mttf_h: g.mttf,
                disconnect_fee_eur: g.disconnect_fee,
                p_market_mw: g.p_market,
            })
            .collect(),
        demands: case
            .demands
            .iter()
            .map(|d| DemandRow { id: d.id.clone(), node: d.node, load_mw: d.p0, voll_eur_per_mwh: d.voll })
            .collect(),
        options: OptionsSection { horizon_h: case.horizon_hours, probabilities, explicit_probabilities },
    };
    toml::to_string(&file).expect("case serializes")
}
