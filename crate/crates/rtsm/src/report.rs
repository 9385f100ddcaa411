//! Study pipelines behind the command line and their table output.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::case::{builtin_case, load_case_file, serialize_case, Case, CaseError, BUILTIN_NAMES};
use crate::milp::{solve_milp, write_lp, MilpError, MilpModel, MilpSolution, MilpStatus, SolveStats, SolverOptions};
use crate::multiarea::{
    merge_and_min_severity, merge_strategies, solve_area, system_opf, Area, AreaError, AreaPartition, AreaPolicy,
    AreaRun, AreaSeverityRow, Workflow,
};
use crate::rtp::{
    build_with, extract_strategy, severity_model, BuildSpec, IncrementalFees, ObjectiveVariant, RtpError, RtpOptions,
    Scope, Strategy, StrategyError, VariableMap,
};
use crate::scenario::{behavior_set, build_contingencies, Behavior, BehaviorSet, ContingencySet, Outage, ScenarioError};
use crate::terminal::{evaluate_strategy, EvalError, StrategyEvaluation};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Rtp(#[from] RtpError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Area(#[from] AreaError),
    #[error("workflow: {0}")]
    Workflow(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// A builtin fixture name or a path to a case file.
pub fn resolve_case(spec: &str) -> Result<Case, ReportError> {
    if BUILTIN_NAMES.contains(&spec) {
        return Ok(builtin_case(spec)?);
    }
    Ok(load_case_file(Path::new(spec))?)
}

/// SHA-256 of the canonical serialization, hex encoded.
pub fn case_hash(case: &Case) -> String {
    let digest = Sha256::digest(serialize_case(case).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    N1Benchmark,
    Severity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveChoice {
    Net,
    Incremental,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub policy: Policy,
    /// Severity threshold; `None` means the case's maximum severity (inactive).
    pub s_max: Option<f64>,
    pub epsilon: f64,
    pub p_fail: f64,
    pub relax_working: bool,
    pub objective: ObjectiveChoice,
    pub solver: SolverOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            policy: Policy::Severity,
            s_max: None,
            epsilon: 0.0,
            p_fail: 0.2,
            relax_working: false,
            objective: ObjectiveChoice::Net,
            solver: SolverOptions::default(),
        }
    }
}

/// Severity of one (event, behavior) pair as held by the optimization model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSeverity {
    pub outage: Outage,
    pub behavior: Behavior,
    pub weight: f64,
    pub severity: f64,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub case_name: String,
    pub case_hash: String,
    pub options: SolveOptions,
    pub status: MilpStatus,
    pub objective: f64,
    pub strategy: Option<Strategy>,
    pub evaluation: Option<StrategyEvaluation>,
    pub model_severity: Vec<ModelSeverity>,
    pub elapsed: Duration,
    pub stats: SolveStats,
}

impl RunRecord {
    pub fn is_optimal(&self) -> bool {
        self.status == MilpStatus::Optimal
    }

    /// Σ π_c π_b s over the model's severity variables.
    pub fn model_expected_severity(&self) -> f64 {
        self.model_severity.iter().map(|m| m.weight * m.severity).sum()
    }
}

pub fn contingencies(case: &Case) -> Result<ContingencySet, ReportError> {
    Ok(build_contingencies(case, &(&case.probabilities).into())?)
}

pub fn model_severities(sol: &MilpSolution, map: &VariableMap, bs: &BehaviorSet) -> Vec<ModelSeverity> {
    let mut out = Vec::new();
    for e in &map.events {
        for bv in &e.behaviors {
            let s = sol.value(bv.severity);
            out.push(ModelSeverity {
                outage: e.outage,
                behavior: bv.behavior,
                weight: e.pi * bs.pi(bv.behavior),
                severity: if s.abs() < 1e-7 { 0.0 } else { s },
            });
        }
    }
    out
}

/// The optimization model a solve run would use.
pub fn build_model(
    case: &Case,
    cs: &ContingencySet,
    opts: &SolveOptions,
) -> Result<(MilpModel, VariableMap), ReportError> {
    let bs = behavior_set(opts.p_fail)?;
    let objective = match opts.objective {
        ObjectiveChoice::Net => ObjectiveVariant::NetCost,
        ObjectiveChoice::Incremental => ObjectiveVariant::Incremental(IncrementalFees::from_case(case)),
    };
    let mut spec = match opts.policy {
        Policy::N1Benchmark => BuildSpec::case_a(case),
        Policy::Severity => BuildSpec::rtp(
            case,
            &RtpOptions::severity(opts.s_max.unwrap_or_else(|| case.max_severity()), opts.epsilon),
        ),
    };
    spec.opts.objective = objective;
    spec.opts.allow_relax_working = opts.relax_working && opts.policy == Policy::Severity;
    Ok(build_with(case, cs, &bs, &spec)?)
}

/// Solves, extracts the strategy and evaluates it with the oracle.
pub fn run_solve(case: &Case, opts: &SolveOptions) -> Result<RunRecord, ReportError> {
    let cs = contingencies(case)?;
    let bs = behavior_set(opts.p_fail)?;
    let start = Instant::now();
    let (model, map) = build_model(case, &cs, opts)?;
    let sol = solve_milp(&model, &opts.solver)?;
    let mut rec = RunRecord {
        case_name: case.name.clone(),
        case_hash: case_hash(case),
        options: opts.clone(),
        status: sol.status,
        objective: sol.objective,
        strategy: None,
        evaluation: None,
        model_severity: Vec::new(),
        elapsed: Duration::ZERO,
        stats: sol.stats.clone(),
    };
    if !sol.is_optimal() {
        rec.elapsed = start.elapsed();
        return Ok(rec);
    }
    let strategy = extract_strategy(&sol, &map)?;
    rec.model_severity = match opts.policy {
        Policy::Severity => model_severities(&sol, &map, &bs),
        Policy::N1Benchmark => {
            // severities are by-products here: minimize them with the strategy held
            let ropts = RtpOptions { allow_relax_working: false, ..RtpOptions::default() };
            let (m2, map2) = severity_model(case, &cs, &bs, &strategy, &ropts, &Scope::whole(case))?;
            let s2 = solve_milp(&m2, &opts.solver)?;
            if !s2.is_optimal() {
                return Err(RtpError::NotOptimal(format!("severity pass {:?}", s2.status)).into());
            }
            model_severities(&s2, &map2, &bs)
        }
    };
    rec.evaluation = Some(evaluate_strategy(case, &cs, &bs, &strategy)?);
    rec.strategy = Some(strategy);
    rec.elapsed = start.elapsed();
    Ok(rec)
}

pub fn dump_model(case: &Case, opts: &SolveOptions) -> Result<String, ReportError> {
    let cs = contingencies(case)?;
    let (m, _) = build_model(case, &cs, opts)?;
    Ok(write_lp(&m))
}

pub fn run_evaluate(case: &Case, strategy: &Strategy, p_fail: f64) -> Result<StrategyEvaluation, ReportError> {
    let cs = contingencies(case)?;
    let bs = behavior_set(p_fail)?;
    Ok(evaluate_strategy(case, &cs, &bs, strategy)?)
}

/// One ε of a sweep: the optimal preventive dispatch, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub status: MilpStatus,
    pub preventive: Option<Vec<f64>>,
    pub objective: f64,
}

pub fn run_sweep(case: &Case, base: &SolveOptions, eps: &[f64]) -> Result<Vec<SweepRow>, ReportError> {
    let cs = contingencies(case)?;
    eps.iter()
        .map(|&e| {
            let opts = SolveOptions { policy: Policy::Severity, epsilon: e, ..base.clone() };
            let (m, map) = build_model(case, &cs, &opts)?;
            let sol = solve_milp(&m, &opts.solver)?;
            let preventive = if sol.is_optimal() { Some(extract_strategy(&sol, &map)?.preventive) } else { None };
            Ok(SweepRow { epsilon: e, status: sol.status, preventive, objective: sol.objective })
        })
        .collect()
}

/// Cost components attributed to one area.
#[derive(Clone, Debug, PartialEq)]
pub struct AreaCost {
    pub area: String,
    pub preventive: f64,
    pub expected_corrective: f64,
    pub expected_severity: f64,
}

#[derive(Clone, Debug)]
pub struct MultiAreaReport {
    pub case_name: String,
    pub boundary: Vec<f64>,
    pub runs: Vec<AreaRun>,
    pub merged: Strategy,
    pub merged_rows: Vec<AreaSeverityRow>,
    pub merged_costs: Vec<AreaCost>,
    /// System-wide run for comparison, with its per-area split.
    pub system: Option<(Strategy, Vec<AreaSeverityRow>, Vec<AreaCost>)>,
    pub all_optimal: bool,
}

pub fn area_costs(
    case: &Case,
    partition: &AreaPartition,
    cs: &ContingencySet,
    strategy: &Strategy,
    rows: &[AreaSeverityRow],
) -> Vec<AreaCost> {
    partition
        .areas
        .iter()
        .enumerate()
        .map(|(a, area)| {
            let own: Vec<bool> = (0..case.generators.len()).map(|g| partition.generator_area(case, g) == a).collect();
            let preventive = case
                .generators
                .iter()
                .enumerate()
                .filter(|&(g, _)| own[g])
                .map(|(g, gen)| gen.cost * strategy.preventive[g])
                .sum();
            AreaCost {
                area: area.id.clone(),
                preventive,
                expected_corrective: crate::terminal::expected_corrective_cost(case, cs, strategy, &own),
                expected_severity: rows.iter().map(|r| r.weight * r.by_area[a]).sum(),
            }
        })
        .collect()
}

pub fn run_multiarea(workflow: &Workflow, base_dir: &Path, solver: &SolverOptions) -> Result<MultiAreaReport, ReportError> {
    let case = if BUILTIN_NAMES.contains(&workflow.case.as_str()) {
        builtin_case(&workflow.case)?
    } else {
        load_case_file(&base_dir.join(&workflow.case))?
    };
    let cs = contingencies(&case)?;
    let bs = behavior_set(workflow.p_fail)?;
    let partition = AreaPartition::new(
        &case,
        workflow.areas.iter().map(|a| Area { id: a.id.clone(), nodes: a.nodes.clone() }).collect(),
    )?;
    let boundary = system_opf(&case)?;
    let mut runs = Vec::new();
    for (i, spec) in workflow.areas.iter().enumerate() {
        let policy = spec.policy.to_policy(&case).map_err(ReportError::Workflow)?;
        runs.push(solve_area(&case, &partition, i, &boundary, policy, &cs, &bs, solver)?);
    }
    let all_optimal = runs.iter().all(|r| r.solution.is_optimal());
    let merged = merge_strategies(&case, &partition, &cs, &runs)?;
    let (_, merged_rows) = merge_and_min_severity(&case, &partition, &cs, &bs, &merged)?;
    let merged_costs = area_costs(&case, &partition, &cs, &merged, &merged_rows);
    let mut system = None;
    let mut sys_ok = true;
    if let Some(p) = &workflow.system {
        let policy = p.to_policy(&case).map_err(ReportError::Workflow)?;
        let opts = SolveOptions {
            policy: match policy {
                AreaPolicy::N1Benchmark => Policy::N1Benchmark,
                AreaPolicy::SeverityControlled { .. } => Policy::Severity,
            },
            s_max: match policy {
                AreaPolicy::SeverityControlled { s_max, .. } => Some(s_max),
                AreaPolicy::N1Benchmark => None,
            },
            epsilon: match policy {
                AreaPolicy::SeverityControlled { epsilon, .. } => epsilon,
                AreaPolicy::N1Benchmark => 0.0,
            },
            p_fail: workflow.p_fail,
            solver: solver.clone(),
            ..SolveOptions::default()
        };
        let rec = run_solve(&case, &opts)?;
        sys_ok = rec.is_optimal();
        if let Some(s) = rec.strategy {
            let (_, rows) = merge_and_min_severity(&case, &partition, &cs, &bs, &s)?;
            let costs = area_costs(&case, &partition, &cs, &s, &rows);
            system = Some((s, rows, costs));
        }
    }
    Ok(MultiAreaReport {
        case_name: case.name.clone(),
        boundary,
        runs,
        merged,
        merged_rows,
        merged_costs,
        system,
        all_optimal: all_optimal && sys_ok,
    })
}

pub fn load_workflow(path: &Path) -> Result<Workflow, ReportError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.display().to_string(), source })?;
    Workflow::from_toml(&text).map_err(ReportError::Workflow)
}

// ---- formatting ----

pub fn eur(x: f64) -> String {
    let v = if x.abs() < 0.005 { 0.0 } else { x };
    format!("{v:.2}")
}

pub fn mw(x: f64) -> String {
    let v = if x.abs() < 0.05 { 0.0 } else { x };
    format!("{v:.1}")
}

fn header(case: &Case) -> String {
    let ids: Vec<&str> = case.generators.iter().map(|g| g.id.as_str()).collect();
    ids.join(",")
}

/// contingency,label,<generator ids>; the outaged unit is written as `x`.
pub fn corrective_csv(case: &Case, cs: &ContingencySet, s: &Strategy) -> String {
    let mut out = format!("contingency,label,{}\n", header(case));
    for c in cs.outages() {
        let row = s.corrective_for(c.outage);
        let cells: Vec<String> =
            row.iter().enumerate().map(|(g, &p)| if c.gen_available(g) { mw(p) } else { "x".into() }).collect();
        let _ = writeln!(out, "{},{},{}", c.id, c.label(case), cells.join(","));
    }
    out
}

pub fn preventive_csv(case: &Case, s: &Strategy) -> String {
    let cells: Vec<String> = s.preventive.iter().map(|&p| mw(p)).collect();
    format!("{}\n{}\n", header(case), cells.join(","))
}

/// Post-contingency flows under failing corrective control, line outages only
/// (after a unit outage the failing state is not a balanced power flow).
pub fn failing_flows_csv(case: &Case, cs: &ContingencySet, ev: &StrategyEvaluation) -> String {
    let ids: Vec<&str> = case.lines.iter().map(|l| l.id.as_str()).collect();
    let mut out = format!("contingency,label,{}\n", ids.join(","));
    for ((r, st), c) in ev.rows.iter().zip(&ev.states).zip(cs.iter().flat_map(|c| [c, c])) {
        if r.behavior != Behavior::Failing || !matches!(c.outage, Outage::Line(_)) {
            continue;
        }
        let cells: Vec<String> = st
            .flows
            .iter()
            .enumerate()
            .map(|(l, &f)| if c.line_available(l) { mw(f) } else { "x".into() })
            .collect();
        let _ = writeln!(out, "{},{},{}", r.contingency, r.label, cells.join(","));
    }
    out
}

pub fn cost_csv(ev: &StrategyEvaluation) -> String {
    format!(
        "preventive_eur,expected_corrective_eur,expected_severity_eur,total_eur\n{},{},{},{}\n",
        eur(ev.preventive_cost),
        eur(ev.expected_corrective_cost),
        eur(ev.expected_severity),
        eur(ev.total_cost())
    )
}

/// Parsed form of the severity CSV.
#[derive(Clone, Debug, PartialEq, serde::Deserialize)]
pub struct SeverityCsvRow {
    pub contingency: usize,
    pub label: String,
    pub behavior: String,
    pub severity_eur: f64,
    pub severity_pct: f64,
    pub weight: f64,
}

pub fn parse_severity_csv(text: &str) -> Result<Vec<SeverityCsvRow>, ReportError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize().map(|r| r.map_err(ReportError::from)).collect()
}

fn indent_table(csv: &str) -> String {
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let ncol = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let width: Vec<usize> =
        (0..ncol).map(|j| rows.iter().filter_map(|r| r.get(j)).map(|s| s.len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().enumerate().map(|(j, s)| format!("{s:>w$}", w = width[j])).collect();
        let _ = writeln!(out, "  {}", cells.join("  "));
    }
    out
}

/// Human-readable or sectioned CSV rendering of a solve run.
pub fn render_solve(case: &Case, rec: &RunRecord, csv: bool) -> String {
    let mut out = String::new();
    let cs = contingencies(case).ok();
    let sections: Vec<(&str, String)> = match (&rec.strategy, &rec.evaluation, &cs) {
        (Some(s), Some(ev), Some(cs)) => vec![
            ("preventive dispatch (MW)", preventive_csv(case, s)),
            ("corrective re-dispatch (MW)", corrective_csv(case, cs, s)),
            ("post-contingency flows, failing corrective control (MW)", failing_flows_csv(case, cs, ev)),
            ("severity", ev.to_csv()),
            ("cost breakdown", cost_csv(ev)),
        ],
        _ => Vec::new(),
    };
    if csv {
        for (name, body) in sections {
            let _ = writeln!(out, "# {name}");
            out.push_str(&body);
        }
        return out;
    }
    let _ = writeln!(out, "case {} ({})", rec.case_name, &rec.case_hash[..12]);
    let _ = writeln!(
        out,
        "status {:?}, objective {}, {} nodes, {:.2} s",
        rec.status,
        eur(rec.objective),
        rec.stats.nodes,
        rec.elapsed.as_secs_f64()
    );
    for (name, body) in sections {
        let _ = writeln!(out, "\n{name}");
        out.push_str(&indent_table(&body));
    }
    out
}

pub fn render_evaluation(case: &Case, cs: &ContingencySet, ev: &StrategyEvaluation, csv: bool) -> String {
    let sections = [
        ("post-contingency flows, failing corrective control (MW)", failing_flows_csv(case, cs, ev)),
        ("severity", ev.to_csv()),
        ("cost breakdown", cost_csv(ev)),
    ];
    let mut out = String::new();
    for (name, body) in sections {
        if csv {
            let _ = writeln!(out, "# {name}");
            out.push_str(&body);
        } else {
            let _ = writeln!(out, "{name}");
            out.push_str(&indent_table(&body));
            out.push('\n');
        }
    }
    out
}

pub fn render_sweep(case: &Case, rows: &[SweepRow], csv: bool) -> String {
    let mut body = format!("epsilon,status,{}\n", header(case));
    for r in rows {
        let cells: Vec<String> = match &r.preventive {
            Some(p) => p.iter().map(|&x| mw(x)).collect(),
            None => vec!["-".into(); case.generators.len()],
        };
        let _ = writeln!(body, "{:e},{:?},{}", r.epsilon, r.status, cells.join(","));
    }
    if csv {
        body
    } else {
        format!("preventive dispatch per chance level (MW)\n{}", indent_table(&body))
    }
}

fn area_rows_csv(areas: &[String], rows: &[AreaSeverityRow]) -> String {
    let mut out = format!("contingency,label,behavior,{}\n", areas.join(","));
    for r in rows {
        let cells: Vec<String> = r.by_area.iter().map(|&v| eur(v)).collect();
        let _ = writeln!(out, "{},{},{},{}", r.contingency, r.label, r.behavior.tag(), cells.join(","));
    }
    out
}

fn area_cost_csv(costs: &[AreaCost]) -> String {
    let mut out = String::from("area,preventive_eur,expected_corrective_eur,expected_severity_eur\n");
    for c in costs {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.area,
            eur(c.preventive),
            eur(c.expected_corrective),
            eur(c.expected_severity)
        );
    }
    out
}

pub fn render_multiarea(case: &Case, rep: &MultiAreaReport, workflow: &Workflow, csv: bool) -> String {
    let areas: Vec<String> = workflow.areas.iter().map(|a| a.id.clone()).collect();
    let mut sections: Vec<(String, String)> = Vec::new();
    let boundary = Strategy { preventive: rep.boundary.clone(), corrective: Default::default() };
    sections.push(("system OPF dispatch (MW)".into(), preventive_csv(case, &boundary)));
    for run in &rep.runs {
        let name = format!("area {} preventive dispatch (MW), status {:?}", areas[run.area], run.solution.status);
        sections.push((name, preventive_csv(case, &run.strategy)));
    }
    sections.push(("merged minimum severity by area (EUR)".into(), area_rows_csv(&areas, &rep.merged_rows)));
    sections.push(("merged cost breakdown by area".into(), area_cost_csv(&rep.merged_costs)));
    if let Some((s, rows, costs)) = &rep.system {
        sections.push(("system-wide run preventive dispatch (MW)".into(), preventive_csv(case, s)));
        sections.push(("system-wide run severity by area (EUR)".into(), area_rows_csv(&areas, rows)));
        sections.push(("system-wide run cost breakdown by area".into(), area_cost_csv(costs)));
    }
    let mut out = String::new();
    for (name, body) in sections {
        if csv {
            let _ = writeln!(out, "# {name}");
            out.push_str(&body);
        } else {
            let _ = writeln!(out, "{name}");
            out.push_str(&indent_table(&body));
            out.push('\n');
        }
    }
    out
}
