use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rtsm::milp::{BranchingRule, SolverOptions};
use rtsm::report::{
    contingencies, dump_model, load_workflow, render_evaluation, render_multiarea, render_solve, render_sweep,
    resolve_case, run_evaluate, run_multiarea, run_solve, run_sweep, ObjectiveChoice, Policy, ReportError,
    SolveOptions,
};
use rtsm::rtp::Strategy;

#[derive(Parser)]
#[command(name = "rtsm", version, about = "Probabilistic real-time security management studies")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    N1Benchmark,
    Severity,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Net,
    Incremental,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchingArg {
    Reliability,
    MostFractional,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Text,
    Csv,
}

#[derive(clap::Args)]
struct Common {
    /// Probability that corrective control fails.
    #[arg(long, default_value_t = 0.2)]
    pfail: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Branch-and-bound node limit.
    #[arg(long, default_value_t = 1_000_000)]
    node_limit: usize,
    /// Branch-and-bound search rule.
    #[arg(long, value_enum, default_value_t = BranchingArg::Reliability)]
    branching: BranchingArg,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize one case and print dispatch, flows, severities and costs.
    Solve {
        /// Builtin fixture name (irep-3bus, irep-6bus) or case file.
        case: String,
        #[arg(long, value_enum, default_value_t = PolicyArg::Severity)]
        policy: PolicyArg,
        /// Severity threshold in EUR (default: maximum severity, i.e. inactive).
        #[arg(long)]
        smax: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Allow line removal under working corrective control.
        #[arg(long, value_enum, default_value_t = OnOff::Off)]
        relax_working: OnOff,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Net)]
        objective: ObjectiveArg,
        /// Write the model in LP format to this file ("-" for stdout).
        #[arg(long)]
        dump_model: Option<PathBuf>,
        /// Write the optimal strategy to this file.
        #[arg(long)]
        save_strategy: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Optimal preventive dispatch for each chance level.
    SweepEpsilon {
        case: String,
        #[arg(long)]
        smax: f64,
        /// Comma-separated chance levels.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a two-operator study described by a workflow file.
    Multiarea {
        workflow: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a given strategy without optimizing.
    Evaluate {
        case: String,
        strategy: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn solver(c: &Common) -> SolverOptions {
    let branching = match c.branching {
        BranchingArg::Reliability => BranchingRule::Reliability,
        BranchingArg::MostFractional => BranchingRule::MostFractional,
    };
    SolverOptions { node_limit: c.node_limit, branching, ..SolverOptions::default() }
}

fn write_out(path: &Path, text: &str) -> Result<(), ReportError> {
    std::fs::write(path, text).map_err(|source| ReportError::Io { path: path.display().to_string(), source })
}

fn run(cli: Cli) -> Result<bool, ReportError> {
    match cli.cmd {
        Cmd::Solve { case, policy, smax, eps, relax_working, objective, dump_model: dump, save_strategy, common } => {
            let case = resolve_case(&case)?;
            let opts = SolveOptions {
                policy: match policy {
                    PolicyArg::N1Benchmark => Policy::N1Benchmark,
                    PolicyArg::Severity => Policy::Severity,
                },
                s_max: smax,
                epsilon: eps,
                p_fail: common.pfail,
                relax_working: matches!(relax_working, OnOff::On),
                objective: match objective {
                    ObjectiveArg::Net => ObjectiveChoice::Net,
                    ObjectiveArg::Incremental => ObjectiveChoice::Incremental,
                },
                solver: solver(&common),
            };
            if let Some(p) = dump {
                let lp = dump_model(&case, &opts)?;
                if p.as_os_str() == "-" {
                    print!("{lp}");
                } else {
                    write_out(&p, &lp)?;
                }
            }
            let rec = run_solve(&case, &opts)?;
            print!("{}", render_solve(&case, &rec, common.format == Format::Csv));
            if let (Some(p), Some(s)) = (save_strategy, &rec.strategy) {
                write_out(&p, &s.to_toml(&case))?;
            }
            if !rec.is_optimal() {
                eprintln!("solve ended with status {:?}", rec.status);
            }
            Ok(rec.is_optimal())
        }
        Cmd::SweepEpsilon { case, smax, eps, common } => {
            let case = resolve_case(&case)?;
            let base = SolveOptions { s_max: Some(smax), p_fail: common.pfail, solver: solver(&common), ..Default::default() };
            let rows = run_sweep(&case, &base, &eps)?;
            print!("{}", render_sweep(&case, &rows, common.format == Format::Csv));
            Ok(rows.iter().all(|r| r.preventive.is_some()))
        }
        Cmd::Multiarea { workflow, common } => {
            let mut wf = load_workflow(&workflow)?;
            wf.p_fail = common.pfail;
            let dir = workflow.parent().unwrap_or(Path::new("."));
            let rep = run_multiarea(&wf, dir, &solver(&common))?;
            let case = if rtsm::case::BUILTIN_NAMES.contains(&wf.case.as_str()) {
                resolve_case(&wf.case)?
            } else {
                resolve_case(&dir.join(&wf.case).display().to_string())?
            };
            print!("{}", render_multiarea(&case, &rep, &wf, common.format == Format::Csv));
            Ok(rep.all_optimal)
        }
        Cmd::Evaluate { case, strategy, common } => {
            let case = resolve_case(&case)?;
            let s = Strategy::load(&case, &strategy)?;
            let ev = run_evaluate(&case, &s, common.pfail)?;
            let cs = contingencies(&case)?;
            print!("{}", render_evaluation(&case, &cs, &ev, common.format == Format::Csv));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
