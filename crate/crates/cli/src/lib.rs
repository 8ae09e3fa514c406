//! Command-line front end: loads a model, dispatches to a solver and writes
//! the report. `run` returns the process exit code.

pub mod config;
pub mod emit;

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::Path;
use std::sync::Arc;

use clap::Parser;
use thiserror::Error;

use multistop::model::LoadedModel;
use multistop::oracle::{brute_force_value_with, certify_with, OracleConfig, Verdict};
use multistop::{
    solve_multi_with, solve_swing, solve_symmetric, Constraint, Error, ModelSpec, MultiReward, NodeId,
    NodeProcess, SolveReport, SolverConfig, TreeModel,
};

use crate::config::{Cli, Format, Mode, PsiSpec, RunConfig};
use crate::emit::{CertifyDoc, OracleDoc, ReportDoc};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_CAP: i32 = 4;
pub const EXIT_CERTIFY: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("certification failed for `{}` (value delta {}, attainment delta {}, minimality {})",
        .0.start, .0.value_delta, .0.attainment_delta, if .0.minimality_pass { "pass" } else { "fail" })]
    Certification(Box<Verdict>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Config(_) => EXIT_PARSE,
            CliError::Io(_) => EXIT_OTHER,
            CliError::Certification(_) => EXIT_CERTIFY,
            CliError::Solver(e) => match e {
                Error::Parse(_)
                | Error::HorizonTooSmall(_)
                | Error::ProbabilitySum { .. }
                | Error::InvalidProbability { .. }
                | Error::DanglingParent { .. }
                | Error::DuplicateNode(_)
                | Error::MissingRoot
                | Error::MultipleRoots(..)
                | Error::TimeMismatch { .. }
                | Error::LeafBeforeHorizon { .. }
                | Error::BeyondHorizon { .. }
                | Error::Unreachable(_)
                | Error::NonPositivePathProbability(_)
                | Error::UnknownNode(_)
                | Error::InvalidValue { .. }
                | Error::MissingValue { .. } => EXIT_PARSE,
                Error::Infeasible { .. } | Error::EmptyFeasibleSet(_) => EXIT_INFEASIBLE,
                Error::CapExceeded { .. } | Error::TimeBudgetExceeded { .. } => EXIT_CAP,
                _ => EXIT_OTHER,
            },
        }
    }
}

/// Parses arguments, runs, prints errors to stderr and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let result = RunConfig::resolve(cli.mode, cli.flags).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Instance {
    model: Arc<TreeModel>,
    processes: LoadedModel,
    start: NodeId,
}

fn load_instance(cfg: &RunConfig) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(&cfg.model)
        .map_err(|e| CliError::Io(format!("cannot read model `{}`: {e}", cfg.model.display())))?;
    let spec = ModelSpec::from_json(&text)
        .map_err(|e| CliError::Parse(format!("model `{}`: {e}", cfg.model.display())))?;
    let loaded = spec.load()?;
    let model = loaded.model.clone();
    let start = match &cfg.start {
        Some(label) => model.find(label)?,
        None => model.root(),
    };
    Ok(Instance {
        model,
        processes: loaded,
        start,
    })
}

fn reward_process(cfg: &RunConfig, inst: &Instance) -> Result<NodeProcess, CliError> {
    let procs = &inst.processes.processes;
    match &cfg.reward {
        Some(name) => procs.get(name).cloned().ok_or_else(|| {
            CliError::Config(format!(
                "--reward `{name}`: model declares no such process (available: {})",
                procs.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        }),
        None if procs.len() == 1 => Ok(procs.values().next().expect("one process").clone()),
        None => Err(CliError::Config(format!(
            "--reward is required: model declares {} processes",
            procs.len()
        ))),
    }
}

fn build_psi(cfg: &RunConfig, inst: &Instance) -> Result<MultiReward, CliError> {
    Ok(match &cfg.psi {
        PsiSpec::Additive => MultiReward::additive(reward_process(cfg, inst)?, cfg.d)?,
        PsiSpec::Multiplicative => MultiReward::multiplicative(reward_process(cfg, inst)?, cfg.d)?,
        PsiSpec::Zero => MultiReward::zero(inst.model.clone(), cfg.d)?,
        PsiSpec::Table(path) => load_reward_table(path, &inst.model, cfg.d)?,
    })
}

/// Reads a reward table with header `node,t1[,t2],value`.
pub fn load_reward_table(path: &Path, model: &TreeModel, d: usize) -> Result<MultiReward, CliError> {
    let name = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("reward table `{name}`: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("reward table `{name}`: {e}")))?
        .clone();
    let expected: Vec<String> = std::iter::once("node".to_string())
        .chain((1..=d).map(|k| format!("t{k}")))
        .chain(std::iter::once("value".to_string()))
        .collect();
    if d > 2 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CliError::Parse(format!(
            "reward table `{name}`: header must be `{}` (tables support d <= 2)",
            expected.join(",")
        )));
    }
    let mut table = HashMap::new();
    for (line, record) in reader.records().enumerate() {
        let row = line + 2;
        let record = record.map_err(|e| CliError::Parse(format!("reward table `{name}` row {row}: {e}")))?;
        let node = model
            .find(&record[0])
            .map_err(|_| CliError::Parse(format!("reward table `{name}` row {row}: unknown node `{}`", &record[0])))?;
        let parse_err = |field: &str| CliError::Parse(format!("reward table `{name}` row {row}: bad field `{field}`"));
        let times = (1..=d)
            .map(|k| record[k].trim().parse::<usize>().map_err(|_| parse_err(&record[k])))
            .collect::<Result<Vec<_>, _>>()?;
        let value = record[d + 1]
            .trim()
            .parse::<f64>()
            .map_err(|_| parse_err(&record[d + 1]))?;
        if table.insert((node, times.clone()), value).is_some() {
            return Err(CliError::Parse(format!(
                "reward table `{name}` row {row}: duplicate row for `{}` {times:?}",
                &record[0]
            )));
        }
    }
    MultiReward::from_table(model, d, table).map_err(|e| CliError::Parse(format!("reward table `{name}`: {e}")))
}

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        memo_cap: cfg.memo_cap,
        eps: cfg.eps,
    }
}

fn solve(cfg: &RunConfig, inst: &Instance) -> Result<(SolveReport, Option<MultiReward>), CliError> {
    let start = inst.start;
    Ok(match cfg.solver {
        Mode::Single => {
            let y = reward_process(cfg, inst)?;
            (SolveReport::single(&y, start, &cfg.lambdas, cfg.eps)?, None)
        }
        Mode::Multi => {
            let psi = build_psi(cfg, inst)?;
            (solve_multi_with(&psi, &inst.model, start, &solver_config(cfg))?, Some(psi))
        }
        Mode::Symmetric => {
            let psi = build_psi(cfg, inst)?;
            (solve_symmetric(&psi, &inst.model, start, &solver_config(cfg))?, Some(psi))
        }
        Mode::Swing => {
            let y = reward_process(cfg, inst)?;
            (solve_swing(&y, cfg.d, cfg.delta, start, cfg.eps)?, None)
        }
        Mode::Certify => unreachable!("resolved configs never use certify as solver"),
    })
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let inst = load_instance(cfg)?;
    let (report, psi) = solve(cfg, &inst)?;
    let doc = ReportDoc::from_report(&report);
    if cfg.mode != Mode::Certify {
        let text = match cfg.format {
            Format::Json => emit::to_json(&doc)?,
            Format::Csv => emit::value_table_csv(&doc.value_process)?,
            Format::Text => emit::report_text(&doc),
        };
        return write_out(cfg, &text);
    }

    let (psi, constraint) = match cfg.solver {
        Mode::Single => (MultiReward::additive(reward_process(cfg, &inst)?, 1)?, None),
        Mode::Swing => (
            MultiReward::additive(reward_process(cfg, &inst)?, cfg.d)?,
            Some(Constraint::DeltaGap(cfg.delta)),
        ),
        // The symmetric solver claims minimality among ordered tuples.
        Mode::Symmetric => (psi.expect("reward built"), Some(Constraint::Ordered)),
        _ => (psi.expect("reward built"), None),
    };
    let oracle_cfg = OracleConfig {
        cap: cfg.cap_tuples,
        budget: cfg.budget,
        eps: cfg.eps,
    };
    let oracle = brute_force_value_with(&psi, &inst.model, inst.start, constraint, &oracle_cfg)?;
    let verdict = certify_with(&report, &oracle, cfg.eps)?;
    let cert = CertifyDoc {
        schema_version: emit::SCHEMA_VERSION,
        report: doc,
        oracle: OracleDoc::from_oracle(&oracle),
        verdict,
    };
    let text = match cfg.format {
        Format::Json => emit::to_json(&cert)?,
        Format::Csv => emit::verdict_csv(&cert.verdict)?,
        Format::Text => emit::certify_text(&cert),
    };
    write_out(cfg, &text)?;
    if cert.verdict.pass {
        Ok(())
    } else {
        Err(CliError::Certification(Box::new(cert.verdict)))
    }
}

fn write_out(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write `{}`: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
