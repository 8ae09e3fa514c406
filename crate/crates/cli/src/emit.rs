//! Report documents and their json, csv and text renderings.
//!
//! Machine formats write floats in shortest round-trip form, so parsing a
//! document back reproduces every number bit for bit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use multistop::oracle::{OracleReport, Verdict};
use multistop::{Constraint, NodeProcess, SolveReport};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub node: String,
    pub time: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaDoc {
    pub lambda: f64,
    pub stop_value: f64,
    pub bound_slack: f64,
}

/// Residuals; a slack is `None` when it ranges over no node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualsDoc {
    pub dominance_slack: Option<f64>,
    pub supermartingale_slack: Option<f64>,
    pub bellman_residual: f64,
    pub reduction_identity: f64,
    pub attainment: f64,
    pub min_cut_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub schema_version: u32,
    pub mode: String,
    pub model_hash: String,
    pub start: String,
    pub d: usize,
    pub delta: Option<usize>,
    pub value: f64,
    pub tuple_value: f64,
    /// Stop nodes of the minimal optimal stopping time of the reduced problem.
    pub reduced_stop: Vec<String>,
    /// Stop nodes of each component of the optimal tuple.
    pub tuple: Vec<Vec<String>>,
    pub residuals: ResidualsDoc,
    pub lambda_table: Vec<LambdaDoc>,
    pub value_process: Vec<NodeRow>,
    pub new_reward: Vec<NodeRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDoc {
    pub constraint: Option<String>,
    pub value: f64,
    pub enumerated_count: u128,
    pub optimal_tuples: usize,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyDoc {
    pub schema_version: u32,
    pub report: ReportDoc,
    pub oracle: OracleDoc,
    pub verdict: Verdict,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn node_rows(x: &NodeProcess) -> Vec<NodeRow> {
    let m = x.model();
    m.ids()
        .map(|n| NodeRow {
            node: m.label(n).to_string(),
            time: m.time(n),
            value: x[n],
        })
        .collect()
}

impl ReportDoc {
    pub fn from_report(r: &SolveReport) -> Self {
        let res = &r.residuals;
        Self {
            schema_version: SCHEMA_VERSION,
            mode: r.mode.as_str().to_string(),
            model_hash: r.model_hash.clone(),
            start: r.model.label(r.start).to_string(),
            d: r.d,
            delta: r.delta,
            value: r.value,
            tuple_value: r.tuple_value,
            reduced_stop: r.reduced_stop.stop_labels(),
            tuple: r.tuple.stop_labels(),
            residuals: ResidualsDoc {
                dominance_slack: finite(res.dominance_slack),
                supermartingale_slack: finite(res.supermartingale_slack),
                bellman_residual: res.bellman_residual,
                reduction_identity: res.reduction_identity,
                attainment: res.attainment,
                min_cut_consistent: res.min_cut_consistent,
            },
            lambda_table: r
                .lambda_table
                .iter()
                .map(|row| LambdaDoc {
                    lambda: row.lambda,
                    stop_value: row.stop_value,
                    bound_slack: row.bound_slack,
                })
                .collect(),
            value_process: node_rows(&r.value_process),
            new_reward: node_rows(&r.new_reward),
        }
    }
}

impl OracleDoc {
    pub fn from_oracle(o: &OracleReport) -> Self {
        Self {
            constraint: o.constraint.map(|c| match c {
                Constraint::Ordered => "ordered".to_string(),
                Constraint::DeltaGap(delta) => format!("delta-gap:{delta}"),
            }),
            value: o.value,
            enumerated_count: o.enumerated_count,
            optimal_tuples: o.optimal_tuples.len(),
            elapsed_secs: o.elapsed.as_secs_f64(),
        }
    }
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Value table: `node,time,value`, one row per node.
pub fn value_table_csv(rows: &[NodeRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

pub fn parse_value_table_csv(text: &str) -> Result<Vec<NodeRow>, CliError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<NodeRow>, _>>()
        .map_err(|e| CliError::Parse(e.to_string()))
}

/// Verdict as a `field,value` table.
pub fn verdict_csv(v: &Verdict) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fields: [(&str, String); 11] = [
        ("model_hash", v.model_hash.clone()),
        ("start", v.start.clone()),
        ("d", v.d.to_string()),
        ("solver_value", v.solver_value.to_string()),
        ("oracle_value", v.oracle_value.to_string()),
        ("value_delta", v.value_delta.to_string()),
        ("attainment_delta", v.attainment_delta.to_string()),
        ("value_pass", v.value_pass.to_string()),
        ("attainment_pass", v.attainment_pass.to_string()),
        ("minimality_pass", v.minimality_pass.to_string()),
        ("pass", v.pass.to_string()),
    ];
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["field", "value"]).map_err(io)?;
    for (k, val) in fields {
        w.write_record([k, val.as_str()]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

fn opt6(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

pub fn report_text(doc: &ReportDoc) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode            {}", doc.mode);
    let _ = writeln!(s, "model hash      {}", doc.model_hash);
    let _ = writeln!(s, "start           {}", doc.start);
    let _ = writeln!(s, "d               {}", doc.d);
    if let Some(delta) = doc.delta {
        let _ = writeln!(s, "delta           {delta}");
    }
    let _ = writeln!(s, "value           {:.6}", doc.value);
    let _ = writeln!(s, "tuple value     {:.6}", doc.tuple_value);
    let _ = writeln!(s);
    let r = &doc.residuals;
    let _ = writeln!(s, "dominance slack              {}", opt6(r.dominance_slack));
    let _ = writeln!(s, "supermartingale slack        {}", opt6(r.supermartingale_slack));
    let _ = writeln!(s, "bellman residual             {:.6}", r.bellman_residual);
    let _ = writeln!(s, "reduction identity residual  {:.6}", r.reduction_identity);
    let _ = writeln!(s, "attainment residual          {:.6}", r.attainment);
    let _ = writeln!(s, "min cut consistent           {}", r.min_cut_consistent);
    let _ = writeln!(s);
    let _ = writeln!(s, "reduced stop    {}", doc.reduced_stop.join(" "));
    for (k, comp) in doc.tuple.iter().enumerate() {
        let _ = writeln!(s, "component {:<5} {}", k + 1, comp.join(" "));
    }
    if !doc.lambda_table.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>10} {:>14} {:>14}", "lambda", "stop value", "bound slack");
        for row in &doc.lambda_table {
            let _ = writeln!(s, "{:>10.6} {:>14.6} {:>14.6}", row.lambda, row.stop_value, row.bound_slack);
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<12} {:>4} {:>14} {:>14}", "node", "time", "value", "reward");
    for (v, phi) in doc.value_process.iter().zip(&doc.new_reward) {
        let _ = writeln!(s, "{:<12} {:>4} {:>14.6} {:>14.6}", v.node, v.time, v.value, phi.value);
    }
    s
}

pub fn certify_text(doc: &CertifyDoc) -> String {
    let v = &doc.verdict;
    let mut s = report_text(&doc.report);
    let _ = writeln!(s);
    let _ = writeln!(s, "oracle value    {:.6}", doc.oracle.value);
    let _ = writeln!(s, "enumerated      {}", doc.oracle.enumerated_count);
    let _ = writeln!(s, "optimal tuples  {}", doc.oracle.optimal_tuples);
    let _ = writeln!(s, "value delta     {:.6} ({})", v.value_delta, pass_word(v.value_pass));
    let _ = writeln!(s, "attainment      {:.6} ({})", v.attainment_delta, pass_word(v.attainment_pass));
    let _ = writeln!(s, "minimality      {}", pass_word(v.minimality_pass));
    if let Some((node, ours, theirs, order)) = &v.minimality.violation {
        let _ = writeln!(s, "  at `{node}`: solver {ours:?} vs optimal {theirs:?} ({order})");
    }
    let _ = writeln!(s, "verdict         {}", pass_word(v.pass));
    s
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}
