//! CSV and JSON run artifacts.
//!
//! Every value is written with 17 significant digits, which round-trips an `f64`
//! exactly. In observer-only runs the agent files carry only the `eta` and `omega`
//! columns, and the `V_i` and `e_norm_i` diagnostics are `NaN`.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::engine::{Run, Scenario};
use crate::error::{Error, Result};
use crate::leader::PeReport;
use crate::verify::Check;

pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |k| format!("{prefix}{k}"))
}

pub fn leader_header(m: usize, n: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(numbered("v", m))
        .chain(numbered("q0_", n))
        .chain(numbered("q0dot_", n))
        .collect()
}

/// Header of `agent_<i>.csv`; `n = p = 0` for observer-only runs.
pub fn agent_header(n: usize, m: usize, l: usize, p: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(numbered("q", n))
        .chain(numbered("qdot", n))
        .chain(numbered("eta", m))
        .chain(numbered("omega", l))
        .chain(numbered("thetahat", p))
        .chain(numbered("tau", n))
        .collect()
}

pub fn diagnostics_header(followers: usize) -> Vec<String> {
    ["t".to_string(), "V".to_string()]
        .into_iter()
        .chain(numbered("V_", followers))
        .chain(numbered("etatilde_norm_", followers))
        .chain(numbered("omegatilde_norm_", followers))
        .chain(numbered("e_norm_", followers))
        .collect()
}

fn render(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(format_value))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

fn row(t: f64, parts: &[&DVector<f64>]) -> Vec<f64> {
    std::iter::once(t)
        .chain(parts.iter().flat_map(|p| p.iter().copied()))
        .collect()
}

pub fn render_leader(run: &Run) -> Result<String> {
    let tr = &run.trajectory;
    let m = tr.v.first().map_or(0, DVector::len);
    let n = tr.q0.first().map_or(0, DVector::len);
    let rows = (0..tr.times.len()).map(|k| row(tr.times[k], &[&tr.v[k], &tr.q0[k], &tr.q0_dot[k]]));
    render(&leader_header(m, n), rows)
}

pub fn render_agent(run: &Run, i: usize) -> Result<String> {
    let tr = &run.trajectory;
    let a = &tr.agents[i];
    let dim = |s: &[DVector<f64>]| s.first().map_or(0, DVector::len);
    let header = agent_header(dim(&a.q), dim(&a.eta), dim(&a.omega_hat), dim(&a.theta_hat));
    let closed = !a.q.is_empty();
    let rows = (0..tr.times.len()).map(|k| {
        if closed {
            row(
                tr.times[k],
                &[
                    &a.q[k],
                    &a.q_dot[k],
                    &a.eta[k],
                    &a.omega_hat[k],
                    &a.theta_hat[k],
                    &a.tau[k],
                ],
            )
        } else {
            row(tr.times[k], &[&a.eta[k], &a.omega_hat[k]])
        }
    });
    render(&header, rows)
}

pub fn render_diagnostics(run: &Run) -> Result<String> {
    let tr = &run.trajectory;
    let d = &tr.diagnostics;
    let followers = tr.agents.len();
    let rows = (0..tr.times.len()).map(|k| {
        let mut r = vec![tr.times[k], d.observer_v[k]];
        for series in [&d.agent_v, &d.eta_tilde, &d.omega_tilde, &d.e_norm] {
            r.extend(series.iter().map(|s| s[k]));
        }
        r
    });
    render(&diagnostics_header(followers), rows)
}

/// Parsed CSV artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let values = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::invalid("csv value", format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    Ok(Table { header, rows })
}

pub fn read_table(path: &Path) -> Result<Table> {
    parse_table(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSummary {
    pub agent: usize,
    #[serde(flatten)]
    pub metrics: crate::engine::run::AgentMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub followers: usize,
    pub step: f64,
    pub horizon: f64,
    pub seed: Option<u64>,
    pub closed_loop: bool,
    pub agents: Vec<AgentSummary>,
    pub leader_pe: PeReport,
    pub observer_lyapunov_violations: usize,
    pub lyapunov_violations: usize,
    pub max_tracking_residual: f64,
    pub verdicts: Vec<Check>,
    pub passed: bool,
}

impl RunSummary {
    pub fn new(scenario: &Scenario, run: &Run) -> Result<Self> {
        let m = &run.metrics;
        let verdicts = crate::verify::metric_verdicts(scenario, m);
        Ok(Self {
            followers: scenario.followers(),
            step: scenario.integration.step,
            horizon: scenario.integration.horizon,
            seed: scenario.seed,
            closed_loop: scenario.is_closed_loop(),
            agents: m
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| AgentSummary {
                    agent: i + 1,
                    metrics: a.clone(),
                })
                .collect(),
            leader_pe: crate::verify::leader_pe_report(&scenario.leader)?,
            observer_lyapunov_violations: m.observer_lyapunov_violations,
            lyapunov_violations: m.lyapunov_violations,
            max_tracking_residual: m.max_tracking_residual,
            passed: verdicts.iter().all(Check::ok),
            verdicts,
        })
    }
}

/// Writes `leader.csv`, `agent_<i>.csv`, `diagnostics.csv` and `summary.json` into `dir`.
pub fn write_run(dir: &Path, scenario: &Scenario, run: &Run) -> Result<RunSummary> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    put("leader.csv", render_leader(run)?)?;
    for i in 0..run.trajectory.agents.len() {
        put(&format!("agent_{}.csv", i + 1), render_agent(run, i)?)?;
    }
    put("diagnostics.csv", render_diagnostics(run)?)?;
    let summary = RunSummary::new(scenario, run)?;
    put("summary.json", serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}
