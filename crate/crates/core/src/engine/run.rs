use nalgebra::DVector;
use serde::Serialize;

use super::integrator::rk4_step_with_first_stage;
use super::network::{Evaluation, Monitors, Network};
use super::scenario::Scenario;
use crate::error::Result;

/// Allowed per-step increase of a Lyapunov function before it counts as a violation.
pub const LYAPUNOV_SLACK: f64 = 1e-8;

/// Error levels used for settling times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub q: f64,
    pub q_dot: f64,
    pub eta: f64,
    pub omega: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            q: 1e-2,
            q_dot: 5e-2,
            eta: 1e-2,
            omega: 5e-2,
        }
    }
}

/// Monitors at every integration step, including `t = 0` and the final time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepSeries {
    pub times: Vec<f64>,
    pub observer_v: Vec<f64>,
    /// Indexed `[agent][step]`; per-agent series are empty when the plants are disabled.
    pub agent_v: Vec<Vec<f64>>,
    pub eta_tilde: Vec<Vec<f64>>,
    pub omega_tilde: Vec<Vec<f64>>,
    pub q_err: Vec<Vec<f64>>,
    pub q_dot_err: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
}

impl StepSeries {
    fn new(agents: usize) -> Self {
        let per = || vec![Vec::new(); agents];
        Self {
            agent_v: per(),
            eta_tilde: per(),
            omega_tilde: per(),
            q_err: per(),
            q_dot_err: per(),
            ..Default::default()
        }
    }

    fn push(&mut self, t: f64, m: &Monitors) {
        self.times.push(t);
        self.observer_v.push(m.observer_v);
        self.residual.push(m.residual);
        let fields = [
            (&mut self.eta_tilde, &m.eta_tilde),
            (&mut self.omega_tilde, &m.omega_tilde),
            (&mut self.agent_v, &m.agent_v),
            (&mut self.q_err, &m.q_err),
            (&mut self.q_dot_err, &m.q_dot_err),
        ];
        for (series, values) in fields {
            for (s, &v) in series.iter_mut().zip(values) {
                s.push(v);
            }
        }
    }

    /// Largest value of `series[agent][step]` over all agents and steps with `t` in `[from, to]`.
    pub fn max_over(&self, series: &[Vec<f64>], from: f64, to: f64) -> f64 {
        series.iter().flat_map(|s| self.window(s, from, to)).fold(0.0, f64::max)
    }

    fn window<'s>(&'s self, s: &'s [f64], from: f64, to: f64) -> impl Iterator<Item = f64> + 's {
        self.times
            .iter()
            .zip(s)
            .filter(move |(t, _)| **t >= from - 1e-12 && **t <= to + 1e-12)
            .map(|(_, v)| *v)
    }

    /// Elementwise maximum across agents at each step.
    pub fn worst_agent(series: &[Vec<f64>]) -> Vec<f64> {
        let len = series.first().map_or(0, Vec::len);
        (0..len)
            .map(|k| series.iter().map(|s| s[k]).fold(0.0, f64::max))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentSeries {
    pub q: Vec<DVector<f64>>,
    pub q_dot: Vec<DVector<f64>>,
    pub eta: Vec<DVector<f64>>,
    pub omega_hat: Vec<DVector<f64>>,
    pub theta_hat: Vec<DVector<f64>>,
    pub tau: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticSeries {
    pub observer_v: Vec<f64>,
    /// Indexed `[agent][sample]`; NaN where the plants are disabled.
    pub agent_v: Vec<Vec<f64>>,
    pub eta_tilde: Vec<Vec<f64>>,
    pub omega_tilde: Vec<Vec<f64>>,
    pub e_norm: Vec<Vec<f64>>,
}

/// Samples recorded every `record_every` steps, plus the final time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub v: Vec<DVector<f64>>,
    pub q0: Vec<DVector<f64>>,
    pub q0_dot: Vec<DVector<f64>>,
    pub agents: Vec<AgentSeries>,
    pub diagnostics: DiagnosticSeries,
}

impl Trajectory {
    fn new(agents: usize) -> Self {
        Self {
            agents: vec![AgentSeries::default(); agents],
            diagnostics: DiagnosticSeries {
                agent_v: vec![Vec::new(); agents],
                eta_tilde: vec![Vec::new(); agents],
                omega_tilde: vec![Vec::new(); agents],
                e_norm: vec![Vec::new(); agents],
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn push(&mut self, ev: &Evaluation, m: &Monitors) {
        self.times.push(ev.t);
        self.v.push(ev.v.clone());
        self.q0.push(ev.q0.clone());
        self.q0_dot.push(ev.q0_dot.clone());
        let d = &mut self.diagnostics;
        d.observer_v.push(m.observer_v);
        for (i, (a, series)) in ev.agents.iter().zip(&mut self.agents).enumerate() {
            series.eta.push(a.eta.clone());
            series.omega_hat.push(a.omega_hat.clone());
            if let Some(p) = &a.plant {
                series.q.push(p.q.clone());
                series.q_dot.push(p.q_dot.clone());
                series.theta_hat.push(p.theta_hat.clone());
                series.tau.push(p.tau.clone());
            }
            d.eta_tilde[i].push(m.eta_tilde[i]);
            d.omega_tilde[i].push(m.omega_tilde[i]);
            d.agent_v[i].push(m.agent_v.get(i).copied().unwrap_or(f64::NAN));
            d.e_norm[i].push(m.e_norm.get(i).copied().unwrap_or(f64::NAN));
        }
    }
}

/// Time after which an error series stays at or below a threshold.
fn settling_time(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    match values.iter().rposition(|&v| v > threshold) {
        None => times.first().copied(),
        Some(k) if k + 1 < times.len() => Some(times[k + 1]),
        Some(_) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentMetrics {
    /// Max-norm errors over the last tenth of the horizon.
    pub terminal_q_err: Option<f64>,
    pub terminal_q_dot_err: Option<f64>,
    pub terminal_eta_err: f64,
    pub terminal_omega_err: f64,
    pub settling_q: Option<f64>,
    pub settling_q_dot: Option<f64>,
    pub settling_eta: Option<f64>,
    pub settling_omega: Option<f64>,
    pub lyapunov_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub agents: Vec<AgentMetrics>,
    pub thresholds: Thresholds,
    /// Steps at which the observer Lyapunov function grew by more than [`LYAPUNOV_SLACK`].
    pub observer_lyapunov_violations: usize,
    pub lyapunov_violations: usize,
    pub max_tracking_residual: f64,
}

fn increases(series: &[f64]) -> usize {
    series.windows(2).filter(|w| w[1] > w[0] + LYAPUNOV_SLACK).count()
}

impl RunMetrics {
    pub fn from_steps(steps: &StepSeries, horizon: f64, thresholds: Thresholds) -> Self {
        let from = 0.9 * horizon;
        let terminal = |s: &[f64]| steps.window(s, from, f64::INFINITY).fold(0.0, f64::max);
        let plant = |s: &[f64], f: &dyn Fn(&[f64]) -> Option<f64>| if s.is_empty() { None } else { f(s) };
        let t = &steps.times;
        let agents: Vec<AgentMetrics> = (0..steps.eta_tilde.len())
            .map(|i| AgentMetrics {
                terminal_q_err: plant(&steps.q_err[i], &|s| Some(terminal(s))),
                terminal_q_dot_err: plant(&steps.q_dot_err[i], &|s| Some(terminal(s))),
                terminal_eta_err: terminal(&steps.eta_tilde[i]),
                terminal_omega_err: terminal(&steps.omega_tilde[i]),
                settling_q: plant(&steps.q_err[i], &|s| settling_time(t, s, thresholds.q)),
                settling_q_dot: plant(&steps.q_dot_err[i], &|s| settling_time(t, s, thresholds.q_dot)),
                settling_eta: settling_time(t, &steps.eta_tilde[i], thresholds.eta),
                settling_omega: settling_time(t, &steps.omega_tilde[i], thresholds.omega),
                lyapunov_violations: increases(&steps.agent_v[i]),
            })
            .collect();
        let observer_lyapunov_violations = increases(&steps.observer_v);
        Self {
            lyapunov_violations: observer_lyapunov_violations
                + agents.iter().map(|a| a.lyapunov_violations).sum::<usize>(),
            observer_lyapunov_violations,
            thresholds,
            agents,
            max_tracking_residual: steps.residual.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Run {
    pub trajectory: Trajectory,
    pub steps: StepSeries,
    pub metrics: RunMetrics,
    pub final_time: f64,
    pub final_state: Vec<f64>,
}

/// Integrates a scenario with fixed-step RK4 over its horizon.
///
/// The vector field at `(t_k, x_k)` is evaluated once per step and reused both as the
/// first RK4 stage and for the monitors, so recorded diagnostics match the integrated
/// trajectory exactly. Results are bit-reproducible for a given scenario.
pub fn run_scenario(scenario: &Scenario) -> Result<Run> {
    run_scenario_with(scenario, Thresholds::default())
}

pub fn run_scenario_with(scenario: &Scenario, thresholds: Thresholds) -> Result<Run> {
    let net = Network::new(scenario)?;
    let integ = scenario.integration;
    let steps = integ.steps();
    let h = integ.step;
    let followers = scenario.followers();

    let mut x = net.initial_state()?;
    let mut series = StepSeries::new(followers);
    let mut trajectory = Trajectory::new(followers);
    for k in 0..=steps {
        let t = k as f64 * h;
        let ev = net.evaluate(t, &x)?;
        let mon = net.monitors(&ev);
        series.push(t, &mon);
        if k % integ.record_every == 0 || k == steps {
            trajectory.push(&ev, &mon);
        }
        if k == steps {
            break;
        }
        x = rk4_step_with_first_stage(|t, x| net.derivative(t, x), &x, t, h, &ev.derivative)?;
    }
    log::debug!("integrated {steps} steps of {h} s for {followers} followers");
    Ok(Run {
        metrics: RunMetrics::from_steps(&series, integ.horizon, thresholds),
        trajectory,
        steps: series,
        final_time: steps as f64 * h,
        final_state: x,
    })
}
