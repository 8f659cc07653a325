//! Named pass/fail checks over a scenario and its runs.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DVector;
use serde::Serialize;

use crate::engine::integrator::rk4_step;
use crate::engine::rng::UniformSampler;
use crate::engine::{run_scenario, ObserverLaw, Run, RunMetrics, RunMode, Scenario, StepSeries};
use crate::error::Result;
use crate::leader::{default_pe_threshold, pe_gram, LeaderModel, PeReport};
use crate::observer::{phi, s_of};
use crate::output;
use crate::plant::EulerLagrange;

pub const IDENTITY_TRIALS: usize = 10_000;
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
pub const OBSERVER_TOLERANCE: f64 = 1e-2;
pub const FREQUENCY_TOLERANCE: f64 = 5e-2;
pub const POSITION_TOLERANCE: f64 = 1e-2;
pub const VELOCITY_TOLERANCE: f64 = 5e-2;
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;
pub const LEADER_RK4_TOLERANCE: f64 = 1e-8;
pub const STEP_HALVING_TOLERANCE: f64 = 1e-6;
/// Allowed growth between consecutive one-second averages of the frequency error.
pub const AVERAGE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// The check's hypothesis does not hold, so nothing is claimed.
    NotAsserted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub outcome: Outcome,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            outcome: if passed { Outcome::Pass } else { Outcome::Fail },
            detail: detail.into(),
        }
    }

    pub fn not_asserted(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            outcome: Outcome::NotAsserted,
            detail: detail.into(),
        }
    }

    /// Anything but a failure.
    pub fn ok(&self) -> bool {
        self.outcome != Outcome::Fail
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::NotAsserted => "N/A ",
        };
        write!(f, "{tag}  {:<40} {}", self.name, self.detail)
    }
}

/// Verdicts that depend only on a run's metrics and their thresholds.
pub fn metric_verdicts(scenario: &Scenario, m: &RunMetrics) -> Vec<Check> {
    let th = m.thresholds;
    let worst = |f: &dyn Fn(&crate::engine::run::AgentMetrics) -> f64| m.agents.iter().map(f).fold(0.0, f64::max);
    let mut out = Vec::new();
    let eta = worst(&|a| a.terminal_eta_err);
    out.push(Check::new(
        "observer convergence",
        eta < th.eta,
        format!("terminal max |eta - v| = {eta:.3e} (< {:.0e})", th.eta),
    ));
    let omega = worst(&|a| a.terminal_omega_err);
    let excitation = scenario.leader.check_excitation();
    out.push(if excitation.satisfied {
        Check::new(
            "frequency learning",
            omega < th.omega,
            format!("terminal max |omega_hat - omega| = {omega:.3e} (< {:.0e})", th.omega),
        )
    } else {
        Check::not_asserted("frequency learning", format!("leader excitation {excitation}"))
    });
    if scenario.is_closed_loop() {
        let q = worst(&|a| a.terminal_q_err.unwrap_or(f64::NAN));
        let qd = worst(&|a| a.terminal_q_dot_err.unwrap_or(f64::NAN));
        out.push(Check::new(
            "position tracking",
            q < th.q,
            format!("terminal max |q - q0| = {q:.3e} (< {:.0e})", th.q),
        ));
        out.push(Check::new(
            "velocity tracking",
            qd < th.q_dot,
            format!("terminal max |q' - q0'| = {qd:.3e} (< {:.0e})", th.q_dot),
        ));
        out.push(Check::new(
            "tracking residual",
            m.max_tracking_residual <= RESIDUAL_TOLERANCE,
            format!("max = {:.3e} (<= {RESIDUAL_TOLERANCE:.0e})", m.max_tracking_residual),
        ));
    }
    out.push(Check::new(
        "Lyapunov monotonicity",
        m.lyapunov_violations == 0,
        format!("{} violations", m.lyapunov_violations),
    ));
    out
}

/// One period of the slowest tone.
pub fn default_pe_window(leader: &LeaderModel) -> f64 {
    2.0 * PI / leader.omega().min()
}

/// PE test of the leader state with the default window and threshold, sampled every 10 ms.
pub fn leader_pe_report(leader: &LeaderModel) -> Result<PeReport> {
    leader_pe(leader, default_pe_window(leader), None, 0.0)
}

pub fn leader_pe(leader: &LeaderModel, window: f64, epsilon: Option<f64>, offset: f64) -> Result<PeReport> {
    let dt = 1e-2;
    let (times, values) = leader.sample(dt, (offset + 2.0 * window) + dt);
    let eps = epsilon.unwrap_or_else(|| default_pe_threshold(&values));
    pe_gram(&times, &values, window, offset, eps)
}

fn uniform_vector(rng: &mut UniformSampler, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.uniform(-1.0, 1.0))
}

/// Worst relative error of `xᵀ S(z) y = zᵀ φ(x) y`, relative to `|z| |x| |y|`.
pub fn phi_identity_error(trials: usize, seed: u64) -> f64 {
    let mut rng = UniformSampler::new(seed);
    let mut worst = 0.0f64;
    for k in 0..trials {
        let m = [2, 4, 8][k % 3];
        let z = uniform_vector(&mut rng, m / 2) * 10.0;
        let x = uniform_vector(&mut rng, m);
        let y = uniform_vector(&mut rng, m);
        let lhs = x.dot(&(s_of(&z) * &y));
        let rhs = z.dot(&(phi(&x).expect("even dimension") * &y));
        let scale = (z.norm() * x.norm() * y.norm()).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    worst
}

fn random_motion(rng: &mut UniformSampler, n: usize) -> (DVector<f64>, DVector<f64>) {
    let q = DVector::from_fn(n, |_, _| rng.uniform(-PI, PI));
    let q_dot = DVector::from_fn(n, |_, _| rng.uniform(-5.0, 5.0));
    (q, q_dot)
}

/// Worst `|xᵀ (M' - 2C) x| / |x|²` over random states and directions.
pub fn skew_symmetry_error(plant: &dyn EulerLagrange, trials: usize, seed: u64) -> f64 {
    let mut rng = UniformSampler::new(seed);
    let n = plant.dof();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (q, q_dot) = random_motion(&mut rng, n);
        let x = uniform_vector(&mut rng, n);
        let n_mat = plant.mass_matrix_rate(&q, &q_dot) - plant.coriolis_matrix(&q, &q_dot) * 2.0;
        worst = worst.max(x.dot(&(n_mat * &x)).abs() / x.norm_squared());
    }
    worst
}

/// Worst `|Y θ - (M a + C b + G)|` relative to `max(1, |M| |a| + |C| |b| + |G|)`.
pub fn regressor_error(plant: &dyn EulerLagrange, trials: usize, seed: u64) -> f64 {
    let mut rng = UniformSampler::new(seed);
    let n = plant.dof();
    let theta = plant.parameters();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (q, q_dot) = random_motion(&mut rng, n);
        let a = uniform_vector(&mut rng, n) * 10.0;
        let b = uniform_vector(&mut rng, n) * 5.0;
        let m = plant.mass_matrix(&q);
        let c = plant.coriolis_matrix(&q, &q_dot);
        let g = plant.gravity_vector(&q);
        let direct = &m * &a + &c * &b + &g;
        let y = plant.regressor(&q, &q_dot, &a, &b);
        let scale = (m.norm() * a.norm() + c.norm() * b.norm() + g.norm()).max(1.0);
        worst = worst.max((y * &theta - direct).norm() / scale);
    }
    worst
}

/// Largest deviation of RK4 on the leader generator from the closed form.
pub fn leader_rk4_error(leader: &LeaderModel, step: f64, horizon: f64) -> Result<f64> {
    let s = leader.generator();
    let mut x: Vec<f64> = leader.v0().iter().copied().collect();
    let steps = (horizon / step).round() as usize;
    let mut worst = 0.0f64;
    for k in 0..steps {
        x = rk4_step(
            |_, x| Ok((&s * DVector::from_column_slice(x)).as_slice().to_vec()),
            &x,
            k as f64 * step,
            step,
        )?;
        let exact = leader.state_at((k + 1) as f64 * step);
        worst = worst.max((DVector::from_column_slice(&x) - exact).amax());
    }
    Ok(worst)
}

/// Means of `values` over consecutive one-second windows `[from + k, from + k + 1)`.
pub fn one_second_means(times: &[f64], values: &[f64], from: f64, to: f64) -> Vec<f64> {
    let count = (to - from).round() as usize;
    (0..count)
        .map(|k| {
            let lo = from + k as f64;
            let hi = lo + 1.0;
            let picked: Vec<f64> = times
                .iter()
                .zip(values)
                .filter(|(t, _)| **t >= lo - 1e-9 && **t < hi - 1e-9)
                .map(|(_, v)| *v)
                .collect();
            picked.iter().sum::<f64>() / picked.len().max(1) as f64
        })
        .collect()
}

fn recorded_increases(series: &[f64]) -> usize {
    series
        .windows(2)
        .filter(|w| w[1] > w[0] + crate::engine::run::LYAPUNOV_SLACK)
        .count()
}

/// Lyapunov violations counted on the recorded grid, observer and agents together.
pub fn recorded_lyapunov_violations(run: &Run) -> usize {
    let d = &run.trajectory.diagnostics;
    recorded_increases(&d.observer_v)
        + d.agent_v
            .iter()
            .filter(|s| s.iter().all(|v| !v.is_nan()))
            .map(|s| recorded_increases(s))
            .sum::<usize>()
}

fn observer_checks(label: &str, run: &Run, horizon: f64, assert_frequency: bool) -> Vec<Check> {
    let s = &run.steps;
    let from = horizon * 2.0 / 3.0;
    let eta = s.max_over(&s.eta_tilde, from, horizon);
    let mut out = vec![Check::new(
        format!("{label}: observer convergence"),
        eta < OBSERVER_TOLERANCE,
        format!("max |eta - v| on [{from:.1}, {horizon:.1}] = {eta:.3e}"),
    )];
    if assert_frequency {
        let worst = StepSeries::worst_agent(&s.omega_tilde);
        let last = *worst.last().unwrap_or(&f64::NAN);
        let means = one_second_means(&s.times, &worst, (horizon - 10.0).max(0.0), horizon);
        let rises = means.windows(2).filter(|w| w[1] > w[0] + AVERAGE_SLACK).count();
        out.push(Check::new(
            format!("{label}: frequency learning"),
            last < FREQUENCY_TOLERANCE && rises == 0,
            format!("final max |omega_hat - omega| = {last:.3e}, {rises} rising one-second means"),
        ));
    } else {
        out.push(Check::not_asserted(
            format!("{label}: frequency learning"),
            "leader state is not exciting",
        ));
    }
    let violations = run.metrics.lyapunov_violations + recorded_lyapunov_violations(run);
    out.push(Check::new(
        format!("{label}: Lyapunov monotonicity"),
        violations == 0,
        format!("{violations} violations"),
    ));
    out
}

/// The full verification suite for a scenario: algebraic identities of its plants, the
/// observer alone (with and without an exciting leader), the closed loop, integrator
/// accuracy and reproducibility.
pub fn verify_scenario(scenario: &Scenario) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let graph = scenario.graph.check_leader_connectivity();
    checks.push(Check::new("leader connectivity", graph.satisfied, graph.to_string()));
    if !graph.satisfied {
        return Ok(checks);
    }
    let seed = scenario.seed.unwrap_or(0);

    let e = phi_identity_error(IDENTITY_TRIALS, seed);
    checks.push(Check::new(
        "phi identity",
        e <= IDENTITY_TOLERANCE,
        format!("max relative error {e:.3e}"),
    ));
    let skew = scenario
        .agents
        .iter()
        .map(|a| skew_symmetry_error(a.plant.as_ref(), IDENTITY_TRIALS, seed))
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "inertia skew symmetry",
        skew <= IDENTITY_TOLERANCE,
        format!("max |x'(M'-2C)x|/|x|^2 = {skew:.3e}"),
    ));
    let reg = scenario
        .agents
        .iter()
        .map(|a| regressor_error(a.plant.as_ref(), IDENTITY_TRIALS, seed))
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "regressor identity",
        reg <= IDENTITY_TOLERANCE,
        format!("max relative error {reg:.3e}"),
    ));

    let horizon = scenario.integration.horizon;
    let excited = scenario.leader.check_excitation().satisfied;
    let observer = scenario.clone().with_mode(RunMode::ObserverOnly(ObserverLaw::Adaptive));
    checks.extend(observer_checks(
        "observer only",
        &run_scenario(&observer)?,
        horizon,
        excited,
    ));

    if scenario.leader.tones() > 1 {
        let mut v0 = DVector::zeros(scenario.leader.state_dim());
        v0[0] = scenario.leader.v0()[0];
        v0[1] = scenario.leader.v0()[1];
        if v0[0] == 0.0 && v0[1] == 0.0 {
            v0[0] = 1.0;
        }
        let degenerate = observer.clone().with_leader_state(v0)?;
        let run = run_scenario(&degenerate)?;
        checks.extend(observer_checks("single-tone leader", &run, horizon, false));
    }

    let closed = scenario.clone().with_mode(RunMode::ClosedLoop);
    let run = run_scenario(&closed)?;
    let s = &run.steps;
    let from = (horizon - 5.0).max(0.0);
    let q = s.max_over(&s.q_err, from, horizon);
    let qd = s.max_over(&s.q_dot_err, from, horizon);
    checks.push(Check::new(
        "closed loop: tracking",
        q < POSITION_TOLERANCE && qd < VELOCITY_TOLERANCE,
        format!("on [{from:.1}, {horizon:.1}]: max |q - q0| = {q:.3e}, max |q' - q0'| = {qd:.3e}"),
    ));
    let violations = run.metrics.lyapunov_violations + recorded_lyapunov_violations(&run);
    checks.push(Check::new(
        "closed loop: Lyapunov monotonicity",
        violations == 0,
        format!("{violations} violations"),
    ));
    let r = run.metrics.max_tracking_residual;
    checks.push(Check::new(
        "closed loop: tracking residual",
        r <= RESIDUAL_TOLERANCE,
        format!("max {r:.3e}"),
    ));

    let rk4 = leader_rk4_error(&scenario.leader, scenario.integration.step, horizon.min(10.0))?;
    checks.push(Check::new(
        "integrator: leader closed form",
        rk4 <= LEADER_RK4_TOLERANCE,
        format!("max error {rk4:.3e}"),
    ));
    let mut half = closed.clone().with_step(0.5 * scenario.integration.step);
    half.integration.record_every *= 2;
    let fine = run_scenario(&half)?;
    let gap = run
        .final_state
        .iter()
        .zip(&fine.final_state)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "integrator: step halving",
        gap < STEP_HALVING_TOLERANCE,
        format!("terminal state change {gap:.3e}"),
    ));

    let again = run_scenario(&closed)?;
    let identical = render_all(&run)? == render_all(&again)?;
    checks.push(Check::new(
        "determinism",
        identical,
        if identical {
            "CSV output bitwise identical"
        } else {
            "CSV output differs"
        },
    ));
    Ok(checks)
}

fn render_all(run: &Run) -> Result<Vec<String>> {
    let mut out = vec![output::render_leader(run)?, output::render_diagnostics(run)?];
    for i in 0..run.trajectory.agents.len() {
        out.push(output::render_agent(run, i)?);
    }
    Ok(out)
}
