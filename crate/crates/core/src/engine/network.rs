//! Stacked closed-loop vector field.
//!
//! Per follower the state is laid out as `[q, q', eta, omega_hat, theta_hat]`, or just
//! `[eta, omega_hat]` when the scenario runs the observer alone. The leader is not
//! integrated; its closed form is evaluated at every stage time.

use std::ops::Range;

use nalgebra::DVector;

use super::scenario::{ObserverLaw, RunMode, Scenario};
use crate::controller::{
    agent_lyapunov, reference_accel, reference_velocity, slip, theta_hat_rate, torque, tracking_residual,
};
use crate::error::{check_dim, Result};
use crate::observer::{
    adaptive_rates, consensus_errors, known_frequency_observer_rhs, observer_lyapunov, ObserverState,
};
use crate::plant::{plant_accel, PlantState};
use crate::topology::CouplingMatrices;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSlots {
    pub q: Range<usize>,
    pub q_dot: Range<usize>,
    pub eta: Range<usize>,
    pub omega_hat: Range<usize>,
    pub theta_hat: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    agents: Vec<AgentSlots>,
    len: usize,
}

impl StateLayout {
    fn new(scenario: &Scenario) -> Self {
        let m = scenario.leader.state_dim();
        let l = scenario.leader.tones();
        let closed = scenario.is_closed_loop();
        let mut at = 0;
        let mut take = |k: usize| {
            let r = at..at + k;
            at += k;
            r
        };
        let agents = scenario
            .agents
            .iter()
            .map(|a| {
                let n = if closed { a.plant.dof() } else { 0 };
                let p = if closed { a.plant.param_dim() } else { 0 };
                AgentSlots {
                    q: take(n),
                    q_dot: take(n),
                    eta: take(m),
                    omega_hat: take(l),
                    theta_hat: take(p),
                }
            })
            .collect();
        Self { agents, len: at }
    }

    pub fn agent(&self, i: usize) -> &AgentSlots {
        &self.agents[i]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Plant-side quantities of one follower at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantEval {
    pub q: DVector<f64>,
    pub q_dot: DVector<f64>,
    pub theta_hat: DVector<f64>,
    pub q_ref_dot: DVector<f64>,
    pub slip: DVector<f64>,
    pub tau: DVector<f64>,
    pub q_ddot: DVector<f64>,
    pub theta_hat_dot: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentEval {
    pub eta: DVector<f64>,
    pub omega_hat: DVector<f64>,
    pub e_v: DVector<f64>,
    pub eta_dot: DVector<f64>,
    pub omega_dot: DVector<f64>,
    pub plant: Option<PlantEval>,
}

/// Everything computed while evaluating the vector field at `(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub t: f64,
    pub v: DVector<f64>,
    pub q0: DVector<f64>,
    pub q0_dot: DVector<f64>,
    pub agents: Vec<AgentEval>,
    pub derivative: Vec<f64>,
}

/// Scalar health indicators derived from an [`Evaluation`]; all norms are max-norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitors {
    pub observer_v: f64,
    pub eta_tilde: Vec<f64>,
    pub omega_tilde: Vec<f64>,
    /// Empty when the plants are disabled, as are the remaining per-agent fields.
    pub agent_v: Vec<f64>,
    pub e_norm: Vec<f64>,
    pub q_err: Vec<f64>,
    pub q_dot_err: Vec<f64>,
    /// Largest component of `e' + alpha e - s + mu1 C e_v` over all followers.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Network<'a> {
    scenario: &'a Scenario,
    layout: StateLayout,
    coupling: CouplingMatrices,
}

fn slice(x: &[f64], r: &Range<usize>) -> DVector<f64> {
    DVector::from_column_slice(&x[r.clone()])
}

impl<'a> Network<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        Ok(Self {
            layout: StateLayout::new(scenario),
            coupling: scenario.graph.coupling_matrices(),
            scenario,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn coupling(&self) -> &CouplingMatrices {
        &self.coupling
    }

    pub fn initial_state(&self) -> Result<Vec<f64>> {
        let omega0 = self.scenario.initial_omega_hats()?;
        let mut x = vec![0.0; self.layout.len];
        for ((a, slots), w) in self.scenario.agents.iter().zip(&self.layout.agents).zip(&omega0) {
            x[slots.eta.clone()].copy_from_slice(a.eta0.as_slice());
            x[slots.omega_hat.clone()].copy_from_slice(w.as_slice());
            if self.scenario.is_closed_loop() {
                x[slots.q.clone()].copy_from_slice(a.initial.q.as_slice());
                x[slots.q_dot.clone()].copy_from_slice(a.initial.q_dot.as_slice());
                x[slots.theta_hat.clone()].copy_from_slice(a.theta_hat0.as_slice());
            }
        }
        Ok(x)
    }

    pub fn evaluate(&self, t: f64, x: &[f64]) -> Result<Evaluation> {
        check_dim("stacked state", self.layout.len, x.len())?;
        let sc = self.scenario;
        let leader = &sc.leader;
        let v = leader.state_at(t);
        let (q0, q0_dot) = leader.output(&v)?;

        let obs = ObserverState {
            eta: self.layout.agents.iter().map(|s| slice(x, &s.eta)).collect(),
            omega_hat: self.layout.agents.iter().map(|s| slice(x, &s.omega_hat)).collect(),
        };
        obs.validate(sc.graph.follower_count(), v.len())?;
        let e_v = consensus_errors(&obs.eta, &v, &sc.graph);
        let rates = match sc.mode {
            RunMode::ClosedLoop | RunMode::ObserverOnly(ObserverLaw::Adaptive) => {
                adaptive_rates(&obs, &e_v, sc.gains.observer)
            }
            RunMode::ObserverOnly(ObserverLaw::KnownFrequency(variant)) => {
                known_frequency_observer_rhs(variant, &obs, &v, leader.omega(), &sc.graph, sc.gains.observer)?
            }
        };

        let mut derivative = vec![0.0; self.layout.len];
        let mut agents = Vec::with_capacity(sc.agents.len());
        let parts = obs.eta.into_iter().zip(obs.omega_hat).zip(e_v);
        let rates = rates.eta_dot.into_iter().zip(rates.omega_dot);
        for (i, (((eta, omega_hat), e_v), (eta_dot, omega_dot))) in parts.zip(rates).enumerate() {
            let slots = &self.layout.agents[i];
            derivative[slots.eta.clone()].copy_from_slice(eta_dot.as_slice());
            derivative[slots.omega_hat.clone()].copy_from_slice(omega_dot.as_slice());
            let plant = if sc.is_closed_loop() {
                let p = self.plant_eval(i, x, &eta, &omega_hat, &eta_dot, &omega_dot)?;
                derivative[slots.q.clone()].copy_from_slice(p.q_dot.as_slice());
                derivative[slots.q_dot.clone()].copy_from_slice(p.q_ddot.as_slice());
                derivative[slots.theta_hat.clone()].copy_from_slice(p.theta_hat_dot.as_slice());
                Some(p)
            } else {
                None
            };
            agents.push(AgentEval {
                eta,
                omega_hat,
                e_v,
                eta_dot,
                omega_dot,
                plant,
            });
        }
        Ok(Evaluation {
            t,
            v,
            q0,
            q0_dot,
            agents,
            derivative,
        })
    }

    fn plant_eval(
        &self,
        i: usize,
        x: &[f64],
        eta: &DVector<f64>,
        omega_hat: &DVector<f64>,
        eta_dot: &DVector<f64>,
        omega_dot: &DVector<f64>,
    ) -> Result<PlantEval> {
        let slots = &self.layout.agents[i];
        let plant = self.scenario.agents[i].plant.as_ref();
        let gains = &self.scenario.gains;
        let c = self.scenario.leader.output_matrix();
        let state = PlantState {
            q: slice(x, &slots.q),
            q_dot: slice(x, &slots.q_dot),
        };
        let theta_hat = slice(x, &slots.theta_hat);
        let q_ref_dot = reference_velocity(&state.q, eta, omega_hat, c, gains.alpha);
        let s = slip(&state.q_dot, &q_ref_dot);
        let q_ref_ddot = reference_accel(&state.q_dot, eta, eta_dot, omega_hat, omega_dot, c, gains.alpha);
        let y = plant.regressor(&state.q, &state.q_dot, &q_ref_ddot, &q_ref_dot);
        let tau = torque(&s, &y, &theta_hat, &gains.k_gain);
        let q_ddot = plant_accel(plant, &state, &tau)?;
        let theta_hat_dot = theta_hat_rate(&s, &y, &gains.lambda_diag);
        Ok(PlantEval {
            q: state.q,
            q_dot: state.q_dot,
            theta_hat,
            q_ref_dot,
            slip: s,
            tau,
            q_ddot,
            theta_hat_dot,
        })
    }

    pub fn derivative(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.evaluate(t, x).map(|e| e.derivative)
    }

    pub fn monitors(&self, ev: &Evaluation) -> Monitors {
        let sc = self.scenario;
        let omega = sc.leader.omega();
        let eta_tilde: Vec<DVector<f64>> = ev.agents.iter().map(|a| &a.eta - &ev.v).collect();
        let omega_tilde: Vec<DVector<f64>> = ev.agents.iter().map(|a| &a.omega_hat - omega).collect();
        let observer_v = observer_lyapunov(&self.coupling.h, &eta_tilde, &omega_tilde, sc.gains.observer.mu2);

        let mut out = Monitors {
            observer_v,
            eta_tilde: eta_tilde.iter().map(|e| e.amax()).collect(),
            omega_tilde: omega_tilde.iter().map(|e| e.amax()).collect(),
            agent_v: Vec::new(),
            e_norm: Vec::new(),
            q_err: Vec::new(),
            q_dot_err: Vec::new(),
            residual: 0.0,
        };
        let c = sc.leader.output_matrix();
        let gains = &sc.gains;
        for (a, spec) in ev.agents.iter().zip(&sc.agents) {
            let Some(p) = &a.plant else { continue };
            let e = &p.q - c * &a.eta;
            let e_dot = &p.q_dot - c * &a.eta_dot;
            let r = tracking_residual(&e_dot, &e, &p.slip, &a.e_v, c, gains.alpha, gains.observer.mu1);
            out.residual = out.residual.max(r.amax());
            let theta_tilde = &p.theta_hat - spec.plant.parameters();
            let mass = spec.plant.mass_matrix(&p.q);
            out.agent_v
                .push(agent_lyapunov(&p.slip, &mass, &theta_tilde, &gains.lambda_diag));
            out.e_norm.push(e.amax());
            out.q_err.push((&p.q - &ev.q0).amax());
            out.q_dot_err.push((&p.q_dot - &ev.q0_dot).amax());
        }
        out
    }
}

/// Evaluates the vector field and monitors once, outside of a run.
pub fn closed_loop_snapshot(scenario: &Scenario, t: f64, x: &[f64]) -> Result<(Evaluation, Monitors)> {
    let net = Network::new(scenario)?;
    let ev = net.evaluate(t, x)?;
    let mon = net.monitors(&ev);
    Ok((ev, mon))
}
