use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::rng::UniformSampler;
use crate::controller::ControllerGains;
use crate::error::{check_dim, Error, Result};
use crate::leader::LeaderModel;
use crate::observer::{KnownFrequencyObserver, ObserverGains};
use crate::plant::{EulerLagrange, PlantState, TwoLinkArm, REFERENCE_ARM_PARAMETERS};
use crate::topology::Digraph;

/// Initial frequency estimate of one follower.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaInit {
    Explicit(DVector<f64>),
    /// Every component drawn independently from `U[lo, hi)` with the scenario seed.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub plant: Arc<dyn EulerLagrange>,
    pub initial: PlantState,
    pub theta_hat0: DVector<f64>,
    pub omega_hat0: OmegaInit,
    pub eta0: DVector<f64>,
}

impl AgentSpec {
    /// Follower starting at rest with zero parameter and leader-state estimates.
    pub fn at_rest(plant: Arc<dyn EulerLagrange>, omega_hat0: OmegaInit, state_dim: usize) -> Self {
        let n = plant.dof();
        let p = plant.param_dim();
        Self {
            plant,
            initial: PlantState::at_rest(n),
            theta_hat0: DVector::zeros(p),
            omega_hat0,
            eta0: DVector::zeros(state_dim),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration {
    pub step: f64,
    pub horizon: f64,
    pub record_every: usize,
}

impl Integration {
    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }
}

impl Default for Integration {
    fn default() -> Self {
        Self {
            step: 1e-3,
            horizon: 30.0,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverLaw {
    Adaptive,
    KnownFrequency(KnownFrequencyObserver),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Observer, controller and plants together.
    ClosedLoop,
    /// Observer network only; plants and controller gains are ignored.
    ObserverOnly(ObserverLaw),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub graph: Digraph,
    pub leader: LeaderModel,
    pub agents: Vec<AgentSpec>,
    pub gains: ControllerGains,
    pub integration: Integration,
    pub seed: Option<u64>,
    pub mode: RunMode,
}

impl Scenario {
    /// Six two-link arms tracking the two-tone leader `omega = (4, 2)`,
    /// `v(0) = (1, 0, 1, 0)`, `q0 = (v1, v3)`, on [`Digraph::reference_network`].
    ///
    /// Gains `mu1 = 10`, `mu2 = 20`, `alpha = 10`, `K = 20 I`, `Lambda = 10 I`; followers start
    /// at rest with `theta_hat(0) = 0`, `eta(0) = 0` and `omega_hat(0) ~ U[0, 1)` drawn with
    /// seed 42. Step 1 ms, horizon 30 s.
    pub fn reference() -> Self {
        let leader = LeaderModel::new(
            DVector::from_vec(vec![4.0, 2.0]),
            DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 4, &[1., 0., 0., 0., 0., 0., 1., 0.]),
        )
        .expect("reference leader is valid");
        let agents = REFERENCE_ARM_PARAMETERS
            .iter()
            .map(|&theta| {
                let arm = TwoLinkArm::with_standard_gravity(theta).expect("reference arm is valid");
                AgentSpec::at_rest(Arc::new(arm), OmegaInit::Uniform { lo: 0.0, hi: 1.0 }, 4)
            })
            .collect();
        let observer = ObserverGains::new(10.0, 20.0).expect("positive gains");
        Self {
            graph: Digraph::reference_network(),
            leader,
            agents,
            gains: ControllerGains::uniform(observer, 10.0, 20.0, 2, 10.0, 5).expect("positive gains"),
            integration: Integration::default(),
            seed: Some(42),
            mode: RunMode::ClosedLoop,
        }
    }

    /// [`Scenario::reference`] with the controller and plants switched off.
    pub fn reference_observer_only() -> Self {
        Self::reference().with_mode(RunMode::ObserverOnly(ObserverLaw::Adaptive))
    }

    pub fn with_mode(mut self, mode: RunMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.integration.step = step;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.integration.horizon = horizon;
        self
    }

    pub fn with_leader_state(mut self, v0: DVector<f64>) -> Result<Self> {
        self.leader = LeaderModel::new(self.leader.omega().clone(), v0, self.leader.output_matrix().clone())?;
        Ok(self)
    }

    pub fn followers(&self) -> usize {
        self.agents.len()
    }

    pub fn is_closed_loop(&self) -> bool {
        self.mode == RunMode::ClosedLoop
    }

    /// Checks every precondition of a run, including admissibility of the graph.
    pub fn validate(&self) -> Result<()> {
        let Integration {
            step,
            horizon,
            record_every,
        } = self.integration;
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid("integration.h", format!("must be positive, got {step}")));
        }
        if !(horizon.is_finite() && horizon >= step) {
            return Err(Error::invalid(
                "integration.T",
                format!("must be at least h, got {horizon}"),
            ));
        }
        if record_every == 0 {
            return Err(Error::invalid("integration.record_every", "must be at least 1"));
        }
        check_dim(
            "agent count (graph followers)",
            self.graph.follower_count(),
            self.agents.len(),
        )?;
        let report = self.graph.check_leader_connectivity();
        if !report.satisfied {
            return Err(Error::invalid(
                "graph",
                format!(
                    "leader-connectivity assumption violated: {}",
                    report.diagnostic.unwrap_or_default()
                ),
            ));
        }
        let m = self.leader.state_dim();
        let l = self.leader.tones();
        let n = self.leader.output_dim();
        for (i, a) in self.agents.iter().enumerate() {
            check_dim("agent eta0 dimension", m, a.eta0.len())?;
            if let OmegaInit::Explicit(w) = &a.omega_hat0 {
                check_dim("agent omega_hat0 dimension", l, w.len())?;
            }
            if let OmegaInit::Uniform { lo, hi } = a.omega_hat0 {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::invalid(
                        format!("agents[{i}].omega_hat0_random"),
                        format!("need finite lo <= hi, got [{lo}, {hi}]"),
                    ));
                }
                if self.seed.is_none() {
                    return Err(Error::invalid(
                        "seed",
                        "required when any omega_hat0 is drawn at random",
                    ));
                }
            }
            if self.is_closed_loop() {
                check_dim("agent degrees of freedom (rows of C)", n, a.plant.dof())?;
                check_dim("agent q0 dimension", n, a.initial.q.len())?;
                check_dim("agent qdot0 dimension", n, a.initial.q_dot.len())?;
                check_dim("agent theta_hat0 dimension", a.plant.param_dim(), a.theta_hat0.len())?;
                check_dim("gains.K dimension", n, self.gains.k_gain.nrows())?;
                check_dim(
                    "gains.Lambda dimension",
                    a.plant.param_dim(),
                    self.gains.lambda_diag.len(),
                )?;
            }
            let finite = a.eta0.iter().all(|x| x.is_finite())
                && a.theta_hat0.iter().all(|x| x.is_finite())
                && a.initial.q.iter().chain(a.initial.q_dot.iter()).all(|x| x.is_finite());
            if !finite {
                return Err(Error::invalid(format!("agents[{i}]"), "initial values must be finite"));
            }
        }
        Ok(())
    }

    /// Resolves every follower's initial frequency estimate, drawing random ones in
    /// follower order from a single seeded stream.
    pub fn initial_omega_hats(&self) -> Result<Vec<DVector<f64>>> {
        let mut sampler = self.seed.map(UniformSampler::new);
        self.agents
            .iter()
            .map(|a| match &a.omega_hat0 {
                OmegaInit::Explicit(w) => Ok(w.clone()),
                OmegaInit::Uniform { lo, hi } => {
                    let s = sampler
                        .as_mut()
                        .ok_or_else(|| Error::invalid("seed", "required when any omega_hat0 is drawn at random"))?;
                    Ok(DVector::from_fn(self.leader.tones(), |_, _| s.uniform(*lo, *hi)))
                }
            })
            .collect()
    }
}
