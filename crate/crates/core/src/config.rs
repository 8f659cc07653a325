//! Scenario files.
//!
//! TOML is the primary encoding and JSON is accepted with the same schema:
//!
//! ```toml
//! seed = 42
//!
//! [graph]
//! edges = [[0, 1, 1.0], [1, 2, 1.0], [2, 1, 1.0]]   # [from, to, weight]; node 0 is the leader
//!
//! [leader]
//! omega = [4.0, 2.0]
//! v0 = [1.0, 0.0, 1.0, 0.0]
//! C = [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]
//!
//! [[agents]]                       # one table per follower, in node order
//! theta = [0.64, 1.10, 0.08, 0.64, 0.32]
//! omega_hat0_random = [0.0, 1.0]   # or omega_hat0 = [..]
//!
//! [gains]
//! mu1 = 10.0
//! mu2 = 20.0
//! alpha = 10.0
//! K = 20.0                         # scalar times identity, or a full matrix
//! Lambda = 10.0                    # scalar times identity, or the diagonal
//!
//! [integration]
//! h = 1e-3
//! T = 30.0
//! record_every = 10
//! ```
//!
//! Omitted `q0`, `qdot0`, `theta_hat0` and `eta0` default to zero, `gravity` to 9.8 and the
//! `integration` table to the values above.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controller::ControllerGains;
use crate::engine::{AgentSpec, Integration, ObserverLaw, OmegaInit, RunMode, Scenario};
use crate::error::{Error, Result};
use crate::leader::LeaderModel;
use crate::observer::{KnownFrequencyObserver, ObserverGains};
use crate::plant::{PlantState, TwoLinkArm, REFERENCE_ARM_PARAMETERS, STANDARD_GRAVITY};
use crate::topology::{Digraph, Edge};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Mode::is_closed_loop")]
    pub mode: Mode,
    pub graph: GraphConfig,
    pub leader: LeaderConfig,
    pub agents: Vec<AgentConfig>,
    pub gains: GainsConfig,
    #[serde(default)]
    pub integration: IntegrationConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    ClosedLoop,
    /// Adaptive observer without plants.
    ObserverOnly,
    /// Observer handed the true frequency.
    ObserverOnlyKnownFrequency,
    /// Observer running frequency consensus from the leader's true value.
    ObserverOnlyFrequencyConsensus,
}

impl Mode {
    fn is_closed_loop(&self) -> bool {
        *self == Mode::ClosedLoop
    }

    fn run_mode(self) -> RunMode {
        match self {
            Mode::ClosedLoop => RunMode::ClosedLoop,
            Mode::ObserverOnly => RunMode::ObserverOnly(ObserverLaw::Adaptive),
            Mode::ObserverOnlyKnownFrequency => {
                RunMode::ObserverOnly(ObserverLaw::KnownFrequency(KnownFrequencyObserver::Static))
            }
            Mode::ObserverOnlyFrequencyConsensus => {
                RunMode::ObserverOnly(ObserverLaw::KnownFrequency(KnownFrequencyObserver::Consensus))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderConfig {
    pub omega: Vec<f64>,
    pub v0: Vec<f64>,
    #[serde(rename = "C")]
    pub output: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub theta: [f64; 5],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qdot0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hat0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_hat0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_hat0_random: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixGain {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiagonalGain {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub mu1: f64,
    pub mu2: f64,
    pub alpha: f64,
    #[serde(rename = "K")]
    pub k: MatrixGain,
    #[serde(rename = "Lambda")]
    pub lambda: DiagonalGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    #[serde(default = "default_step")]
    pub h: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_step() -> f64 {
    Integration::default().step
}

fn default_horizon() -> f64 {
    Integration::default().horizon
}

fn default_record_every() -> usize {
    Integration::default().record_every
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            h: default_step(),
            horizon: default_horizon(),
            record_every: default_record_every(),
        }
    }
}

fn matrix(rows: &[Vec<f64>], key: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid(key, "must be a nonempty list of equal-length rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn vector_or_zeros(v: &Option<Vec<f64>>, len: usize) -> DVector<f64> {
    v.as_ref()
        .map_or_else(|| DVector::zeros(len), |v| DVector::from_column_slice(v))
}

impl ScenarioConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Ok(serde_json::from_str(text)?)
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Configuration of [`Scenario::reference`].
    pub fn reference() -> Self {
        let chain = Digraph::reference_network();
        Self {
            seed: Some(42),
            mode: Mode::ClosedLoop,
            graph: GraphConfig {
                edges: chain.edges().iter().map(|e| (e.from, e.to, e.weight)).collect(),
            },
            leader: LeaderConfig {
                omega: vec![4.0, 2.0],
                v0: vec![1.0, 0.0, 1.0, 0.0],
                output: vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]],
            },
            agents: REFERENCE_ARM_PARAMETERS
                .iter()
                .map(|&theta| AgentConfig {
                    theta,
                    gravity: None,
                    q0: None,
                    qdot0: None,
                    theta_hat0: None,
                    omega_hat0: None,
                    omega_hat0_random: Some([0.0, 1.0]),
                    eta0: None,
                })
                .collect(),
            gains: GainsConfig {
                mu1: 10.0,
                mu2: 20.0,
                alpha: 10.0,
                k: MatrixGain::Scalar(20.0),
                lambda: DiagonalGain::Scalar(10.0),
            },
            integration: IntegrationConfig::default(),
        }
    }

    /// Builds and validates the scenario.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let node_count = self.graph.edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(0);
        let node_count = node_count.max(self.agents.len() + 1);
        let edges: Vec<Edge> = self.graph.edges.iter().map(|&(f, t, w)| Edge::new(f, t, w)).collect();
        let graph = Digraph::new(node_count, edges)?;

        let output = matrix(&self.leader.output, "leader.C")?;
        let leader = LeaderModel::new(
            DVector::from_column_slice(&self.leader.omega),
            DVector::from_column_slice(&self.leader.v0),
            output,
        )?;
        let (m, n) = (leader.state_dim(), leader.output_dim());

        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let omega_hat0 = match (&a.omega_hat0, a.omega_hat0_random) {
                    (Some(w), None) => OmegaInit::Explicit(DVector::from_column_slice(w)),
                    (None, Some([lo, hi])) => OmegaInit::Uniform { lo, hi },
                    _ => {
                        return Err(Error::invalid(
                            format!("agents[{i}]"),
                            "exactly one of omega_hat0 and omega_hat0_random is required",
                        ))
                    }
                };
                let arm = TwoLinkArm::new(a.theta, a.gravity.unwrap_or(STANDARD_GRAVITY))?;
                Ok(AgentSpec {
                    plant: Arc::new(arm),
                    initial: PlantState {
                        q: vector_or_zeros(&a.q0, n),
                        q_dot: vector_or_zeros(&a.qdot0, n),
                    },
                    theta_hat0: vector_or_zeros(&a.theta_hat0, 5),
                    omega_hat0,
                    eta0: vector_or_zeros(&a.eta0, m),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let g = &self.gains;
        let k_gain = match &g.k {
            MatrixGain::Scalar(k) => DMatrix::identity(n, n) * *k,
            MatrixGain::Matrix(rows) => matrix(rows, "gains.K")?,
        };
        let lambda_diag = match &g.lambda {
            DiagonalGain::Scalar(l) => DVector::from_element(5, *l),
            DiagonalGain::Diagonal(d) => DVector::from_column_slice(d),
        };
        let gains = ControllerGains::new(ObserverGains::new(g.mu1, g.mu2)?, g.alpha, k_gain, lambda_diag)?;

        let scenario = Scenario {
            graph,
            leader,
            agents,
            gains,
            integration: Integration {
                step: self.integration.h,
                horizon: self.integration.horizon,
                record_every: self.integration.record_every,
            },
            seed: self.seed,
            mode: self.mode.run_mode(),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
