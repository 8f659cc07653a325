//! Fixed-step simulation of a leader and its followers.

pub mod integrator;
pub mod network;
pub mod rng;
pub mod run;
pub mod scenario;

pub use network::{Evaluation, Monitors, Network};
pub use run::{run_scenario, run_scenario_with, Run, RunMetrics, StepSeries, Thresholds, Trajectory};
pub use scenario::{AgentSpec, Integration, ObserverLaw, OmegaInit, RunMode, Scenario};
