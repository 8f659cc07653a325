//! Persistent excitation of the leader state decides whether frequencies are learned.

use std::f64::consts::PI;

use leader_consensus::engine::{run_scenario, Scenario, StepSeries};
use leader_consensus::verify::leader_pe;
use nalgebra::DVector;

fn main() -> leader_consensus::Result<()> {
    let cases = [
        ("both tones", vec![1.0, 0.0, 1.0, 0.0]),
        ("first tone only", vec![1.0, 0.0, 0.0, 0.0]),
    ];
    for (name, v0) in cases {
        let scenario = Scenario::reference_observer_only().with_leader_state(DVector::from_vec(v0))?;
        let report = leader_pe(&scenario.leader, 2.0 * PI, Some(0.1), 0.0)?;
        let run = run_scenario(&scenario)?;
        let omega = StepSeries::worst_agent(&run.steps.omega_tilde);
        let eta = StepSeries::worst_agent(&run.steps.eta_tilde);
        println!("{name}:");
        println!(
            "  {} (excitation check: {})",
            pe_line(&report),
            scenario.leader.check_excitation()
        );
        println!(
            "  at t = 30 s: max |eta - v| = {:.2e}, max |omega_hat - omega| = {:.2e}",
            eta.last().unwrap(),
            omega.last().unwrap()
        );
    }
    Ok(())
}

fn pe_line(r: &leader_consensus::leader::PeReport) -> String {
    format!(
        "min Gram eigenvalue {:.4} vs epsilon {} -> PE = {}",
        r.min_gram_eig, r.epsilon, r.is_pe
    )
}
