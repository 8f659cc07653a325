//! The adaptive observer alone, compared with observers that are given the true frequency.

use leader_consensus::engine::{run_scenario, ObserverLaw, RunMode, Scenario, StepSeries};
use leader_consensus::observer::KnownFrequencyObserver;

fn main() -> leader_consensus::Result<()> {
    let laws = [
        ("adaptive", ObserverLaw::Adaptive),
        (
            "true frequency",
            ObserverLaw::KnownFrequency(KnownFrequencyObserver::Static),
        ),
        (
            "frequency consensus",
            ObserverLaw::KnownFrequency(KnownFrequencyObserver::Consensus),
        ),
    ];
    println!(
        "{:<20} {:>12} {:>12} {:>14}",
        "observer", "eta err 5 s", "eta err 20 s", "omega err 20 s"
    );
    for (name, law) in laws {
        let scenario = Scenario::reference()
            .with_mode(RunMode::ObserverOnly(law))
            .with_horizon(20.0);
        let run = run_scenario(&scenario)?;
        let s = &run.steps;
        let eta = StepSeries::worst_agent(&s.eta_tilde);
        let omega = StepSeries::worst_agent(&s.omega_tilde);
        let at = |series: &[f64], t: f64| series[(t / scenario.integration.step).round() as usize];
        // the true-frequency observer never uses its estimate
        let omega = match law {
            ObserverLaw::KnownFrequency(KnownFrequencyObserver::Static) => "-".to_string(),
            _ => format!("{:.3e}", at(&omega, 20.0)),
        };
        println!(
            "{:<20} {:>12.3e} {:>12.3e} {:>14}",
            name,
            at(&eta, 5.0),
            at(&eta, 20.0),
            omega
        );
    }
    Ok(())
}
