//! Six two-link arms learn the leader's frequencies and track it.

use leader_consensus::engine::{run_scenario, Scenario, StepSeries};

fn main() -> leader_consensus::Result<()> {
    let scenario = Scenario::reference();
    let run = run_scenario(&scenario)?;
    let s = &run.steps;

    println!("agent  |q-q0| last 5 s  |q'-q0'| last 5 s  settle q (s)");
    for i in 0..scenario.followers() {
        let settle = run.metrics.agents[i]
            .settling_q
            .map_or("-".to_string(), |t| format!("{t:.2}"));
        println!(
            "{:>5}  {:>16.3e}  {:>18.3e}  {:>12}",
            i + 1,
            s.max_over(&s.q_err[i..=i], 25.0, 30.0),
            s.max_over(&s.q_dot_err[i..=i], 25.0, 30.0),
            settle,
        );
    }
    let omega = StepSeries::worst_agent(&s.omega_tilde);
    println!("worst frequency error at t = 30 s: {:.3e}", omega.last().unwrap());
    println!("Lyapunov violations: {}", run.metrics.lyapunov_violations);
    println!("max tracking residual: {:.3e}", run.metrics.max_tracking_residual);
    Ok(())
}
