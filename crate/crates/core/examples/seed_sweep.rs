//! Independent scenarios run in parallel: the reference network under several seeds.

use leader_consensus::engine::{run_scenario, Scenario};

fn main() -> leader_consensus::Result<()> {
    let seeds = [1u64, 2, 3, 42, 1234, 99_999];
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                scope.spawn(move || {
                    let scenario = Scenario::reference().with_seed(seed);
                    run_scenario(&scenario).map(|run| (seed, run.metrics))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    println!(
        "{:>6}  {:>12}  {:>12}  {:>10}",
        "seed", "|q - q0|", "|w_hat - w|", "violations"
    );
    for r in results {
        let (seed, m) = r?;
        let q = m.agents.iter().filter_map(|a| a.terminal_q_err).fold(0.0, f64::max);
        let w = m.agents.iter().map(|a| a.terminal_omega_err).fold(0.0, f64::max);
        println!("{seed:>6}  {q:>12.3e}  {w:>12.3e}  {:>10}", m.lyapunov_violations);
    }
    Ok(())
}
