//! Loads a scenario file, shortens the horizon and writes the CSV artifacts.
//!
//! `cargo run --example run_from_config -- [config.toml] [out-dir]`

use std::path::PathBuf;

use leader_consensus::config::ScenarioConfig;
use leader_consensus::engine::run_scenario;
use leader_consensus::output::{read_table, write_run};

fn main() -> leader_consensus::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map_or_else(
        || PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/reference.toml")),
        PathBuf::from,
    );
    let out = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("leader-consensus-run"), PathBuf::from);

    let mut cfg = ScenarioConfig::load(&config)?;
    cfg.integration.horizon = 15.0;
    let scenario = cfg.to_scenario()?;
    let run = run_scenario(&scenario)?;
    let summary = write_run(&out, &scenario, &run)?;

    let diag = read_table(&out.join("diagnostics.csv"))?;
    println!(
        "{} samples of {} columns in {}",
        diag.rows.len(),
        diag.header.len(),
        out.display()
    );
    let v = diag.column("V").expect("V column");
    println!("observer Lyapunov function: {:.3e} -> {:.3e}", v[0], v[v.len() - 1]);
    for check in &summary.verdicts {
        println!("{check}");
    }
    Ok(())
}
