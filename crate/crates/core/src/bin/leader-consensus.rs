use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use leader_consensus::config::ScenarioConfig;
use leader_consensus::engine::{run_scenario, Scenario};
use leader_consensus::verify::{default_pe_window, leader_pe, verify_scenario};
use leader_consensus::{output, Result};

#[derive(Parser)]
#[command(version, about = "Adaptive leader-following consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write CSV trajectories plus summary.json.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Persistent-excitation test of the leader state.
    CheckPe {
        #[command(flatten)]
        source: Source,
        /// Window length; defaults to one period of the slowest tone.
        #[arg(long = "T0")]
        window: Option<f64>,
        /// Gram threshold; defaults to a tenth of the mean squared component.
        #[arg(long)]
        epsilon: Option<f64>,
        /// First window start.
        #[arg(long = "t0", default_value_t = 0.0)]
        offset: f64,
    },
    /// Run the verification suite and print a pass/fail table.
    Verify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario file (TOML or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    /// Six two-link arms, two-tone leader.
    #[value(name = "section5", alias = "reference")]
    Reference,
    /// Same network with the plants removed.
    #[value(name = "observer-only")]
    ObserverOnly,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step.
    #[arg(long = "h")]
    step: Option<f64>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<f64>,
}

impl Source {
    fn scenario(&self) -> Result<Scenario> {
        match (&self.config, self.builtin) {
            (Some(path), _) => ScenarioConfig::load(path)?.to_scenario(),
            (None, Some(Builtin::ObserverOnly)) => Ok(Scenario::reference_observer_only()),
            (None, _) => Ok(Scenario::reference()),
        }
    }
}

impl Overrides {
    fn apply(&self, mut s: Scenario) -> Result<Scenario> {
        if let Some(seed) = self.seed {
            s.seed = Some(seed);
        }
        if let Some(h) = self.step {
            s.integration.step = h;
        }
        if let Some(t) = self.horizon {
            s.integration.horizon = t;
        }
        s.validate()?;
        Ok(s)
    }
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Simulate { source, overrides, out } => {
            let scenario = overrides.apply(source.scenario()?)?;
            let run = run_scenario(&scenario)?;
            let summary = output::write_run(&out, &scenario, &run)?;
            for check in &summary.verdicts {
                println!("{check}");
            }
            println!("verdict: {}", if summary.passed { "PASS" } else { "FAIL" });
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::CheckPe {
            source,
            window,
            epsilon,
            offset,
        } => {
            let scenario = source.scenario()?;
            let window = window.unwrap_or_else(|| default_pe_window(&scenario.leader));
            let report = leader_pe(&scenario.leader, window, epsilon, offset)?;
            println!("window = {}", report.window);
            println!("offset = {}", report.offset);
            println!("epsilon = {}", report.epsilon);
            println!("min_gram_eig = {}", report.min_gram_eig);
            println!("is_pe = {}", report.is_pe);
            Ok(true)
        }
        Command::Verify { source, overrides } => {
            let checks = match source.scenario().and_then(|s| overrides.apply(s)) {
                Ok(s) => verify_scenario(&s)?,
                Err(e) => {
                    println!("FAIL  {:<40} {e}", "validation");
                    return Ok(false);
                }
            };
            for check in &checks {
                println!("{check}");
            }
            let passed = checks.iter().all(|c| c.ok());
            println!("verdict: {}", if passed { "PASS" } else { "FAIL" });
            Ok(passed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
