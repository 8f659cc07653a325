use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use leader_consensus::config::ScenarioConfig;
use leader_consensus::output::read_table;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leader-consensus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn reference_toml() -> String {
    ScenarioConfig::reference().to_toml().unwrap()
}

#[test]
fn simulate_twice_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", &reference_toml());
    let outs = [tmp.path().join("run1"), tmp.path().join("run2")];
    for out in &outs {
        let o = cli(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "42",
            "--T",
            "2",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<String> = fs::read_dir(&outs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut expected = vec!["diagnostics.csv", "leader.csv", "summary.json"]
        .into_iter()
        .map(String::from)
        .chain((1..=6).map(|i| format!("agent_{i}.csv")))
        .collect::<Vec<_>>();
    expected.sort();
    assert_eq!(names, expected);
    for name in &names {
        let a = fs::read(outs[0].join(name)).unwrap();
        let b = fs::read(outs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    let leader = read_table(&outs[0].join("leader.csv")).unwrap();
    assert_eq!(leader.header.join(","), "t,v1,v2,v3,v4,q0_1,q0_2,q0dot_1,q0dot_2");
    assert_eq!(leader.rows.len(), 201);
    let agent = read_table(&outs[0].join("agent_3.csv")).unwrap();
    assert_eq!(agent.header.len(), 1 + 2 + 2 + 4 + 2 + 5 + 2);
}

#[test]
fn seed_override_changes_initial_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    let read_omega = |seed: &str| {
        let out = tmp.path().join(seed);
        let o = cli(&[
            "simulate",
            "--builtin",
            "section5",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
            "--T",
            "0.01",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        read_table(&out.join("agent_1.csv")).unwrap().column("omega1").unwrap()[0]
    };
    assert_ne!(read_omega("1"), read_omega("2"));
}

#[test]
fn builtin_simulation_passes_its_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ref");
    let o = cli(&["simulate", "--builtin", "section5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: PASS"), "{}", stdout(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["lyapunov_violations"], 0);
    assert_eq!(summary["leader_pe"]["is_pe"], true);
    assert_eq!(summary["agents"].as_array().unwrap().len(), 6);
}

#[test]
fn missing_key_fails_with_its_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &reference_toml().replace("alpha = 10.0\n", ""));
    let o = cli(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
}

#[test]
fn json_config_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.json", &ScenarioConfig::reference().to_json().unwrap());
    let o = cli(&["check-pe", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("is_pe = true"));
}

fn pe_output(v0: &str) -> String {
    let tmp = tempfile::tempdir().unwrap();
    let text = reference_toml().replace("v0 = [1.0, 0.0, 1.0, 0.0]", v0);
    let cfg = write_config(tmp.path(), "s.toml", &text);
    let o = cli(&[
        "check-pe",
        "--config",
        &cfg,
        "--T0",
        "6.283185307179586",
        "--epsilon",
        "0.1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o)
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .to_string()
}

#[test]
fn check_pe_cases() {
    let o = cli(&[
        "check-pe",
        "--builtin",
        "section5",
        "--T0",
        "6.283185307179586",
        "--epsilon",
        "0.1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(field(&text, "is_pe"), "true");
    assert_eq!(field(&text, "epsilon"), "0.1");

    let text = pe_output("v0 = [1.0, 0.0, 0.0, 0.0]");
    assert_eq!(field(&text, "is_pe"), "false");
    assert!(field(&text, "min_gram_eig").parse::<f64>().unwrap().abs() < 1e-12);

    let text = pe_output("v0 = [0.0, 0.0, 0.0, 0.0]");
    assert_eq!(field(&text, "is_pe"), "false");
}

#[test]
fn verify_reports_validation_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let no_root = reference_toml().replace("[0, 1, 1.0], [0, 4, 1.0], ", "");
    let cfg = write_config(tmp.path(), "a.toml", &no_root);
    let o = cli(&["verify", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("leader-connectivity"), "{}", stdout(&o));

    let cfg = write_config(
        tmp.path(),
        "b.toml",
        &reference_toml().replace("mu2 = 20.0", "mu2 = 0.0"),
    );
    let o = cli(&["verify", "--config", &cfg]);
    assert!(!o.status.success());
    let text = stdout(&o);
    assert!(text.contains("FAIL") && text.contains("mu2"), "{text}");
}

#[test]
fn verify_builtin_passes() {
    let o = cli(&["verify", "--builtin", "section5"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("verdict: PASS"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn source_is_required() {
    let o = cli(&["simulate", "--out", "nowhere"]);
    assert!(!o.status.success());
}
