use std::path::Path;
use std::process::{Command, Output};

fn usdpns(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usdpns"))
        .args(args)
        .current_dir(dir)
        .env_remove("USDPNS_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn usd_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = usdpns(&["usd"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("q_opt = 0.037476\nq_max = 0.018738\n"));
}

#[test]
fn crossover_for_ideal_pi_phase() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("pi.json"),
        r#"{"source": {"theta_d": 3.141592653589793}, "usd": {"ideal": "optimal"}}"#,
    )
    .unwrap();
    let o = usdpns(&["crossover", "--config", "pi.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let value: f64 = stdout(&o).trim().strip_prefix("crossover_db = ").unwrap().parse().unwrap();
    assert!((value - 13.3).abs() <= 0.5);
}

#[test]
fn empty_sweep_range_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = usdpns(
        &["sweep", "--set", "sweep.start_db=40", "--set", "sweep.end_db=40", "--out", "s.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sweep"));
    assert!(!dir.path().join("s.csv").exists());
    assert!(o.stdout.is_empty());
}

#[test]
fn validation_errors_name_fields() {
    let dir = tempfile::tempdir().unwrap();
    let o = usdpns(&["usd", "--set", "source.mu=0.05"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("source.mu"), "{}", stderr(&o));

    let o = usdpns(&["bounds", "--set", "channel.loss_db=30", "--set", "channel.eta=0.001"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("loss_db or eta"));

    std::fs::write(dir.path().join("bad.json"), "{\n  \"source\": {\"mu\": }\n}").unwrap();
    let o = usdpns(&["usd", "--config", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = usdpns(&["usd", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(usdpns(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(usdpns(&[], dir.path()).status.code(), Some(1));
    assert_eq!(usdpns(&["crossover", "--lo", "30"], dir.path()).status.code(), Some(1));
    let help = usdpns(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("sweep"));
}

#[test]
fn computation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = usdpns(&["simulate", "--set", "channel.loss_db=0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("infeasible"));

    let o = usdpns(&["crossover", "--lo", "37", "--hi", "40"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no sign change"));
}

#[test]
fn sweep_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep",
        "--set",
        "sweep.start_db=30",
        "--set",
        "sweep.end_db=50",
        "--set",
        "solver.enforce_errors=true",
        "--out",
    ];
    let run = |name: &str| {
        let mut a = args.to_vec();
        a.push(name);
        let o = usdpns(&a, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));

    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("loss_db,eta,q_mu_gain,r_lower,r_upper,feasible,attack_success"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 201);
    assert_eq!(rows[0][0], "30");
    assert_eq!(rows[200][0], "50");
    let success_at = |loss: &str| rows.iter().find(|r| r[0] == loss).unwrap()[6] == "true";
    assert!(!success_at("36"));
    assert!(success_at("40"));
    assert!(!success_at("49"));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--set", "mc.n_pulses=200000", "--set", "mc.seed=5"];
    let a = usdpns(&args, dir.path());
    let b = usdpns(&args, dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("quantity,empirical,std_err,analytic,z_score\nq_mu,"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn config_path_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("env.json"), r#"{"source": {"mu": 0.6, "nu": 0.2}}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_usdpns"))
        .arg("usd")
        .current_dir(dir.path())
        .env("USDPNS_CONFIG", "env.json")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("q_opt = 0.037476"));
}

/// Runs every `$ usdpns ...` line of the README's console blocks and
/// compares with the output printed beneath it.
#[test]
fn readme_examples() {
    let readme = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let mut in_block = false;
    let mut examples: Vec<(String, String)> = Vec::new();
    for line in readme.lines() {
        if line.trim_start().starts_with("```") {
            in_block = line.trim() == "```console";
            continue;
        }
        if !in_block {
            continue;
        }
        if let Some(cmd) = line.strip_prefix("$ ") {
            examples.push((cmd.to_string(), String::new()));
        } else if let Some((_, expected)) = examples.last_mut() {
            expected.push_str(line);
            expected.push('\n');
        }
    }
    assert!(examples.len() >= 4, "README has too few console examples");

    let dir = tempfile::tempdir().unwrap();
    for (cmd, expected) in examples {
        let words: Vec<&str> = cmd.split_whitespace().collect();
        assert_eq!(words[0], "usdpns", "{cmd}");
        let o = usdpns(&words[1..], dir.path());
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        assert_eq!(stdout(&o), expected, "output of `{cmd}`");
    }
}
