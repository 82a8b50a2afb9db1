use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn opera(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opera")).args(args).output().expect("spawn opera")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn bounds_prints_the_dimension_bound() {
    let stdout = ok(&opera(&["bounds", "--n", "10"]));
    assert!(stdout.contains("min_samples_dimension,56"), "{stdout}");
    let stdout = ok(&opera(&["bounds", "--n", "3", "--eps0", "1", "--gamma1", "0.01", "--eps1", "0.01"]));
    // ln(1 / 0.01) / 0.01 = 460.5
    assert!(stdout.contains("min_samples_tail,461"), "{stdout}");
}

#[test]
fn simulate_then_solve_the_written_polyhedron() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&opera(&["simulate", "--n", "3", "--m", "400", "--seed", "2", "--out", d]));
    for f in ["signal.csv", "records.csv", "system.txt", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let records = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 401);

    let sol = dir.path().join("sol");
    let stdout = ok(&opera(&["solve", "--system", &format!("{d}/system.txt"), "--out", sol.to_str().unwrap()]));
    assert!(stdout.contains("Feasible"), "{stdout}");
    for f in ["trace.csv", "estimate.csv", "signal_estimate.csv"] {
        assert!(sol.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read_to_string(sol.join("estimate.csv")).unwrap().lines().count(), 7);
}

#[test]
fn noisy_simulation_has_no_polyhedron() {
    let dir = tempfile::tempdir().unwrap();
    ok(&opera(&["simulate", "--n", "2", "--m", "50", "--sigma", "0.5", "--out", dir.path().to_str().unwrap()]));
    assert!(!dir.path().join("system.txt").exists());
}

fn summary_rows(stdout: &str, method: &str) -> usize {
    stdout.lines().filter(|l| l.starts_with(&format!("{method},"))).count()
}

#[test]
fn single_run_subcommands_print_a_summary() {
    let small = ["--n", "3", "--m", "300", "--max-iters", "50000"];
    let cases: [(&[&str], &str); 5] = [
        (&["solve"], "opera"),
        (&["adaptive"], "opera-adaptive"),
        (&["mle", "--sigma", "0.5"], "noisy-opera"),
        (&["baseline", "--method", "phaselift"], "phaselift"),
        (&["baseline", "--method", "noisy-phaselift", "--sigma", "0.3"], "noisy-phaselift"),
    ];
    for (args, method) in cases {
        let all: Vec<&str> = args.iter().chain(small.iter()).copied().collect();
        let stdout = ok(&opera(&all));
        assert!(stdout.starts_with("method,m,sigma"), "{stdout}");
        assert_eq!(summary_rows(&stdout, method), 1, "{method}: {stdout}");
    }
}

#[test]
fn baseline_rejects_a_non_baseline_method() {
    let out = opera(&["baseline", "--method", "opera", "--n", "2", "--m", "20"]);
    assert!(!out.status.success());
}

fn sweep_into(dir: &Path, config: &Path) {
    ok(&opera(&["sweep", "fig2-real", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]));
}

#[test]
fn sweep_reads_a_config_file_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "n = 3\nm = [100, 200]\ntrials = 2\nseed = 4\nmax-iters = 20000\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    sweep_into(&a, &config);
    sweep_into(&b, &config);
    for f in ["trials.csv", "summary.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let trials = fs::read_to_string(a.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 5);
    assert!(trials.lines().skip(1).all(|l| l.starts_with("opera,3,")));

    // a flag beats the config file
    let c = dir.path().join("c");
    ok(&opera(&["sweep", "fig2-real", "--config", config.to_str().unwrap(), "--trials", "1", "--out", c.to_str().unwrap()]));
    assert_eq!(fs::read_to_string(c.join("trials.csv")).unwrap().lines().count(), 3);
}

#[test]
fn unknown_config_keys_and_presets_fail() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "bogus = 1\n").unwrap();
    assert!(!opera(&["bounds", "--config", config.to_str().unwrap()]).status.success());
    assert!(!opera(&["sweep", "fig99"]).status.success());
}
