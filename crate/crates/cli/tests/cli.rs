use std::process::{Command, Output};

use polyq::exact::ExactGibbs;
use polyq::rate::rate_i;
use polyq::{ChargeLaw, GibbsSpec};

fn polyq(args: &[&str]) -> Output {
    polyq_env(args, &[])
}

fn polyq_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polyq"));
    c.args(args).env_remove("POLYQ_THREADS").env("RUST_LOG", "info");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("spawn polyq")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (head, rows)
}

fn column(head: &[String], name: &str) -> usize {
    head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn enumerate_matches_the_library() {
    let o = polyq(&["enumerate", "--d", "2", "--n", "8", "--beta", "1", "--charges", "rademacher", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (head, rows) = csv_rows(&stdout(&o));
    assert_eq!(&head[..9], ["version", "command", "d", "n", "law", "pull", "seed", "replica", "charge_seed"]);
    assert_eq!(rows.len(), 1);
    let spec = GibbsSpec::new(2, 8, 1.0, ChargeLaw::Rademacher, 7).unwrap();
    let z = ExactGibbs::new(&spec, &spec.charges().unwrap()).unwrap().log_partition();
    let got: f64 = rows[0][column(&head, "log_Z")].parse().unwrap();
    assert!((got - z).abs() <= 1e-12 * z.abs());
    assert_eq!(rows[0][column(&head, "seed")], "7");
    assert!(rows[0][0].starts_with(env!("CARGO_PKG_VERSION")));
}

#[test]
fn missing_seed_is_a_config_error() {
    let o = polyq(&["mcmc", "--n", "8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn malformed_and_unknown_keys_are_named() {
    let o = polyq(&["enumerate", "--seed", "1", "--n", "many"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`n`"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n = 6\ntemperature = 2\n").unwrap();
    let o = polyq(&["enumerate", "--seed", "1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("temperature"));
    let o = polyq(&["bogus-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small instance\nd = 2\nn = 6\nbeta = 0.5\nseed = 4\n").unwrap();
    let o = polyq(&["enumerate", "--config", cfg.to_str().unwrap(), "--beta", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("--beta=2 overrides config value 0.5"));
    let (head, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows[0][column(&head, "beta")], "2.0");
    assert_eq!(rows[0][column(&head, "n")], "6");
}

#[test]
fn sweep_beta_schema_and_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = polyq_env(
            &[
                "sweep-beta", "--d", "2", "--n", "10", "--seed", "5", "--from", "0", "--to", "4", "--steps", "4",
                "--sweeps", "400", "--chains", "2", "--output", out.to_str().unwrap(),
            ],
            &[("POLYQ_THREADS", threads)],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "2");
    let b = run("b.csv", "2");
    assert_eq!(a, b);
    assert_eq!(a, run("c.csv", "1"));
    let (head, rows) = csv_rows(std::str::from_utf8(&a).unwrap());
    let k = column(&head, "beta");
    assert_eq!(head[k..k + 6], ["beta", "F", "F_stderr", "EH_over_N2", "P_S_alpha", "Lstar_frac_mean"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][column(&head, "F")], "0.0");
}

#[test]
fn json_lines_carry_spec_seed_and_version() {
    let o = polyq(&["mcmc", "--n", "8", "--seed", "3", "--sweeps", "300", "--replicas", "2", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    for l in &lines {
        assert_eq!(l["seed"], 3);
        assert_eq!(l["n"], 8);
        assert_eq!(l["law"], "rademacher");
        assert!(l["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    }
    assert_eq!(lines[2]["replica"], "mean");
    assert_ne!(lines[0]["charge_seed"], lines[1]["charge_seed"]);
    let mean = (lines[0]["EH_over_N2"].as_f64().unwrap() + lines[1]["EH_over_N2"].as_f64().unwrap()) / 2.0;
    assert!((lines[2]["EH_over_N2"].as_f64().unwrap() - mean).abs() < 1e-15);
}

#[test]
fn budget_and_strict_exit_codes() {
    let o = polyq(&["enumerate", "--d", "3", "--n", "20", "--seed", "1", "--budget", "1000"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let args = ["mcmc", "--n", "40", "--beta", "30", "--seed", "1", "--sweeps", "100", "--burn-in", "0"];
    let o = polyq(&args);
    assert!(o.status.success());
    let (head, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows[0][column(&head, "unconverged")], "true");
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(polyq(&strict).status.code(), Some(4));
}

#[test]
fn rate_fn_needs_no_seed_and_writes_a_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rate.csv");
    let o = polyq(&[
        "rate-fn", "--d", "2", "--from", "0.1", "--to", "0.3", "--steps", "2", "--output", out.to_str().unwrap(),
        "--emit-gnuplot",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (head, rows) = csv_rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 3);
    let i: f64 = rows[1][column(&head, "I")].parse().unwrap();
    let eps: f64 = rows[1][column(&head, "epsilon")].parse().unwrap();
    assert!((eps - 0.2).abs() < 1e-15);
    assert_eq!(i, rate_i(eps, 2).unwrap().rate);
    let gp = std::fs::read_to_string(format!("{}.gp", out.display())).unwrap();
    assert!(gp.contains("'epsilon':'I'"));
    assert!(gp.contains(out.to_str().unwrap()));
    let o = polyq(&["enumerate", "--seed", "1", "--emit-gnuplot", "--output", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn max_energy_brute_force_agrees() {
    let o = polyq(&["max-energy", "--d", "2", "--n", "10", "--seed", "9", "--charges", "gaussian", "--method", "exact"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (head, rows) = csv_rows(&stdout(&o));
    let f: f64 = rows[0][column(&head, "H_max_formula")].parse().unwrap();
    let b: f64 = rows[0][column(&head, "H_brute_force")].parse().unwrap();
    assert!((f - b).abs() <= 1e-9 * f);
    let walk: Vec<Vec<i32>> = serde_json::from_str(&rows[0][column(&head, "trajectory")]).unwrap();
    assert_eq!(walk.len(), 10);
}

#[test]
fn pulling_reports_bounds_and_step_law() {
    let o = polyq(&["pulling", "--d", "1", "--n", "8", "--seed", "2", "--pull", "-0.5", "--mu", "0.1", "--beta-c", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (head, rows) = csv_rows(&stdout(&o));
    let p0: f64 = rows[0][column(&head, "p_step_0")].parse().unwrap();
    let p1: f64 = rows[0][column(&head, "p_step_1")].parse().unwrap();
    assert!((p0 + p1 - 1.0).abs() < 1e-15 && p0 < p1);
    let gap: f64 = rows[0][column(&head, "lipschitz_gap")].parse().unwrap();
    assert!(gap.is_finite() && gap > 0.0);
    assert_eq!(polyq(&["pulling", "--d", "1", "--seed", "2"]).status.code(), Some(2));
}

#[test]
fn selftest_subset_passes() {
    let o = polyq(&["selftest", "--scale", "quick", "--checks", "1,2,3,10,12", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l["passed"] == true));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = polyq_env(&["rate-fn"], &[("POLYQ_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
}
