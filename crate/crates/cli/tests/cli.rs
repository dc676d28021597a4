use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wsnpl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsnpl"))
        .args(args)
        .env_remove("WSNPL_THREADS")
        .output()
        .unwrap()
}

fn config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.ini");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(dir: &Path, cmd: &str, text: &str) -> Output {
    let path = config(dir, text);
    wsnpl(&[cmd, "--config", path.to_str().unwrap()])
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const PAIR: &str = "[problem]\nD0 = 0.02\n[sensors]\ncolumns = sigma2, gain, xi2\n1 = 0.01, 1e-3, 1e-12\n2 = 0.04, 1e-3, 1e-12\n";

const SMALL_SWEEP: &str = "\
[problem]
D0 = auto
seed = 7
pilot_draws = 50
[topology]
K = 8
[sweep]
r_values = 0, 0.25, 0.5
runs = 20
";

#[test]
fn solve_prints_sensors_then_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "solve", PAIR);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.ends_with('\n'));
    let (sensors, summary) = text.split_once("\n\n").unwrap();
    let rows: Vec<&str> = sensors.lines().collect();
    assert_eq!(rows[0], "index,distance_m,gain,sigma2,r,alpha,node_power_w,active");
    assert!(rows[1].starts_with("1,,1.00000000000e-3,1.00000000000e-2,4.00000000000e1,6.66666666667e-8,"));
    assert!(rows[2].starts_with("2,,1.00000000000e-3,4.00000000000e-2,1.00000000000e1,1.66666666667e-8,"));
    let summary: Vec<&str> = summary.lines().collect();
    assert_eq!(summary[0], "norm,D0,K1,lambda0,objective,distortion");
    assert!(summary[1].starts_with("L1,2.00000000000e-2,2,"));
    assert!(stderr(&out).contains("(fixed)"));
}

#[test]
fn solve_writes_configured_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let sum = dir.path().join("sum.csv");
    let text = format!("{PAIR}[output]\ncsv = {}\nsummary = {}\n", csv.display(), sum.display());
    let out = run(dir.path(), "solve", &text);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
    assert!(std::fs::read_to_string(&sum).unwrap().starts_with("norm,"));
}

#[test]
fn distances_appear_in_the_sensor_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[problem]\nD0 = auto\n[sensors]\ncolumns = sigma2, distance_m\nxi2_dBm = -90\n1 = 0.01, 50\n2 = 0.02, 90\n";
    let out = run(dir.path(), "solve", text);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).lines().nth(1).unwrap().starts_with("1,5.00000000000e1,"));
}

#[test]
fn l2_solve_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "solve", &PAIR.replace("D0 = 0.02", "D0 = 0.02\nnorm = L2"));
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("\nL2,"));
}

#[test]
fn infeasible_target_exits_2_with_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "solve", &PAIR.replace("D0 = 0.02", "D0 = 0.005"));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("floor 0.008"), "{}", stderr(&out));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        "",
        "[problem]\nD0 = 0.02\nD0 = 0.03\n[sensors]\ncolumns = sigma2, gain\n1 = 0.01, 1e-3\n",
        "[problem]\nD0 = 0.02\nbogus = 1\n[sensors]\ncolumns = sigma2, gain\n1 = 0.01, 1e-3\n",
        "[problem]\nD0 = 0.02\n",
    ] {
        let out = run(dir.path(), "solve", bad);
        assert_eq!(out.status.code(), Some(1), "{bad:?}");
        assert!(stderr(&out).starts_with("wsnpl: "));
    }
    let missing = wsnpl(&["solve", "--config", "/nonexistent/run.ini"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(wsnpl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(wsnpl(&["solve"]).status.code(), Some(1));
    let help = wsnpl(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = stdout(&help);
    assert!(text.contains("WSNPL_THREADS"));
    assert!(text.contains("Exit codes"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = config(dir.path(), SMALL_SWEEP);
    for bad in ["0", "many"] {
        let out = Command::new(env!("CARGO_BIN_EXE_wsnpl"))
            .args(["sweep", "--config", path.to_str().unwrap()])
            .env("WSNPL_THREADS", bad)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1));
    }
}

#[test]
fn sweep_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let path = config(dir.path(), SMALL_SWEEP);
    let svg = dir.path().join("p.svg");
    let out = wsnpl(&["sweep", "--config", path.to_str().unwrap(), "--plot", svg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().starts_with("0.00000000000e0,20,"));
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert!(plot.starts_with("<svg") && plot.trim_end().ends_with("</svg>"));
    assert!(stderr(&out).contains("pilot draws"));
}

#[test]
fn seed_override_changes_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let path = config(dir.path(), SMALL_SWEEP);
    let p = path.to_str().unwrap();
    let a = stdout(&wsnpl(&["sweep", "--config", p]));
    let b = stdout(&wsnpl(&["sweep", "--config", p, "--seed", "7"]));
    let c = stdout(&wsnpl(&["sweep", "--config", p, "--seed", "8"]));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn validate_reports_both_noise_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "validate", &format!("{PAIR}[validate]\ntrials = 20000\n"));
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("noise_kind,trials,analytic_mse,empirical_mse,rel_error,empirical_bias\n"));
    assert!(text.contains("\ngaussian,20000,") && text.contains("\nuniform,20000,"));
    assert!(stderr(&out).contains("not enforced"));
}

#[test]
fn noiseless_validation_recovers_theta() {
    let dir = tempfile::tempdir().unwrap();
    let path = config(dir.path(), &format!("{PAIR}[validate]\ntrials = 1000\nnoise_kind = gaussian\n"));
    let out = wsnpl(&["validate", "--config", path.to_str().unwrap(), "--noiseless"]);
    assert_eq!(out.status.code(), Some(0));
    let row = stdout(&out).lines().nth(1).unwrap().to_string();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[3].parse::<f64>().unwrap(), 0.0);
    assert_eq!(fields[5].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn oracle_agrees_on_instance_and_batch() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "oracle", PAIR);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("K,K1,alpha_diff_bisection,"));

    let path = config(dir.path(), PAIR);
    let out = wsnpl(&["oracle", "--config", path.to_str().unwrap(), "--count", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("instances,K_max,shut_off_instances,"));
    assert!(text.lines().nth(1).unwrap().starts_with("50,"));
}
