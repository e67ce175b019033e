use std::path::Path;
use std::process::{Command, Output};

use amspace_cli::Report;

fn amspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amspace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, target: &str, extra: &[&str]) -> Report {
    let out = dir.to_str().unwrap();
    let mut args = vec!["run", target, "--out", out];
    args.extend_from_slice(extra);
    let o = amspace(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn check<'a>(r: &'a Report, name: &str) -> &'a amspace_cli::report::Check {
    r.checks
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("missing check {name}"))
}

#[test]
fn counterexample_verdicts_are_opposite() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_into(dir.path(), "counterexample-5-3", &[]);
    assert!(!r.positivity.is_positive_h);
    assert!(r.positivity.rb_positive_on_basis);
    let ce = r.counterexample.as_ref().unwrap();
    assert!(ce.resolvent_error_vs_minus_g <= ce.error_bound);
    assert!(ce.minus_g_nonnegative);
    assert!(r.evolution.is_none());
    assert!(r.checks.iter().all(|c| c.passed));
}

#[test]
fn shift_example_meets_norm_condition() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_into(dir.path(), "example-5-1", &["--n-cells", "1000", "--dt", "5e-4"]);
    assert!(r.desch.norm_condition_met);
    assert!(r.oracle.as_ref().unwrap().max_error <= 1e-3);
    let ev = r.evolution.as_ref().unwrap();
    assert_eq!(ev.positivity_ok, Some(true));
    assert!(ev.tail_bound <= r.settings.tol * ev.k / (1.0 - ev.k));
    assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
}

#[test]
fn split_demo_stages_agree() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_into(dir.path(), "split-demo", &[]);
    assert!(!r.desch.norm_condition_met);
    let split = r.split.as_ref().unwrap();
    assert_eq!(split.schedule.n, 3);
    assert!(check(&r, "staged_vs_single").passed);
}

#[test]
fn periodic_direction_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_into(dir.path(), "periodic-5-2", &["--n-cells", "200", "--parallel"]);
    let p = r.periodic.as_ref().unwrap();
    assert_eq!(p.direction_oracle, Some(p.direction_constant));
    assert!(p.rotation_by_one_is_identity);
    assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "n_cells = many\n").unwrap();
    let out = dir.path().join("out");
    let o = amspace(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let o = amspace(&["run", "no-such-scenario", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("shift.cfg");
    std::fs::write(&cfg, "lambda_shift = -5\n").unwrap();
    let out = dir.path().join("out");
    let o = amspace(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("K ="));
}

#[test]
fn csv_tables_and_plot_note() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_into(dir.path(), "custom", &["--n-cells", "100"]);
    assert_eq!(r.plots, "none");
    assert!(!dir.path().join("snapshots.svg").exists());
    let text = std::fs::read_to_string(dir.path().join("evolution.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,probe_x,value,term_index_max,tail_bound"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * r.settings.probes.len());
    let value: f64 = rows[0].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(value, 1.0);

    let svg = tempfile::tempdir().unwrap();
    let r = run_into(svg.path(), "custom", &["--n-cells", "100", "--format", "json,svg"]);
    assert_eq!(r.plots, "snapshots.svg,desch_curve.svg");
    assert!(svg.path().join("desch_curve.svg").exists());
    assert!(!svg.path().join("evolution.csv").exists());
}

#[test]
fn report_round_trips_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_into(a.path(), "split-demo", &["--n-cells", "200", "--dt", "2e-3"]);
    let rb = run_into(
        b.path(),
        "split-demo",
        &["--n-cells", "200", "--dt", "2e-3", "--parallel"],
    );
    assert_eq!(ra, rb);
    for f in ["report.json", "evolution.csv", "checks.csv", "desch_sweep.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let json = serde_json::to_string(&ra).unwrap();
    let back: Report = serde_json::from_str(&json).unwrap();
    assert_eq!(back, ra);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# coarse run\nscenario = custom\nn_cells = 50\nlambda = 3\n").unwrap();
    let out = dir.path().join("out");
    let r = run_into(&out, cfg.to_str().unwrap(), &["--lambda", "4"]);
    assert_eq!(r.settings.n_cells, 50);
    assert_eq!(r.settings.lambda, 4.0);
    assert_eq!(r.desch.lambda, 4.0);
}
