use std::fs;
use std::process::{Command, Output};

fn dgrecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgrecon")).args(args).output().expect("binary runs")
}

fn metric(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in output:\n{stdout}"))
        .parse()
        .unwrap()
}

#[test]
fn run_prints_report_and_writes_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = dgrecon(&[
        "run", "--example", "1", "--n", "8", "--k", "2", "--k0", "3", "--eps", "1e-2", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(metric(&stdout, "n"), 8.0);
    assert_eq!(metric(&stdout, "data_n"), 8.0);
    let r = metric(&stdout, "rerror");
    assert!(r > 0.0 && r < 0.05, "rerror {r}");
    for f in ["report.txt", "gamma.csv", "sigma.csv", "fields.vtk"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let vtk = fs::read_to_string(out.join("fields.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
    // 128 triangles, 4 sample points each
    assert!(vtk.contains("POINTS 512 "));
}

#[test]
fn run_rejects_bad_parameters() {
    let o = dgrecon(&["run", "--example", "1", "--n", "8", "--eps", "2"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps"));

    let o = dgrecon(&["run", "--example", "5"]);
    assert!(!o.status.success());

    let o = dgrecon(&["run", "--example", "1", "--n", "9", "--data-n", "4"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("multiple"));
}

#[test]
fn sweep_writes_table_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(
        &cfg,
        "# small regularization study\nexample = 1\nn = 8\nk = 2\nk0 = 4\neps = 1e-1, 1e-2, 1e-3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = dgrecon(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "example,n,data_n,k,k0,eps,delta,seed,penalty,error_half,rerror,data_rel_err,sep_dist,assembly_ms,solve_ms,solver_iters"
    );
    assert_eq!(lines.len(), 4);
    let slopes = fs::read_to_string(out.join("slopes.csv")).unwrap();
    assert_eq!(slopes.lines().count(), 3);
    assert!(out.join("rerror.svg").is_file());
    assert!(String::from_utf8_lossy(&o.stdout).contains("rerror slope"));
}

#[test]
fn sweep_reports_config_errors_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "example = 1\nmesh = 4\n").unwrap();
    let o = dgrecon(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("mesh"), "{err}");
}

#[test]
fn verify_passes() {
    let o = dgrecon(&["verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().count() >= 10);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")));
}
