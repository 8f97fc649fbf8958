use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_windfarm-mpc");

fn scenario(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("s.toml");
    std::fs::write(
        &path,
        format!("[layout]\ncount = 3\n[wind]\nmean = 9.0\n[simulation]\nduration = 30.0\n{extra}"),
    )
    .unwrap();
    path
}

#[test]
fn run_writes_every_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .args(["run", scenario(dir.path(), "").to_str().unwrap(), "--out"])
        .arg(&out)
        .args(["--seed", "4", "--mode", "baseline"])
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["power.csv", "loads.csv", "ct.csv", "wind.csv", "solver.csv", "metrics.json", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let echo = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echo.contains("seed = 4"));
    assert!(echo.contains("mode = \"baseline\""));
}

#[test]
fn aborted_run_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "failure_budget = 0\n[mpc.solver]\nmax_iter = 10\npolish = false\n",
    );
    let out = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("aborted"));
}

#[test]
fn invalid_scenario_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "[mpc]\nhorizon = 0\n");
    let out = Command::new(BIN).args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

#[test]
fn sweep_prints_and_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "");
    let out = Command::new(BIN)
        .args(["sweep", cfg.to_str().unwrap(), "--w", "0,1000", "--s", "1,0.5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert_eq!(String::from_utf8_lossy(&out.stdout), table);
}
