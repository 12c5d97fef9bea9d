use std::process::Command;

fn tbrbf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tbrbf"))
}

#[test]
fn pushforward_check_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = tbrbf()
        .args(["pushforward-check", "--nodes", "30", "--out"])
        .arg(dir.path())
        .env("TBRBF_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("pushforward_identities.csv")).unwrap();
    assert!(text.starts_with("identity,surface,r,residual,threshold,pass\n"));
    assert!(dir.path().join("summary.csv").exists());
}

#[test]
fn threshold_failure_exits_1_with_summary() {
    let out = tbrbf()
        .args(["converge-time", "--epsilon", "1", "--dt", "0.1,0.05", "--kernel-scale", "0.05"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("FAILED checks="), "{err}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL converge-time"));
}

#[test]
fn config_errors_exit_2() {
    let out = tbrbf().args(["shu", "--set", "epsilom=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did you mean `epsilon`"));

    let out = tbrbf().args(["torus-knot", "--surface", "sphere"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = tbrbf().args(["shu", "--config", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = tbrbf().arg("pushforward-check").env("TBRBF_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_3() {
    let out = tbrbf()
        .args(["converge-time", "--epsilon", "1e-5", "--dt", "0.05", "--scheme", "kansa", "--set", "t_final=10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(&cfg, "[experiment]\nexperiment = converge-time\nepsilon = 1\ndt = 0.1\n").unwrap();
    let out = tbrbf().args(["converge-time", "--dt", "0.1,0.05", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("5e-2,"), "{stdout}");
}
