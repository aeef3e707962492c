use std::path::PathBuf;
use std::process::{Command, Output};

fn selfbh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfbh")).args(args).output().unwrap()
}

fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name)
}

fn table1() -> String {
    std::fs::read_to_string(preset("table1.conf")).unwrap()
}

#[test]
fn optimize_prints_rates_and_baseline() {
    let cfg = preset("table1.conf");
    let out = selfbh(&["optimize", "--scheme", "hd", "--config", cfg.to_str().unwrap(), "--baseline", "--starts", "10"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("HD optimized"));
    assert!(text.contains("HD baseline"));
    assert!(text.contains("c_s      129.56"), "{text}");
}

#[test]
fn infeasible_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.conf");
    // a rate ratio no allocation can meet
    let text = table1().replace("rho_min = 0.15", "rho_min = 1e15").replace("rho_max = 0.30", "rho_max = 1e15");
    std::fs::write(&cfg, text).unwrap();
    let out = selfbh(&["optimize", "--scheme", "fd", "--config", cfg.to_str().unwrap(), "--starts", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.conf");
    let out = selfbh(&["optimize", "--scheme", "fd", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let cfg = dir.path().join("structural.conf");
    std::fs::write(&cfg, table1().replace("k_an = 0", "k_an = 11")).unwrap();
    let out = selfbh(&["optimize", "--scheme", "rl", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = selfbh(&["optimize", "--scheme", "fd", "--config", preset("fig4a.conf").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.conf");
    std::fs::write(&spec, "kind = si_cancellation\naxis = 80, 130\nschemes = fd, hd\nstarts = 6\n").unwrap();
    let csv = dir.path().join("out.csv");
    let out = selfbh(&["sweep", "--spec", spec.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("axis,scheme,optimized"));
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == lines[0].split(',').count()));
}

#[test]
fn sweep_marks_skipped_points() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.conf");
    // 120 received backhaul streams leave no receive DoF on 100 antennas
    std::fs::write(&spec, "kind = backhaul_streams\naxis = 1, 60\nschemes = rl\nstarts = 4\n").unwrap();
    let csv = dir.path().join("out.csv");
    let out = selfbh(&["sweep", "--spec", spec.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().any(|l| l.starts_with("60,") && l.ends_with(",skip")), "{text}");
}

#[test]
fn validate_zf_writes_checks() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("zf.csv");
    let out = selfbh(&["validate-zf", "--trials", "1000", "--seed", "3", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "check,empirical,closed_form,relative_error");
    for name in ["zf_norm_40_4_16", "wishart_40_20", "wishart_200_16", "hd_sinr_dl_nt160"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}
