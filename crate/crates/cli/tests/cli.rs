//! CLI contract tests: flag handling, config file precedence, exit codes,
//! output destinations.

use std::process::Command;

fn bmdf(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bmdf")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = bmdf(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn thresholds_defining_equation() {
    let text = stdout(&["thresholds", "--q-db", "-3"]);
    let star: f64 = text
        .lines()
        .find(|l| l.starts_with("p_s_star,"))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse()
        .unwrap();
    // W(P*) = log(1 + P* q) at q = 10^{-0.3}.
    let q = 10f64.powf(-0.3);
    let w = bmdf_core::special::lambert_w(star, bmdf_core::special::WBranch::Principal).unwrap();
    assert!((w - (star * q).ln_1p()).abs() < 1e-9, "p_s_star = {star}");
    assert!((star - 7.76).abs() < 0.1);
}

#[test]
fn figure_fig4_header_contract() {
    let text = stdout(&["figure", "fig4", "--out", "-"]);
    assert!(text.starts_with("ps_db,n_layers,q_min\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 41);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bmdf(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(bmdf(&["figure", "fig4", "--q-db", "abc"]).status.code(), Some(2));
    assert_eq!(bmdf(&["figure", "fig99"]).status.code(), Some(2));
    assert_eq!(bmdf(&["sweep", "bogus-axis", "0", "1", "5"]).status.code(), Some(2));
    assert_eq!(bmdf(&["audit", "bogus"]).status.code(), Some(2));
    assert_eq!(bmdf(&["--unknown-flag"]).status.code(), Some(2));
}

#[test]
fn validation_errors_exit_1() {
    let out = bmdf(&["oracle-check", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "one-line diagnostic, got: {err}");
    assert_eq!(bmdf(&["oracle-check", "--samples", "1"]).status.code(), Some(1));
    assert_eq!(bmdf(&["figure", "fig4", "--tol", "-1"]).status.code(), Some(1));
}

#[test]
fn config_file_defaults_and_flag_override() {
    let dir = std::env::temp_dir();
    let path = dir.join("bmdf_cli_test_config.txt");
    std::fs::write(&path, "ps-db = 12 # source power\nlayers = 2\n").unwrap();
    let cfg = path.to_str().unwrap();
    let from_file = stdout(&["thresholds", "--config", cfg]);
    assert!(from_file.contains("q_min_2,"), "layers from config applied:\n{from_file}");
    let overridden = stdout(&["thresholds", "--config", cfg, "--ps-db", "3"]);
    let q_min = |text: &str| -> f64 {
        text.lines()
            .find(|l| l.starts_with("q_min_1,"))
            .and_then(|l| l.split(',').nth(1))
            .unwrap()
            .parse()
            .unwrap()
    };
    // Lower power means a larger minimal gain: the flag took precedence.
    assert!(q_min(&overridden) > q_min(&from_file));
    std::fs::remove_file(&path).ok();
}

#[test]
fn config_axis_range_keys_and_unknown_key_rejection() {
    let dir = std::env::temp_dir();
    let path = dir.join("bmdf_cli_test_axis.txt");
    std::fs::write(&path, "from = 9\nto = 12\npoints = 2\n").unwrap();
    let text = stdout(&["figure", "fig3", "--config", path.to_str().unwrap(), "--out", "-"]);
    assert_eq!(text.lines().count(), 3, "two data rows expected:\n{text}");
    assert!(text.lines().nth(1).unwrap().starts_with("9,"));
    std::fs::write(&path, "nonsense = 1\n").unwrap();
    let out = bmdf(&["thresholds", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_file(&path).ok();
}

#[test]
fn out_file_and_env_dir() {
    let dir = std::env::temp_dir().join("bmdf_cli_out_test");
    std::fs::create_dir_all(&dir).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bmdf"))
        .args(["thresholds", "--out", "t.csv"])
        .env("BMDF_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let written = std::fs::read_to_string(dir.join("t.csv")).unwrap();
    assert!(written.starts_with("quantity,value\n"));
    let piped = stdout(&["thresholds", "--out", "-"]);
    assert_eq!(written, piped);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn audit_reports_pass() {
    let out = bmdf(&["audit", "conjecture1", "--ps-db", "10", "--pr-db", "10", "--q-db", "20"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().starts_with("overall,,1"));

    let out = bmdf(&["audit", "unimodality", "--ps-db", "6", "--pr-db", "3"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("unimodal,,1"));
}
