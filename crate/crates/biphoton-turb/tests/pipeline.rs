//! End-to-end tests of the command-line interface and the dataset contract.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_biphoton-turb"))
}

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("biphoton-turb-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn sweep_writes_deterministic_csv() {
    let out1 = temp_path("sweep1.csv");
    let out2 = temp_path("sweep2.csv");
    for out in [&out1, &out2] {
        let status = bin()
            .args([
                "sweep",
                "--q",
                "1",
                "--scenario",
                "uncorrelated",
                "--K",
                "1,10",
                "--W",
                "0:2:5",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(&out1).unwrap();
    let b = fs::read(&out2).unwrap();
    assert_eq!(a, b, "identical configs must produce byte-identical CSV");
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,q,K,W,t,concurrence,clamped"
    );
    // 2 K values x 5 W values.
    assert_eq!(lines.count(), 10);
    // W = 0 rows have concurrence 1.
    let first = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields[0], "uncorrelated");
    assert_eq!(fields[1], "1");
    let c: f64 = fields[5].parse().unwrap();
    assert!((c - 1.0).abs() < 1e-9);
    fs::remove_file(out1).ok();
    fs::remove_file(out2).ok();
}

#[test]
fn sweep_reads_config_file_with_flag_override() {
    let cfg = temp_path("sweep.cfg");
    let out = temp_path("sweep-cfg.csv");
    fs::write(
        &cfg,
        "# dataset setup\nscenario = sps-uncorrelated\nq = 2\nW = 0:2:5\n",
    )
    .unwrap();
    let status = bin()
        .args([
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--q",
            "1", // overrides the file
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    let row = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "sps-uncorrelated");
    assert_eq!(fields[1], "1");
    // sps rows leave K and t empty.
    assert_eq!(fields[2], "");
    assert_eq!(fields[4], "");
    fs::remove_file(cfg).ok();
    fs::remove_file(out).ok();
}

#[test]
fn config_errors_exit_with_code_2() {
    let out = bin()
        .args(["sweep", "--scenario", "nonsense", "--out", "/dev/null"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown scenario"));

    let out = bin()
        .args([
            "params", "--cn2", "-1", "--lambda", "633e-9", "--waist", "0.01", "--z", "1e3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn params_report_contains_all_scales() {
    let out = bin()
        .args([
            "params", "--cn2", "1e-14", "--lambda", "633e-9", "--waist", "0.01", "--z", "1e3",
            "--L", "0.003", "--no", "1.8",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in [
        "Cn^2",
        "lambda",
        "waist",
        "distance",
        "k ",
        "r0",
        "W = w0/r0",
        "K ",
        "t = z/zR",
        "sigma_R^2",
        "zeta",
        "beta",
        "Rytov cross-check",
    ] {
        assert!(
            text.contains(needle),
            "missing '{needle}' in report:\n{text}"
        );
    }
    // Inputs echoed verbatim.
    assert!(text.contains("1e-14"));
    // The reference point: r0 = 2.684455e-2 m.
    assert!(text.contains("2.684455e-2"));
}

#[test]
fn verify_subcommand_passes() {
    let out = bin().arg("verify").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "verify failed:\n{stdout}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout.contains("structure constant"));
    assert!(stdout.contains("all verification checks passed"));
}
