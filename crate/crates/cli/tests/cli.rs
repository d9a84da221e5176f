use std::path::Path;
use std::process::{Command, Output};

use jscc::eval::dataset::write_synthetic_cifar;

fn jscc(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_jscc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    out
}

fn ok(args: &[&str]) -> String {
    let out = jscc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn phy_sim_prints_one_row_per_snr() {
    let csv = ok(&["phy-sim", "--snr-list", "10,20", "--symbols", "20000", "--seed", "3"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "snr_db,ber,empirical_noise_power");
    assert_eq!(lines.len(), 3);
    let ber: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(ber[0] > ber[1]);
    assert_eq!(csv, ok(&["phy-sim", "--snr-list", "10,20", "--symbols", "20000", "--seed", "3"]));
}

#[test]
fn train_then_evaluate_a_tiny_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    std::fs::create_dir_all(&run).unwrap();
    write_synthetic_cifar(&data, 24, 12, 5).unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, "[train]\nbatch_size = 8\n").unwrap();

    let printed = ok(&[
        "train", "--config", s(&cfg), "--data-dir", s(&data), "--out-dir", s(&run),
        "--stage-epochs", "1,1,1,1", "--seed", "4",
    ]);
    assert_eq!(printed.lines().count(), 4);
    let stage4 = run.join("stage4.safetensors");
    assert!(stage4.exists());
    assert!(run.join("train_log.csv").exists());

    let eval = ok(&["eval", "--checkpoint", s(&stage4), "--data-dir", s(&data), "--snr-list", "0,15", "--seed", "1"]);
    assert_eq!(eval.lines().count(), 3);
    assert!(eval.lines().next().unwrap().starts_with("snr_db"));

    let curves = ok(&["export-curves", "--checkpoint", s(&stage4), "--data-dir", s(&data), "--snr-list", "5"]);
    assert_eq!(curves.lines().next(), Some("snr_db,psnr_db,cpp"));

    let out = dir.path().join("buckets.csv");
    ok(&[
        "entropy-analysis", "--checkpoint", s(&stage4), "--data-dir", s(&data), "--buckets", "4", "--out", s(&out),
    ]);
    let buckets = std::fs::read_to_string(&out).unwrap();
    assert_eq!(buckets.lines().count(), 3);

    let ablation = ok(&[
        "ablation", "--checkpoint-a", s(&stage4), "--checkpoint-b", s(&stage4), "--data-dir", s(&data),
        "--snr-list", "0",
    ]);
    assert_eq!(ablation.lines().count(), 3);

    // Resuming from the last boundary with nothing left to run is still a valid schedule.
    let resumed = ok(&[
        "train", "--config", s(&cfg), "--data-dir", s(&data), "--out-dir", s(&run),
        "--stage-epochs", "1,1,1,1", "--resume", s(&run.join("stage2.safetensors")), "--start-stage", "3",
    ]);
    assert_eq!(resumed.lines().count(), 2);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.safetensors");
    let out = jscc(&["eval", "--checkpoint", s(&missing), "--data-dir", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = jscc(&["train", "--data-dir", s(dir.path()), "--out-dir", s(dir.path()), "--resume", s(&missing)]);
    assert!(!out.status.success());

    let out = jscc(&["train", "--data-dir", s(dir.path()), "--out-dir", s(dir.path()), "--stage-epochs", "1,2,3"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("4 values"));
}
