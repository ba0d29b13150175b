use std::path::Path;
use std::process::{Command, Output};

use isac_sim::checkpoint::Checkpoint;
use isac_sim::results::read_csv;

const FAST: [&str; 6] = [
    "--set",
    "train_set_size=200",
    "--set",
    "max_iterations=100",
    "--set",
    "realizations=40",
];

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isac-sim"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .unwrap()
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "seed = 3\nrealisations = 10\n").unwrap();
    let out = run(dir.path(), &["gradcheck", "--trials", "1", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("realisations"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "seed = 5\ntrain_set_size = 1000\nwindow = 4\n").unwrap();
    let out = run(
        dir.path(),
        &["gen-data", "--config", cfg.to_str().unwrap(), "--seed", "9", "--set", "train_set_size=12"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("gen-data.manifest.txt")).unwrap();
    assert!(manifest.contains("\nseed = 9\n"));
    assert!(manifest.contains("train_set_size = 12\n"));
    let data = std::fs::read_to_string(dir.path().join("dataset.csv")).unwrap();
    let mut lines = data.lines();
    assert_eq!(lines.next().unwrap(), "example,vehicle,label,lag0,lag1,lag2,lag3");
    assert_eq!(lines.count(), 12 * 8);
}

#[test]
fn paper_scale_flag_sets_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["gradcheck", "--trials", "1", "--paper-scale"]);
    assert!(out.status.success());
    let out = run(dir.path(), &["gen-data", "--paper-scale", "--set", "train_set_size=3"]);
    assert!(out.status.success());
    let manifest = std::fs::read_to_string(dir.path().join("gen-data.manifest.txt")).unwrap();
    assert!(manifest.contains("realizations = 2000\n"));
    assert!(manifest.contains("train_set_size = 3\n"));
}

#[test]
fn train_then_evaluate_and_sweep_power_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--nmse", "0.3"];
    args.extend(FAST);
    let out = run(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = dir.path().join("clrnet_nmse0.3.ckpt");
    let ck = Checkpoint::load(&ckpt).unwrap();
    assert_eq!(ck.meta.nmse, vec![0.3]);
    assert_eq!(ck.meta.iterations, 100);
    let trace = std::fs::read_to_string(dir.path().join("clrnet_nmse0.3.trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 101);

    let mut args = vec!["eval", "--nmse", "0.3", "--power-dbm", "15", "--checkpoint", ckpt.to_str().unwrap()];
    args.extend(FAST);
    let out = run(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(std::fs::File::open(dir.path().join("eval.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.power_dbm == 15.0 && r.nmse == 0.3 && r.realizations == 40));
    assert!(dir.path().join("eval.config").exists());

    let mut args = vec!["sweep-power", "--checkpoint", ckpt.to_str().unwrap()];
    args.extend(FAST);
    let out = run(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(std::fs::File::open(dir.path().join("sweep_power.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 18);
    let config = std::fs::read_to_string(dir.path().join("sweep_power.config")).unwrap();
    assert!(config.contains("power_grid_dbm = 0,5,10,15,20,25\n"));
}

#[test]
fn checkpoint_with_other_architecture_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--set", "window=3"];
    args.extend(FAST);
    assert!(run(dir.path(), &args).status.success());
    let ckpt = dir.path().join("clrnet_nmse0.7.ckpt");
    let mut args = vec!["eval", "--checkpoint", ckpt.to_str().unwrap()];
    args.extend(FAST);
    let out = run(dir.path(), &args);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("architecture"));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["gradcheck", "--trials", "3"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("worst"));
}
