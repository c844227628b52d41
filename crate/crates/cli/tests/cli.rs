//! End-to-end checks of the command-line driver on tiny smoke-scale
//! configs: file formats, determinism, the truth-sidecar boundary, and the
//! documented CSV schemas.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geomrep"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("geomrep_cli_{tag}"));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// A tiny smoke experiment: identity emission, 200 records, 2 epochs.
fn smoke_config(dir: &Path) -> PathBuf {
    let text = "\
[experiment]
name = smoke
dataset_size = 200
eval_size = 50
seed = 11

[world]
n = 2
body = disc
body_radius = 0.12
dynamics = uniform_teleport
contact_eps = 0
max_step = 0.3
emission = identity

[train]
epochs = 2
batch_size = 32
lr = 0.001
mc_samples = 4
kl_mode = forward
warmup_epochs = 1
seed = 3
mode = stochastic
hidden = 16
activation = relu
contrastive_dim = 8
";
    let path = dir.join("config.txt");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn generate_writes_expected_files_deterministically() {
    let dir = temp_dir("generate");
    let config = smoke_config(&dir);
    for out in ["a", "b"] {
        let status = bin()
            .args(["generate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    // Record file size = N × (2·obs_dim + n) × 4 bytes; identity emission
    // on a disc world has obs_dim = 4.
    let records = fs::metadata(dir.join("a/records.bin")).unwrap().len();
    assert_eq!(records as usize, 200 * (2 * 4 + 2) * 4);
    for name in ["manifest.txt", "records.bin", "truth.bin"] {
        assert_eq!(
            fs::read(dir.join("a").join(name)).unwrap(),
            fs::read(dir.join("b").join(name)).unwrap(),
            "{name} differs between reruns"
        );
    }
    let manifest = fs::read_to_string(dir.join("a/manifest.txt")).unwrap();
    assert!(manifest.contains("records = 200"));
    assert!(manifest.contains("interaction_fraction ="));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn seed_override_changes_dataset() {
    let dir = temp_dir("seed_override");
    let config = smoke_config(&dir);
    for (out, seed) in [("a", "11"), ("b", "12")] {
        let status = bin()
            .args(["generate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.join(out))
            .args(["--seed", seed])
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_ne!(
        fs::read(dir.join("a/records.bin")).unwrap(),
        fs::read(dir.join("b/records.bin")).unwrap()
    );
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn train_eval_pipeline_and_truth_boundary() {
    let dir = temp_dir("pipeline");
    let config = smoke_config(&dir);
    let data_dir = dir.join("dataset");
    assert!(bin()
        .args(["generate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&data_dir)
        .status()
        .unwrap()
        .success());

    // Train twice with the same seed: identical checkpoints.
    let start = std::time::Instant::now();
    for out in ["run1", "run2"] {
        assert!(bin()
            .args(["train", "--config"])
            .arg(&config)
            .arg("--dataset")
            .arg(&data_dir)
            .arg("--out")
            .arg(dir.join(out))
            .status()
            .unwrap()
            .success());
    }
    assert!(start.elapsed().as_secs() < 20, "smoke training too slow");
    assert_eq!(
        fs::read(dir.join("run1/checkpoint.bin")).unwrap(),
        fs::read(dir.join("run2/checkpoint.bin")).unwrap()
    );
    let metrics = fs::read_to_string(dir.join("run1/metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(
        lines[0],
        "epoch,loss_int,loss_ext,loss_cont,otsu_threshold,cplus_fraction"
    );
    assert_eq!(lines.len(), 3); // header + 2 epochs

    // Evaluate with truth present.
    assert!(bin()
        .args(["eval", "--checkpoint"])
        .arg(dir.join("run1/checkpoint"))
        .arg("--dataset")
        .arg(&data_dir)
        .arg("--out")
        .arg(dir.join("eval1"))
        .status()
        .unwrap()
        .success());
    let report_csv = fs::read_to_string(dir.join("eval1/report.csv")).unwrap();
    assert_eq!(
        report_csv.lines().next().unwrap(),
        "records,l_test,translation_residual_p95,otsu_accuracy,orientation_error_deg,viol_equivariance,viol_injectivity,viol_condition3"
    );
    let latents = fs::read_to_string(dir.join("eval1/latents.csv")).unwrap();
    assert_eq!(latents.lines().count(), 201); // header + one row per record
    let report = fs::read_to_string(dir.join("eval1/report.txt")).unwrap();
    assert!(report.contains("l_test ="));
    assert!(report.contains("tol_cond3 ="));

    // Delete the truth sidecar: training must still work (it never reads
    // it), evaluation degrades gracefully.
    fs::remove_file(data_dir.join("truth.bin")).unwrap();
    assert!(bin()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--dataset")
        .arg(&data_dir)
        .arg("--out")
        .arg(dir.join("run3"))
        .status()
        .unwrap()
        .success());
    assert_eq!(
        fs::read(dir.join("run1/checkpoint.bin")).unwrap(),
        fs::read(dir.join("run3/checkpoint.bin")).unwrap(),
        "truth sidecar must not influence training"
    );
    let output = bin()
        .args(["eval", "--checkpoint"])
        .arg(dir.join("run1/checkpoint"))
        .arg("--dataset")
        .arg(&data_dir)
        .arg("--out")
        .arg(dir.join("eval2"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("truth sidecar missing"), "{stderr}");
    let report = fs::read_to_string(dir.join("eval2/report.txt")).unwrap();
    assert!(!report.contains("l_test ="));
    assert!(report.contains("viol_equivariance ="));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn eval_rejects_dimension_mismatch() {
    let dir = temp_dir("dim_mismatch");
    let config = smoke_config(&dir);
    let data_dir = dir.join("dataset");
    assert!(bin()
        .args(["generate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&data_dir)
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--dataset")
        .arg(&data_dir)
        .arg("--out")
        .arg(dir.join("run"))
        .status()
        .unwrap()
        .success());
    // A scrambled dataset has 16-dim observations; the checkpoint expects 4.
    let scrambled_dir = dir.join("scrambled");
    assert!(bin()
        .args(["generate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&scrambled_dir)
        .args(["--emission", "scrambled"])
        .status()
        .unwrap()
        .success());
    let output = bin()
        .args(["eval", "--checkpoint"])
        .arg(dir.join("run/checkpoint"))
        .arg("--dataset")
        .arg(&scrambled_dir)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("dimension mismatch"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn train_rejects_config_dataset_mismatch() {
    let dir = temp_dir("train_mismatch");
    let config = smoke_config(&dir);
    let data_dir = dir.join("dataset");
    assert!(bin()
        .args(["generate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&data_dir)
        .args(["--emission", "scrambled"])
        .status()
        .unwrap()
        .success());
    let output = bin()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--dataset")
        .arg(&data_dir)
        .arg("--out")
        .arg(dir.join("run"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("dimension mismatch"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn reproduce_rejects_unknown_preset_listing_names() {
    let output = bin().args(["reproduce", "nonsense"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    for name in ["sprites", "sprites-background", "sprites-anisotropic"] {
        assert!(stderr.contains(name), "{stderr}");
    }
}

/// A miniature anisotropic pipeline: the report must carry an orientation
/// error entry (preset wiring for the rotating-box variant).
#[test]
fn anisotropic_pipeline_reports_orientation() {
    let dir = temp_dir("aniso");
    let text = "\
[experiment]
name = aniso-smoke
dataset_size = 150
eval_size = 40
seed = 5

[world]
n = 2
body = box
body_half_extents = 0.16,0.03
dynamics = uniform_teleport
contact_eps = 0
max_step = 0.3
emission = raster-aniso
resolution = 12

[train]
epochs = 1
batch_size = 32
lr = 0.001
mc_samples = 2
kl_mode = forward
warmup_epochs = 0
seed = 3
mode = stochastic
hidden = 8
activation = relu
contrastive_dim = 4
";
    let config = dir.join("config.txt");
    fs::write(&config, text).unwrap();
    let data_dir = dir.join("dataset");
    assert!(bin()
        .args(["generate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&data_dir)
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--dataset")
        .arg(&data_dir)
        .arg("--out")
        .arg(dir.join("run"))
        .status()
        .unwrap()
        .success());
    let output = bin()
        .args(["eval", "--checkpoint"])
        .arg(dir.join("run/checkpoint"))
        .arg("--dataset")
        .arg(&data_dir)
        .arg("--out")
        .arg(dir.join("eval"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let report = fs::read_to_string(dir.join("eval/report.txt")).unwrap();
    assert!(
        report.contains("orientation_error_deg ="),
        "missing orientation entry:\n{report}"
    );
    fs::remove_dir_all(&dir).ok();
}
