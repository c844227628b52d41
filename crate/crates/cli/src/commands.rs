use anyhow::{anyhow, bail, Context, Result};
use geomrep::env::{
    generate_dataset, load_dataset, load_truth, save_dataset, EmissionSpec, EnvError, WorldConfig,
};
use geomrep::eval::{
    append_report_csv, evaluate, write_latent_dump, write_report_text, EncodedSet, EvalReport,
};
use geomrep::presets::{preset, Experiment, PRESET_NAMES};
use geomrep::repr::{
    load_checkpoint, save_checkpoint, train_with, EpochMetrics, LossMode, TrainOptions,
};
use geomrep::textio::{write_atomic, Doc};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn default_out(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from("geomrep-out"))
}

/// Resolve an --emission flag against the current world (reusing its seeds
/// and dimension where sensible).
fn emission_from_flag(name: &str, world: &WorldConfig) -> Result<EmissionSpec> {
    let spec = match name {
        "identity" => EmissionSpec::Identity,
        "scrambled" => EmissionSpec::Scrambled {
            seed: 1001,
            out_dim: 16.max(2 * world.n),
            hidden: vec![],
        },
        "raster" => EmissionSpec::Raster {
            resolution: 32,
            channels: 3,
            background_seed: None,
        },
        "raster-bg" => EmissionSpec::Raster {
            resolution: 32,
            channels: 3,
            background_seed: Some(2002),
        },
        "raster-aniso" => EmissionSpec::RasterAnisotropic { resolution: 32 },
        other => bail!(
            "unknown emission {other:?}; valid: identity, scrambled, raster, raster-bg, raster-aniso"
        ),
    };
    Ok(spec)
}

fn load_experiment(config: &Path) -> Result<Experiment> {
    let doc = Doc::read(config)
        .with_context(|| format!("reading config {}", config.display()))?;
    Experiment::from_doc(&doc).map_err(|e| anyhow!("{}: {e}", config.display()))
}

pub fn generate(
    config: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    emission: Option<&str>,
) -> Result<()> {
    let mut exp = load_experiment(config)?;
    if let Some(seed) = seed {
        exp = exp.with_seed(seed);
    }
    if let Some(name) = emission {
        exp.world.emission = emission_from_flag(name, &exp.world)?;
        exp.world.validate().map_err(|e| anyhow!("{e}"))?;
    }
    let out = default_out(out);
    let (data, truth, report) = generate_dataset(&exp.world, exp.dataset_size, exp.data_seed())?;
    save_dataset(&out, &exp.world, &data, &truth, &report, exp.data_seed())?;
    println!(
        "wrote {} records to {} (interaction fraction {:.4})",
        report.records,
        out.display(),
        report.interaction_fraction
    );
    Ok(())
}

pub fn train(
    config: &Path,
    dataset: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    mode: Option<&str>,
) -> Result<()> {
    let mut exp = load_experiment(config)?;
    if let Some(seed) = seed {
        exp = exp.with_seed(seed);
    }
    if let Some(mode) = mode {
        exp.train.mode =
            LossMode::parse(mode).ok_or_else(|| anyhow!("unknown mode {mode:?}"))?;
    }
    // Training reads only the records and manifest — never the truth
    // sidecar, which may not even exist.
    let (data, manifest) = load_dataset(dataset)?;
    let config_dim = exp.world.obs_dim();
    if config_dim != data.obs_dim {
        bail!(
            "dimension mismatch: config emission yields {config_dim}-dim observations, dataset manifest says {}",
            data.obs_dim
        );
    }
    let _ = manifest;

    let out = default_out(out);
    std::fs::create_dir_all(&out)?;
    let outcome = train_with(&data, &exp.train, TrainOptions::default())?;
    save_checkpoint(&out.join("checkpoint"), &outcome.encoders, &exp.train, exp.train.epochs)?;
    write_metrics_csv(&out.join("metrics.csv"), &outcome.metrics)?;
    let last = outcome.metrics.last().expect("at least one epoch");
    println!(
        "trained {} epochs; final L_int {:.5} L_ext {:.5} L_cont {:.5}; checkpoint at {}",
        exp.train.epochs,
        last.loss_int,
        last.loss_ext,
        last.loss_cont,
        out.join("checkpoint").display()
    );
    Ok(())
}

fn write_metrics_csv(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    let mut csv = String::from(EpochMetrics::CSV_HEADER);
    csv.push('\n');
    for m in metrics {
        csv.push_str(&m.csv_row());
        csv.push('\n');
    }
    write_atomic(path, csv.as_bytes())?;
    Ok(())
}

pub fn eval(checkpoint: &Path, dataset: &Path, out: Option<PathBuf>) -> Result<()> {
    let (enc, meta) = load_checkpoint(checkpoint)?;
    let (data, _) = load_dataset(dataset)?;
    if data.obs_dim != enc.obs_dim() {
        bail!(
            "dimension mismatch: checkpoint expects {}-dim observations, dataset provides {}",
            enc.obs_dim(),
            data.obs_dim
        );
    }
    let truth = match load_truth(dataset) {
        Ok(t) => Some(t),
        Err(EnvError::MissingTruth(path)) => {
            eprintln!("warning: truth sidecar missing at {path}; l_test and accuracy omitted");
            None
        }
        Err(e) => return Err(e.into()),
    };

    let out = default_out(out);
    std::fs::create_dir_all(&out)?;
    let report = evaluate(
        &enc,
        &data,
        truth.as_ref(),
        meta.train.mode,
        Default::default(),
    )?;
    write_report_text(&out.join("report.txt"), &report)?;
    append_report_csv(&out.join("report.csv"), &report)?;
    let encoded = EncodedSet::from_encoders(&enc, &data)?;
    write_latent_dump(&out.join("latents.csv"), &encoded, truth.as_ref())?;
    print_report(&report);
    Ok(())
}

fn print_report(report: &EvalReport) {
    match report.l_test {
        Some(v) => println!("l_test = {v:.6}"),
        None => println!("l_test omitted (no ground truth)"),
    }
    if let Some(v) = report.translation_residual_p95 {
        println!("translation residual p95 = {v:.4}");
    }
    if let Some(v) = report.otsu_accuracy {
        println!("interaction classification accuracy = {v:.4}");
    }
    if let Some(v) = report.orientation_error_deg {
        println!("orientation error = {v:.2} deg");
    }
    let c = &report.condition_violations;
    println!(
        "condition violations: equivariance {} injectivity {} condition3 {}",
        c.equivariance, c.injectivity, c.condition3
    );
}

pub fn reproduce(
    name: &str,
    out: Option<PathBuf>,
    seed: Option<u64>,
    emission: Option<&str>,
    mode: Option<&str>,
) -> Result<()> {
    let Some(mut exp) = preset(name) else {
        bail!(
            "unknown preset {name:?}; valid presets: {}",
            PRESET_NAMES.join(", ")
        );
    };
    if let Some(seed) = seed {
        exp = exp.with_seed(seed);
    }
    if let Some(em) = emission {
        exp.world.emission = emission_from_flag(em, &exp.world)?;
        exp.world.validate().map_err(|e| anyhow!("{e}"))?;
    }
    if let Some(mode) = mode {
        exp.train.mode =
            LossMode::parse(mode).ok_or_else(|| anyhow!("unknown mode {mode:?}"))?;
    }
    let out = out.unwrap_or_else(|| PathBuf::from("runs").join(&exp.name));
    std::fs::create_dir_all(&out)?;
    exp.to_doc().write_atomic(&out.join("config.txt"))?;

    println!("[1/4] generating {} triples", exp.dataset_size);
    let (data, truth, gen_report) =
        generate_dataset(&exp.world, exp.dataset_size, exp.data_seed())?;
    save_dataset(&out.join("dataset"), &exp.world, &data, &truth, &gen_report, exp.data_seed())?;
    println!(
        "      interaction fraction {:.4}",
        gen_report.interaction_fraction
    );

    println!("[2/4] generating {} held-out eval triples", exp.eval_size);
    let (eval_data, eval_truth, _) =
        generate_dataset(&exp.world, exp.eval_size, exp.eval_seed())?;

    println!("[3/4] training {} epochs", exp.train.epochs);
    let mut curve: Vec<(usize, f64)> = Vec::new();
    let outcome = {
        let eval_data = &eval_data;
        let eval_truth = &eval_truth;
        let curve_ref = &mut curve;
        train_with(
            &data,
            &exp.train,
            TrainOptions {
                snapshot_epochs: vec![],
                epoch_hook: Some(Box::new(move |epoch, enc| {
                    // Evaluation-side instrumentation: track the relative-
                    // position error on the held-out set as training runs.
                    if let Ok(encoded) = EncodedSet::from_encoders(enc, eval_data) {
                        if let Ok(v) = geomrep::eval::l_test(&encoded, eval_truth) {
                            curve_ref.push((epoch, v));
                        }
                    }
                })),
            },
        )?
    };
    save_checkpoint(&out.join("checkpoint"), &outcome.encoders, &exp.train, exp.train.epochs)?;
    write_metrics_csv(&out.join("metrics.csv"), &outcome.metrics)?;
    let mut curve_csv = String::from("epoch,l_test\n");
    for (epoch, v) in &curve {
        let _ = writeln!(curve_csv, "{epoch},{v}");
    }
    write_atomic(&out.join("ltest_curve.csv"), curve_csv.as_bytes())?;

    println!("[4/4] evaluating");
    let report = evaluate(
        &outcome.encoders,
        &eval_data,
        Some(&eval_truth),
        exp.train.mode,
        exp.tolerances,
    )?;
    write_report_text(&out.join("report.txt"), &report)?;
    append_report_csv(&out.join("report.csv"), &report)?;
    let encoded = EncodedSet::from_encoders(&outcome.encoders, &eval_data)?;
    write_latent_dump(&out.join("latents.csv"), &encoded, Some(&eval_truth))?;
    print_report(&report);

    let summary = summarize(&exp, &report);
    write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

/// Compare a finished run against the preset's targets.
fn summarize(exp: &Experiment, report: &EvalReport) -> String {
    let mut s = format!("preset {} (seed {})\n", exp.name, exp.seed);
    let mut line = |label: &str, value: Option<f64>, target: Option<f64>, upper: bool| {
        match (value, target) {
            (Some(v), Some(t)) => {
                let ok = if upper { v < t } else { v >= t };
                let cmp = if upper { "<" } else { ">=" };
                let _ = writeln!(
                    s,
                    "{}: {} = {v:.6} (target {cmp} {t})",
                    if ok { "PASS" } else { "FAIL" },
                    label
                );
            }
            (Some(v), None) => {
                let _ = writeln!(s, "info: {label} = {v:.6}");
            }
            _ => {}
        }
    };
    line("l_test", report.l_test, exp.targets.l_test_max, true);
    line(
        "translation_residual_p95",
        report.translation_residual_p95,
        exp.targets.residual_p95_max,
        true,
    );
    line(
        "otsu_accuracy",
        report.otsu_accuracy,
        exp.targets.otsu_accuracy_min,
        false,
    );
    line(
        "orientation_error_deg",
        report.orientation_error_deg,
        exp.targets.orientation_deg_max,
        true,
    );
    s
}
