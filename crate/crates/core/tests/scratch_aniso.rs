// Temporary probe of the anisotropic rotating-box variant. Superseded by
// the acceptance suite.

use geomrep::env::generate_dataset;
use geomrep::eval::{l_test, orientation_error_deg, EncodedSet};
use geomrep::presets::preset;
use geomrep::repr::{train_with, LossMode, TrainOptions};

#[test]
#[ignore]
fn probe_anisotropic_training() {
    let mut exp = preset("sprites-anisotropic").unwrap();
    if let Some(e) = std::env::var("PROBE_EPOCHS").ok().and_then(|v| v.parse().ok()) {
        exp.train.epochs = e;
    }
    if let Some(s) = std::env::var("PROBE_STEP").ok().and_then(|v| v.parse().ok()) {
        exp.world.max_step = s;
    }
    if let Some(r) = std::env::var("PROBE_RES").ok().and_then(|v| v.parse().ok()) {
        exp.world.emission = geomrep::env::EmissionSpec::RasterAnisotropic { resolution: r };
    }
    if std::env::var("PROBE_SYM").is_ok() {
        exp.train.kl_mode = geomrep::repr::KlMode::Symmetric;
    }
    if let Ok(he) = std::env::var("PROBE_BOX") {
        let vals: Vec<f64> = he.split(',').map(|s| s.parse().unwrap()).collect();
        exp.world.body = geomrep::geom::Body::Box {
            half_extents: geomrep::geom::PointN::from_xy(vals[0], vals[1]),
        };
    }
    if let Some(k) = std::env::var("PROBE_MC").ok().and_then(|v| v.parse().ok()) {
        exp.train.mc_samples = k;
    }
    if std::env::var("PROBE_PUSH").is_ok() {
        exp.world.dynamics = geomrep::env::Dynamics::PushRoll { friction: 1.0 };
    }
    if std::env::var("PROBE_CONV").is_ok() {
        let res = match exp.world.emission {
            geomrep::env::EmissionSpec::RasterAnisotropic { resolution } => resolution,
            _ => 32,
        };
        exp.train.conv = Some(geomrep::diff::ConvSpec {
            in_h: res,
            in_w: res,
            in_ch: 3,
            out_ch: 8,
            kernel: 5,
            stride: 2,
        });
    }
    let (data, _, report) =
        generate_dataset(&exp.world, exp.dataset_size, exp.data_seed()).unwrap();
    println!("interaction fraction: {:.4}", report.interaction_fraction);
    let (eval_data, eval_truth, _) =
        generate_dataset(&exp.world, exp.eval_size, exp.eval_seed()).unwrap();

    let t0 = std::time::Instant::now();
    let out = train_with(
        &data,
        &exp.train,
        TrainOptions {
            snapshot_epochs: vec![],
            epoch_hook: Some(Box::new(|epoch, enc| {
                if epoch % 5 != 0 && epoch != 1 {
                    return;
                }
                let encoded = EncodedSet::from_encoders(enc, &eval_data).unwrap();
                let lt = l_test(&encoded, &eval_truth).unwrap();
                let ori = orientation_error_deg(&encoded, &eval_truth, LossMode::Stochastic)
                    .map(|v| format!("{v:.2}"))
                    .unwrap_or_else(|e| format!("err: {e}"));
                println!("epoch {epoch:3}  l_test {lt:.5}  orientation_deg {ori}");
            })),
        },
    )
    .unwrap();
    println!("elapsed: {:.1}s", t0.elapsed().as_secs_f64());

    // Inspect the learned covariance structure on a few eval samples.
    let encoded = EncodedSet::from_encoders(&out.encoders, &eval_data).unwrap();
    for i in (0..eval_truth.len()).step_by(eval_truth.len() / 15) {
        let rec = &eval_truth.records[i];
        let axes = geomrep::geom::principal_axes(&encoded.z_ext[i]);
        let axis = axes.rotation.column(0);
        let enc_angle = axis.get(1).atan2(axis.get(0)).rem_euclid(std::f64::consts::PI);
        println!(
            "theta {:6.1}°  enc_axis {:6.1}°  scales ({:.3}, {:.3})  ratio {:.2}",
            rec.s.orientation.unwrap().to_degrees(),
            enc_angle.to_degrees(),
            axes.scales[0],
            axes.scales[1],
            axes.scales[0] / axes.scales[1]
        );
    }
}
