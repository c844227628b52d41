use geomrep::env::{generate_dataset, WorldConfig};

#[test]
#[ignore]
fn midpoint_bias_oracle() {
    let cfg = WorldConfig::default_sprites();
    let (_, truth, rep) = generate_dataset(&cfg, 10_000, 7).unwrap();
    let mut acc = 0.0;
    let mut n = 0;
    for r in &truth.records {
        if r.interacted {
            let mid = r.s.s_int.add(&r.action.scale(0.5));
            acc += mid.dist_sq(&r.s.s_ext);
            n += 1;
        }
    }
    println!(
        "contacts {n} fraction {:.4} mean midpoint offset^2 {:.4}",
        rep.interaction_fraction,
        acc / n as f64
    );
}
