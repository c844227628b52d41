//! Canned desk-scale experiment configurations: the plain sprites world,
//! the dynamic-background variant, and the anisotropic rotating-box
//! variant.

use crate::env::{Dynamics, EmissionSpec, WorldConfig};
use crate::eval::ConditionTolerances;
use crate::geom::{Body, PointN};
use crate::repr::{KlMode, ReprError, TrainConfig};
use crate::textio::Doc;

pub const PRESET_NAMES: [&str; 3] = ["sprites", "sprites-background", "sprites-anisotropic"];

/// Pass/fail targets a finished run is compared against in the summary.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Targets {
    pub l_test_max: Option<f64>,
    pub residual_p95_max: Option<f64>,
    pub otsu_accuracy_min: Option<f64>,
    pub orientation_deg_max: Option<f64>,
}

/// A full experiment: world, training protocol, dataset sizes, seeds,
/// evaluation tolerances and summary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub world: WorldConfig,
    pub train: TrainConfig,
    pub dataset_size: usize,
    pub eval_size: usize,
    pub seed: u64,
    pub tolerances: ConditionTolerances,
    pub targets: Targets,
}

impl Experiment {
    /// Derived seed for dataset generation.
    pub fn data_seed(&self) -> u64 {
        self.seed
    }

    /// Derived seed for the held-out evaluation set.
    pub fn eval_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed.wrapping_mul(0x9e3779b9).wrapping_add(17);
        self
    }

    pub fn with_emission(mut self, emission: EmissionSpec) -> Self {
        self.world.emission = emission;
        self
    }

    pub fn to_doc(&self) -> Doc {
        let mut doc = Doc::new();
        doc.set("experiment", "name", &self.name);
        doc.set("experiment", "dataset_size", self.dataset_size);
        doc.set("experiment", "eval_size", self.eval_size);
        doc.set("experiment", "seed", self.seed);
        self.world.to_doc(&mut doc);
        self.train.to_doc(&mut doc);
        doc.set("eval", "tol_eq", self.tolerances.tol_eq);
        doc.set("eval", "tol_cond3", self.tolerances.tol_cond3);
        doc.set("eval", "tol_inj", self.tolerances.tol_inj);
        let mut set_target = |key: &str, v: Option<f64>| {
            if let Some(v) = v {
                doc.set("targets", key, v);
            }
        };
        set_target("l_test_max", self.targets.l_test_max);
        set_target("residual_p95_max", self.targets.residual_p95_max);
        set_target("otsu_accuracy_min", self.targets.otsu_accuracy_min);
        set_target("orientation_deg_max", self.targets.orientation_deg_max);
        doc
    }

    pub fn from_doc(doc: &Doc) -> Result<Self, ReprError> {
        let world = WorldConfig::from_doc(doc)
            .map_err(|e| ReprError::InvalidConfig(format!("[world] {e}")))?;
        let train = TrainConfig::from_doc(doc)?;
        let target = |key: &str| doc.get("targets", key).and_then(|v| v.parse().ok());
        let tol = |key: &str, default: f64| {
            doc.get("eval", key)
                .and_then(|v| v.parse().ok())
                .unwrap_or(default)
        };
        let defaults = ConditionTolerances::default();
        Ok(Self {
            name: doc
                .get("experiment", "name")
                .unwrap_or("custom")
                .to_string(),
            world,
            train,
            dataset_size: doc.parse_value("experiment", "dataset_size")?,
            eval_size: doc.parse_value("experiment", "eval_size")?,
            seed: doc.parse_value("experiment", "seed")?,
            tolerances: ConditionTolerances {
                tol_eq: tol("tol_eq", defaults.tol_eq),
                tol_cond3: tol("tol_cond3", defaults.tol_cond3),
                tol_inj: tol("tol_inj", defaults.tol_inj),
            },
            targets: Targets {
                l_test_max: target("l_test_max"),
                residual_p95_max: target("residual_p95_max"),
                otsu_accuracy_min: target("otsu_accuracy_min"),
                orientation_deg_max: target("orientation_deg_max"),
            },
        })
    }
}

/// Look up a named preset. Unknown names return None; the valid names are
/// in [`PRESET_NAMES`].
pub fn preset(name: &str) -> Option<Experiment> {
    match name {
        "sprites" => Some(sprites()),
        "sprites-background" => Some(sprites_background()),
        "sprites-anisotropic" => Some(sprites_anisotropic()),
        _ => None,
    }
}

/// Vanilla variant: disc object teleporting on contact, compact scrambled
/// observations, the full default training protocol.
fn sprites() -> Experiment {
    Experiment {
        name: "sprites".into(),
        world: WorldConfig {
            n: 2,
            body: Body::Disc { radius: 0.12 },
            dynamics: Dynamics::UniformTeleport,
            emission: EmissionSpec::Scrambled {
                seed: 1001,
                out_dim: 16,
                hidden: vec![],
            },
            contact_eps: 0.0,
            max_step: 0.3,
        },
        train: TrainConfig::default(),
        dataset_size: 10_000,
        eval_size: 1_000,
        seed: 7,
        tolerances: ConditionTolerances::default(),
        targets: Targets {
            l_test_max: Some(0.01),
            residual_p95_max: Some(0.05),
            otsu_accuracy_min: Some(0.95),
            orientation_deg_max: None,
        },
    }
}

/// Dynamic-background variant: 32×32 raster images with a distractor layer
/// that translates with the agent. Compute-heavier, so a leaner network and
/// fewer epochs.
fn sprites_background() -> Experiment {
    Experiment {
        name: "sprites-background".into(),
        world: WorldConfig {
            n: 2,
            body: Body::Disc { radius: 0.12 },
            dynamics: Dynamics::UniformTeleport,
            emission: EmissionSpec::Raster {
                resolution: 32,
                channels: 3,
                background_seed: Some(2002),
            },
            contact_eps: 0.0,
            max_step: 0.3,
        },
        train: TrainConfig {
            epochs: 60,
            hidden: vec![48, 32],
            ..TrainConfig::default()
        },
        dataset_size: 10_000,
        eval_size: 1_000,
        seed: 7,
        tolerances: ConditionTolerances::default(),
        targets: Targets {
            l_test_max: Some(0.02),
            residual_p95_max: None,
            otsu_accuracy_min: None,
            orientation_deg_max: None,
        },
    }
}

/// Anisotropic variant: an elongated box that rotates when pushed, rendered
/// at 32×32; the stochastic covariance should align with the body. Pushing
/// (rather than teleporting) keeps consecutive poses correlated, which is
/// what lets the covariance accumulate direction information at this scale;
/// the symmetric KL strengthens its frame-to-frame consistency.
fn sprites_anisotropic() -> Experiment {
    Experiment {
        name: "sprites-anisotropic".into(),
        world: WorldConfig {
            n: 2,
            body: Body::Box {
                half_extents: PointN::from_xy(0.22, 0.035),
            },
            dynamics: Dynamics::PushRoll { friction: 1.0 },
            emission: EmissionSpec::RasterAnisotropic { resolution: 32 },
            contact_eps: 0.0,
            max_step: 0.22,
        },
        train: TrainConfig {
            epochs: 100,
            hidden: vec![48, 32],
            mc_samples: 8,
            kl_mode: KlMode::Symmetric,
            ..TrainConfig::default()
        },
        dataset_size: 10_000,
        eval_size: 1_000,
        seed: 7,
        tolerances: ConditionTolerances::default(),
        targets: Targets {
            l_test_max: None,
            residual_p95_max: None,
            otsu_accuracy_min: None,
            orientation_deg_max: Some(15.0),
        },
    }
}
