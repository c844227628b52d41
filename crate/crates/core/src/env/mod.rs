//! The simulated world: agent/object state, contact-gated object dynamics,
//! injective emission maps, action sampling, and generation of
//! (observation, action, observation′) transition datasets.

mod config;
mod dataset;
mod emit;
mod io;
mod step;

pub use config::{Dynamics, EmissionSpec, WorldConfig, WorldState};
pub use dataset::{
    generate_dataset, generate_dataset_chunked, ground_truth_labels, Dataset, GenReport,
    TruthRecord, TruthSidecar,
};
pub use emit::Emitter;
pub use io::{load_dataset, load_truth, save_dataset, DATASET_MANIFEST, DATASET_RECORDS, DATASET_TRUTH};
pub use step::{body_pose, sample_action, sample_state, step};

use crate::geom::GeomError;
use crate::textio::TextError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid action {action:?} from {position:?}: leaves the agent space")]
    InvalidAction { position: String, action: String },
    #[error("invalid config field {field}: {msg}")]
    InvalidConfig { field: &'static str, msg: String },
    #[error("truth sidecar not found at {0}")]
    MissingTruth(String),
    #[error("corrupt dataset: {0}")]
    BadData(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
