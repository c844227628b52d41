//! Learning geometric latent representations of an agent and an interactable
//! object from `(observation, action, observation')` transition triples,
//! supervised by the agent's actions alone.
//!
//! The crate is organized around the pipeline:
//!
//! * [`geom`] — exact small-dimension geometry and Gaussian algebra,
//! * [`env`] — the simulated world, emission maps and dataset generation,
//! * [`diff`] — a minimal dense-network reverse-mode engine with Adam,
//! * [`repr`] — encoders, losses, the Otsu interaction split and training,
//! * [`eval`] — metrics (relative-position error, translation fit,
//!   interaction accuracy, orientation error) and theorem-condition checks,
//! * [`presets`] — canned desk-scale experiment configurations.

pub mod diff;
pub mod env;
pub mod eval;
pub mod geom;
pub mod presets;
pub mod repr;
pub mod textio;
