//! Class-imbalance mitigation for binary failure detection on optical-network
//! telemetry.
//!
//! The crate is organised around the three places an imbalance fix can live:
//!
//! - [`resample`] and [`genmodel`] transform the training fold before learning,
//! - [`adapt`] changes how the model is learned,
//! - [`decide`] changes how a trained model's probabilities become labels.
//!
//! [`forest`] is the random-forest baseline every technique wraps, [`dataset`]
//! holds the data model, CSV I/O and a synthetic testbed generator, and
//! [`bench`] is the repeated-run evaluation harness behind the `bench` CLI.

pub mod adapt;
pub mod bench;
pub mod dataset;
pub mod decide;
mod error;
pub mod forest;
pub mod genmodel;
mod matrix;
pub mod model;
pub mod resample;
mod rng;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::derive_seed;
