//! Weak-to-strong generalization on spiked Gaussian single-index data:
//! data generation, spectral initialization, spherical gradient training
//! and the closed-form landscape quantities that go with them.

pub mod activations;
pub mod analysis;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod landscape;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod spiked;
pub mod training;

pub use activations::{make_activation, ActivationKind, ActivationSpec, GaussianMoments};
pub use error::{Error, Result};
pub use geometry::{metrics, PairMetrics, UnitVector};
pub use spiked::{build_config, Batch, SpikedConfig};
