//! Spectral Galerkin simulation of a slow-fast stochastic real
//! Ginzburg-Landau system on the torus driven by cylindrical symmetric
//! α-stable noise, together with the averaged equation it converges to.

// `!(v > 0.0)` is how argument checks reject NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod config;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod io;
pub mod noise;
pub mod parallel;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod stats;

pub use averaging::{AveragedConfig, FbarEstimate, FbarMode, FrozenConfig};
pub use config::{Switches, SystemConfig};
pub use coupling::{Coupling, CouplingPreset};
pub use error::{Error, Result};
pub use experiments::{ErrorTable, StudyConfig};
pub use noise::NoiseSpectrum;
pub use parallel::Executor;
pub use sim::{Component, Trajectory};
pub use spectral::SpectralField;
