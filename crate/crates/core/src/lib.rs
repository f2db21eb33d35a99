//! Simulation and in-silico training of wave-based physical neural networks
//! built from a programmable metasurface inside a reverberant cavity.

pub mod analysis;
pub mod cavity;
pub mod encoding;
pub mod experiment;
pub mod error;
pub mod interchange;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod scattering;
pub mod tasks;
pub mod timegate;
pub mod training;

pub use error::{Result, WpnnError};
pub use linalg::C64;
