//! Semiclassical continuum model of a twisted TMD bilayer: the matrix-valued moiré
//! potential, its plane-wave Bloch bands, single-well spectra, harmonic approximation,
//! band topology, Agmon distances and flat-band scans.

pub mod agmon;
pub mod blochpw;
pub mod error;
pub mod harmonic;
pub mod lattice;
pub mod linalg;
pub mod potential;
pub mod scan;
pub mod singlewell;
pub mod topology;

pub use error::{Error, Result};
pub use lattice::{build_lattice, Lattice, Vec2};
pub use potential::{EigMode, ModelParams};
