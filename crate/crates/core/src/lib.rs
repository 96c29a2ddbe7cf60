//! Simulation and analysis of the two-site Jaynes-Cummings-Hubbard dimer
//! (photonic Josephson junction): Lindblad and unitary quantum dynamics,
//! factorized mean-field dynamics, and characterization of the photon
//! self-trapping transition.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod integrator;
pub mod model;
pub mod semiclassical;
pub mod sparse;
pub mod state;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
