//! Block-structured KAM iteration for clustered Hamiltonian lattices.
//!
//! The crate works on finite truncations of lattices whose modes split
//! into energy clusters. Hamiltonians are stored as Fourier jets in the
//! angles, quadratic forms are block matrices over cluster pairs, and one
//! KAM step solves the homological equation blockwise and transports the
//! perturbation along the Lie series of the generator.
//!
//! Two concrete models ship with the crate: Klein-Gordon on the sphere and
//! the two-dimensional quantum harmonic oscillator.

pub mod apps;
pub mod blockmat;
pub mod eig;
pub mod error;
pub mod fixtures;
pub mod flows;
pub mod fourier;
pub mod homo;
pub mod jets;
pub mod kam;
pub mod lattice;
pub mod modes;
pub mod poly;
pub mod quad;

pub use error::{KamError, Result};

pub type C64 = num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
