//! Return statistics of monitored discrete-time unitary dynamics.
//!
//! The crate links three descriptions of the same object: the spectral
//! measure `mu` of a unitary with respect to a state, its Schur function `f`,
//! and the first-detection amplitudes `a_n` of the monitored evolution. The
//! generating identity `sum a_n z^n = z conj(f(conj z))` ties them together.

pub mod cmv;
pub mod config;
pub mod error;
pub mod fourier;
pub mod measure;
pub mod monitored;
pub mod poly;
pub mod quadrature;
pub mod renewal;
pub mod schur;

pub use config::Tolerances;
pub use error::{Error, ErrorKind, Result};
pub use measure::{Atom, UnitCircleMeasure};
pub use poly::C;
