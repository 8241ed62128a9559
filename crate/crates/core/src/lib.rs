//! Desk-scale simulation of spin-chain quench dynamics on photonic meshes.
//!
//! The crate connects three views of the same physics: a coined discrete-time
//! walk ([`walk`]), the waveguide mesh that realises it ([`mesh`]) and an exact
//! spin-chain simulator ([`spin`]). Two-photon transport ([`twophoton`]), the
//! entanglement readout stage ([`ecc`]) and unitary reconstruction from
//! synthetic data ([`tomography`]) sit on top.

pub mod coupling;
pub mod ecc;
pub mod error;
pub mod matrix;
pub mod mesh;
pub mod optim;
pub mod spin;
pub mod tomography;
pub mod twophoton;
pub mod walk;

pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, C64};
