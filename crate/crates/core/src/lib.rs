//! Simulation core for active quantum flocks: two species of hard-core bosons
//! on a periodic chain with directed dissipative hopping, a coherent spin flip
//! and a dissipative alignment flip.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `qflock` companion crate.
//!
//! Module map:
//!
//! * [`fock`]: configuration space at fixed particle number and its ranking.
//! * [`model`]: Hamiltonian, motion and alignment jump operators.
//! * [`trajectory`]: quantum-jump unraveling of the master equation.
//! * [`oracle`]: dense Lindblad integrator used as ground truth at small sizes.
//! * [`observables`]: magnetization moments, Binder cumulant, coherence.
//! * [`clustering`]: projective snapshots and the density-peak `gamma` statistic.
//! * [`hydro`]: coarse-grained field equations.
//! * [`classical`]: classical synchronous-update analogue and Kolmogorov cycles.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classical;
pub mod clustering;
mod error;
pub mod fock;
pub mod hydro;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod rng;
pub mod trajectory;

pub use error::{Error, Result};
pub use num_complex::Complex64;
