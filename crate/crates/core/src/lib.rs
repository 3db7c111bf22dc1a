//! Simulation and verification toolkit for discrete stochastic heat equations
//! u_{n+1}(x) = (P u_n)(x) + sigma(u_n(x)) xi_n(x) on Z^d.

pub mod cli;
pub mod config;
pub mod error;
pub mod kernel;
pub mod lattice;
pub mod moments;
pub mod noise;
pub mod output;
pub mod parallel;
pub mod quadrature;
pub mod solver;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use kernel::{KernelSlice, KernelSpec, OverlapMethod, WalkKernel};
pub use lattice::{BoxRegion, LatticeField, Site};
pub use noise::{FamilyKind, NoiseMode, NoiseModel, NoiseSlice, NoiseSpec, NoiseStats, NoiseStream};
pub use solver::{evolve, Domain, Problem, SigmaSpec, Trajectory};
pub use spectral::{SpectralProfile, UpsilonMethod};
pub use stats::Estimate;
