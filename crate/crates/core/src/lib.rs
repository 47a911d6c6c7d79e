//! Expected signature kernels of inhomogeneous Lévy processes.
//!
//! The crate is organised bottom-up: a dense truncated tensor algebra,
//! differential triplets and their characteristic velocities, exact free
//! developments with quantitative estimates, Goursat-type kernel solvers,
//! the signature MMD to the inhomogeneous Wiener measure and a Monte Carlo
//! oracle.

pub mod characteristics;
pub mod development;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod mc;
pub mod mmd;
pub mod special;
pub mod tensor;

pub use characteristics::{
    characteristic_velocity, dilate_triplet, exponential_moment_value, JumpSpec, LevyTriplet,
    PiecewiseVelocity, TripletPiece,
};
pub use error::{Error, Result};
pub use grid::Grid;
pub use tensor::{word_index, LevelNorms, TruncatedTensor};
pub use kernel::{
    apriori_psi, bessel_i0, solve_goursat_scalar, solve_level2_system, solve_truncated_system, truncation_certificate,
    GoursatAlpha, KernelSurface,
};
pub use mmd::{mmd_to_wiener, AugmentedPathEnsemble, MmdReport, WienerSpec};
pub use mc::{estimate_expected_signature, estimate_kernel, path_signature, simulate_paths, SignatureEstimate};
