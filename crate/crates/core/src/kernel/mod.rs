//! Goursat-type solvers for expected signature kernels.

mod bessel;
mod certificate;
mod goursat;
mod level2;
mod surface;
mod sweep;
mod truncated;

pub use bessel::{apriori_psi, bessel_i0};
pub use certificate::truncation_certificate;
pub use goursat::{solve_goursat_scalar, GoursatAlpha};
pub use level2::solve_level2_system;
pub use surface::{richardson, KernelSurface, NodeTensors, Scheme, SurfaceMeta};
pub use truncated::solve_truncated_system;
