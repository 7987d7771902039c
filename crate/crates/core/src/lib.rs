//! Reduced-order models for convection-dominated flows.
//!
//! The crate covers the whole offline/online chain:
//!
//! * [`fem1d`] generates full-order snapshots of viscous Burgers with
//!   piecewise-linear finite elements and implicit Euler in time.
//! * [`pod`] centers the snapshots and extracts an L²-orthonormal POD basis
//!   with the method of snapshots.
//! * [`operators`] projects mass, stiffness and convection onto that basis,
//!   including the cross terms produced by a nonzero centering trajectory.
//! * [`filters`] implements the reduced differential filter and the van
//!   Cittert, Tikhonov and Lavrentiev approximate-deconvolution operators.
//! * [`solvers`] integrates the Galerkin ROM, the Leray ROM and the
//!   approximate-deconvolution Leray ROM with Newton's method per step.
//! * [`metrics`] lifts reduced trajectories and measures them against
//!   full-order references.
//! * [`io`] reads and writes the plain-text exchange formats.
//!
//! All numerical code is generic over [`Real`]; the `*F64` aliases below name
//! the double-precision instantiations used by the command-line driver.

// Validation is written as `!(x > 0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fem1d;
pub mod filters;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod pod;
pub mod scalar;
pub mod solvers;

pub use error::{RomError, RomResult};
pub use fem1d::{FemSystem1D, FemTrajectory, Mesh1D};
pub use filters::{AdConfig, AdMethod, Deconvolution, DifferentialFilter, FilterConfig};
pub use metrics::ErrorSeries;
pub use operators::{ConvectionTensor, FullOrderOperators, ReducedConvection, RomOperators};
pub use pod::{PodBasis, SnapshotSet};
pub use scalar::Real;
pub use solvers::{
    Bdf2Start, ConvectingCoupling, NewtonConfig, RomModelKind, RomSolver, RomTrajectory, TimeScheme,
};

pub type Mesh1DF64 = Mesh1D<f64>;
pub type FemSystem1DF64 = FemSystem1D<f64>;
pub type FemTrajectoryF64 = FemTrajectory<f64>;
pub type SnapshotSetF64 = SnapshotSet<f64>;
pub type PodBasisF64 = PodBasis<f64>;
pub type RomOperatorsF64 = RomOperators<f64>;
pub type AdConfigF64 = AdConfig<f64>;
pub type RomModelKindF64 = RomModelKind<f64>;
pub type RomTrajectoryF64 = RomTrajectory<f64>;
pub type ErrorSeriesF64 = ErrorSeries<f64>;

pub type Mesh1DF32 = Mesh1D<f32>;
pub type FemSystem1DF32 = FemSystem1D<f32>;
pub type PodBasisF32 = PodBasis<f32>;
pub type RomOperatorsF32 = RomOperators<f32>;
pub type RomTrajectoryF32 = RomTrajectory<f32>;
