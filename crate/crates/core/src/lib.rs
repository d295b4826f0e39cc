//! Resolvents of singular self-adjoint perturbations of the 3D Laplacian
//! built from the Krein resolvent formula: finite-rank reference models,
//! point interactions, and a perturbation supported on a segment.

pub mod energy;
pub mod error;
pub mod finite;
pub mod grid;
pub mod kernels;
pub mod points;
pub mod quad;
pub mod segment;
pub mod source;

pub use energy::{sqrt_upper, Energy, C64};
pub use error::{KreinError, Result};
pub use finite::{FiniteModel, QMatrixFD};
pub use grid::{box_grid, GridFunction};
pub use kernels::{free_green, GreenInnerProduct, PointConfiguration, FOUR_PI};
pub use points::{BoundState, PointModel, CONVENTION_NOTE};
pub use segment::{SegmentModel, SturmLiouvilleOp, TraceReport};
pub use source::{GaussianSource, SourceSpec};
