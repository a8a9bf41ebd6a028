//! Sparse tomographic projection systems and uniqueness analysis.
//!
//! This crate builds the sparse nonnegative projection matrices that arise in
//! tomographic particle imaging (hexagonal 3-camera, square multi-camera and
//! cubic 4-camera setups), reduces the linear systems by measurement support,
//! evaluates closed-form expected dimensions of the reduced systems together
//! with critical sparsity thresholds, and verifies uniqueness of sparse
//! nonnegative / box-constrained solutions by LP probing and by an exact
//! rational oracle on small instances.
//!
//! The main entry points are:
//!
//! * [`geometry`] — construct [`IncidenceSystem`]s for the three geometry
//!   families, optionally with perturbed weights.
//! * [`reduction`] — restrict a system to the support of a measurement vector.
//! * [`analytics`] — expected reduced dimensions, critical sparsity values,
//!   tail bounds and the Wendel probability.
//! * [`uniqueness`] — LP-based uniqueness verification and exact oracles.
//! * [`experiments`] — seeded Monte Carlo phase-transition grids.

pub mod analytics;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod rank;
pub mod reduction;
pub mod simplex;
pub mod system;
pub mod uniqueness;

pub use error::Error;
pub use geometry::{GeometrySpec, PerturbationSpec};
pub use system::{IncidenceSystem, MeasurementVector, ParticleKind, ParticleVector, RayStatistics};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// The expansion constant delta = (sqrt(5) - 1) / 2 used by all uniqueness
/// criteria.
pub const EXPANSION_DELTA: f64 = 0.618033988749894848;
