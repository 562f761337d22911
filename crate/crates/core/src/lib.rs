//! Numerical laboratory for an affine blender-horseshoe in the unit cube.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] holds the scalar constants of the model and checks the
//!   inequality systems they must satisfy.
//! * [`geometry`] describes the regions of the cube, the uc-cone field and
//!   rasterised planar regions in the xz-plane.
//! * [`dynamics`] evaluates the branch maps, their perturbations and orbits.
//! * [`symbolic`] codes and decodes points by binary itineraries.
//! * [`schedule`] handles interval schedules of good blocks.
//! * [`measures`] builds empirical measures and computes exact Wasserstein-1
//!   distances between them.
//! * [`growth`] runs the projected-area ledger along a schedule and reports
//!   when the area lower bound outgrows the cube.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod growth;
pub mod measures;
pub mod params;
pub mod schedule;
pub mod symbolic;

pub use error::{Error, Result};
pub use geometry::{Point3, Vec3};
pub use params::ParamSet;
