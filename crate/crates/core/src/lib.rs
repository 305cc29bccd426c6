//! Danzer sets and their falsifiers.
//!
//! The crate is organized around a single point-set currency ([`pointset::PointSet`])
//! that every module produces or consumes:
//!
//! - [`geom`]: boxes, capsules, balls, polygons, affine maps and the planar box sandwich.
//! - [`pointset`]: point sets with a uniform-grid index, region counting, segment distance,
//!   rescaling, rational snapping and the `DPS1` file format.
//! - [`nets`]: range spaces, VC bounds, Sauer–Shelah, random ε-nets for boxes and their
//!   verifiers (exact maximal empty axis rectangle, adversarial oriented-box search).
//! - [`layered`]: the exponential layer partition and the layered assembly of a Danzer set
//!   with growth `T^d log T`.
//! - [`substitution`]: planar substitution tilings and empty-capsule witnesses.
//! - [`cutproject`]: cut-and-project sets and the affine emptiness search.
//! - [`forest`]: the dense-forest visibility function `ε(T)`.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cutproject;
pub mod error;
pub mod forest;
pub mod geom;
pub mod layered;
pub mod linalg;
pub mod nets;
pub mod pointset;
pub mod rng;
pub mod substitution;

pub use error::{Error, Result};
