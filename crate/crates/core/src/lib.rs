//! Riemannian minimax optimization on curved manifolds.
//!
//! The crate provides the geometric kernels (Euclidean space, the unit
//! sphere and the SPD cone with its affine-invariant metric), curvature
//! distortion constants, a small family of geodesically convex-concave test
//! problems and the corrected extragradient solver together with a
//! gradient descent-ascent baseline.

// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curvature;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod manifolds;
pub mod problems;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{seeded_rng, SeededRng, SymMatrix};
pub use manifold::{product, Curvature, Manifold, Point, ProductManifold, Shape, TangentData, TangentVector};
pub use manifolds::{EuclideanSpace, SpdManifold, SphereManifold};
