//! Concrete geometries: Euclidean space, the unit sphere and the SPD cone
//! with its affine-invariant metric.

mod euclidean;
mod spd;
mod sphere;

pub use euclidean::EuclideanSpace;
pub use spd::SpdManifold;
pub use sphere::SphereManifold;
