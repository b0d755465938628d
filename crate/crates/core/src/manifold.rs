//! The geometric interface shared by every manifold, value types for points
//! and tangent vectors, and the product-manifold combinator.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};

/// A point on some manifold. The variant is the shape tag; which variant is
/// valid is fixed by the owning [`Manifold`].
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Euclidean(DVector<f64>),
    Sphere(DVector<f64>),
    Spd(DMatrix<f64>),
    Pair(Box<Point>, Box<Point>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Vector,
    UnitVector,
    SpdMatrix,
    Pair,
}

impl Point {
    pub fn pair(a: Point, b: Point) -> Point {
        Point::Pair(Box::new(a), Box::new(b))
    }

    pub fn shape(&self) -> Shape {
        match self {
            Point::Euclidean(_) => Shape::Vector,
            Point::Sphere(_) => Shape::UnitVector,
            Point::Spd(_) => Shape::SpdMatrix,
            Point::Pair(..) => Shape::Pair,
        }
    }

    pub fn split(&self) -> Result<(&Point, &Point)> {
        match self {
            Point::Pair(a, b) => Ok((a, b)),
            other => Err(Error::Contract(format!("expected a pair point, got {:?}", other.shape()))),
        }
    }

    /// Coordinates of a vector-valued point (Euclidean or sphere).
    pub fn as_vector(&self) -> Result<&DVector<f64>> {
        match self {
            Point::Euclidean(v) | Point::Sphere(v) => Ok(v),
            other => Err(Error::Contract(format!("expected a vector point, got {:?}", other.shape()))),
        }
    }

    pub fn as_matrix(&self) -> Result<&DMatrix<f64>> {
        match self {
            Point::Spd(m) => Ok(m),
            other => Err(Error::Contract(format!("expected an SPD point, got {:?}", other.shape()))),
        }
    }

    /// Flattened coordinates (column-major for matrices, concatenated for pairs).
    pub fn coords(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.push_coords(&mut out);
        out
    }

    fn push_coords(&self, out: &mut Vec<f64>) {
        match self {
            Point::Euclidean(v) | Point::Sphere(v) => out.extend(v.iter()),
            Point::Spd(m) => out.extend(m.iter()),
            Point::Pair(a, b) => {
                a.push_coords(out);
                b.push_coords(out);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Point::Euclidean(v) | Point::Sphere(v) => v.iter().all(|c| c.is_finite()),
            Point::Spd(m) => m.iter().all(|c| c.is_finite()),
            Point::Pair(a, b) => a.is_finite() && b.is_finite(),
        }
    }

    pub fn base_id(&self) -> BaseId {
        match self {
            Point::Euclidean(v) => BaseId::hash(1, v.as_slice()),
            Point::Sphere(v) => BaseId::hash(2, v.as_slice()),
            Point::Spd(m) => BaseId::hash(3, m.as_slice()),
            Point::Pair(a, b) => a.base_id().combine(b.base_id()),
        }
    }
}

/// Fingerprint of the base point of a tangent vector. Two tangents can only
/// be combined, and a tangent can only be used at a point, when the
/// fingerprints agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BaseId(u64);

impl BaseId {
    fn hash(tag: u64, data: &[f64]) -> Self {
        // FNV-1a over the raw bit patterns
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ tag;
        for x in data {
            for byte in x.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        BaseId(h)
    }

    fn combine(self, other: BaseId) -> Self {
        BaseId(self.0.rotate_left(17) ^ other.0.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TangentData {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
    Pair(Box<TangentVector>, Box<TangentVector>),
}

/// A tangent vector together with the fingerprint of its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    data: TangentData,
    base: BaseId,
}

impl TangentVector {
    /// Wraps coordinates without checking tangency; manifolds use this after
    /// they have projected or verified the data.
    pub(crate) fn new_unchecked(base: &Point, data: TangentData) -> Self {
        TangentVector {
            data,
            base: base.base_id(),
        }
    }

    pub fn pair(a: TangentVector, b: TangentVector) -> Self {
        let base = a.base.combine(b.base);
        TangentVector {
            data: TangentData::Pair(Box::new(a), Box::new(b)),
            base,
        }
    }

    pub fn data(&self) -> &TangentData {
        &self.data
    }

    pub fn base(&self) -> BaseId {
        self.base
    }

    pub fn is_based_at(&self, x: &Point) -> bool {
        self.base == x.base_id()
    }

    pub fn split(&self) -> Result<(&TangentVector, &TangentVector)> {
        match &self.data {
            TangentData::Pair(a, b) => Ok((a, b)),
            _ => Err(Error::Contract("expected a pair tangent".into())),
        }
    }

    pub fn as_vector(&self) -> Result<&DVector<f64>> {
        match &self.data {
            TangentData::Vector(v) => Ok(v),
            _ => Err(Error::Contract("expected a vector tangent".into())),
        }
    }

    pub fn as_matrix(&self) -> Result<&DMatrix<f64>> {
        match &self.data {
            TangentData::Matrix(m) => Ok(m),
            _ => Err(Error::Contract("expected a matrix tangent".into())),
        }
    }

    pub fn scale(&self, c: f64) -> TangentVector {
        let data = match &self.data {
            TangentData::Vector(v) => TangentData::Vector(v * c),
            TangentData::Matrix(m) => TangentData::Matrix(m * c),
            TangentData::Pair(a, b) => TangentData::Pair(Box::new(a.scale(c)), Box::new(b.scale(c))),
        };
        TangentVector { data, base: self.base }
    }

    pub fn neg(&self) -> TangentVector {
        self.scale(-1.0)
    }

    /// `self + c * other`; both must share a base point.
    pub fn axpy(&self, c: f64, other: &TangentVector) -> Result<TangentVector> {
        if self.base != other.base {
            return Err(Error::Contract("adding tangent vectors at different base points".into()));
        }
        let data = match (&self.data, &other.data) {
            (TangentData::Vector(a), TangentData::Vector(b)) if a.len() == b.len() => TangentData::Vector(a + b * c),
            (TangentData::Matrix(a), TangentData::Matrix(b)) if a.shape() == b.shape() => {
                TangentData::Matrix(a + b * c)
            }
            (TangentData::Pair(a1, b1), TangentData::Pair(a2, b2)) => {
                TangentData::Pair(Box::new(a1.axpy(c, a2)?), Box::new(b1.axpy(c, b2)?))
            }
            _ => return Err(Error::Contract("adding tangent vectors of different shapes".into())),
        };
        Ok(TangentVector { data, base: self.base })
    }

    pub fn add(&self, other: &TangentVector) -> Result<TangentVector> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &TangentVector) -> Result<TangentVector> {
        self.axpy(-1.0, other)
    }

    /// Largest absolute coordinate; a cheap metric-free size used in tests.
    pub fn max_abs(&self) -> f64 {
        match &self.data {
            TangentData::Vector(v) => v.amax(),
            TangentData::Matrix(m) => m.amax(),
            TangentData::Pair(a, b) => a.max_abs().max(b.max_abs()),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.data {
            TangentData::Vector(v) => v.iter().all(|c| c.is_finite()),
            TangentData::Matrix(m) => m.iter().all(|c| c.is_finite()),
            TangentData::Pair(a, b) => a.is_finite() && b.is_finite(),
        }
    }
}

/// Sectional curvature bounds of a manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub kappa_min: f64,
    pub kappa_max: f64,
}

/// Validates the curvature/diameter metadata of a manifold descriptor:
/// `kappa_min <= kappa_max`, `diameter > 0`, and when `kappa_max > 0`,
/// `diameter < pi / (2 sqrt(kappa_max))` so that `xi(kappa_max, diameter)`
/// stays positive.
pub fn validate_metadata(curvature: Curvature, diameter: f64) -> Result<()> {
    if !(curvature.kappa_min <= curvature.kappa_max) {
        return Err(Error::param(
            "kappa_min",
            format!("{} exceeds kappa_max {}", curvature.kappa_min, curvature.kappa_max),
        ));
    }
    if !(diameter > 0.0) || !diameter.is_finite() {
        return Err(Error::param("diameter_bound", format!("must be positive and finite, got {diameter}")));
    }
    if curvature.kappa_max > 0.0 {
        let limit = std::f64::consts::FRAC_PI_2 / curvature.kappa_max.sqrt();
        if diameter >= limit {
            return Err(Error::param(
                "diameter_bound",
                format!("{diameter} must be below pi/(2 sqrt(kappa_max)) = {limit}"),
            ));
        }
    }
    Ok(())
}

/// Riemannian manifold with closed-form exponential/logarithm maps and
/// parallel transport along geodesics.
pub trait Manifold: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    /// Intrinsic dimension.
    fn dimension(&self) -> usize;

    fn curvature(&self) -> Curvature;

    /// Declared bound on the diameter of the working domain.
    fn diameter_bound(&self) -> f64;

    /// Largest tangent norm accepted by [`Manifold::exp_map`].
    fn exp_guard(&self) -> f64 {
        f64::INFINITY
    }

    /// Verifies that `x` is a valid point of this manifold.
    fn check_point(&self, x: &Point) -> Result<()>;

    fn exp_map(&self, x: &Point, v: &TangentVector) -> Result<Point>;

    fn log_map(&self, x: &Point, y: &Point) -> Result<TangentVector>;

    /// Transports `v` from `x` to `y` along the connecting geodesic.
    fn parallel_transport(&self, x: &Point, y: &Point, v: &TangentVector) -> Result<TangentVector>;

    fn distance(&self, x: &Point, y: &Point) -> Result<f64>;

    fn inner(&self, x: &Point, u: &TangentVector, v: &TangentVector) -> Result<f64>;

    fn norm(&self, x: &Point, v: &TangentVector) -> Result<f64> {
        Ok(self.inner(x, v, v)?.max(0.0).sqrt())
    }

    fn zero_tangent(&self, x: &Point) -> Result<TangentVector>;

    /// An orthonormal basis of the tangent space at `x`.
    fn tangent_basis(&self, x: &Point) -> Result<Vec<TangentVector>>;

    fn random_point(&self, rng: &mut dyn RngCore) -> Point;

    /// A random unit-norm tangent vector at `x`.
    fn random_tangent(&self, x: &Point, rng: &mut dyn RngCore) -> Result<TangentVector>;
}

pub(crate) fn ensure_based(x: &Point, v: &TangentVector) -> Result<()> {
    if v.is_based_at(x) {
        Ok(())
    } else {
        Err(Error::Contract("tangent vector is not based at the given point".into()))
    }
}

/// Product manifold `A × B` with componentwise operations.
#[derive(Debug, Clone)]
pub struct ProductManifold {
    first: Arc<dyn Manifold>,
    second: Arc<dyn Manifold>,
}

/// Builds the product manifold of `a` and `b`.
pub fn product(a: Arc<dyn Manifold>, b: Arc<dyn Manifold>) -> ProductManifold {
    ProductManifold { first: a, second: b }
}

impl ProductManifold {
    pub fn first(&self) -> &dyn Manifold {
        self.first.as_ref()
    }

    pub fn second(&self) -> &dyn Manifold {
        self.second.as_ref()
    }

    pub fn first_arc(&self) -> Arc<dyn Manifold> {
        Arc::clone(&self.first)
    }

    pub fn second_arc(&self) -> Arc<dyn Manifold> {
        Arc::clone(&self.second)
    }
}

impl Manifold for ProductManifold {
    fn name(&self) -> String {
        format!("{} x {}", self.first.name(), self.second.name())
    }

    fn dimension(&self) -> usize {
        self.first.dimension() + self.second.dimension()
    }

    fn curvature(&self) -> Curvature {
        let a = self.first.curvature();
        let b = self.second.curvature();
        Curvature {
            kappa_min: a.kappa_min.min(b.kappa_min),
            kappa_max: a.kappa_max.max(b.kappa_max),
        }
    }

    fn diameter_bound(&self) -> f64 {
        self.first.diameter_bound().hypot(self.second.diameter_bound())
    }

    fn exp_guard(&self) -> f64 {
        self.first.exp_guard().min(self.second.exp_guard())
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        let (a, b) = x.split()?;
        self.first.check_point(a)?;
        self.second.check_point(b)
    }

    fn exp_map(&self, x: &Point, v: &TangentVector) -> Result<Point> {
        ensure_based(x, v)?;
        let (xa, xb) = x.split()?;
        let (va, vb) = v.split()?;
        Ok(Point::pair(self.first.exp_map(xa, va)?, self.second.exp_map(xb, vb)?))
    }

    fn log_map(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let (xa, xb) = x.split()?;
        let (ya, yb) = y.split()?;
        Ok(TangentVector::pair(self.first.log_map(xa, ya)?, self.second.log_map(xb, yb)?))
    }

    fn parallel_transport(&self, x: &Point, y: &Point, v: &TangentVector) -> Result<TangentVector> {
        ensure_based(x, v)?;
        let (xa, xb) = x.split()?;
        let (ya, yb) = y.split()?;
        let (va, vb) = v.split()?;
        Ok(TangentVector::pair(
            self.first.parallel_transport(xa, ya, va)?,
            self.second.parallel_transport(xb, yb, vb)?,
        ))
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let (xa, xb) = x.split()?;
        let (ya, yb) = y.split()?;
        Ok(self.first.distance(xa, ya)?.hypot(self.second.distance(xb, yb)?))
    }

    fn inner(&self, x: &Point, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        ensure_based(x, u)?;
        ensure_based(x, v)?;
        let (xa, xb) = x.split()?;
        let (ua, ub) = u.split()?;
        let (va, vb) = v.split()?;
        Ok(self.first.inner(xa, ua, va)? + self.second.inner(xb, ub, vb)?)
    }

    fn zero_tangent(&self, x: &Point) -> Result<TangentVector> {
        let (xa, xb) = x.split()?;
        Ok(TangentVector::pair(self.first.zero_tangent(xa)?, self.second.zero_tangent(xb)?))
    }

    fn tangent_basis(&self, x: &Point) -> Result<Vec<TangentVector>> {
        let (xa, xb) = x.split()?;
        let za = self.first.zero_tangent(xa)?;
        let zb = self.second.zero_tangent(xb)?;
        let mut basis = Vec::with_capacity(self.dimension());
        for e in self.first.tangent_basis(xa)? {
            basis.push(TangentVector::pair(e, zb.clone()));
        }
        for e in self.second.tangent_basis(xb)? {
            basis.push(TangentVector::pair(za.clone(), e));
        }
        Ok(basis)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        let a = self.first.random_point(rng);
        let b = self.second.random_point(rng);
        Point::pair(a, b)
    }

    fn random_tangent(&self, x: &Point, rng: &mut dyn RngCore) -> Result<TangentVector> {
        let (xa, xb) = x.split()?;
        let ta = self.first.random_tangent(xa, rng)?;
        let tb = self.second.random_tangent(xb, rng)?;
        Ok(TangentVector::pair(ta, tb).scale(std::f64::consts::FRAC_1_SQRT_2))
    }
}
