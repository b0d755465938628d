use nalgebra::DVector;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::manifold::{ensure_based, validate_metadata, Curvature, Manifold, Point, TangentData, TangentVector};

/// Flat space `R^n`: exp is addition, log is subtraction, transport is the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanSpace {
    n: usize,
    diameter: f64,
}

impl EuclideanSpace {
    pub const DEFAULT_DIAMETER: f64 = 10.0;

    pub fn new(n: usize) -> Result<Self> {
        Self::with_diameter(n, Self::DEFAULT_DIAMETER)
    }

    pub fn with_diameter(n: usize, diameter: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "dimension must be at least 1"));
        }
        validate_metadata(Curvature { kappa_min: 0.0, kappa_max: 0.0 }, diameter)?;
        Ok(EuclideanSpace { n, diameter })
    }

    pub fn point(&self, coords: DVector<f64>) -> Result<Point> {
        let p = Point::Euclidean(coords);
        self.check_point(&p)?;
        Ok(p)
    }

    pub fn point_from(&self, coords: &[f64]) -> Result<Point> {
        self.point(DVector::from_column_slice(coords))
    }

    pub fn tangent(&self, x: &Point, v: DVector<f64>) -> Result<TangentVector> {
        self.check_point(x)?;
        if v.len() != self.n {
            return Err(Error::Contract(format!("tangent has length {}, expected {}", v.len(), self.n)));
        }
        Ok(TangentVector::new_unchecked(x, TangentData::Vector(v)))
    }

    fn coords<'a>(&self, x: &'a Point) -> Result<&'a DVector<f64>> {
        match x {
            Point::Euclidean(v) if v.len() == self.n => Ok(v),
            Point::Euclidean(v) => Err(Error::Contract(format!("point has length {}, expected {}", v.len(), self.n))),
            other => Err(Error::Contract(format!("expected a Euclidean point, got {:?}", other.shape()))),
        }
    }
}

impl Manifold for EuclideanSpace {
    fn name(&self) -> String {
        format!("Euclidean({})", self.n)
    }

    fn dimension(&self) -> usize {
        self.n
    }

    fn curvature(&self) -> Curvature {
        Curvature { kappa_min: 0.0, kappa_max: 0.0 }
    }

    fn diameter_bound(&self) -> f64 {
        self.diameter
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        let v = self.coords(x)?;
        if v.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain("Euclidean point has non-finite coordinates".into()))
        }
    }

    fn exp_map(&self, x: &Point, v: &TangentVector) -> Result<Point> {
        ensure_based(x, v)?;
        Ok(Point::Euclidean(self.coords(x)? + v.as_vector()?))
    }

    fn log_map(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let d = self.coords(y)? - self.coords(x)?;
        Ok(TangentVector::new_unchecked(x, TangentData::Vector(d)))
    }

    fn parallel_transport(&self, x: &Point, y: &Point, v: &TangentVector) -> Result<TangentVector> {
        ensure_based(x, v)?;
        self.coords(y)?;
        Ok(TangentVector::new_unchecked(y, v.data().clone()))
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok((self.coords(y)? - self.coords(x)?).norm())
    }

    fn inner(&self, x: &Point, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        ensure_based(x, u)?;
        ensure_based(x, v)?;
        Ok(u.as_vector()?.dot(v.as_vector()?))
    }

    fn zero_tangent(&self, x: &Point) -> Result<TangentVector> {
        self.coords(x)?;
        Ok(TangentVector::new_unchecked(x, TangentData::Vector(DVector::zeros(self.n))))
    }

    fn tangent_basis(&self, x: &Point) -> Result<Vec<TangentVector>> {
        self.coords(x)?;
        Ok((0..self.n)
            .map(|j| {
                let mut e = DVector::zeros(self.n);
                e[j] = 1.0;
                TangentVector::new_unchecked(x, TangentData::Vector(e))
            })
            .collect())
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        Point::Euclidean(DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal)))
    }

    fn random_tangent(&self, x: &Point, rng: &mut dyn RngCore) -> Result<TangentVector> {
        self.coords(x)?;
        loop {
            let g = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let nrm = g.norm();
            if nrm > 1e-12 {
                return Ok(TangentVector::new_unchecked(x, TangentData::Vector(g / nrm)));
            }
        }
    }
}
