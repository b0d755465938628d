use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::manifold::{ensure_based, validate_metadata, Curvature, Manifold, Point, TangentData, TangentVector};

/// Tangent vectors may leave the tangent plane by at most this much
/// (relative to `max(1, |v|)`) before they are rejected.
pub const TANGENT_TOL: f64 = 1e-9;
/// Unit-norm tolerance for sphere points.
pub const UNIT_TOL: f64 = 1e-10;

/// Unit sphere `{x in R^n : |x| = 1}` with the round metric.
///
/// Curvature metadata is `[0, 1]`: the lower bound is the flat value so that
/// `zeta(kappa_min, c) = 1`, which is the tightest valid lower-bound
/// distortion. Geodesics are unique only away from antipodes, so both
/// `exp_map` and `log_map` refuse arguments within `1e-6` of `pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereManifold {
    n: usize,
    diameter: f64,
}

impl SphereManifold {
    pub const DEFAULT_DIAMETER: f64 = PI / 4.0;
    pub const GUARD: f64 = PI - 1e-6;

    /// Sphere embedded in `R^n` (intrinsic dimension `n - 1`).
    pub fn new(n: usize) -> Result<Self> {
        Self::with_diameter(n, Self::DEFAULT_DIAMETER)
    }

    pub fn with_diameter(n: usize, diameter: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", "sphere needs ambient dimension at least 2"));
        }
        validate_metadata(Curvature { kappa_min: 0.0, kappa_max: 1.0 }, diameter)?;
        Ok(SphereManifold { n, diameter })
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    /// Builds a point from coordinates that must already have unit norm.
    pub fn point(&self, coords: DVector<f64>) -> Result<Point> {
        let p = Point::Sphere(coords);
        self.check_point(&p)?;
        let Point::Sphere(v) = p else { unreachable!() };
        let nrm = v.norm();
        Ok(Point::Sphere(v / nrm))
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn normalize(&self, coords: DVector<f64>) -> Result<Point> {
        let nrm = coords.norm();
        if !(nrm > 1e-300) || !nrm.is_finite() {
            return Err(Error::Domain("cannot normalize a zero or non-finite vector".into()));
        }
        self.point(coords / nrm)
    }

    /// Checks `<v, x> ~ 0` and projects away the residual normal component.
    pub fn tangent(&self, x: &Point, v: DVector<f64>) -> Result<TangentVector> {
        let xv = self.coords(x)?;
        if v.len() != self.n {
            return Err(Error::Contract(format!("tangent has length {}, expected {}", v.len(), self.n)));
        }
        let normal = xv.dot(&v);
        if normal.abs() > TANGENT_TOL * v.norm().max(1.0) {
            return Err(Error::Contract(format!("vector is not tangent to the sphere: <v, x> = {normal:.3e}")));
        }
        Ok(TangentVector::new_unchecked(x, TangentData::Vector(v - xv * normal)))
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at `x`.
    pub fn project(&self, x: &Point, ambient: &DVector<f64>) -> Result<TangentVector> {
        let xv = self.coords(x)?;
        if ambient.len() != self.n {
            return Err(Error::Contract(format!("vector has length {}, expected {}", ambient.len(), self.n)));
        }
        Ok(TangentVector::new_unchecked(x, TangentData::Vector(ambient - xv * xv.dot(ambient))))
    }

    fn coords<'a>(&self, x: &'a Point) -> Result<&'a DVector<f64>> {
        match x {
            Point::Sphere(v) if v.len() == self.n => Ok(v),
            Point::Sphere(v) => Err(Error::Contract(format!("point has length {}, expected {}", v.len(), self.n))),
            other => Err(Error::Contract(format!("expected a sphere point, got {:?}", other.shape()))),
        }
    }

    /// Returns `(theta, unit direction)` of the geodesic from `x` to `y`;
    /// the direction is `None` when the points coincide.
    fn angle_and_direction(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<(f64, Option<DVector<f64>>)> {
        let c = x.dot(y);
        let perp = y - x * c;
        let s = perp.norm();
        let theta = s.atan2(c);
        if theta > Self::GUARD {
            return Err(Error::NoUniqueGeodesic { angle: theta, guard: Self::GUARD });
        }
        if s == 0.0 {
            return Ok((theta, None));
        }
        Ok((theta, Some(perp / s)))
    }
}

impl Manifold for SphereManifold {
    fn name(&self) -> String {
        format!("Sphere({})", self.n)
    }

    fn dimension(&self) -> usize {
        self.n - 1
    }

    fn curvature(&self) -> Curvature {
        Curvature { kappa_min: 0.0, kappa_max: 1.0 }
    }

    fn diameter_bound(&self) -> f64 {
        self.diameter
    }

    fn exp_guard(&self) -> f64 {
        Self::GUARD
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        let v = self.coords(x)?;
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::Domain("sphere point has non-finite coordinates".into()));
        }
        let dev = (v.norm() - 1.0).abs();
        if dev > UNIT_TOL {
            return Err(Error::Domain(format!("sphere point norm deviates from 1 by {dev:.3e}")));
        }
        Ok(())
    }

    fn exp_map(&self, x: &Point, v: &TangentVector) -> Result<Point> {
        ensure_based(x, v)?;
        let xv = self.coords(x)?;
        let vv = v.as_vector()?;
        let t = vv.norm();
        if !t.is_finite() {
            return Err(Error::Domain("non-finite tangent step".into()));
        }
        if t > Self::GUARD {
            return Err(Error::StepTooLong { norm: t, guard: Self::GUARD });
        }
        if t == 0.0 {
            return Ok(x.clone());
        }
        let r = xv * t.cos() + vv * (t.sin() / t);
        let nrm = r.norm();
        Ok(Point::Sphere(r / nrm))
    }

    fn log_map(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let xv = self.coords(x)?;
        let yv = self.coords(y)?;
        let (theta, dir) = self.angle_and_direction(xv, yv)?;
        let data = match dir {
            Some(u) => u * theta,
            None => DVector::zeros(self.n),
        };
        Ok(TangentVector::new_unchecked(x, TangentData::Vector(data)))
    }

    fn parallel_transport(&self, x: &Point, y: &Point, v: &TangentVector) -> Result<TangentVector> {
        ensure_based(x, v)?;
        let xv = self.coords(x)?;
        let yv = self.coords(y)?;
        let vv = v.as_vector()?;
        let (theta, dir) = self.angle_and_direction(xv, yv)?;
        let moved = match dir {
            // rotate the component in the (x, u) plane, keep the orthogonal complement
            Some(u) => {
                let a = u.dot(vv);
                vv + (&u * (theta.cos() - 1.0) - xv * theta.sin()) * a
            }
            None => vv.clone(),
        };
        let cleaned = &moved - yv * yv.dot(&moved);
        Ok(TangentVector::new_unchecked(y, TangentData::Vector(cleaned)))
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let xv = self.coords(x)?;
        let yv = self.coords(y)?;
        let c = xv.dot(yv);
        Ok((yv - xv * c).norm().atan2(c))
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
        let xv = self.coords(x)?;
        // Gram-Schmidt on the canonical vectors, with x as the first (discarded) direction
        let mut frame: Vec<DVector<f64>> = vec![xv.clone()];
        for j in 0..self.n {
            if frame.len() == self.n {
                break;
            }
            let mut e = DVector::zeros(self.n);
            e[j] = 1.0;
            for _ in 0..2 {
                for f in &frame {
                    let c = f.dot(&e);
                    e -= f * c;
                }
            }
            let nrm = e.norm();
            if nrm > 1e-6 {
                frame.push(e / nrm);
            }
        }
        Ok(frame
            .into_iter()
            .skip(1)
            .map(|e| TangentVector::new_unchecked(x, TangentData::Vector(e)))
            .collect())
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        loop {
            let g = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let nrm = g.norm();
            if nrm > 1e-12 {
                return Point::Sphere(g / nrm);
            }
        }
    }

    fn random_tangent(&self, x: &Point, rng: &mut dyn RngCore) -> Result<TangentVector> {
        let xv = self.coords(x)?;
        loop {
            let g = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let t = &g - xv * xv.dot(&g);
            let nrm = t.norm();
            if nrm > 1e-12 {
                return Ok(TangentVector::new_unchecked(x, TangentData::Vector(t / nrm)));
            }
        }
    }
}
