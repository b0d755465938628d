use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{check_positive, random_spd, sym_eig, symmetrize, MatrixFunction, SymMatrix};
use crate::manifold::{ensure_based, validate_metadata, Curvature, Manifold, Point, TangentData, TangentVector};

/// Relative asymmetry tolerated in tangent constructors before rejection.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Symmetric positive definite `n x n` matrices with the affine-invariant
/// metric `<u, v>_x = tr(x^-1 u x^-1 v)`.
///
/// The manifold is Hadamard (`kappa_max = 0`); sectional curvatures of this
/// metric are bounded below by `-1/2`.
///
/// Exponential and logarithm maps whiten by a Cholesky factor `x = L Lᵀ`:
/// `Exp_x(v) = L expm(L⁻¹ v L⁻ᵀ) Lᵀ`. By affine invariance this equals the
/// symmetric-square-root form and costs one eigendecomposition instead of
/// two. Parallel transport uses `Γ(v) = E v Eᵀ` with
/// `E = x^{1/2} (x^{-1/2} y x^{-1/2})^{1/2} x^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdManifold {
    n: usize,
    diameter: f64,
}

impl SpdManifold {
    pub const DEFAULT_DIAMETER: f64 = 2.0;
    pub const KAPPA_MIN: f64 = -0.5;

    pub fn new(n: usize) -> Result<Self> {
        Self::with_diameter(n, Self::DEFAULT_DIAMETER)
    }

    pub fn with_diameter(n: usize, diameter: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "dimension must be at least 1"));
        }
        validate_metadata(
            Curvature {
                kappa_min: Self::KAPPA_MIN,
                kappa_max: 0.0,
            },
            diameter,
        )?;
        Ok(SpdManifold { n, diameter })
    }

    pub fn matrix_dim(&self) -> usize {
        self.n
    }

    /// Builds a point from a (symmetrized) matrix with spectrum above the
    /// positivity floor.
    pub fn point(&self, m: DMatrix<f64>) -> Result<Point> {
        let p = Point::Spd(SymMatrix::new(m)?.into_matrix());
        self.check_point(&p)?;
        Ok(p)
    }

    pub fn identity(&self) -> Point {
        Point::Spd(DMatrix::identity(self.n, self.n))
    }

    /// Checks symmetry up to [`SYMMETRY_TOL`] and symmetrizes.
    pub fn tangent(&self, x: &Point, v: DMatrix<f64>) -> Result<TangentVector> {
        self.coords(x)?;
        if v.shape() != (self.n, self.n) {
            return Err(Error::Contract(format!("tangent has shape {:?}, expected {}x{}", v.shape(), self.n, self.n)));
        }
        let asym = (&v - v.transpose()).norm();
        if asym > SYMMETRY_TOL * v.norm().max(1.0) {
            return Err(Error::Contract(format!("tangent is not symmetric (asymmetry {asym:.3e})")));
        }
        Ok(TangentVector::new_unchecked(x, TangentData::Matrix(symmetrize(v))))
    }

    /// Riemannian gradient from a Euclidean gradient: `x · sym(g) · x`.
    pub fn riemannian_from_euclidean(&self, x: &Point, egrad: &DMatrix<f64>) -> Result<TangentVector> {
        let xm = self.coords(x)?;
        let g = symmetrize(egrad.clone());
        Ok(TangentVector::new_unchecked(x, TangentData::Matrix(symmetrize(xm * g * xm))))
    }

    fn coords<'a>(&self, x: &'a Point) -> Result<&'a DMatrix<f64>> {
        match x {
            Point::Spd(m) if m.nrows() == self.n && m.ncols() == self.n => Ok(m),
            Point::Spd(m) => Err(Error::Contract(format!("point has shape {:?}, expected {}x{}", m.shape(), self.n, self.n))),
            other => Err(Error::Contract(format!("expected an SPD point, got {:?}", other.shape()))),
        }
    }

    fn cholesky(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if !x.iter().all(|c| c.is_finite()) {
            return Err(Error::Domain("SPD point has non-finite entries".into()));
        }
        Cholesky::<f64, Dyn>::new(x.clone())
            .map(|c| c.unpack())
            .ok_or_else(|| Error::Domain("matrix lost positive definiteness (Cholesky failed)".into()))
    }

    /// `L⁻¹ a L⁻ᵀ` for lower-triangular `L`.
    fn whiten(l: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let half = l
            .solve_lower_triangular(a)
            .ok_or_else(|| Error::Domain("singular Cholesky factor".into()))?;
        let full = l
            .solve_lower_triangular(&half.transpose())
            .ok_or_else(|| Error::Domain("singular Cholesky factor".into()))?;
        Ok(symmetrize(full))
    }

    fn unwhiten(l: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(l * w * l.transpose())
    }

    /// `(x^{1/2}, x^{-1/2})`.
    pub fn sqrt_pair(&self, x: &Point) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let d = sym_eig(&SymMatrix::new(self.coords(x)?.clone())?)?;
        check_positive(&d)?;
        Ok((d.map(f64::sqrt).into_matrix(), d.map(|v| 1.0 / v.sqrt()).into_matrix()))
    }

    fn fun(w: DMatrix<f64>, f: MatrixFunction) -> Result<DMatrix<f64>> {
        crate::linalg::sym_fun(&SymMatrix::new(w)?, f).map(SymMatrix::into_matrix)
    }
}

impl Manifold for SpdManifold {
    fn name(&self) -> String {
        format!("SPD({})", self.n)
    }

    fn dimension(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn curvature(&self) -> Curvature {
        Curvature {
            kappa_min: Self::KAPPA_MIN,
            kappa_max: 0.0,
        }
    }

    fn diameter_bound(&self) -> f64 {
        self.diameter
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        let m = self.coords(x)?;
        if !m.iter().all(|c| c.is_finite()) {
            return Err(Error::Domain("SPD point has non-finite entries".into()));
        }
        let d = sym_eig(&SymMatrix::new(m.clone())?)?;
        check_positive(&d)
    }

    fn exp_map(&self, x: &Point, v: &TangentVector) -> Result<Point> {
        ensure_based(x, v)?;
        let l = self.cholesky(self.coords(x)?)?;
        let w = Self::whiten(&l, v.as_matrix()?)?;
        let e = Self::fun(w, MatrixFunction::Exp)?;
        let out = Self::unwhiten(&l, &e);
        if !out.iter().all(|c| c.is_finite()) {
            return Err(Error::Domain("exponential map overflowed".into()));
        }
        self.cholesky(&out)?;
        Ok(Point::Spd(out))
    }

    fn log_map(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let l = self.cholesky(self.coords(x)?)?;
        let w = Self::whiten(&l, self.coords(y)?)?;
        let lg = Self::fun(w, MatrixFunction::Log)?;
        Ok(TangentVector::new_unchecked(x, TangentData::Matrix(Self::unwhiten(&l, &lg))))
    }

    fn parallel_transport(&self, x: &Point, y: &Point, v: &TangentVector) -> Result<TangentVector> {
        ensure_based(x, v)?;
        let ym = self.coords(y)?;
        let (s, si) = self.sqrt_pair(x)?;
        let w = symmetrize(&si * ym * &si);
        let root = Self::fun(w, MatrixFunction::Sqrt)?;
        let e = &s * root * &si;
        let moved = symmetrize(&e * v.as_matrix()? * e.transpose());
        Ok(TangentVector::new_unchecked(y, TangentData::Matrix(moved)))
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let l = self.cholesky(self.coords(x)?)?;
        let w = Self::whiten(&l, self.coords(y)?)?;
        let d = sym_eig(&SymMatrix::new(w)?)?;
        check_positive(&d)?;
        Ok(d.lambda.iter().map(|v| v.ln().powi(2)).sum::<f64>().sqrt())
    }

    fn inner(&self, x: &Point, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        ensure_based(x, u)?;
        ensure_based(x, v)?;
        let l = self.cholesky(self.coords(x)?)?;
        let wu = Self::whiten(&l, u.as_matrix()?)?;
        if u == v {
            return Ok(wu.norm_squared());
        }
        let wv = Self::whiten(&l, v.as_matrix()?)?;
        Ok(wu.dot(&wv))
    }

    fn zero_tangent(&self, x: &Point) -> Result<TangentVector> {
        self.coords(x)?;
        Ok(TangentVector::new_unchecked(x, TangentData::Matrix(DMatrix::zeros(self.n, self.n))))
    }

    /// `L E_ij Lᵀ` for the Frobenius-orthonormal symmetric units `E_ij`;
    /// orthonormal under the metric at `x`.
    fn tangent_basis(&self, x: &Point) -> Result<Vec<TangentVector>> {
        let l = self.cholesky(self.coords(x)?)?;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = Vec::with_capacity(self.dimension());
        for j in 0..self.n {
            for i in 0..=j {
                let ci = l.column(i);
                let cj = l.column(j);
                let m = if i == j {
                    ci * ci.transpose()
                } else {
                    (ci * cj.transpose() + cj * ci.transpose()) * h
                };
                out.push(TangentVector::new_unchecked(x, TangentData::Matrix(symmetrize(m))));
            }
        }
        Ok(out)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        let m = random_spd(self.n, 0.25, 4.0, rng).expect("valid eigenvalue range");
        Point::Spd(m.into_matrix())
    }

    fn random_tangent(&self, x: &Point, rng: &mut dyn RngCore) -> Result<TangentVector> {
        let l = self.cholesky(self.coords(x)?)?;
        loop {
            let g = symmetrize(DMatrix::from_fn(self.n, self.n, |_, _| rng.sample::<f64, _>(StandardNormal)));
            let nrm = g.norm();
            if nrm > 1e-12 {
                let v = Self::unwhiten(&l, &(g / nrm));
                return Ok(TangentVector::new_unchecked(x, TangentData::Matrix(v)));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_rng;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use std::f64::consts::E;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(d))
    }

    #[test]
    fn identity_base_point_examples() {
        let m = SpdManifold::new(2).unwrap();
        let i = m.identity();
        let v = m.tangent(&i, diag(&[1.0, -1.0])).unwrap();
        let x = m.exp_map(&i, &v).unwrap();
        assert_abs_diff_eq!(x.as_matrix().unwrap(), &diag(&[E, 1.0 / E]), epsilon = 1e-14);

        let y = m.point(diag(&[E * E, 1.0])).unwrap();
        let l = m.log_map(&i, &y).unwrap();
        assert_abs_diff_eq!(l.as_matrix().unwrap(), &diag(&[2.0, 0.0]), epsilon = 1e-14);
        assert_abs_diff_eq!(m.distance(&i, &y).unwrap(), 2.0, epsilon = 1e-14);

        let a = m.tangent(&i, diag(&[1.0, 2.0])).unwrap();
        let b = m.tangent(&i, diag(&[3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(m.inner(&i, &a, &b).unwrap(), 11.0, epsilon = 1e-14);
    }

    #[test]
    fn affine_invariance_of_distance() {
        let m = SpdManifold::new(4).unwrap();
        let mut rng = seeded_rng(4);
        for _ in 0..50 {
            let x = m.random_point(&mut rng);
            let y = m.random_point(&mut rng);
            let c = 0.1 + 5.0 * rng.random::<f64>();
            let cx = m.point(x.as_matrix().unwrap() * c).unwrap();
            let cy = m.point(y.as_matrix().unwrap() * c).unwrap();
            let d1 = m.distance(&x, &y).unwrap();
            let d2 = m.distance(&cx, &cy).unwrap();
            assert!((d1 - d2).abs() < 1e-10 * d1.max(1.0));
        }
    }

    #[test]
    fn midpoint_matches_closed_form() {
        let m = SpdManifold::new(3).unwrap();
        let mut rng = seeded_rng(8);
        for _ in 0..50 {
            let x = m.random_point(&mut rng);
            let y = m.random_point(&mut rng);
            let mid = m.exp_map(&x, &m.log_map(&x, &y).unwrap().scale(0.5)).unwrap();
            let (s, si) = m.sqrt_pair(&x).unwrap();
            let inner = SymMatrix::new(&si * y.as_matrix().unwrap() * &si).unwrap();
            let root = crate::linalg::sym_fun(&inner, MatrixFunction::Sqrt).unwrap();
            let expected = &s * root.as_matrix() * &s;
            assert!((mid.as_matrix().unwrap() - expected).norm() < 1e-8);
        }
    }

    #[test]
    fn rejects_non_spd_points_and_asymmetric_tangents() {
        let m = SpdManifold::new(2).unwrap();
        assert!(matches!(m.point(diag(&[1.0, -1.0])), Err(Error::Domain(_))));
        let i = m.identity();
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(m.tangent(&i, bad), Err(Error::Contract(_))));
    }

    #[test]
    fn basis_is_orthonormal_under_the_metric() {
        let m = SpdManifold::new(3).unwrap();
        let x = m.random_point(&mut seeded_rng(12));
        let b = m.tangent_basis(&x).unwrap();
        assert_eq!(b.len(), 6);
        for (i, u) in b.iter().enumerate() {
            for (j, v) in b.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m.inner(&x, u, v).unwrap(), expected, epsilon = 1e-12);
            }
        }
    }
}
