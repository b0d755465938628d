//! Minimax test problems `min_x max_y f(x, y)` on product manifolds.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::manifold::{product, Manifold, Point, ProductManifold, TangentData, TangentVector};
use crate::manifolds::{EuclideanSpace, SpdManifold, SphereManifold};

/// Relative finite-difference step used when a problem differentiates itself
/// numerically.
pub const FD_RELATIVE_STEP: f64 = 1e-5;

/// Power-iteration cap and relative tolerance for operator norms.
const POWER_ITERATION_CAP: usize = 10_000;
const POWER_ITERATION_TOL: f64 = 1e-14;

/// A bifunction `f(x, y)` minimized over `x ∈ M` and maximized over `y ∈ N`.
///
/// Implementations must be pure: the same inputs always give the same outputs,
/// so problems can be evaluated from several threads at once.
pub trait MinimaxProblem: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// The product `M × N`.
    fn domain(&self) -> &ProductManifold;

    fn value(&self, x: &Point, y: &Point) -> Result<f64>;

    /// Riemannian gradient of `f(·, y)` at `x`.
    fn grad_x(&self, x: &Point, y: &Point) -> Result<TangentVector>;

    /// Riemannian gradient of `f(x, ·)` at `y`.
    fn grad_y(&self, x: &Point, y: &Point) -> Result<TangentVector>;

    /// Geodesic smoothness constant of the joint gradient field, if known.
    fn smoothness(&self) -> Option<f64>;

    fn known_saddle(&self) -> Option<(Point, Point)> {
        None
    }

    /// True when both `max_y f(x, ·)` and `min_x f(·, y)` are attained, so
    /// inner gradient methods can estimate the duality gap.
    fn coercive_slices(&self) -> bool {
        false
    }
}

/// The joint field `(∇_x f, ∇_y f)` at a pair point.
pub fn joint_gradient(p: &dyn MinimaxProblem, at: &Point) -> Result<TangentVector> {
    let (x, y) = at.split()?;
    Ok(TangentVector::pair(p.grad_x(x, y)?, p.grad_y(x, y)?))
}

/// Finite-difference step `1e-5 · max(1, ‖x‖)` with `‖·‖` the coordinate norm.
pub fn default_fd_step(x: &Point) -> f64 {
    let norm = x.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
    FD_RELATIVE_STEP * norm.max(1.0)
}

/// Central-difference Riemannian gradient over an orthonormal tangent basis:
/// `Σ_j (φ(Exp_x(ε e_j)) − φ(Exp_x(−ε e_j))) / (2ε) · e_j`.
pub fn numeric_riemannian_grad<F>(m: &dyn Manifold, phi: F, x: &Point, eps: f64) -> Result<TangentVector>
where
    F: Fn(&Point) -> Result<f64>,
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", format!("step must be positive, got {eps}")));
    }
    let mut g = m.zero_tangent(x)?;
    for e in m.tangent_basis(x)? {
        let plus = phi(&m.exp_map(x, &e.scale(eps))?)?;
        let minus = phi(&m.exp_map(x, &e.scale(-eps))?)?;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Evaluation(format!(
                "non-finite value in finite difference ({plus}, {minus})"
            )));
        }
        g = g.axpy((plus - minus) / (2.0 * eps), &e)?;
    }
    Ok(g)
}

/// Empirical smoothness: twice the largest `‖Γ_p^q G(p) − G(q)‖ / d(p, q)`
/// over `pairs` random point pairs within `radius` of `anchor`, where `G` is
/// the joint gradient field.
pub fn estimate_smoothness(
    p: &dyn MinimaxProblem,
    anchor: &Point,
    radius: f64,
    pairs: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if !(radius > 0.0) || pairs == 0 {
        return Err(Error::param("radius", "need a positive radius and at least one pair"));
    }
    let dom = p.domain();
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let a = dom.exp_map(anchor, &dom.random_tangent(anchor, rng)?.scale(radius * rng.random::<f64>()))?;
        let b = dom.exp_map(anchor, &dom.random_tangent(anchor, rng)?.scale(radius * rng.random::<f64>()))?;
        let d = dom.distance(&a, &b)?;
        if d < 1e-10 {
            continue;
        }
        let ga = dom.parallel_transport(&a, &b, &joint_gradient(p, &a)?)?;
        let gb = joint_gradient(p, &b)?;
        worst = worst.max(dom.norm(&b, &ga.sub(&gb)?)? / d);
    }
    if !(worst > 0.0) || !worst.is_finite() {
        return Err(Error::Degenerate(format!("smoothness estimate is {worst}")));
    }
    Ok(2.0 * worst)
}

/// Largest singular value of `b` by power iteration on `bᵀb`.
pub fn operator_norm(b: &DMatrix<f64>) -> f64 {
    let n = b.ncols();
    if n == 0 || b.nrows() == 0 {
        return 0.0;
    }
    // deterministic start with no special alignment to coordinate axes
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.7).sin());
    v.normalize_mut();
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATION_CAP {
        let w = b.transpose() * (b * &v);
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w / nw;
        if (next - sigma).abs() <= POWER_ITERATION_TOL * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// `f(x, y) = xᵀBy` on `ℝᵐ × ℝⁿ`; saddle at the origin.
#[derive(Debug, Clone)]
pub struct EuclideanQuadratic {
    b: DMatrix<f64>,
    domain: ProductManifold,
    l: f64,
}

impl EuclideanQuadratic {
    pub fn new(b: DMatrix<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::param("b", "coupling matrix is empty"));
        }
        if !b.iter().all(|v| v.is_finite()) {
            return Err(Error::param("b", "coupling matrix has non-finite entries"));
        }
        let domain = product(
            Arc::new(EuclideanSpace::new(b.nrows())?),
            Arc::new(EuclideanSpace::new(b.ncols())?),
        );
        let l = operator_norm(&b);
        Ok(EuclideanQuadratic { b, domain, l })
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.b
    }
}

impl MinimaxProblem for EuclideanQuadratic {
    fn name(&self) -> &'static str {
        "euclidean_quadratic"
    }

    fn domain(&self) -> &ProductManifold {
        &self.domain
    }

    fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(x.as_vector()?.dot(&(&self.b * y.as_vector()?)))
    }

    fn grad_x(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        x.as_vector()?;
        Ok(TangentVector::new_unchecked(x, TangentData::Vector(&self.b * y.as_vector()?)))
    }

    fn grad_y(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        y.as_vector()?;
        Ok(TangentVector::new_unchecked(y, TangentData::Vector(self.b.tr_mul(x.as_vector()?))))
    }

    fn smoothness(&self) -> Option<f64> {
        (self.l > 0.0).then_some(self.l)
    }

    fn known_saddle(&self) -> Option<(Point, Point)> {
        Some((
            Point::Euclidean(DVector::zeros(self.b.nrows())),
            Point::Euclidean(DVector::zeros(self.b.ncols())),
        ))
    }
}

/// `f(x, y) = tr(Log_x(x0) · Log_y(y0))` on `SPD(n) × SPD(n)`; saddle at
/// `(x0, y0)` with value 0. Gradients are central differences.
#[derive(Debug, Clone)]
pub struct SpdBilinear {
    spd: SpdManifold,
    x0: Point,
    y0: Point,
    domain: ProductManifold,
    l: Option<f64>,
}

impl SpdBilinear {
    pub fn new(x0: Point, y0: Point) -> Result<Self> {
        let n = x0.as_matrix()?.nrows();
        let spd = SpdManifold::new(n)?;
        spd.check_point(&x0)?;
        spd.check_point(&y0)?;
        let domain = product(Arc::new(spd.clone()), Arc::new(spd.clone()));
        Ok(SpdBilinear { spd, x0, y0, domain, l: None })
    }

    pub fn with_smoothness(mut self, l: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::param("l", format!("smoothness must be positive, got {l}")));
        }
        self.l = Some(l);
        Ok(self)
    }

    fn log_mat(&self, base: &Point, target: &Point) -> Result<DMatrix<f64>> {
        Ok(self.spd.log_map(base, target)?.as_matrix()?.clone())
    }
}

/// `tr(AB)` for symmetric `A`, `B`.
fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

impl MinimaxProblem for SpdBilinear {
    fn name(&self) -> &'static str {
        "spd_bilinear"
    }

    fn domain(&self) -> &ProductManifold {
        &self.domain
    }

    fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(trace_product(&self.log_mat(x, &self.x0)?, &self.log_mat(y, &self.y0)?))
    }

    fn grad_x(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let c = self.log_mat(y, &self.y0)?;
        let phi = |p: &Point| Ok(trace_product(&self.log_mat(p, &self.x0)?, &c));
        numeric_riemannian_grad(&self.spd, phi, x, default_fd_step(x))
    }

    fn grad_y(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let c = self.log_mat(x, &self.x0)?;
        let phi = |p: &Point| Ok(trace_product(&c, &self.log_mat(p, &self.y0)?));
        numeric_riemannian_grad(&self.spd, phi, y, default_fd_step(y))
    }

    fn smoothness(&self) -> Option<f64> {
        self.l
    }

    fn known_saddle(&self) -> Option<(Point, Point)> {
        Some((self.x0.clone(), self.y0.clone()))
    }
}

/// Data for the robust PCA objective: `k` SPD matrices and a penalty weight.
#[derive(Debug, Clone)]
pub struct RobustPcaInstance {
    data: Vec<Point>,
    alpha: f64,
    n: usize,
}

impl RobustPcaInstance {
    pub fn new(data: Vec<DMatrix<f64>>, alpha: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::param("k", "need at least one data matrix"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::param("alpha", format!("penalty weight must be positive, got {alpha}")));
        }
        let n = data[0].nrows();
        let spd = SpdManifold::new(n)?;
        let data = data
            .into_iter()
            .map(|m| spd.point(m))
            .collect::<Result<Vec<_>>>()?;
        Ok(RobustPcaInstance { data, alpha, n })
    }

    pub fn data(&self) -> &[Point] {
        &self.data
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// `f(x, M) = −xᵀMx − (α/k) Σ_i d²(M, M_i)` on `S(n) × SPD(n)`, minimized
/// over the unit vector `x` and maximized over `M`.
#[derive(Debug, Clone)]
pub struct RobustPca {
    inst: RobustPcaInstance,
    sphere: SphereManifold,
    spd: SpdManifold,
    domain: ProductManifold,
    l: Option<f64>,
}

impl RobustPca {
    pub fn new(inst: RobustPcaInstance) -> Result<Self> {
        let sphere = SphereManifold::new(inst.n)?;
        let spd = SpdManifold::new(inst.n)?;
        let domain = product(Arc::new(sphere.clone()), Arc::new(spd.clone()));
        Ok(RobustPca { inst, sphere, spd, domain, l: None })
    }

    pub fn with_smoothness(mut self, l: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::param("l", format!("smoothness must be positive, got {l}")));
        }
        self.l = Some(l);
        Ok(self)
    }

    pub fn instance(&self) -> &RobustPcaInstance {
        &self.inst
    }

    /// `(α/k) Σ_i d²(M, M_i)`.
    fn penalty(&self, m: &Point) -> Result<f64> {
        let mut s = 0.0;
        for mi in &self.inst.data {
            s += self.spd.distance(m, mi)?.powi(2);
        }
        Ok(self.inst.alpha * s / self.inst.data.len() as f64)
    }
}

impl MinimaxProblem for RobustPca {
    fn name(&self) -> &'static str {
        "robust_pca"
    }

    fn domain(&self) -> &ProductManifold {
        &self.domain
    }

    fn value(&self, x: &Point, m: &Point) -> Result<f64> {
        let xv = x.as_vector()?;
        let mm = m.as_matrix()?;
        Ok(-xv.dot(&(mm * xv)) - self.penalty(m)?)
    }

    fn grad_x(&self, x: &Point, m: &Point) -> Result<TangentVector> {
        let xv = x.as_vector()?;
        let mx = m.as_matrix()? * xv;
        let rayleigh = xv.dot(&mx);
        self.sphere.project(x, &((mx - xv * rayleigh) * -2.0))
    }

    fn grad_y(&self, x: &Point, m: &Point) -> Result<TangentVector> {
        let xv = x.as_vector()?;
        let mm = m.as_matrix()?;
        let mx = mm * xv;
        let mut g = -(&mx * mx.transpose());
        let w = 2.0 * self.inst.alpha / self.inst.data.len() as f64;
        for mi in &self.inst.data {
            g += self.spd.log_map(m, mi)?.as_matrix()? * w;
        }
        Ok(TangentVector::new_unchecked(m, TangentData::Matrix(symmetrize(g))))
    }

    fn smoothness(&self) -> Option<f64> {
        self.l
    }

    fn coercive_slices(&self) -> bool {
        true
    }
}

/// A real function on a manifold with its Riemannian gradient.
pub trait ScalarField: fmt::Debug + Send + Sync {
    fn value(&self, x: &Point) -> Result<f64>;
    fn grad(&self, x: &Point) -> Result<TangentVector>;

    /// True when sublevel sets are bounded, so the minimum is attained.
    fn coercive(&self) -> bool {
        false
    }
}

/// `½ · mean_i d²(x, c_i)`; with one center this is `½ d²(x, c)`.
#[derive(Debug, Clone)]
pub struct MeanHalfSquaredDistance {
    manifold: Arc<dyn Manifold>,
    centers: Vec<Point>,
}

impl MeanHalfSquaredDistance {
    pub fn new(manifold: Arc<dyn Manifold>, centers: Vec<Point>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::param("centers", "need at least one center"));
        }
        for c in &centers {
            manifold.check_point(c)?;
        }
        Ok(MeanHalfSquaredDistance { manifold, centers })
    }
}

impl ScalarField for MeanHalfSquaredDistance {
    fn value(&self, x: &Point) -> Result<f64> {
        let mut s = 0.0;
        for c in &self.centers {
            s += self.manifold.distance(x, c)?.powi(2);
        }
        Ok(0.5 * s / self.centers.len() as f64)
    }

    fn grad(&self, x: &Point) -> Result<TangentVector> {
        let w = -1.0 / self.centers.len() as f64;
        let mut g = self.manifold.zero_tangent(x)?;
        for c in &self.centers {
            g = g.axpy(w, &self.manifold.log_map(x, c)?)?;
        }
        Ok(g)
    }

    fn coercive(&self) -> bool {
        true
    }
}

/// `tr(x) − offset` on SPD; Riemannian gradient `x²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceConstraint {
    pub offset: f64,
}

impl ScalarField for TraceConstraint {
    fn value(&self, x: &Point) -> Result<f64> {
        Ok(x.as_matrix()?.trace() - self.offset)
    }

    fn grad(&self, x: &Point) -> Result<TangentVector> {
        let m = x.as_matrix()?;
        Ok(TangentVector::new_unchecked(x, TangentData::Matrix(symmetrize(m * m))))
    }
}

/// `log det x − offset` on SPD; geodesically affine with gradient `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDetConstraint {
    pub offset: f64,
}

impl ScalarField for LogDetConstraint {
    fn value(&self, x: &Point) -> Result<f64> {
        let chol = nalgebra::Cholesky::new(x.as_matrix()?.clone())
            .ok_or_else(|| Error::Domain("log det of a non-SPD matrix".into()))?;
        let ld: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        Ok(ld - self.offset)
    }

    fn grad(&self, x: &Point) -> Result<TangentVector> {
        Ok(TangentVector::new_unchecked(x, TangentData::Matrix(x.as_matrix()?.clone())))
    }
}

/// `f(x, λ) = g(x) + ⟨h(x), λ⟩ − (α/2)‖λ‖²` with the multipliers `λ ∈ ℝᵖ`
/// as the maximizing block.
#[derive(Debug, Clone)]
pub struct AugmentedLagrangian {
    g: Arc<dyn ScalarField>,
    h: Vec<Arc<dyn ScalarField>>,
    alpha: f64,
    domain: ProductManifold,
    l: Option<f64>,
}

impl AugmentedLagrangian {
    pub fn new(m: Arc<dyn Manifold>, g: Arc<dyn ScalarField>, h: Vec<Arc<dyn ScalarField>>, alpha: f64) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::param("h", "need at least one constraint"));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::param("alpha", format!("must be nonnegative, got {alpha}")));
        }
        let domain = product(m, Arc::new(EuclideanSpace::new(h.len())?));
        Ok(AugmentedLagrangian { g, h, alpha, domain, l: None })
    }

    pub fn with_smoothness(mut self, l: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::param("l", format!("smoothness must be positive, got {l}")));
        }
        self.l = Some(l);
        Ok(self)
    }

    fn constraints(&self, x: &Point) -> Result<DVector<f64>> {
        let vals = self.h.iter().map(|h| h.value(x)).collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }
}

impl MinimaxProblem for AugmentedLagrangian {
    fn name(&self) -> &'static str {
        "augmented_lagrangian"
    }

    fn domain(&self) -> &ProductManifold {
        &self.domain
    }

    fn value(&self, x: &Point, lambda: &Point) -> Result<f64> {
        let lam = lambda.as_vector()?;
        Ok(self.g.value(x)? + self.constraints(x)?.dot(lam) - 0.5 * self.alpha * lam.norm_squared())
    }

    fn grad_x(&self, x: &Point, lambda: &Point) -> Result<TangentVector> {
        let lam = lambda.as_vector()?;
        let mut g = self.g.grad(x)?;
        for (h, li) in self.h.iter().zip(lam.iter()) {
            g = g.axpy(*li, &h.grad(x)?)?;
        }
        Ok(g)
    }

    fn grad_y(&self, x: &Point, lambda: &Point) -> Result<TangentVector> {
        let lam = lambda.as_vector()?;
        let v = self.constraints(x)? - lam * self.alpha;
        Ok(TangentVector::new_unchecked(lambda, TangentData::Vector(v)))
    }

    fn smoothness(&self) -> Option<f64> {
        self.l
    }

    fn coercive_slices(&self) -> bool {
        self.alpha > 0.0 && self.g.coercive()
    }
}
