//! Randomized invariant suites run by `geominimax check`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use geominimax_core::curvature::{check_triangle_comparison, TRIANGLE_SLACK};
use geominimax_core::linalg::{gaussian_matrix, random_spd, seeded_rng};
use geominimax_core::problems::{
    default_fd_step, numeric_riemannian_grad, AugmentedLagrangian, EuclideanQuadratic, MeanHalfSquaredDistance,
    MinimaxProblem, RobustPca, RobustPcaInstance, ScalarField, SpdBilinear, TraceConstraint,
};
use geominimax_core::solvers::{run, Algo, RunConfig, StepSize};
use geominimax_core::{product, EuclideanSpace, Manifold, Point, SpdManifold, SphereManifold, TangentVector};

use crate::config::ExperimentConfig;
use crate::dataset::generate_dataset_with;
use crate::experiment::build_instance;
use crate::HarnessError;

/// Tolerance shared by the manifold identities.
pub const MANIFOLD_TOL: f64 = 1e-8;

/// Relative tolerance of the gradient comparisons.
pub const GRADIENT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckTarget {
    Manifolds,
    Triangles,
    Gradients,
    Rate,
}

impl CheckTarget {
    pub fn default_trials(&self) -> usize {
        match self {
            CheckTarget::Manifolds | CheckTarget::Triangles => 1000,
            CheckTarget::Gradients => 50,
            CheckTarget::Rate => 500,
        }
    }
}

impl FromStr for CheckTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "manifolds" => Ok(CheckTarget::Manifolds),
            "triangles" => Ok(CheckTarget::Triangles),
            "gradients" => Ok(CheckTarget::Gradients),
            "rate" => Ok(CheckTarget::Rate),
            other => Err(format!(
                "unknown check target `{other}` (expected manifolds, triangles, gradients or rate)"
            )),
        }
    }
}

/// One invariant: how many trials ran, the worst observed error and the
/// bound it is held to.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub trials: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckLine {
    fn within(name: String, trials: usize, worst: f64, tolerance: f64) -> Self {
        CheckLine {
            name,
            trials,
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} trials={} worst={:.3e} tol={:.1e} {}",
            self.name,
            self.trials,
            self.worst,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

/// Runs one suite. `trials` is the per-invariant trial count (for `rate`,
/// the iteration budget).
pub fn run_check(target: CheckTarget, trials: usize, seed: u64) -> Result<Vec<CheckLine>, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::Config("trials: must be at least 1".into()));
    }
    let mut rng = seeded_rng(seed);
    match target {
        CheckTarget::Manifolds => check_manifolds(trials, &mut rng),
        CheckTarget::Triangles => check_triangles(trials, &mut rng),
        CheckTarget::Gradients => check_gradients(trials, &mut rng),
        CheckTarget::Rate => check_rate(trials, seed),
    }
}

fn manifold_suite() -> Result<Vec<Arc<dyn Manifold>>, HarnessError> {
    let spd: Arc<dyn Manifold> = Arc::new(SpdManifold::new(3)?);
    let sphere: Arc<dyn Manifold> = Arc::new(SphereManifold::new(4)?);
    Ok(vec![
        Arc::new(EuclideanSpace::new(5)?),
        Arc::clone(&sphere),
        Arc::clone(&spd),
        Arc::new(product(spd, sphere)),
    ])
}

/// Tangent norms are drawn up to `0.9 · guard`, or up to the diameter bound
/// on manifolds without a guard.
fn sampling_radius(m: &dyn Manifold) -> f64 {
    let guard = m.exp_guard();
    if guard.is_finite() { 0.9 * guard } else { m.diameter_bound() }
}

fn check_manifolds(trials: usize, rng: &mut dyn RngCore) -> Result<Vec<CheckLine>, HarnessError> {
    let mut lines = Vec::new();
    for m in manifold_suite()? {
        let m = m.as_ref();
        let radius = sampling_radius(m);
        let (mut round_trip, mut exp_dist, mut isometry, mut identity) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
        for _ in 0..trials {
            let x = m.random_point(rng);
            let v = m.random_tangent(&x, rng)?.scale(radius * rng.random::<f64>());
            let nv = m.norm(&x, &v)?;
            let y = m.exp_map(&x, &v)?;

            let back = m.log_map(&x, &y)?;
            round_trip = round_trip.max(m.norm(&x, &back.sub(&v)?)? / nv.max(1.0));
            exp_dist = exp_dist.max((m.distance(&x, &y)? - nv).abs() / nv.max(1.0));

            let basis = m.tangent_basis(&x)?;
            let moved = basis
                .iter()
                .map(|e| m.parallel_transport(&x, &y, e))
                .collect::<Result<Vec<_>, _>>()?;
            for i in 0..basis.len() {
                for j in i..basis.len() {
                    let before = m.inner(&x, &basis[i], &basis[j])?;
                    let after = m.inner(&y, &moved[i], &moved[j])?;
                    isometry = isometry.max((before - after).abs());
                }
            }

            // Log_w(x) = −Γ_x^w u with w = Exp_x(u)
            let log_back = m.log_map(&y, &x)?;
            let transported = m.parallel_transport(&x, &y, &v)?;
            identity = identity.max(m.norm(&y, &log_back.add(&transported)?)?);
        }
        let name = m.name();
        lines.push(CheckLine::within(format!("manifolds/{name}/exp_log_round_trip"), trials, round_trip, MANIFOLD_TOL));
        lines.push(CheckLine::within(format!("manifolds/{name}/exp_distance"), trials, exp_dist, MANIFOLD_TOL));
        lines.push(CheckLine::within(format!("manifolds/{name}/transport_isometry"), trials, isometry, MANIFOLD_TOL));
        lines.push(CheckLine::within(format!("manifolds/{name}/log_transport_identity"), trials, identity, MANIFOLD_TOL));
    }
    Ok(lines)
}

fn check_triangles(trials: usize, rng: &mut dyn RngCore) -> Result<Vec<CheckLine>, HarnessError> {
    let suite: Vec<Box<dyn Manifold>> = vec![
        Box::new(EuclideanSpace::new(5)?),
        Box::new(SphereManifold::new(4)?),
        Box::new(SpdManifold::new(3)?),
    ];
    let mut lines = Vec::new();
    for m in suite {
        let report = check_triangle_comparison(m.as_ref(), trials, rng)?;
        let name = m.name();
        lines.push(CheckLine {
            name: format!("triangles/{name}/lower_curvature"),
            trials,
            worst: report.max_residual_lower,
            tolerance: TRIANGLE_SLACK,
            passed: report.violations_lower == 0,
        });
        lines.push(CheckLine {
            name: format!("triangles/{name}/upper_curvature"),
            trials,
            worst: report.max_residual_upper,
            tolerance: TRIANGLE_SLACK,
            passed: report.violations_upper == 0,
        });
    }
    Ok(lines)
}

/// Small instances of every problem family, one per entry.
pub fn gradient_suite(rng: &mut dyn RngCore) -> Result<Vec<Box<dyn MinimaxProblem>>, HarnessError> {
    let quad = EuclideanQuadratic::new(gaussian_matrix(5, rng))?;
    let bilinear = SpdBilinear::new(
        Point::Spd(random_spd(3, 0.5, 2.0, rng)?.into_matrix()),
        Point::Spd(random_spd(3, 0.5, 2.0, rng)?.into_matrix()),
    )?;
    let pca = RobustPca::new(RobustPcaInstance::new(generate_dataset_with(4, 3, 0.2, 4.5, rng)?, 2.0)?)?;

    let spd: Arc<dyn Manifold> = Arc::new(SpdManifold::new(2)?);
    let g = Arc::new(MeanHalfSquaredDistance::new(
        Arc::clone(&spd),
        vec![Point::Spd(DMatrix::identity(2, 2))],
    )?);
    let h: Vec<Arc<dyn ScalarField>> = vec![Arc::new(TraceConstraint { offset: 2.0 })];
    let lagrangian = AugmentedLagrangian::new(spd, g, h, 0.1)?;

    Ok(vec![Box::new(quad), Box::new(bilinear), Box::new(pca), Box::new(lagrangian)])
}

fn relative_error(m: &dyn Manifold, x: &Point, analytic: &TangentVector, reference: &TangentVector) -> Result<f64, HarnessError> {
    let diff = m.norm(x, &analytic.sub(reference)?)?;
    Ok(diff / m.norm(x, reference)?.max(1e-12))
}

/// Five-point stencil of `t ↦ φ(Exp_x(t u))` at zero.
fn directional_derivative<F>(m: &dyn Manifold, phi: F, x: &Point, u: &TangentVector, h: f64) -> Result<f64, HarnessError>
where
    F: Fn(&Point) -> geominimax_core::Result<f64>,
{
    let at = |t: f64| -> Result<f64, HarnessError> { Ok(phi(&m.exp_map(x, &u.scale(t))?)?) };
    Ok((at(-2.0 * h)? - 8.0 * at(-h)? + 8.0 * at(h)? - at(2.0 * h)?) / (12.0 * h))
}

/// Compares each block gradient with the central-difference oracle. The
/// bilinear SPD problem already uses that oracle for its gradients, so it is
/// checked instead against directional derivatives along every basis
/// direction, which fixes the gradient through `⟨grad, e_j⟩`.
fn check_gradients(trials: usize, rng: &mut dyn RngCore) -> Result<Vec<CheckLine>, HarnessError> {
    let mut lines = Vec::new();
    for p in gradient_suite(rng)? {
        let dom = p.domain();
        let (mx, my) = (dom.first(), dom.second());
        let (mut worst_x, mut worst_y) = (0.0_f64, 0.0_f64);
        for _ in 0..trials {
            let at = dom.random_point(rng);
            let (x, y) = at.split()?;
            let gx = p.grad_x(x, y)?;
            let gy = p.grad_y(x, y)?;
            let fx = |z: &Point| p.value(z, y);
            let fy = |z: &Point| p.value(x, z);
            if p.name() == "spd_bilinear" {
                worst_x = worst_x.max(directional_error(mx, &fx, x, &gx)?);
                worst_y = worst_y.max(directional_error(my, &fy, y, &gy)?);
            } else {
                let nx = numeric_riemannian_grad(mx, fx, x, default_fd_step(x))?;
                let ny = numeric_riemannian_grad(my, fy, y, default_fd_step(y))?;
                worst_x = worst_x.max(relative_error(mx, x, &gx, &nx)?);
                worst_y = worst_y.max(relative_error(my, y, &gy, &ny)?);
            }
        }
        let name = p.name();
        lines.push(CheckLine::within(format!("gradients/{name}/grad_x"), trials, worst_x, GRADIENT_TOL));
        lines.push(CheckLine::within(format!("gradients/{name}/grad_y"), trials, worst_y, GRADIENT_TOL));
    }
    Ok(lines)
}

fn directional_error<F>(m: &dyn Manifold, phi: &F, x: &Point, g: &TangentVector) -> Result<f64, HarnessError>
where
    F: Fn(&Point) -> geominimax_core::Result<f64>,
{
    // the stencil's truncation error is O(h⁴), so a wide step is accurate
    let h = 100.0 * default_fd_step(x);
    let mut err2 = 0.0;
    for e in m.tangent_basis(x)? {
        let d = directional_derivative(m, phi, x, &e, h)?;
        err2 += (m.inner(x, g, &e)? - d).powi(2);
    }
    Ok(err2.sqrt() / m.norm(x, g)?.max(1e-12))
}

/// The averaged iterate's certified gap against `(d²(x₀,x*) + d²(y₀,y*)) / (ηT)`
/// at every `T` in the budget. `worst` is the largest ratio of gap to bound.
fn check_rate(iters: usize, seed: u64) -> Result<Vec<CheckLine>, HarnessError> {
    let mut lines = Vec::new();
    for (problem, n) in [("euclidean_quadratic", 20), ("spd_bilinear", 5)] {
        let cfg: ExperimentConfig = format!("problem = {problem}\nn = {n}\nseed = {seed}\n").parse()?;
        let inst = build_instance(&cfg)?;
        let p = inst.problem.as_ref();
        let mut rc = RunConfig::new(Algo::Rceg, StepSize::Auto, iters);
        rc.gap_every = None;
        let outcome = run(p, &inst.start, &rc)?;
        let (xs, ys) = p.known_saddle().expect("rate instances have a known saddle");
        let d0 = p.domain().distance(&inst.start, &Point::pair(xs, ys))?;
        let mut worst = 0.0_f64;
        let mut checked = 0;
        let mut passed = outcome.records.last().is_some_and(|r| r.t == iters);
        for r in outcome.records.iter().filter(|r| r.t > 0) {
            let bound = d0 * d0 / (outcome.eta * r.t as f64);
            match r.certified_gap {
                Some(gap) => {
                    worst = worst.max(gap / bound);
                    passed &= gap <= bound;
                    checked += 1;
                }
                None => passed = false,
            }
        }
        lines.push(CheckLine {
            name: format!("rate/{problem}(n={n})/gap_within_bound"),
            trials: checked,
            worst,
            tolerance: 1.0,
            passed,
        });
    }
    Ok(lines)
}
