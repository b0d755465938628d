//! Curvature distortion constants and the step-size rule they feed.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::manifold::Manifold;

/// Below this argument `x coth x` and `x cot x` switch to their Taylor series.
pub const SERIES_CUTOFF: f64 = 1e-4;

/// Slack allowed when testing the comparison inequalities.
pub const TRIANGLE_SLACK: f64 = 1e-7;

/// Rejection-sampling attempts per requested triangle.
const SAMPLING_ATTEMPTS_PER_TRIAL: usize = 100;

/// `x coth x`, continuous at 0.
fn x_coth_x(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 + x2 / 3.0 - x2 * x2 / 45.0
    } else {
        x / x.tanh()
    }
}

/// `x cot x`, continuous at 0.
fn x_cot_x(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 / 3.0 - x2 * x2 / 45.0
    } else {
        x / x.tan()
    }
}

fn check_side(c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param("c", format!("side length must be positive and finite, got {c}")));
    }
    Ok(())
}

/// `ζ(κ, c) = √(−κ)c · coth(√(−κ)c)` for `κ ≤ 0`; equals 1 at `κ = 0`.
pub fn zeta(kappa: f64, c: f64) -> Result<f64> {
    check_side(c)?;
    if !(kappa <= 0.0) {
        return Err(Error::param("kappa", format!("zeta needs a nonpositive curvature, got {kappa}")));
    }
    Ok(x_coth_x((-kappa).sqrt() * c))
}

/// `ξ(κ, c)`: the `coth` form for `κ ≤ 0`, `√κc · cot(√κc)` for `κ > 0`.
///
/// For positive curvature the cotangent changes sign at `√κc = π/2`, so that
/// point and beyond are rejected.
pub fn xi(kappa: f64, c: f64) -> Result<f64> {
    check_side(c)?;
    if kappa.is_nan() {
        return Err(Error::param("kappa", "curvature is NaN"));
    }
    if kappa <= 0.0 {
        return Ok(x_coth_x((-kappa).sqrt() * c));
    }
    let x = kappa.sqrt() * c;
    if x >= FRAC_PI_2 {
        return Err(Error::Domain(format!(
            "xi undefined: sqrt(kappa)*c = {x:.6e} reaches pi/2 (kappa = {kappa}, c = {c})"
        )));
    }
    Ok(x_cot_x(x))
}

/// Curvature range of a manifold together with a side length or diameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureBounds {
    kappa_min: f64,
    kappa_max: f64,
    c: f64,
}

impl CurvatureBounds {
    pub fn new(kappa_min: f64, kappa_max: f64, c: f64) -> Result<Self> {
        check_side(c)?;
        if !(kappa_min <= 0.0) {
            return Err(Error::param("kappa_min", format!("must be nonpositive, got {kappa_min}")));
        }
        if !(kappa_min <= kappa_max) || !kappa_max.is_finite() || !kappa_min.is_finite() {
            return Err(Error::param(
                "kappa_max",
                format!("need finite kappa_min <= kappa_max, got [{kappa_min}, {kappa_max}]"),
            ));
        }
        if kappa_max > 0.0 && kappa_max.sqrt() * c >= FRAC_PI_2 {
            return Err(Error::param(
                "c",
                format!("c = {c} must stay below pi/(2 sqrt(kappa_max)) = {:.6e}", FRAC_PI_2 / kappa_max.sqrt()),
            ));
        }
        Ok(CurvatureBounds { kappa_min, kappa_max, c })
    }

    /// Bounds of a manifold's declared curvature range at its diameter bound.
    pub fn of(m: &dyn Manifold) -> Result<Self> {
        let k = m.curvature();
        Self::new(k.kappa_min, k.kappa_max, m.diameter_bound())
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa_min
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// `τ = ζ(κ_min, c) / ξ(κ_max, c)`, at least 1.
pub fn tau(b: &CurvatureBounds) -> Result<f64> {
    Ok(zeta(b.kappa_min, b.c)? / xi(b.kappa_max, b.c)?)
}

/// Constant step size `η = min(1/√τ_M, 1/√τ_N) / (2L)`.
pub fn rceg_step_size(l: f64, tau_m: f64, tau_n: f64) -> Result<f64> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::param("l", format!("smoothness constant must be positive, got {l}")));
    }
    for (name, t) in [("tau_m", tau_m), ("tau_n", tau_n)] {
        if !(t >= 1.0) || !t.is_finite() {
            return Err(Error::param(name, format!("distortion ratio must be at least 1, got {t}")));
        }
    }
    Ok((1.0 / tau_m.sqrt()).min(1.0 / tau_n.sqrt()) / (2.0 * l))
}

/// Outcome of [`check_triangle_comparison`].
///
/// Residuals are signed so that positive means the inequality is violated:
/// `lower = a² − (ζ b² + c² − 2bc cos A)` and
/// `upper = (ξ b² + c² − 2bc cos A) − a²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleReport {
    pub trials: usize,
    pub violations_lower: usize,
    pub violations_upper: usize,
    pub max_residual_lower: f64,
    pub max_residual_upper: f64,
    /// Largest `|a² − (b² + c² − 2bc cos A)|` seen; zero on flat spaces.
    pub max_law_of_cosines_gap: f64,
}

impl TriangleReport {
    /// The worse of the two signed residuals.
    pub fn max_slack(&self) -> f64 {
        self.max_residual_lower.max(self.max_residual_upper)
    }

    pub fn passed(&self) -> bool {
        self.violations_lower == 0 && self.violations_upper == 0
    }
}

/// Samples geodesic triangles with every side at most the diameter bound and
/// tests both comparison inequalities at vertex angle `A`.
///
/// The lower-curvature inequality uses `ζ(κ_min, c)` at the triangle side
/// `c`. The upper-curvature inequality uses `ξ(κ_max, D)` at the diameter
/// bound `D`: with `κ_max > 0`, `ξ` evaluated at the side itself is too
/// tight (spherical triangles with sides below π/4 violate it by ~1e-3).
pub fn check_triangle_comparison(m: &dyn Manifold, trials: usize, rng: &mut dyn RngCore) -> Result<TriangleReport> {
    if trials == 0 {
        return Err(Error::param("trials", "at least one triangle is required"));
    }
    let curv = m.curvature();
    let diameter = m.diameter_bound();
    let xi_d = xi(curv.kappa_max, diameter)?;
    let reach = diameter.min(0.9 * m.exp_guard());

    let mut report = TriangleReport {
        trials,
        violations_lower: 0,
        violations_upper: 0,
        max_residual_lower: f64::NEG_INFINITY,
        max_residual_upper: f64::NEG_INFINITY,
        max_law_of_cosines_gap: 0.0,
    };
    let mut accepted = 0;
    let mut attempts = 0;
    let cap = trials.saturating_mul(SAMPLING_ATTEMPTS_PER_TRIAL);
    while accepted < trials {
        if attempts >= cap {
            return Err(Error::Degenerate(format!(
                "only {accepted} of {trials} triangles fit in diameter {diameter} after {cap} attempts"
            )));
        }
        attempts += 1;

        let x = m.random_point(rng);
        let u = m.random_tangent(&x, rng)?.scale(reach * rng.random::<f64>());
        let v = m.random_tangent(&x, rng)?.scale(reach * rng.random::<f64>());
        let y = m.exp_map(&x, &u)?;
        let z = m.exp_map(&x, &v)?;
        let log_y = m.log_map(&x, &y)?;
        let log_z = m.log_map(&x, &z)?;
        let b = m.norm(&x, &log_y)?;
        let c = m.norm(&x, &log_z)?;
        if b < 1e-9 || c < 1e-9 || b > diameter || c > diameter {
            continue;
        }
        let a = match m.distance(&y, &z) {
            Ok(a) if a <= diameter => a,
            Ok(_) | Err(Error::NoUniqueGeodesic { .. }) => continue,
            Err(e) => return Err(e),
        };
        accepted += 1;

        let cos_a = (m.inner(&x, &log_y, &log_z)? / (b * c)).clamp(-1.0, 1.0);
        let flat = b * b + c * c - 2.0 * b * c * cos_a;
        let zeta_c = zeta(curv.kappa_min, c)?;
        let lower = a * a - (flat + (zeta_c - 1.0) * b * b);
        let upper = (flat + (xi_d - 1.0) * b * b) - a * a;
        if lower > TRIANGLE_SLACK {
            report.violations_lower += 1;
        }
        if upper > TRIANGLE_SLACK {
            report.violations_upper += 1;
        }
        report.max_residual_lower = report.max_residual_lower.max(lower);
        report.max_residual_upper = report.max_residual_upper.max(upper);
        report.max_law_of_cosines_gap = report.max_law_of_cosines_gap.max((a * a - flat).abs());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    // coth(1) and coth(pi/4) to 17 digits, evaluated with mpmath
    const COTH_1: f64 = 1.313_035_285_499_331_3;
    const COTH_PI_4: f64 = 1.524_868_618_822_064;

    #[test]
    fn zeta_and_xi_examples() {
        assert_eq!(zeta(0.0, 2.7).unwrap(), 1.0);
        assert_abs_diff_eq!(zeta(-1.0, 1.0).unwrap(), COTH_1, epsilon = 1e-15);
        assert_abs_diff_eq!(zeta(-4.0, 0.5).unwrap(), COTH_1, epsilon = 1e-15);
        assert!(matches!(zeta(0.5, 1.0), Err(Error::Parameter { name: "kappa", .. })));

        assert_eq!(xi(0.0, 5.0).unwrap(), 1.0);
        assert_abs_diff_eq!(xi(1.0, FRAC_PI_4).unwrap(), FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(xi(-1.0, 1.0).unwrap(), COTH_1, epsilon = 1e-15);
        assert!(matches!(xi(1.0, FRAC_PI_2), Err(Error::Domain(_))));
    }

    #[test]
    fn tau_examples() {
        let flat = CurvatureBounds::new(0.0, 0.0, 3.0).unwrap();
        assert_eq!(tau(&flat).unwrap(), 1.0);
        let hyp = CurvatureBounds::new(-1.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(tau(&hyp).unwrap(), COTH_1, epsilon = 1e-15);
        let mixed = CurvatureBounds::new(-1.0, 1.0, FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(tau(&mixed).unwrap(), COTH_PI_4, epsilon = 1e-14);
        assert!(CurvatureBounds::new(0.5, 1.0, 0.1).is_err());
        assert!(CurvatureBounds::new(-1.0, 1.0, FRAC_PI_2).is_err());
    }

    #[test]
    fn step_size_examples() {
        assert_eq!(rceg_step_size(1.0, 1.0, 1.0).unwrap(), 0.5);
        assert_eq!(rceg_step_size(2.0, 4.0, 1.0).unwrap(), 0.125);
        assert_abs_diff_eq!(rceg_step_size(1.0, COTH_1, 1.0).unwrap(), 0.436_346_810_448_914_8, epsilon = 1e-15);
        assert!(rceg_step_size(0.0, 1.0, 1.0).is_err());
        assert!(rceg_step_size(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn series_branch_is_continuous() {
        for x in [0.99e-4, 1.01e-4] {
            assert_abs_diff_eq!(x_coth_x(x), x / x.tanh(), epsilon = 1e-15);
            assert_abs_diff_eq!(x_cot_x(x), x / x.tan(), epsilon = 1e-15);
        }
    }

    #[test]
    fn monotonicity_on_grids() {
        let cs: Vec<f64> = (1..60).map(|i| 0.025 * i as f64).collect();
        let ks: Vec<f64> = (0..40).map(|i| -0.1 * i as f64).collect();
        for &k in &ks {
            for w in cs.windows(2) {
                assert!(zeta(k, w[1]).unwrap() >= zeta(k, w[0]).unwrap());
            }
        }
        for &c in &cs {
            for w in ks.windows(2) {
                assert!(zeta(w[1], c).unwrap() >= zeta(w[0], c).unwrap());
            }
            let b = CurvatureBounds::new(-0.7, 0.3, c).unwrap();
            assert_abs_diff_eq!(tau(&b).unwrap() * xi(0.3, c).unwrap(), zeta(-0.7, c).unwrap(), epsilon = 1e-12);
        }
        for w in cs.windows(2) {
            assert!(xi(1.0, w[1]).unwrap() < xi(1.0, w[0]).unwrap());
        }
        let grid = [1.0, 1.5, 2.0, 4.0];
        for w in grid.windows(2) {
            assert!(rceg_step_size(w[1], 1.0, 1.0).unwrap() < rceg_step_size(w[0], 1.0, 1.0).unwrap());
            assert!(rceg_step_size(1.0, w[1], 1.0).unwrap() < rceg_step_size(1.0, w[0], 1.0).unwrap());
            assert!(rceg_step_size(1.0, 1.0, w[1]).unwrap() < rceg_step_size(1.0, 1.0, w[0]).unwrap());
        }
    }
}
