//! Corrected extragradient, gradient descent-ascent, geodesic averaging and
//! duality-gap estimation.

use std::time::Instant;

use crate::curvature::{rceg_step_size, tau, CurvatureBounds};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point, TangentVector};
use crate::problems::MinimaxProblem;

/// Consecutive value increases after which gradient descent gives up.
pub const GD_MAX_CONSECUTIVE_INCREASES: usize = 10;

/// An outer run is declared diverged once the iterate is farther than this
/// multiple of its initial scale from the starting pair.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Iterates and step size of a minimax solver.
///
/// `current` is `(x_t, y_t)`, `extrapolated` is the latest `(w_t, z_t)` and
/// `average` the geodesic running mean of the extrapolated pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: usize,
    pub current: Point,
    pub extrapolated: Point,
    pub average: Point,
    pub eta: f64,
}

impl SolverState {
    /// State at `t = 0` with `w_0 = x_0`, `z_0 = y_0`.
    pub fn new(start: Point, eta: f64) -> Result<Self> {
        start.split()?;
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::param("eta", format!("step size must be positive, got {eta}")));
        }
        Ok(SolverState {
            t: 0,
            extrapolated: start.clone(),
            average: start.clone(),
            current: start,
            eta,
        })
    }
}

fn block_grads(p: &dyn MinimaxProblem, at: &Point) -> Result<(TangentVector, TangentVector)> {
    let (x, y) = at.split()?;
    Ok((p.grad_x(x, y)?, p.grad_y(x, y)?))
}

/// One corrected extragradient step:
///
/// ```text
/// w  = Exp_x(−η ∇x f(x, y))          z  = Exp_y(η ∇y f(x, y))
/// x⁺ = Exp_w(−η ∇x f(w, z) + Log_w x) y⁺ = Exp_z(η ∇y f(w, z) + Log_z y)
/// ```
pub fn rceg_step(p: &dyn MinimaxProblem, s: &SolverState) -> Result<SolverState> {
    let (gx, gy) = block_grads(p, &s.current)?;
    rceg_step_with(p, s, &gx, &gy)
}

/// [`rceg_step`] with the gradients at `s.current` already evaluated.
pub fn rceg_step_with(p: &dyn MinimaxProblem, s: &SolverState, gx: &TangentVector, gy: &TangentVector) -> Result<SolverState> {
    let dom = p.domain();
    let (m, n) = (dom.first(), dom.second());
    let (x, y) = s.current.split()?;
    let eta = s.eta;

    let w = m.exp_map(x, &gx.scale(-eta))?;
    let z = n.exp_map(y, &gy.scale(eta))?;
    let gxw = p.grad_x(&w, &z)?;
    let gyz = p.grad_y(&w, &z)?;
    let x_next = m.exp_map(&w, &m.log_map(&w, x)?.axpy(-eta, &gxw)?)?;
    let y_next = n.exp_map(&z, &n.log_map(&z, y)?.axpy(eta, &gyz)?)?;

    let extrapolated = Point::pair(w, z);
    let average = geodesic_average_update(dom, &s.average, &extrapolated, s.t)?;
    Ok(SolverState {
        t: s.t + 1,
        current: Point::pair(x_next, y_next),
        extrapolated,
        average,
        eta,
    })
}

/// Simultaneous descent-ascent step `x⁺ = Exp_x(−η∇x f)`, `y⁺ = Exp_y(η∇y f)`.
pub fn rgda_step(p: &dyn MinimaxProblem, s: &SolverState) -> Result<SolverState> {
    let (gx, gy) = block_grads(p, &s.current)?;
    rgda_step_with(p, s, &gx, &gy)
}

/// [`rgda_step`] with the gradients at `s.current` already evaluated.
pub fn rgda_step_with(p: &dyn MinimaxProblem, s: &SolverState, gx: &TangentVector, gy: &TangentVector) -> Result<SolverState> {
    let dom = p.domain();
    let (x, y) = s.current.split()?;
    let next = Point::pair(
        dom.first().exp_map(x, &gx.scale(-s.eta))?,
        dom.second().exp_map(y, &gy.scale(s.eta))?,
    );
    let average = geodesic_average_update(dom, &s.average, &next, s.t)?;
    Ok(SolverState {
        t: s.t + 1,
        extrapolated: next.clone(),
        current: next,
        average,
        eta: s.eta,
    })
}

/// `avg_{t+1} = Exp_{avg_t}(Log_{avg_t}(new) / (t + 1))`; at `t = 0` the
/// average becomes `new`.
pub fn geodesic_average_update(m: &dyn Manifold, avg: &Point, new: &Point, t: usize) -> Result<Point> {
    if t == 0 {
        return Ok(new.clone());
    }
    let step = m.log_map(avg, new)?.scale(1.0 / (t as f64 + 1.0));
    m.exp_map(avg, &step)
}

/// Settings of the inner Riemannian gradient method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdSettings {
    pub eta: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Iterates farther than this from the start count as divergence.
    pub max_radius: f64,
}

impl GdSettings {
    /// `η = 1/(2L)`, tolerance `1e-8`, cap `10 · outer_budget`.
    pub fn for_smoothness(l: f64, outer_budget: usize, max_radius: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::param("l", format!("smoothness must be positive, got {l}")));
        }
        Ok(GdSettings {
            eta: 1.0 / (2.0 * l),
            max_iters: 10 * outer_budget.max(1),
            tol: 1e-8,
            max_radius,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::param("eta", format!("inner step must be positive, got {}", self.eta)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::param("tol", format!("tolerance must be nonnegative, got {}", self.tol)));
        }
        if !(self.max_radius > 0.0) {
            return Err(Error::param("max_radius", "must be positive"));
        }
        Ok(())
    }
}

/// Result of [`riemannian_gd`].
#[derive(Debug, Clone, PartialEq)]
pub struct GdOutcome {
    pub point: Point,
    pub iterations: usize,
    pub value: f64,
    pub grad_norm: f64,
    /// False when the cap was reached before `‖grad‖ ≤ tol`.
    pub converged: bool,
}

/// Riemannian gradient descent `x⁺ = Exp_x(−η grad φ(x))`.
pub fn riemannian_gd<F, G>(m: &dyn Manifold, phi: F, grad: G, x0: &Point, settings: &GdSettings) -> Result<GdOutcome>
where
    F: Fn(&Point) -> Result<f64>,
    G: Fn(&Point) -> Result<TangentVector>,
{
    settings.validate()?;
    let mut x = x0.clone();
    let mut value = phi(&x)?;
    let mut increases = 0;
    for it in 0..=settings.max_iters {
        if !value.is_finite() {
            return Err(Error::Divergence(format!("inner value became {value} at iteration {it}")));
        }
        let g = grad(&x)?;
        let gn = m.norm(&x, &g)?;
        if gn <= settings.tol || it == settings.max_iters {
            return Ok(GdOutcome {
                point: x,
                iterations: it,
                value,
                grad_norm: gn,
                converged: gn <= settings.tol,
            });
        }
        let next = m.exp_map(&x, &g.scale(-settings.eta))?;
        let next_value = phi(&next)?;
        if next_value > value {
            increases += 1;
            if increases >= GD_MAX_CONSECUTIVE_INCREASES {
                return Err(Error::Divergence(format!(
                    "inner value increased {increases} times in a row (now {next_value:.6e})"
                )));
            }
        } else {
            increases = 0;
        }
        if m.distance(x0, &next)? > settings.max_radius {
            return Err(Error::Divergence(format!(
                "inner iterate left the radius-{} ball around its start at iteration {}",
                settings.max_radius,
                it + 1
            )));
        }
        x = next;
        value = next_value;
    }
    unreachable!("loop returns at max_iters")
}

/// Duality-gap information at a pair `(x̂, ŷ)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GapEstimate {
    /// `max_y f(x̂, y) − min_x f(x, ŷ)` from inner solves, floored at 0.
    pub estimate: Option<f64>,
    /// Whether both inner solves met their tolerance.
    pub inner_converged: bool,
    /// `f(x̂, y*) − f(x*, ŷ)`, a lower bound on the true gap.
    pub certified: Option<f64>,
    /// Why `estimate` is missing, if it is.
    pub diagnostic: Option<String>,
}

/// Certified lower bound `f(x̂, y*) − f(x*, ŷ)` when a saddle is known.
pub fn certified_gap(p: &dyn MinimaxProblem, at: &Point) -> Result<Option<f64>> {
    let Some((xs, ys)) = p.known_saddle() else {
        return Ok(None);
    };
    let (x, y) = at.split()?;
    Ok(Some(p.value(x, &ys)? - p.value(&xs, y)?))
}

/// Runs inner descent on `f(·, ŷ)` from `x̂` and ascent on `f(x̂, ·)` from
/// `ŷ`. An inner divergence leaves `estimate` empty and explains why.
pub fn estimate_duality_gap(p: &dyn MinimaxProblem, at: &Point, inner: &GdSettings) -> Result<GapEstimate> {
    let certified = certified_gap(p, at)?;
    let (xh, yh) = at.split()?;
    let dom = p.domain();

    let ascent = riemannian_gd(
        dom.second(),
        |y| Ok(-p.value(xh, y)?),
        |y| Ok(p.grad_y(xh, y)?.neg()),
        yh,
        inner,
    );
    let descent = ascent.as_ref().ok().map(|_| {
        riemannian_gd(dom.first(), |x| p.value(x, yh), |x| p.grad_x(x, yh), xh, inner)
    });
    match (ascent, descent) {
        (Ok(up), Some(Ok(down))) => Ok(GapEstimate {
            estimate: Some((-up.value - down.value).max(0.0)),
            inner_converged: up.converged && down.converged,
            certified,
            diagnostic: None,
        }),
        (Err(e), _) | (_, Some(Err(e))) if e.is_divergence_signal() => Ok(GapEstimate {
            estimate: None,
            inner_converged: false,
            certified,
            diagnostic: Some(format!("inner solver failed: {e}")),
        }),
        (Err(e), _) | (_, Some(Err(e))) => Err(e),
        (Ok(_), None) => unreachable!("descent runs whenever ascent succeeded"),
    }
}

/// Outer algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Rceg,
    Rgda,
}

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Rceg => "rceg",
            Algo::Rgda => "rgda",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// `rceg_step_size(L, τ_M, τ_N)` from the problem's smoothness and the
    /// curvature metadata of both blocks.
    Auto,
}

/// Pair at which the duality gap is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapPoint {
    /// The geodesic average of the extrapolated pairs.
    Average,
    /// The latest iterate `(x_t, y_t)`.
    Current,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algo: Algo,
    pub step: StepSize,
    pub iters: usize,
    pub record_every: usize,
    /// Inner gap-estimation cadence; `None` disables it.
    pub gap_every: Option<usize>,
    pub gap_point: GapPoint,
    /// Inner solver settings; derived from the smoothness constant when absent.
    pub inner: Option<GdSettings>,
}

impl RunConfig {
    pub fn new(algo: Algo, step: StepSize, iters: usize) -> Self {
        RunConfig {
            algo,
            step,
            iters,
            record_every: 1,
            gap_every: Some(50),
            gap_point: GapPoint::Average,
            inner: None,
        }
    }
}

/// Diagnostics at one recorded iteration. Norms and the value refer to
/// `(x_t, y_t)`; gaps to the pair selected by [`GapPoint`].
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub value: f64,
    pub grad_norm_x: f64,
    pub grad_norm_y: f64,
    pub dist_to_saddle: Option<f64>,
    pub gap_estimate: Option<f64>,
    pub certified_gap: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Diverged { at_iter: usize, reason: String },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Diverged { .. } => "diverged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<IterationRecord>,
    pub state: SolverState,
    pub status: RunStatus,
    pub eta: f64,
    pub tau_m: f64,
    pub tau_n: f64,
    /// Inner-solver diagnostics for gap evaluations that produced no estimate.
    pub gap_diagnostics: Vec<(usize, String)>,
}

impl RunOutcome {
    /// The averaged output pair `(w̄_T, z̄_T)`.
    pub fn averaged(&self) -> &Point {
        &self.state.average
    }
}

/// Distortion ratios `(τ_M, τ_N)` at each block's diameter bound.
pub fn distortion_ratios(p: &dyn MinimaxProblem) -> Result<(f64, f64)> {
    let dom = p.domain();
    Ok((tau(&CurvatureBounds::of(dom.first())?)?, tau(&CurvatureBounds::of(dom.second())?)?))
}

/// Runs `cfg.iters` outer steps from `start`, recording diagnostics at
/// `t = 0`, every `record_every` steps and at the last step.
///
/// Step errors that signal leaving the well-defined region, non-finite
/// values, and iterates farther than [`DIVERGENCE_FACTOR`] times the initial
/// scale end the run early with [`RunStatus::Diverged`].
pub fn run(p: &dyn MinimaxProblem, start: &Point, cfg: &RunConfig) -> Result<RunOutcome> {
    if cfg.iters == 0 {
        return Err(Error::param("iters", "budget must be at least 1"));
    }
    if cfg.record_every == 0 {
        return Err(Error::param("record_every", "cadence must be at least 1"));
    }
    if cfg.gap_every == Some(0) {
        return Err(Error::param("gap_every", "cadence must be at least 1"));
    }
    let dom = p.domain();
    dom.check_point(start)?;
    let (tau_m, tau_n) = distortion_ratios(p)?;
    let eta = match cfg.step {
        StepSize::Fixed(eta) => eta,
        StepSize::Auto => {
            let l = p
                .smoothness()
                .ok_or_else(|| Error::param("eta", "auto step size needs a smoothness constant"))?;
            rceg_step_size(l, tau_m, tau_n)?
        }
    };
    let inner = match (cfg.inner, p.smoothness()) {
        (Some(s), _) => Some(s),
        (None, Some(l)) => Some(GdSettings::for_smoothness(l, cfg.iters, 10.0 * dom.diameter_bound())?),
        (None, None) => None,
    };

    let saddle = p.known_saddle().map(|(x, y)| Point::pair(x, y));
    let scale = match &saddle {
        Some(s) => dom.distance(start, s)?.max(1.0),
        None => dom.diameter_bound().max(1.0),
    };
    let mut state = SolverState::new(start.clone(), eta)?;
    let mut records = Vec::new();
    let mut gap_diagnostics = Vec::new();
    let clock = Instant::now();

    let diverged = |t: usize, reason: String| RunStatus::Diverged { at_iter: t, reason };
    let mut status = RunStatus::Completed;

    for t in 0..=cfg.iters {
        let grads = block_grads(p, &state.current);
        let (gx, gy) = match grads {
            Ok(g) => g,
            Err(e) if e.is_divergence_signal() => {
                status = diverged(t, e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let (x, y) = state.current.split()?;
        let gnx = dom.first().norm(x, &gx)?;
        let gny = dom.second().norm(y, &gy)?;
        let value = match p.value(x, y) {
            Ok(v) => v,
            Err(e) if e.is_divergence_signal() => {
                status = diverged(t, e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        if !value.is_finite() || !gnx.is_finite() || !gny.is_finite() {
            status = diverged(t, format!("non-finite diagnostics (value {value}, grads {gnx}, {gny})"));
            break;
        }
        let drift = dom.distance(start, &state.current).unwrap_or(f64::INFINITY);
        if !(drift <= DIVERGENCE_FACTOR * scale) {
            status = diverged(t, format!("iterate moved {drift:.6e} from the start (limit {:.6e})", DIVERGENCE_FACTOR * scale));
            break;
        }

        let last = t == cfg.iters;
        if t % cfg.record_every == 0 || last {
            let gap_at = match cfg.gap_point {
                GapPoint::Average => &state.average,
                GapPoint::Current => &state.current,
            };
            let certified = certified_gap(p, gap_at)?;
            let mut gap_estimate = None;
            let due = cfg.gap_every.is_some_and(|every| t % every == 0 || last);
            if due && p.coercive_slices() {
                match &inner {
                    Some(settings) => {
                        let g = estimate_duality_gap(p, gap_at, settings)?;
                        if let Some(d) = g.diagnostic {
                            gap_diagnostics.push((t, d));
                        }
                        gap_estimate = g.estimate;
                    }
                    None => gap_diagnostics.push((t, "no inner step size: smoothness unknown".into())),
                }
            }
            records.push(IterationRecord {
                t,
                value,
                grad_norm_x: gnx,
                grad_norm_y: gny,
                dist_to_saddle: match &saddle {
                    Some(s) => Some(dom.distance(&state.current, s)?),
                    None => None,
                },
                gap_estimate,
                certified_gap: certified,
                wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            });
        }
        if last {
            break;
        }

        let next = match cfg.algo {
            Algo::Rceg => rceg_step_with(p, &state, &gx, &gy),
            Algo::Rgda => rgda_step_with(p, &state, &gx, &gy),
        };
        match next {
            Ok(s) if s.current.is_finite() => state = s,
            Ok(_) => {
                status = diverged(t + 1, "iterate became non-finite".into());
                break;
            }
            Err(e) if e.is_divergence_signal() => {
                status = diverged(t + 1, e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(RunOutcome {
        records,
        state,
        status,
        eta,
        tau_m,
        tau_n,
        gap_diagnostics,
    })
}
