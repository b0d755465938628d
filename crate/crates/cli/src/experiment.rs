//! Builds a problem from a config, runs it and writes `trace.csv` and
//! `manifest.json`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use geominimax_core::linalg::{gaussian_matrix, random_spd, seeded_rng};
use geominimax_core::problems::{
    estimate_smoothness, AugmentedLagrangian, EuclideanQuadratic, LogDetConstraint, MeanHalfSquaredDistance,
    MinimaxProblem, RobustPca, RobustPcaInstance, ScalarField, SpdBilinear,
};
use geominimax_core::solvers::{run, IterationRecord, RunConfig, RunOutcome, RunStatus, StepSize};
use geominimax_core::{Manifold, Point, SpdManifold, SphereManifold};

use crate::config::{ExperimentConfig, ProblemKind};
use crate::dataset::generate_dataset_with;
use crate::HarnessError;

pub const TRACE_HEADER: &str = "iter,value,grad_norm_x,grad_norm_y,dist_to_ref,gap_estimate,wall_ms";

/// Random point pairs used by the empirical smoothness estimate.
const SMOOTHNESS_PAIRS: usize = 100;

/// Radius of the smoothness sampling ball when no saddle is known.
const SMOOTHNESS_RADIUS: f64 = 0.5;

/// A problem instance with its starting pair.
#[derive(Debug)]
pub struct Instance {
    pub problem: Box<dyn MinimaxProblem>,
    pub start: Point,
}

fn gaussian_vector(n: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn spd_point(n: usize, mu: f64, l: f64, rng: &mut dyn RngCore) -> Result<Point, HarnessError> {
    Ok(Point::Spd(random_spd(n, mu, l, rng)?.into_matrix()))
}

fn arithmetic_mean(data: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = data[0].nrows();
    data.iter().fold(DMatrix::zeros(n, n), |acc, m| acc + m) / data.len() as f64
}

/// Draws the problem data and the starting pair from `seed`.
///
/// * `euclidean_quadratic`: Gaussian `B` and Gaussian start vectors.
/// * `spd_bilinear`: saddle `(x0, y0)` and start drawn by `random_spd(n, mu, l)`.
/// * `robust_pca`: `k` data matrices, a uniform random unit vector and the
///   arithmetic mean of the data.
/// * `augmented_lagrangian`: `g = ½ mean d²(x, M_i)` with the single
///   constraint `log det x = 0`, started at the data mean with `λ = 0`.
///
/// Problems without a closed-form smoothness constant get the empirical
/// estimate when the step size is `auto` or inner gap solves need it.
pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance, HarnessError> {
    let mut rng = seeded_rng(cfg.seed);
    let rng: &mut dyn RngCore = &mut rng;
    let n = cfg.n;
    let needs_l = cfg.eta == StepSize::Auto;

    let inst = match cfg.problem {
        ProblemKind::EuclideanQuadratic => {
            let b = gaussian_matrix(n, rng);
            let x = Point::Euclidean(gaussian_vector(n, rng));
            let y = Point::Euclidean(gaussian_vector(n, rng));
            Instance {
                problem: Box::new(EuclideanQuadratic::new(b)?),
                start: Point::pair(x, y),
            }
        }
        ProblemKind::SpdBilinear => {
            let x0 = spd_point(n, cfg.mu, cfg.l, rng)?;
            let y0 = spd_point(n, cfg.mu, cfg.l, rng)?;
            let start = Point::pair(spd_point(n, cfg.mu, cfg.l, rng)?, spd_point(n, cfg.mu, cfg.l, rng)?);
            let mut p = SpdBilinear::new(x0.clone(), y0.clone())?;
            if needs_l {
                let saddle = Point::pair(x0, y0);
                let radius = p.domain().distance(&saddle, &start)?.max(1e-3);
                let l = estimate_smoothness(&p, &saddle, radius, SMOOTHNESS_PAIRS, rng)?;
                p = p.with_smoothness(l)?;
            }
            Instance { problem: Box::new(p), start }
        }
        ProblemKind::RobustPca => {
            let data = generate_dataset_with(n, cfg.k, cfg.mu, cfg.l, rng)?;
            let x = SphereManifold::new(n)?.random_point(rng);
            let start = Point::pair(x, Point::Spd(arithmetic_mean(&data)));
            let p = RobustPca::new(RobustPcaInstance::new(data, cfg.alpha)?)?;
            let l = estimate_smoothness(&p, &start, SMOOTHNESS_RADIUS, SMOOTHNESS_PAIRS, rng)?;
            Instance {
                problem: Box::new(p.with_smoothness(l)?),
                start,
            }
        }
        ProblemKind::AugmentedLagrangian => {
            let data = generate_dataset_with(n, cfg.k, cfg.mu, cfg.l, rng)?;
            let spd: Arc<dyn Manifold> = Arc::new(SpdManifold::new(n)?);
            let centers = data.iter().map(|m| Point::Spd(m.clone())).collect();
            let g = Arc::new(MeanHalfSquaredDistance::new(Arc::clone(&spd), centers)?);
            let h: Vec<Arc<dyn ScalarField>> = vec![Arc::new(LogDetConstraint { offset: 0.0 })];
            let p = AugmentedLagrangian::new(spd, g, h, cfg.alpha)?;
            let start = Point::pair(Point::Spd(arithmetic_mean(&data)), Point::Euclidean(DVector::zeros(1)));
            let l = estimate_smoothness(&p, &start, SMOOTHNESS_RADIUS, SMOOTHNESS_PAIRS, rng)?;
            Instance {
                problem: Box::new(p.with_smoothness(l)?),
                start,
            }
        }
    };
    Ok(inst)
}

/// Solver settings derived from a config.
pub fn run_config(cfg: &ExperimentConfig) -> RunConfig {
    let mut rc = RunConfig::new(cfg.algo, cfg.eta, cfg.iters);
    rc.record_every = cfg.record_every;
    rc.gap_every = cfg.gap_every;
    rc
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// CSV body with [`TRACE_HEADER`]. The gap column holds the inner-solver
/// estimate when one was computed and otherwise the certified lower bound.
pub fn format_trace(records: &[IterationRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.t,
            fmt_num(r.value),
            fmt_num(r.grad_norm_x),
            fmt_num(r.grad_norm_y),
            fmt_opt(r.dist_to_saddle),
            fmt_opt(r.gap_estimate.or(r.certified_gap)),
            fmt_num(r.wall_ms)
        );
    }
    s
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config: &'a str,
    problem: &'a str,
    algo: &'a str,
    seed: u64,
    eta: f64,
    eta_mode: &'a str,
    smoothness_l: Option<f64>,
    tau_m: f64,
    tau_n: f64,
    status: &'a str,
    diverged_at: Option<usize>,
    divergence_reason: Option<&'a str>,
    records: usize,
    final_dist_to_ref: Option<f64>,
    final_grad_norm_x: Option<f64>,
    final_grad_norm_y: Option<f64>,
    gap_diagnostics: Vec<String>,
}

/// What a finished run produced.
#[derive(Debug)]
pub struct ExperimentSummary {
    pub outcome: RunOutcome,
    pub smoothness: Option<f64>,
    pub trace_path: PathBuf,
    pub manifest_path: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Runs `cfg` and writes `trace.csv` and `manifest.json` into `out_dir`.
///
/// A diverged run is a normal outcome: its partial trace is written and the
/// status is recorded in the manifest.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentSummary, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let inst = build_instance(cfg)?;
    let outcome = run(inst.problem.as_ref(), &inst.start, &run_config(cfg))?;

    let trace_path = out_dir.join("trace.csv");
    write_file(&trace_path, &format_trace(&outcome.records))?;

    let (diverged_at, reason) = match &outcome.status {
        RunStatus::Completed => (None, None),
        RunStatus::Diverged { at_iter, reason } => (Some(*at_iter), Some(reason.as_str())),
    };
    let config_text = cfg.to_text();
    let last = outcome.records.last();
    let manifest = Manifest {
        config: &config_text,
        problem: cfg.problem.as_str(),
        algo: cfg.algo.as_str(),
        seed: cfg.seed,
        eta: outcome.eta,
        eta_mode: if cfg.eta == StepSize::Auto { "auto" } else { "fixed" },
        smoothness_l: inst.problem.smoothness(),
        tau_m: outcome.tau_m,
        tau_n: outcome.tau_n,
        status: outcome.status.label(),
        diverged_at,
        divergence_reason: reason,
        records: outcome.records.len(),
        final_dist_to_ref: last.and_then(|r| r.dist_to_saddle),
        final_grad_norm_x: last.map(|r| r.grad_norm_x),
        final_grad_norm_y: last.map(|r| r.grad_norm_y),
        gap_diagnostics: outcome.gap_diagnostics.iter().map(|(t, d)| format!("iter {t}: {d}")).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let manifest_path = out_dir.join("manifest.json");
    write_file(&manifest_path, &(json + "\n"))?;

    Ok(ExperimentSummary {
        smoothness: inst.problem.smoothness(),
        outcome,
        trace_path,
        manifest_path,
    })
}

/// Runs one replicate per seed, `jobs` at a time, each in
/// `out_dir/seed-<seed>`. Results come back in seed order.
pub fn run_replicates(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seeds: &[u64],
    jobs: usize,
) -> Vec<(u64, Result<ExperimentSummary, HarnessError>)> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ExperimentSummary, HarnessError>>>> =
        Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, seeds.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = seeds.get(i) else { break };
                let mut c = cfg.clone();
                c.seed = seed;
                let r = run_experiment(&c, &out_dir.join(format!("seed-{seed}")));
                results.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("workers finished");
    seeds
        .iter()
        .copied()
        .zip(results.into_iter().map(|r| r.expect("every seed ran")))
        .collect()
}
