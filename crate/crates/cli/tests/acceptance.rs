//! Acceptance suite. Prints one `criterion N ...: PASS|FAIL` line per
//! criterion and exits nonzero if any failed.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use geominimax_cli::{run_check, run_experiment, CheckLine, CheckTarget, ExperimentConfig, TRACE_HEADER};
use geominimax_core::problems::EuclideanQuadratic;
use geominimax_core::solvers::{rceg_step, IterationRecord, RunStatus, SolverState};
use geominimax_core::{seeded_rng, Point};

struct Verdict {
    passed: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Verdict);

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, budget_s: u64) -> (bool, String) {
    (
        elapsed <= Duration::from_secs(budget_s),
        format!("{:.1}s of {budget_s}s", elapsed.as_secs_f64()),
    )
}

fn suite(target: CheckTarget, trials: usize, budget_s: u64) -> Verdict {
    let start = Instant::now();
    let lines = match run_check(target, trials, 0) {
        Ok(lines) => lines,
        Err(e) => return verdict(false, format!("suite errored: {e}")),
    };
    let (fast, time) = within_budget(start.elapsed(), budget_s);
    for line in &lines {
        println!("    {line}");
    }
    let failed: Vec<&CheckLine> = lines.iter().filter(|l| !l.passed).collect();
    verdict(
        failed.is_empty() && fast,
        format!("{} invariants, {} failed, {time}", lines.len(), failed.len()),
    )
}

fn criterion_manifolds() -> Verdict {
    suite(CheckTarget::Manifolds, 1000, 30)
}

fn criterion_triangles() -> Verdict {
    suite(CheckTarget::Triangles, 1000, 60)
}

/// Textbook extragradient on `xᵀBy`, written against plain vectors.
fn classical_extragradient(b: &DMatrix<f64>, x0: &DVector<f64>, y0: &DVector<f64>, eta: f64, iters: usize) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut out = Vec::with_capacity(iters);
    let (mut x, mut y) = (x0.clone(), y0.clone());
    for _ in 0..iters {
        let xh = &x - eta * (b * &y);
        let yh = &y + eta * (b.transpose() * &x);
        x -= eta * (b * &yh);
        y += eta * (b.transpose() * &xh);
        out.push((x.clone(), y.clone()));
    }
    out
}

fn criterion_euclidean_equivalence() -> Verdict {
    let mut rng = seeded_rng(3);
    let n = 20;
    let b = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let x0 = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let y0 = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let eta = 0.5 / b.norm();

    let reference = classical_extragradient(&b, &x0, &y0, eta, 200);
    let p = EuclideanQuadratic::new(b).unwrap();
    let mut state =
        SolverState::new(Point::pair(Point::Euclidean(x0), Point::Euclidean(y0)), eta).unwrap();
    let mut worst = 0.0_f64;
    for (x_ref, y_ref) in &reference {
        state = match rceg_step(&p, &state) {
            Ok(s) => s,
            Err(e) => return verdict(false, format!("step failed: {e}")),
        };
        let (x, y) = state.current.split().unwrap();
        worst = worst
            .max((x.as_vector().unwrap() - x_ref).amax())
            .max((y.as_vector().unwrap() - y_ref).amax());
    }
    verdict(worst <= 1e-10, format!("200 iterates, max coordinate difference {worst:.3e} (tol 1e-10)"))
}

fn criterion_rate() -> Verdict {
    suite(CheckTarget::Rate, 500, 300)
}

fn run_in(dir: &Path, text: &str) -> Result<geominimax_cli::ExperimentSummary, String> {
    let cfg: ExperimentConfig = text.parse().map_err(|e| format!("{e}"))?;
    run_experiment(&cfg, dir).map_err(|e| format!("{e}"))
}

fn distances(records: &[IterationRecord]) -> Vec<(usize, f64)> {
    records.iter().filter_map(|r| r.dist_to_saddle.map(|d| (r.t, d))).collect()
}

fn criterion_bilinear() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let base = "problem = spd_bilinear\nn = 10\neta = 0.2\niters = 5000\ngap_every = off\n";

    let rceg = match run_in(&tmp.path().join("rceg"), &format!("{base}algo = rceg\n")) {
        Ok(s) => s,
        Err(e) => return verdict(false, format!("rceg run failed: {e}")),
    };
    let rceg_final = distances(&rceg.outcome.records).last().map(|&(_, d)| d).unwrap_or(f64::NAN);
    let rceg_ok = rceg.outcome.status == RunStatus::Completed && rceg_final < 1e-3;

    let rgda = match run_in(&tmp.path().join("rgda"), &format!("{base}algo = rgda\n")) {
        Ok(s) => s,
        Err(e) => return verdict(false, format!("rgda run failed: {e}")),
    };
    let (rgda_ok, rgda_detail) = match &rgda.outcome.status {
        RunStatus::Diverged { at_iter, reason } => (true, format!("rgda diverged at {at_iter} ({reason})")),
        RunStatus::Completed => {
            let tail: Vec<f64> = distances(&rgda.outcome.records)
                .into_iter()
                .filter(|&(t, _)| t + 1000 >= 5000)
                .map(|(_, d)| d)
                .collect();
            let nondecreasing = tail.windows(2).all(|w| w[1] >= w[0]);
            (nondecreasing, format!("rgda completed, final-1000 distance non-decreasing: {nondecreasing}"))
        }
    };
    let (fast, time) = within_budget(start.elapsed(), 600);
    verdict(
        rceg_ok && rgda_ok && fast,
        format!("rceg final distance {rceg_final:.3e} (< 1e-3), {rgda_detail}, {time}"),
    )
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_robust_pca() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut all_ok = true;
    let mut details = Vec::new();
    for alpha in ["0.5", "2"] {
        let text = format!(
            "problem = robust_pca\nn = 10\nk = 8\nmu = 0.2\nl = 4.5\nalpha = {alpha}\niters = 2000\ngap_every = 50\n"
        );
        let summary = match run_in(&tmp.path().join(alpha), &text) {
            Ok(s) => s,
            Err(e) => return verdict(false, format!("alpha {alpha} run failed: {e}")),
        };
        let records = &summary.outcome.records;
        let gaps: Vec<(usize, f64)> = records
            .iter()
            .filter(|r| r.t >= 100)
            .filter_map(|r| r.gap_estimate.map(|g| (r.t, g)))
            .collect();
        let increases = gaps.windows(2).filter(|w| w[1].1 > w[0].1 + 1e-9).count();
        let last = records.last().unwrap();
        let grads_ok = last.grad_norm_x <= 1e-4 && last.grad_norm_y <= 1e-4;
        let tail_start = gaps.len() - gaps.len() / 3;
        let log_gap: Vec<(f64, f64)> = gaps[tail_start..]
            .iter()
            .map(|&(t, g)| (t as f64, g.max(f64::MIN_POSITIVE).ln()))
            .collect();
        let slope = least_squares_slope(&log_gap);
        let ok = summary.outcome.status == RunStatus::Completed
            && gaps.len() >= 3
            && increases == 0
            && grads_ok
            && slope < 0.0;
        all_ok &= ok;
        details.push(format!(
            "alpha {alpha}: {} gap increases after burn-in, final gap {:.3e}, grad norms ({:.2e}, {:.2e}), tail log-gap slope {slope:.3e}",
            increases,
            gaps.last().map_or(f64::NAN, |g| g.1),
            last.grad_norm_x,
            last.grad_norm_y
        ));
    }
    let (fast, time) = within_budget(start.elapsed(), 900);
    details.push(time);
    verdict(all_ok && fast, details.join("; "))
}

fn criterion_gradients() -> Verdict {
    suite(CheckTarget::Gradients, 50, 600)
}

fn strip_wall_ms(trace: &str) -> String {
    trace
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let configs = [
        "problem = robust_pca\nn = 5\nk = 4\nalpha = 2\niters = 150\ngap_every = 25\nseed = 9\n",
        "problem = spd_bilinear\nn = 4\niters = 60\nseed = 9\n",
        "problem = augmented_lagrangian\nn = 3\nk = 3\nalpha = 0.5\niters = 100\ngap_every = 20\nseed = 9\n",
        "problem = euclidean_quadratic\nn = 6\nalgo = rgda\neta = 0.1\niters = 100\nseed = 9\n",
    ];
    let mut identical = 0;
    for (i, text) in configs.iter().enumerate() {
        let mut traces = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("{i}-{rep}"));
            if let Err(e) = run_in(&dir, text) {
                return verdict(false, format!("config {i} failed: {e}"));
            }
            let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
            let manifest = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
            traces.push((trace, manifest));
        }
        let header_ok = traces[0].0.lines().next() == Some(TRACE_HEADER);
        if header_ok && strip_wall_ms(&traces[0].0) == strip_wall_ms(&traces[1].0) && traces[0].1 == traces[1].1 {
            identical += 1;
        }
    }
    verdict(
        identical == configs.len(),
        format!("{identical}/{} configs reproduced trace.csv (without wall_ms) and manifest byte-identically", configs.len()),
    )
}

fn main() -> ExitCode {
    // libtest passes flags such as --nocapture or a name filter; the suite
    // always runs in full
    let criteria: [Criterion; 8] = [
        ("manifold invariants", criterion_manifolds),
        ("comparison inequalities", criterion_triangles),
        ("euclidean equivalence", criterion_euclidean_equivalence),
        ("rate bound", criterion_rate),
        ("spd bilinear rceg vs rgda", criterion_bilinear),
        ("robust pca gap decay", criterion_robust_pca),
        ("gradient checks", criterion_gradients),
        ("determinism", criterion_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        println!(
            "criterion {} {name}: {} ({})",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
