//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may appear
//! at most once; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use geominimax_core::solvers::{Algo, StepSize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    EuclideanQuadratic,
    SpdBilinear,
    RobustPca,
    AugmentedLagrangian,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::EuclideanQuadratic => "euclidean_quadratic",
            ProblemKind::SpdBilinear => "spd_bilinear",
            ProblemKind::RobustPca => "robust_pca",
            ProblemKind::AugmentedLagrangian => "augmented_lagrangian",
        }
    }

    /// Eigenvalue range used when `mu` / `l` are not given.
    fn default_range(&self) -> (f64, f64) {
        match self {
            // wider ranges put the start outside the region where the
            // bilinear extragradient iteration contracts at eta = 0.2
            ProblemKind::SpdBilinear => (0.8, 1.25),
            _ => (0.2, 4.5),
        }
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "euclidean_quadratic" => Ok(ProblemKind::EuclideanQuadratic),
            "spd_bilinear" => Ok(ProblemKind::SpdBilinear),
            "robust_pca" => Ok(ProblemKind::RobustPca),
            "augmented_lagrangian" => Ok(ProblemKind::AugmentedLagrangian),
            other => Err(format!(
                "unknown problem `{other}` (expected euclidean_quadratic, spd_bilinear, robust_pca or augmented_lagrangian)"
            )),
        }
    }
}

fn parse_algo(s: &str) -> Result<Algo, String> {
    match s {
        "rceg" => Ok(Algo::Rceg),
        "rgda" => Ok(Algo::Rgda),
        other => Err(format!("unknown algorithm `{other}` (expected rceg or rgda)")),
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub mu: f64,
    pub l: f64,
    pub algo: Algo,
    pub eta: StepSize,
    pub iters: usize,
    pub seed: u64,
    pub record_every: usize,
    pub gap_every: Option<usize>,
    pub out: PathBuf,
}

const KEYS: [&str; 13] = [
    "problem", "n", "k", "alpha", "mu", "l", "algo", "eta", "iters", "seed", "record_every", "gap_every", "out",
];

fn field_err(field: &str, msg: impl fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{field}: {msg}"))
}

fn num<T: FromStr>(field: &str, raw: &str) -> Result<T, HarnessError>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| field_err(field, format!("cannot parse `{raw}`: {e}")))
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        text.parse()
    }

    /// Checks every field against the ranges the problems accept.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n == 0 {
            return Err(field_err("n", "dimension must be at least 1"));
        }
        if self.k == 0 {
            return Err(field_err("k", "dataset size must be at least 1"));
        }
        let alpha_ok = match self.problem {
            ProblemKind::AugmentedLagrangian => self.alpha >= 0.0,
            _ => self.alpha > 0.0,
        };
        if !alpha_ok || !self.alpha.is_finite() {
            return Err(field_err("alpha", format!("invalid penalty {} for {}", self.alpha, self.problem.as_str())));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(field_err("mu", format!("eigenvalue floor must be positive, got {}", self.mu)));
        }
        if !(self.l >= self.mu) || !self.l.is_finite() {
            return Err(field_err("l", format!("eigenvalue cap {} must be at least mu = {}", self.l, self.mu)));
        }
        if let StepSize::Fixed(eta) = self.eta {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(field_err("eta", format!("step size must be positive or `auto`, got {eta}")));
            }
        }
        if self.iters == 0 {
            return Err(field_err("iters", "budget must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(field_err("record_every", "cadence must be at least 1"));
        }
        if self.gap_every == Some(0) {
            return Err(field_err("gap_every", "cadence must be at least 1 or `off`"));
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let eta = match self.eta {
            StepSize::Auto => "auto".to_string(),
            StepSize::Fixed(v) => format!("{v:?}"),
        };
        let gap = self.gap_every.map_or("off".to_string(), |g| g.to_string());
        format!(
            "problem = {}\nn = {}\nk = {}\nalpha = {:?}\nmu = {:?}\nl = {:?}\nalgo = {}\neta = {}\niters = {}\nseed = {}\nrecord_every = {}\ngap_every = {}\nout = {}\n",
            self.problem.as_str(),
            self.n,
            self.k,
            self.alpha,
            self.mu,
            self.l,
            self.algo.as_str(),
            eta,
            self.iters,
            self.seed,
            self.record_every,
            gap,
            self.out.display()
        )
    }
}

impl FromStr for ExperimentConfig {
    type Err = HarnessError;

    fn from_str(text: &str) -> Result<Self, HarnessError> {
        let mut values: Vec<(&'static str, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1)))?;
            let key = key.trim();
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| HarnessError::Config(format!("line {}: unknown key `{key}`", lineno + 1)))?;
            if values.iter().any(|(k, _)| k == known) {
                return Err(HarnessError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            values.push((known, value.trim().to_string()));
        }
        let get = |k: &str| values.iter().find(|(key, _)| *key == k).map(|(_, v)| v.as_str());

        let problem: ProblemKind = get("problem")
            .ok_or_else(|| field_err("problem", "missing"))?
            .parse()
            .map_err(|e| field_err("problem", e))?;
        let n = num("n", get("n").ok_or_else(|| field_err("n", "missing"))?)?;
        let (mu_default, l_default) = problem.default_range();
        let cfg = ExperimentConfig {
            problem,
            n,
            k: get("k").map_or(Ok(8), |v| num("k", v))?,
            alpha: get("alpha").map_or(Ok(1.0), |v| num("alpha", v))?,
            mu: get("mu").map_or(Ok(mu_default), |v| num("mu", v))?,
            l: get("l").map_or(Ok(l_default), |v| num("l", v))?,
            algo: get("algo").map_or(Ok(Algo::Rceg), |v| parse_algo(v).map_err(|e| field_err("algo", e)))?,
            eta: match get("eta") {
                None | Some("auto") => StepSize::Auto,
                Some(v) => StepSize::Fixed(num("eta", v)?),
            },
            iters: get("iters").map_or(Ok(1000), |v| num("iters", v))?,
            seed: get("seed").map_or(Ok(0), |v| num("seed", v))?,
            record_every: get("record_every").map_or(Ok(1), |v| num("record_every", v))?,
            gap_every: match get("gap_every") {
                None => Some(50),
                Some("off") => None,
                Some(v) => Some(num("gap_every", v)?),
            },
            out: PathBuf::from(get("out").unwrap_or("runs")),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg: ExperimentConfig = "problem = spd_bilinear\nn = 10\n".parse().unwrap();
        assert_eq!(cfg.problem, ProblemKind::SpdBilinear);
        assert_eq!(cfg.n, 10);
        assert_eq!(cfg.eta, StepSize::Auto);
        assert_eq!(cfg.record_every, 1);
        assert_eq!(cfg.gap_every, Some(50));
        assert_eq!(cfg.algo, Algo::Rceg);
        assert_eq!((cfg.mu, cfg.l), (0.8, 1.25));
    }

    #[test]
    fn rejects_bad_fields() {
        let err = "problem = robust_pca\nn = 4\nalpha = -1\n".parse::<ExperimentConfig>().unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
        let err = "problem = robust_pca\nn = 4\niters = 0\n".parse::<ExperimentConfig>().unwrap_err();
        assert!(err.to_string().contains("iters"), "{err}");
        let err = "problem = robust_pca\nn = 4\nbogus = 1\n".parse::<ExperimentConfig>().unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = "problem = robust_pca\nn = 4\nn = 5\n".parse::<ExperimentConfig>().unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!("n = 4\n".parse::<ExperimentConfig>().is_err());
        assert!("problem = robust_pca\nn 4\n".parse::<ExperimentConfig>().is_err());
    }

    #[test]
    fn text_round_trip() {
        let src = "# robust pca run\nproblem = robust_pca\nn = 10\nk = 8\nalpha = 0.5\nmu = 0.2\nl = 4.5\neta = 0.05\niters = 300\nseed = 7\ngap_every = off\nout = /tmp/x y\n";
        let a: ExperimentConfig = src.parse().unwrap();
        let b: ExperimentConfig = a.to_text().parse().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
    }
}
