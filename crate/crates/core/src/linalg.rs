//! Dense symmetric linear algebra used by the SPD geometry.
//!
//! Everything here works on small dense matrices (n up to a few hundred) and
//! favours accuracy and determinism over speed: the eigensolver is a cyclic
//! Jacobi sweep, which is backward stable and produces orthogonal
//! eigenvectors to working precision without any pivoting heuristics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Maximum number of full Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Off-diagonal convergence threshold, relative to the Frobenius norm.
pub const JACOBI_REL_TOL: f64 = 1e-12;
/// Eigenvalues must exceed `POSITIVITY_FLOOR * max(1, lambda_max)` for log/sqrt.
pub const POSITIVITY_FLOOR: f64 = 1e-12;
/// Relative floor on |R_ii| below which a QR input is declared rank deficient.
pub const QR_RANK_FLOOR: f64 = 1e-12;

/// The generator used for every seeded draw in this crate: ChaCha with
/// 8 rounds, seeded through `seed_from_u64`. Its output stream is specified
/// independently of platform and word size.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A real symmetric matrix. Construction symmetrizes the input exactly,
/// so `entries[(i, j)] == entries[(j, i)]` bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Contract(format!(
                "symmetric matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::param("n", "dimension must be at least 1"));
        }
        Ok(SymMatrix(symmetrize(a)))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }
}

/// Returns `(a + aᵀ)/2`, with the upper triangle copied to the lower so the
/// result is exactly symmetric.
pub fn symmetrize(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Eigendecomposition `a = q · diag(lambda) · qᵀ` with eigenvalues in
/// descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub q: DMatrix<f64>,
    pub lambda: DVector<f64>,
}

impl SpectralDecomposition {
    /// Rebuilds `q · diag(g(lambda)) · qᵀ`.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.lambda.len();
        let mut scaled = self.q.clone();
        for j in 0..n {
            let s = g(self.lambda[j]);
            scaled.column_mut(j).scale_mut(s);
        }
        SymMatrix(symmetrize(&scaled * self.q.transpose()))
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.lambda[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.lambda[self.lambda.len() - 1]
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted descending (ties keep their sweep order) and every
/// eigenvector is signed so that its first component with magnitude above
/// `1e-12` is positive.
pub fn sym_eig(a: &SymMatrix) -> Result<SpectralDecomposition> {
    let n = a.dim();
    let mut m = a.0.clone();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("eigendecomposition of a non-finite matrix".into()));
    }
    let norm = m.norm();
    let mut v = DMatrix::<f64>::identity(n, n);
    let threshold = JACOBI_REL_TOL * norm;

    // Sweeps continue past `threshold` until every rotation is negligible at
    // machine precision; the threshold only decides success at the cap.
    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                if apq.abs() <= f64::EPSILON * 0.25 * (m[(p, p)].abs() * m[(q, q)].abs()).sqrt().max(f64::MIN_POSITIVE) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                if s == 0.0 {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged && off_diagonal_norm(&m) > threshold {
        return Err(Error::NumericalFailure {
            what: "Jacobi eigensolver",
            norm,
            cap: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the sweep order among exact ties
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut lambda = DVector::<f64>::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        lambda[dst] = m[(src, src)];
        let mut col = v.column(src).clone_owned();
        if let Some(first) = col.iter().find(|c| c.abs() > 1e-12) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        q.set_column(dst, &col);
    }
    Ok(SpectralDecomposition { q, lambda })
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Scalar functions that can be lifted to symmetric matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFunction {
    Exp,
    Log,
    Sqrt,
    InvSqrt,
}

impl MatrixFunction {
    fn needs_positive(self) -> bool {
        !matches!(self, MatrixFunction::Exp)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            MatrixFunction::Exp => x.exp(),
            MatrixFunction::Log => x.ln(),
            MatrixFunction::Sqrt => x.sqrt(),
            MatrixFunction::InvSqrt => 1.0 / x.sqrt(),
        }
    }
}

/// Checks the spectrum against the positivity floor used by log/sqrt.
pub fn check_positive(decomp: &SpectralDecomposition) -> Result<()> {
    let lmax = decomp.max_eigenvalue();
    let lmin = decomp.min_eigenvalue();
    let floor = POSITIVITY_FLOOR * lmax.max(1.0);
    if !(lmin > floor) {
        return Err(Error::Domain(format!(
            "eigenvalue {lmin:.6e} is not above the positivity floor {floor:.3e}"
        )));
    }
    Ok(())
}

/// Applies `f` to the spectrum of `a`: `q · diag(f(lambda)) · qᵀ`.
pub fn sym_fun(a: &SymMatrix, f: MatrixFunction) -> Result<SymMatrix> {
    let decomp = sym_eig(a)?;
    if f.needs_positive() {
        check_positive(&decomp)?;
    }
    Ok(decomp.map(|x| f.apply(x)))
}

/// Householder QR with the sign convention `diag(R) >= 0`.
///
/// Returns `(Q, R)`; fails when some `|R_ii|` falls below
/// `QR_RANK_FLOOR * max(1, max_j |R_jj|)`.
pub fn qr_decompose(b: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if b.nrows() != b.ncols() || b.nrows() == 0 {
        return Err(Error::Contract(format!(
            "QR input must be square and nonempty, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("QR input has non-finite entries".into()));
    }
    let qr = b.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let n = b.nrows();
    let scale = (0..n).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max).max(1.0);
    for i in 0..n {
        if r[(i, i)].abs() <= QR_RANK_FLOOR * scale {
            return Err(Error::Degenerate(format!(
                "rank deficient input: |R[{i},{i}]| = {:.3e}",
                r[(i, i)].abs()
            )));
        }
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
            r.row_mut(i).neg_mut();
        }
    }
    Ok((q, r))
}

/// Orthogonal factor of the QR decomposition of `b` (see [`qr_decompose`]).
pub fn qr_orthonormal(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    qr_decompose(b).map(|(q, _)| q)
}

/// Square matrix of i.i.d. standard normal entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random SPD matrix `Q · diag(sigma) · Qᵀ` with `Q` the orthogonal factor of
/// a Gaussian matrix and `sigma_i` uniform on `[mu, l]`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, mu: f64, l: f64, rng: &mut R) -> Result<SymMatrix> {
    if n == 0 {
        return Err(Error::param("n", "dimension must be at least 1"));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::param("mu", format!("eigenvalue floor must be positive, got {mu}")));
    }
    if !(l >= mu) || !l.is_finite() {
        return Err(Error::param("l", format!("eigenvalue cap {l} must be at least mu = {mu}")));
    }
    let q = loop {
        // a Gaussian matrix is singular with probability zero; retry anyway
        match qr_orthonormal(&gaussian_matrix(n, rng)) {
            Ok(q) => break q,
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    };
    let sigma: Vec<f64> = (0..n)
        .map(|_| if l > mu { rng.random_range(mu..=l) } else { mu })
        .collect();
    let mut scaled = q.clone();
    for (j, s) in sigma.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    SymMatrix::new(&scaled * q.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_symmetric(n: usize, rng: &mut SeededRng) -> SymMatrix {
        SymMatrix::new(gaussian_matrix(n, rng)).unwrap()
    }

    #[test]
    fn diagonal_input_is_already_decomposed() {
        let d = sym_eig(&SymMatrix::from_diagonal(&[3.0, 1.0])).unwrap();
        assert_eq!(d.lambda.as_slice(), &[3.0, 1.0]);
        assert_eq!(d.q, DMatrix::identity(2, 2));
    }

    #[test]
    fn identity_has_unit_spectrum() {
        for n in 1..6 {
            let d = sym_eig(&SymMatrix::identity(n)).unwrap();
            assert!(d.lambda.iter().all(|&l| l == 1.0));
        }
    }

    #[test]
    fn two_by_two_matches_characteristic_polynomial() {
        // roots of (2 - t)^2 - 1 = 0 are 3 and 1
        let a = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let d = sym_eig(&a).unwrap();
        assert_abs_diff_eq!(d.lambda[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.lambda[1], 1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(d.q[(0, 0)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(d.q[(1, 0)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(d.q[(0, 1)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(d.q[(1, 1)], -h, epsilon = 1e-14);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let a = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0])).unwrap();
        assert!(matches!(sym_eig(&a), Err(Error::Domain(_))));
    }

    #[test]
    fn reconstruction_and_orthogonality_on_random_matrices() {
        let mut rng = seeded_rng(7);
        for trial in 0..500 {
            let n = 1 + trial % 12;
            let a = random_symmetric(n, &mut rng);
            let d = sym_eig(&a).unwrap();
            let rec = d.map(|x| x);
            let rel = (rec.as_matrix() - a.as_matrix()).norm() / a.frobenius().max(1e-300);
            assert!(rel < 1e-10, "reconstruction error {rel}");
            let orth = (&d.q * d.q.transpose() - DMatrix::identity(n, n)).norm();
            assert!(orth < 1e-10, "orthogonality error {orth}");
            for w in d.lambda.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn matrix_function_examples() {
        let zero = SymMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(sym_fun(&zero, MatrixFunction::Exp).unwrap(), SymMatrix::identity(3));

        let e = std::f64::consts::E;
        let l = sym_fun(&SymMatrix::from_diagonal(&[e, 1.0]), MatrixFunction::Log).unwrap();
        assert_abs_diff_eq!(l.as_matrix()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.as_matrix()[(1, 1)], 0.0, epsilon = 1e-15);

        let s = sym_fun(&SymMatrix::from_diagonal(&[4.0, 9.0]), MatrixFunction::Sqrt).unwrap();
        assert_eq!(s, SymMatrix::from_diagonal(&[2.0, 3.0]));
    }

    #[test]
    fn log_of_indefinite_matrix_reports_offending_eigenvalue() {
        let a = SymMatrix::from_diagonal(&[2.0, -0.5]);
        match sym_fun(&a, MatrixFunction::Log) {
            Err(Error::Domain(msg)) => assert!(msg.contains("-5.0"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(sym_fun(&SymMatrix::from_diagonal(&[1.0, 0.0]), MatrixFunction::Sqrt).is_err());
        assert!(sym_fun(&SymMatrix::from_diagonal(&[1.0, -1.0]), MatrixFunction::Exp).is_ok());
    }

    #[test]
    fn exp_log_and_sqrt_round_trips() {
        let mut rng = seeded_rng(11);
        for trial in 0..100 {
            let n = 2 + trial % 6;
            // condition numbers up to 1e6
            let a = random_spd(n, 1e-3, 1e3, &mut rng).unwrap();
            let back = sym_fun(&sym_fun(&a, MatrixFunction::Log).unwrap(), MatrixFunction::Exp).unwrap();
            assert!((back.as_matrix() - a.as_matrix()).norm() < 1e-8);
            let r = sym_fun(&a, MatrixFunction::Sqrt).unwrap();
            let sq = r.as_matrix() * r.as_matrix();
            assert!((sq - a.as_matrix()).norm() < 1e-9);
            let ri = sym_fun(&a, MatrixFunction::InvSqrt).unwrap();
            let id = r.as_matrix() * ri.as_matrix();
            assert!((id - DMatrix::identity(n, n)).norm() < 1e-8);
        }
    }

    #[test]
    fn qr_examples() {
        let (q, r) = qr_decompose(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(q, DMatrix::identity(3, 3));
        assert_eq!(r, DMatrix::identity(3, 3));

        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 3.0]));
        let (q, r) = qr_decompose(&b).unwrap();
        assert_abs_diff_eq!(q, DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0])), epsilon = 1e-15);
        assert_abs_diff_eq!(r, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])), epsilon = 1e-15);
    }

    #[test]
    fn qr_rejects_rank_deficient_input() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(qr_orthonormal(&b), Err(Error::Degenerate(_))));
    }

    #[test]
    fn qr_orthogonality_on_random_inputs() {
        let mut rng = seeded_rng(3);
        for trial in 0..500 {
            let n = 1 + trial % 10;
            let b = gaussian_matrix(n, &mut rng);
            let (q, r) = qr_decompose(&b).unwrap();
            assert!((q.transpose() * &q - DMatrix::identity(n, n)).norm() < 1e-10);
            assert!((&q * &r - &b).norm() < 1e-10 * b.norm().max(1.0));
            assert!((0..n).all(|i| r[(i, i)] >= 0.0));
        }
    }

    #[test]
    fn random_spd_contract() {
        let mut rng = seeded_rng(5);
        for _ in 0..100 {
            let a = random_spd(6, 0.2, 4.5, &mut rng).unwrap();
            let d = sym_eig(&a).unwrap();
            assert!(d.min_eigenvalue() >= 0.2 - 1e-12 && d.max_eigenvalue() <= 4.5 + 1e-12);
        }
        let a = random_spd(50, 0.2, 4.5, &mut seeded_rng(42)).unwrap();
        let b = random_spd(50, 0.2, 4.5, &mut seeded_rng(42)).unwrap();
        assert_eq!(a, b);
        let d = sym_eig(&a).unwrap();
        assert!(d.min_eigenvalue() >= 0.2 - 1e-12 && d.max_eigenvalue() <= 4.5 + 1e-12);

        let i = random_spd(3, 1.0, 1.0, &mut seeded_rng(9)).unwrap();
        assert!((i.as_matrix() - DMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn random_spd_parameter_errors() {
        let mut rng = seeded_rng(0);
        assert!(matches!(random_spd(3, 0.0, 1.0, &mut rng), Err(Error::Parameter { name: "mu", .. })));
        assert!(matches!(random_spd(3, 2.0, 1.0, &mut rng), Err(Error::Parameter { name: "l", .. })));
    }
}
