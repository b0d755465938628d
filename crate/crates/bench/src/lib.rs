//! Seeded fixtures shared by the kernel benchmarks.

use geominimax_core::linalg::{gaussian_matrix, random_spd, seeded_rng};
use geominimax_core::problems::{EuclideanQuadratic, MinimaxProblem, RobustPca, RobustPcaInstance, SpdBilinear};
use geominimax_core::{Manifold, Point, SpdManifold, SymMatrix};

pub fn spd_matrix(n: usize, seed: u64) -> SymMatrix {
    random_spd(n, 0.2, 4.5, &mut seeded_rng(seed)).expect("valid range")
}

/// Two points of SPD(n) and the tangent vector `Log_x(y)`.
pub fn spd_pair(n: usize, seed: u64) -> (SpdManifold, Point, Point) {
    let m = SpdManifold::new(n).expect("positive dimension");
    let x = Point::Spd(spd_matrix(n, seed).into_matrix());
    let y = Point::Spd(spd_matrix(n, seed + 1).into_matrix());
    (m, x, y)
}

pub fn quadratic(n: usize, seed: u64) -> (EuclideanQuadratic, Point) {
    let mut rng = seeded_rng(seed);
    let p = EuclideanQuadratic::new(gaussian_matrix(n, &mut rng)).expect("finite coupling");
    let start = p.domain().random_point(&mut rng);
    (p, start)
}

pub fn bilinear(n: usize, seed: u64) -> (SpdBilinear, Point) {
    let (_, x0, y0) = spd_pair(n, seed);
    let (_, xs, ys) = spd_pair(n, seed + 2);
    (SpdBilinear::new(x0, y0).expect("SPD saddle"), Point::pair(xs, ys))
}

pub fn robust_pca(n: usize, k: usize, seed: u64) -> (RobustPca, Point) {
    let data: Vec<_> = (0..k).map(|i| spd_matrix(n, seed + i as u64).into_matrix()).collect();
    let p = RobustPca::new(RobustPcaInstance::new(data, 2.0).expect("valid instance")).expect("valid instance");
    let start = p.domain().random_point(&mut seeded_rng(seed));
    (p, start)
}
