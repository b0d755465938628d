use std::sync::Arc;

use proptest::prelude::*;

use geominimax_core::solvers::geodesic_average_update;
use geominimax_core::{product, seeded_rng, EuclideanSpace, Manifold, Point, SpdManifold, SphereManifold};

fn spaces() -> Vec<Arc<dyn Manifold>> {
    let spd: Arc<dyn Manifold> = Arc::new(SpdManifold::new(3).unwrap());
    let sphere: Arc<dyn Manifold> = Arc::new(SphereManifold::new(5).unwrap());
    vec![
        Arc::new(EuclideanSpace::new(4).unwrap()),
        Arc::clone(&sphere),
        Arc::clone(&spd),
        Arc::new(product(spd, sphere)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_symmetric_and_matches_log_norm(seed in any::<u64>(), which in 0usize..4) {
        let m = &spaces()[which];
        let mut rng = seeded_rng(seed);
        let x = m.random_point(&mut rng);
        let y = m.random_point(&mut rng);
        let dxy = m.distance(&x, &y).unwrap();
        let dyx = m.distance(&y, &x).unwrap();
        let log_norm = m.norm(&x, &m.log_map(&x, &y).unwrap()).unwrap();
        prop_assert!((dxy - dyx).abs() <= 1e-8 * dxy.max(1.0));
        prop_assert!((dxy - log_norm).abs() <= 1e-8 * dxy.max(1.0));
        prop_assert!(m.distance(&x, &x).unwrap() <= 1e-10);
    }

    #[test]
    fn geodesic_midpoint_halves_distance(seed in any::<u64>(), which in 0usize..4) {
        let m = &spaces()[which];
        let mut rng = seeded_rng(seed);
        let x = m.random_point(&mut rng);
        let y = m.random_point(&mut rng);
        let mid = m.exp_map(&x, &m.log_map(&x, &y).unwrap().scale(0.5)).unwrap();
        let d = m.distance(&x, &y).unwrap();
        prop_assert!((m.distance(&x, &mid).unwrap() - 0.5 * d).abs() <= 1e-8 * d.max(1.0));
        prop_assert!((m.distance(&mid, &y).unwrap() - 0.5 * d).abs() <= 1e-8 * d.max(1.0));
    }

    #[test]
    fn transport_there_and_back_is_identity(seed in any::<u64>(), which in 0usize..4) {
        let m = &spaces()[which];
        let mut rng = seeded_rng(seed);
        let x = m.random_point(&mut rng);
        let y = m.random_point(&mut rng);
        let v = m.random_tangent(&x, &mut rng).unwrap();
        let there = m.parallel_transport(&x, &y, &v).unwrap();
        let back = m.parallel_transport(&y, &x, &there).unwrap();
        prop_assert!(m.norm(&x, &back.sub(&v).unwrap()).unwrap() <= 1e-8);
    }

    #[test]
    fn product_distance_is_componentwise(seed in any::<u64>()) {
        let spd = Arc::new(SpdManifold::new(2).unwrap());
        let sphere = Arc::new(SphereManifold::new(3).unwrap());
        let m = product(spd.clone(), sphere.clone());
        let mut rng = seeded_rng(seed);
        let a = m.random_point(&mut rng);
        let b = m.random_point(&mut rng);
        let (a1, a2) = a.split().unwrap();
        let (b1, b2) = b.split().unwrap();
        let expected = spd.distance(a1, b1).unwrap().hypot(sphere.distance(a2, b2).unwrap());
        prop_assert_eq!(m.distance(&a, &b).unwrap(), expected);
    }
}

#[test]
fn euclidean_running_average_is_arithmetic_mean() {
    let m = EuclideanSpace::new(3).unwrap();
    let mut rng = seeded_rng(4);
    let points: Vec<Point> = (0..40).map(|_| m.random_point(&mut rng)).collect();
    let mut avg = points[0].clone();
    for (t, p) in points.iter().enumerate() {
        avg = geodesic_average_update(&m, &avg, p, t).unwrap();
    }
    let mean = points.iter().map(|p| p.as_vector().unwrap()).sum::<nalgebra::DVector<f64>>() / 40.0;
    assert!((avg.as_vector().unwrap() - mean).amax() < 1e-13);
}

/// Jensen along the running geodesic average: for a geodesically convex
/// `φ`, `φ(avg_T) ≤ (1/T) Σ φ(p_t)`. Here `φ = ½ d²(·, c)` on SPD(3).
#[test]
fn running_average_satisfies_jensen_for_convex_functions() {
    let m = SpdManifold::new(3).unwrap();
    let mut rng = seeded_rng(8);
    for _ in 0..20 {
        let c = m.random_point(&mut rng);
        let phi = |p: &Point| 0.5 * m.distance(p, &c).unwrap().powi(2);
        let mut avg = c.clone();
        let mut total = 0.0;
        for t in 0..30 {
            let p = m.random_point(&mut rng);
            total += phi(&p);
            avg = geodesic_average_update(&m, &avg, &p, t).unwrap();
            assert!(phi(&avg) <= total / (t + 1) as f64 + 1e-12, "t = {t}");
        }
    }
}
