use okernel::algebra::{kappa_b, psi_matrix, PointMap};
use okernel::learn::{self, Solver, TrainingSet};
use okernel::linalg::{CMatrix, CVector, C64};
use okernel::{Kernel, Point};
use proptest::prelude::*;

fn cmat(raw: &[f64], r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |i, j| C64::new(raw[(2 * (i * c + j)) % raw.len()], raw[(2 * (i * c + j) + 1) % raw.len()]))
}

fn data(xs: &[f64], raw: &[f64], m: usize) -> TrainingSet {
    let mut pts: Vec<f64> = Vec::new();
    for &x in xs {
        if pts.iter().all(|p| (p - x).abs() > 1e-3) {
            pts.push(x);
        }
    }
    let ys = (0..pts.len())
        .map(|i| CVector::from_fn(m, |r, _| C64::new(raw[(3 * i + r) % raw.len()], raw[(5 * i + 2 * r + 1) % raw.len()])))
        .collect();
    TrainingSet::new(pts.into_iter().map(Point::scalar).collect(), ys).unwrap()
}

fn rel(a: &CVector, b: &CVector, scale: f64) -> f64 {
    (a - b).norm() / scale.max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn decoupled_matches_block(
        xs in prop::collection::vec(-3.0..3.0f64, 1..9),
        raw in prop::collection::vec(-1.0..1.0f64, 8..40),
        m in 1usize..4,
        rank in 1usize..4,
        lambda in prop::sample::select(vec![1e-3, 1e-1, 1.0]),
    ) {
        let a = cmat(&raw, m, rank.min(m));
        let b = &a * a.adjoint();
        let kappa = Kernel::gaussian(1.0, 1).unwrap();
        let d = data(&xs, &raw, m);
        let block = learn::rls_fit_block(&kappa_b(&kappa, &b).unwrap(), &d, lambda).unwrap();
        let dec = learn::fit(&kappa_b(&kappa, &b).unwrap(), &d, lambda, Solver::Decoupled).unwrap();
        let tests: Vec<Point> = (0..10).map(|i| Point::scalar(-3.5 + 0.7 * i as f64)).collect();
        let pb: Vec<_> = tests.iter().map(|t| learn::predict(&block, t).unwrap()).collect();
        let scale = pb.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (t, p) in tests.iter().zip(&pb) {
            prop_assert!(rel(p, &learn::predict(&dec, t).unwrap(), scale) <= 1e-8 || scale < 1e-300);
        }
    }

    #[test]
    fn psi_reduction_matches_block(
        xs in prop::collection::vec(-2.0..2.0f64, 1..7),
        raw in prop::collection::vec(-1.0..1.0f64, 8..40),
        coeffs in prop::collection::vec((-1.5..1.5f64, -1.0..1.0f64), 1..4),
        lambda in prop::sample::select(vec![1e-3, 1e-1, 1.0]),
    ) {
        let maps: Vec<PointMap> = coeffs.iter().map(|&(a, b)| PointMap::affine(vec![vec![a]], vec![b]).unwrap()).collect();
        let kappa = Kernel::gaussian(0.8, 1).unwrap();
        let d = data(&xs, &raw, maps.len());
        let reduced = learn::rls_fit_psi(&kappa, &maps, &d, lambda).unwrap();
        let block = learn::rls_fit_block(&psi_matrix(&kappa, &maps).unwrap(), &d, lambda).unwrap();
        let via_fit = learn::fit(&psi_matrix(&kappa, &maps).unwrap(), &d, lambda, Solver::Psi).unwrap();
        let tests: Vec<Point> = (0..10).map(|i| Point::scalar(-2.5 + 0.55 * i as f64)).collect();
        let pb: Vec<_> = tests.iter().map(|t| learn::predict(&block, t).unwrap()).collect();
        let scale = pb.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (t, p) in tests.iter().zip(&pb) {
            prop_assert!(rel(p, &learn::predict(&reduced, t).unwrap(), scale) <= 1e-8);
            prop_assert!(rel(p, &learn::predict(&via_fit, t).unwrap(), scale) <= 1e-8);
        }
    }

    #[test]
    fn norm_is_monotone_in_lambda(
        xs in prop::collection::vec(-3.0..3.0f64, 2..8),
        raw in prop::collection::vec(-1.0..1.0f64, 8..30),
    ) {
        let k = kappa_b(&Kernel::sinc(), &CMatrix::identity(2, 2)).unwrap();
        let d = data(&xs, &raw, 2);
        let mut last = f64::INFINITY;
        for lambda in [1e-3, 1e-2, 1e-1, 1.0, 10.0] {
            let n = learn::norm(&learn::rls_fit_block(&k, &d, lambda).unwrap()).unwrap();
            prop_assert!(n <= last * (1.0 + 1e-10));
            last = n;
        }
    }
}

// Scalar RLS with one sample: c = y / (k(x,x) + λ), prediction at x is y·k/(k + λ).
#[test]
fn one_sample_closed_form() {
    let k = Kernel::gaussian(1.0, 1).unwrap();
    let d = TrainingSet::new(vec![Point::scalar(0.3)], vec![CVector::from_element(1, C64::new(2.0, -1.0))]).unwrap();
    let model = learn::rls_fit_block(&k, &d, 0.5).unwrap();
    let p = learn::predict(&model, &Point::scalar(0.3)).unwrap()[0];
    let expect = C64::new(2.0, -1.0) / 1.5;
    assert!((p - expect).norm() < 1e-14);
    let obj = learn::objective(&model, &d).unwrap();
    // |y - f(x)|² + λ‖f‖² with ‖f‖² = |c|² k(x,x)
    let c = C64::new(2.0, -1.0) / 1.5;
    let oracle = (C64::new(2.0, -1.0) - c).norm_sqr() + 0.5 * c.norm_sqr();
    assert!((obj - oracle).abs() < 1e-13, "{obj} vs {oracle}");
}
