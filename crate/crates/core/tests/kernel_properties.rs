use okernel::algebra::{compose, conjugate, kappa_b, schur_product, sum_kernels, PointMap};
use okernel::gram::{check_psd, gram, KernelSection};
use okernel::linalg::{self, CMatrix, CVector, C64};
use okernel::{dsl, suites, Domain, Kernel, Point};
use proptest::prelude::*;

fn corpus_kernels() -> Vec<Kernel> {
    let (loader, exprs) = suites::corpus();
    exprs.iter().map(|e| dsl::compile(e, &loader).unwrap()).collect()
}

fn point_in(domain: Domain, seed: &[f64]) -> Point {
    match domain {
        Domain::Real { dim } => Point::Real((0..dim).map(|i| seed[i % seed.len()] + i as f64 * 0.37).collect()),
        Domain::Any => Point::scalar(seed[0]),
        Domain::Naturals => Point::Natural(1 + (seed[0].abs() * 7.0) as u64 % 30),
        Domain::Cyclic { n } => Point::Residue {
            value: (seed[0].abs() * 11.0) as u64 % n,
            modulus: n,
        },
    }
}

fn distinct_points(domain: Domain, xs: &[f64]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for x in xs {
        let p = point_in(domain, &[*x, x * 1.7 - 0.3]);
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

fn coeffs(m: usize, raw: &[f64], n: usize) -> Vec<CVector> {
    (0..n)
        .map(|i| CVector::from_fn(m, |r, _| C64::new(raw[(2 * (i * m + r)) % raw.len()], raw[(2 * (i * m + r) + 1) % raw.len()])))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hermitian_symmetry(x in -3.0..3.0f64, t in -3.0..3.0f64, y in -3.0..3.0f64) {
        for k in corpus_kernels() {
            let (p, q) = (point_in(k.domain(), &[x, y]), point_in(k.domain(), &[t, x]));
            let a = k.eval(&p, &q).unwrap();
            let b = k.eval(&q, &p).unwrap().adjoint();
            prop_assert!((&a - b).norm() <= 1e-10 * (1.0 + a.norm()), "{k}");
        }
    }

    #[test]
    fn gram_is_psd(xs in prop::collection::vec(-4.0..4.0f64, 1..10)) {
        for k in corpus_kernels() {
            let pts = distinct_points(k.domain(), &xs);
            let c = check_psd(&gram(&k, &pts).unwrap(), 1e-9).unwrap();
            prop_assert!(c.min_eig >= -1e-9 * c.max_eig.max(1.0), "{k}: {}", c.min_eig);
        }
    }

    #[test]
    fn section_norm_is_permutation_invariant(
        xs in prop::collection::vec(-4.0..4.0f64, 2..8),
        raw in prop::collection::vec(-1.0..1.0f64, 8..32),
        shift in 1usize..7,
    ) {
        for k in corpus_kernels() {
            let pts = distinct_points(k.domain(), &xs);
            let cs = coeffs(k.dim(), &raw, pts.len());
            let mut p2 = pts.clone();
            let mut c2 = cs.clone();
            p2.rotate_left(shift % pts.len());
            c2.rotate_left(shift % pts.len());
            let a = KernelSection::new(k.clone(), pts, cs).unwrap().norm_squared().unwrap();
            let b = KernelSection::new(k.clone(), p2, c2).unwrap().norm_squared().unwrap();
            prop_assert!(a >= -1e-10);
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn schur_product_stays_psd(xs in prop::collection::vec(-4.0..4.0f64, 1..10), sigma in 0.2..3.0f64) {
        let s = Kernel::gaussian(sigma, 1).unwrap();
        for k in corpus_kernels().into_iter().filter(|k| k.domain().unify(Domain::real(1)).is_some()) {
            let prod = schur_product(&s, &k).unwrap();
            let pts = distinct_points(Domain::real(1), &xs);
            let c = check_psd(&gram(&prod, &pts).unwrap(), 1e-9).unwrap();
            prop_assert!(c.min_eig >= -1e-9 * c.max_eig.max(1.0));
        }
    }

    #[test]
    fn identities(x in -3.0..3.0f64, t in -3.0..3.0f64) {
        for k in corpus_kernels() {
            let (p, q) = (point_in(k.domain(), &[x, t]), point_in(k.domain(), &[t, 0.5]));
            let v = k.eval(&p, &q).unwrap();
            let id = compose(&k, &PointMap::identity(k.domain())).unwrap();
            prop_assert_eq!(id.eval(&p, &q).unwrap(), v.clone());
            let cj = conjugate(&k, &CMatrix::identity(k.dim(), k.dim())).unwrap();
            prop_assert!((cj.eval(&p, &q).unwrap() - &v).norm() <= 1e-12 * (1.0 + v.norm()));
        }
    }

    #[test]
    fn sums_evaluate_termwise(x in -3.0..3.0f64, t in -3.0..3.0f64, sigma in 0.3..2.0f64) {
        let b = linalg::real_matrix(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let a = kappa_b(&Kernel::gaussian(sigma, 1).unwrap(), &b).unwrap();
        let c = kappa_b(&Kernel::sinc(), &CMatrix::identity(2, 2)).unwrap();
        let s = sum_kernels(&[a.clone(), c.clone()]).unwrap();
        let (p, q) = (Point::scalar(x), Point::scalar(t));
        prop_assert_eq!(s.eval(&p, &q).unwrap(), a.eval(&p, &q).unwrap() + c.eval(&p, &q).unwrap());
    }
}

#[test]
fn documented_examples() {
    let s = Kernel::sinc();
    let v = s.eval_scalar(&Point::scalar(0.0), &Point::scalar(0.25)).unwrap();
    approx::assert_relative_eq!(v.re, 4.0 / std::f64::consts::PI, max_relative = 1e-14);
    let g = Kernel::gaussian(1.0, 1).unwrap();
    let v = g.eval_scalar(&Point::scalar(0.0), &Point::scalar(1.0)).unwrap();
    approx::assert_relative_eq!(v.re, (-0.5f64).exp(), max_relative = 1e-15);
}
