//! Named verification suites: closed-form roundtrips, decoupling and reduction
//! agreement on random instances, the ℤ₊ counterexample, the ℤ_n dichotomy,
//! strict positive definiteness and the invariant property checks.
//!
//! Each suite returns its individual checks with measured value and bound so
//! the CLI and the test harness report the same numbers.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{compose, conjugate, kappa_b, psi_matrix, rank_one, schur_product, PointMap, VectorFn};
use crate::dsl::{self, KernelExpr, Loader, MemoryLoader};
use crate::error::{Error, Result};
use crate::gram::{check_psd, gram, KernelSection};
use crate::invariant::{
    check_invariance, density_from_kernel, gaussian_density, laplace_density, sinc_density, synth_kernel,
    vector_gaussian_closed_form, vector_gaussian_density, Nodes, Recovery, SpectralDensity,
};
use crate::kernel::Kernel;
use crate::learn::{self, TrainingSet};
use crate::linalg::{self, re, CMatrix, CVector, MatrixFile, C64};
use crate::point::{Domain, Point};
use crate::spectral::{self, DiscreteMeasure};
use crate::universality::{self, Verdict};

pub const SUITES: &[&str] = &[
    "gaussian",
    "laplace",
    "sinc",
    "vector-gaussian",
    "mercer",
    "decoupling",
    "psi",
    "counterexample",
    "zn-dichotomy",
    "spd",
    "properties",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

impl Relation {
    fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::AtMost => value <= bound,
            Relation::Below => value < bound,
            Relation::Above => value > bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::Below => "<",
            Relation::Above => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
    /// Wall-clock checks vary between runs and are kept out of serialized reports.
    #[serde(skip)]
    pub timing: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation,
            bound,
            passed: relation.holds(value, bound),
            timing: false,
        }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 0.0 } else { 1.0 }, Relation::AtMost, 0.0)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} {} {:.1e}",
            if self.passed { "pass" } else { "FAIL" },
            self.name,
            self.value,
            self.relation.symbol(),
            self.bound
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    #[serde(serialize_with = "untimed")]
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

fn untimed<S: serde::Serializer>(checks: &[Check], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(checks.iter().filter(|c| !c.timing))
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One line: verdict, suite, number of checks and the first failure if any.
    pub fn summary(&self) -> String {
        let first = self.failures().next().map(|c| format!("; first failure: {c}")).unwrap_or_default();
        format!(
            "{} {} ({} checks){first}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.checks.len(),
        )
    }
}

/// Runs one named suite.
pub fn run(name: &str, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = match name {
        "gaussian" => gaussian()?,
        "laplace" => laplace()?,
        "sinc" => sinc()?,
        "vector-gaussian" => vector_gaussian()?,
        "mercer" => mercer(&mut rng)?,
        "decoupling" => decoupling(&mut rng)?,
        "psi" => psi(&mut rng)?,
        "counterexample" => counterexample(),
        "zn-dichotomy" => zn_dichotomy(&mut rng)?,
        "spd" => spd(&mut rng)?,
        "properties" => properties(&mut rng)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown suite `{other}`; available: {}, all",
                SUITES.join(", ")
            )))
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let limit = match name {
        "gaussian" => Some(1.0),
        "laplace" => Some(5.0),
        "properties" => Some(30.0),
        _ => None,
    };
    if let Some(limit) = limit {
        let mut c = Check::new("runtime seconds", elapsed, Relation::Below, limit);
        c.timing = true;
        checks.push(c);
    }
    Ok(SuiteReport {
        suite: name.into(),
        seed,
        checks,
        elapsed_secs: elapsed,
    })
}

/// Runs every suite, or the named one; `"all"` expands to [`SUITES`].
pub fn run_named(name: &str, seed: u64) -> Result<Vec<SuiteReport>> {
    if name == "all" {
        SUITES.iter().map(|s| run(s, seed)).collect()
    } else {
        Ok(vec![run(name, seed)?])
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// `max |K(x,t) − oracle(t − x)|` over the grid, scalar kernels.
fn grid_error(k: &Kernel, grid: &[f64], oracle: impl Fn(f64) -> f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in grid {
        for &t in grid {
            let v = k.eval(&Point::scalar(x), &Point::scalar(t))?[(0, 0)];
            worst = worst.max((v - re(oracle(t - x))).norm());
        }
    }
    Ok(worst)
}

fn gaussian() -> Result<Vec<Check>> {
    let k = synth_kernel(&gaussian_density(1.0, 1, 4.0, 201)?);
    let err = grid_error(&k, &linspace(-1.5, 1.5, 7), |u| (-u * u / 2.0).exp())?;
    Ok(vec![Check::new("max abs error vs exp(-u^2/2), |u| <= 3", err, Relation::AtMost, 1e-6)])
}

fn laplace() -> Result<Vec<Check>> {
    let sd = laplace_density(1000.0, 4001)?;
    let k = synth_kernel(&sd);
    let err = grid_error(&k, &linspace(-1.0, 1.0, 7), |u| (-PI * u.abs()).exp())?;
    let bound = sd.metadata().truncation_bound.unwrap_or(f64::NAN);
    Ok(vec![
        Check::new("max abs error vs exp(-pi|u|), |u| <= 2", err, Relation::AtMost, 1e-3),
        Check::new(
            "recorded truncation bound vs 1/(pi L)",
            (bound - 1.0 / (PI * 1000.0)).abs(),
            Relation::AtMost,
            1e-9,
        ),
    ])
}

fn sinc() -> Result<Vec<Check>> {
    let k = synth_kernel(&sinc_density(64)?);
    let err = grid_error(&k, &linspace(-2.5, 2.5, 11), |u| {
        if u == 0.0 {
            2.0
        } else {
            (2.0 * PI * u).sin() / (PI * u)
        }
    })?;
    Ok(vec![Check::new("max abs error vs sin(2 pi u)/(pi u), |u| <= 5", err, Relation::AtMost, 1e-10)])
}

fn vector_gaussian() -> Result<Vec<Check>> {
    let s = 0.5f64.sqrt();
    let ortho = [
        CVector::from_vec(vec![re(s), C64::new(0.0, s)]),
        CVector::from_vec(vec![re(s), C64::new(0.0, -s)]),
    ];
    let skew = [
        CVector::from_vec(vec![re(1.0), re(0.0)]),
        CVector::from_vec(vec![C64::new(0.6, 0.2), re(0.7)]),
    ];
    let sigmas = [1.0, 2.0];
    let mut out = Vec::new();
    for (label, vs) in [("orthonormal v", &ortho), ("non-orthogonal v", &skew)] {
        let k = synth_kernel(&vector_gaussian_density(&sigmas, vs, 1, 8.0, 201)?);
        let mut worst = 0.0f64;
        for &x in &linspace(-1.5, 1.5, 7) {
            for &t in &linspace(-1.5, 1.5, 7) {
                let v = k.eval(&Point::scalar(x), &Point::scalar(t))?;
                let c = vector_gaussian_closed_form(&sigmas, vs, &[t - x]);
                worst = worst.max((v - c).iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        out.push(Check::new(format!("max entry error, {label}"), worst, Relation::AtMost, 1e-6));
    }
    Ok(out)
}

fn mercer(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (loader, exprs) = corpus();
    let mut out = Vec::new();
    for expr in exprs {
        let k = dsl::compile(expr, &loader)?;
        let pts = sample_points(rng, k.domain(), 12);
        let mu = DiscreteMeasure::uniform(pts.clone())?;
        let dec = spectral::mercer(&k, &mu, 0.0)?;
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let kij = k.eval(&pts[i], &pts[j])?;
                err = err.max((dec.reconstruct(i, j)? - &kij).norm());
                scale = scale.max(kij.norm());
            }
        }
        out.push(Check::new(
            format!("relative reconstruction error, {expr}"),
            err / scale.max(f64::MIN_POSITIVE),
            Relation::AtMost,
            1e-10,
        ));
        out.push(Check::new(
            format!("orthonormality error, {expr}"),
            dec.orthonormality_error(),
            Relation::AtMost,
            1e-9,
        ));
    }
    Ok(out)
}

fn uniform(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    rng.gen_range(a..b)
}

fn complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0))
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| complex(rng))
}

fn random_vector(rng: &mut ChaCha8Rng, m: usize) -> CVector {
    CVector::from_fn(m, |_, _| complex(rng))
}

/// `A A^†` with `A` of shape `m × rank`.
fn random_psd(rng: &mut ChaCha8Rng, m: usize, rank: usize) -> CMatrix {
    let a = random_matrix(rng, m, rank);
    let b = &a * a.adjoint();
    linalg::hermitian_part(&b).0
}

/// Distinct points of `domain`, at most `n` (fewer on small cyclic groups).
fn sample_points(rng: &mut ChaCha8Rng, domain: Domain, n: usize) -> Vec<Point> {
    match domain {
        Domain::Real { dim } => (0..n)
            .map(|_| Point::Real((0..dim).map(|_| uniform(rng, -3.0, 3.0)).collect()))
            .collect(),
        Domain::Any => (0..n).map(|_| Point::scalar(uniform(rng, -3.0, 3.0))).collect(),
        Domain::Naturals => {
            let mut v: Vec<u64> = (1..=40).collect();
            v.shuffle(rng);
            v.truncate(n);
            v.into_iter().map(Point::Natural).collect()
        }
        Domain::Cyclic { n: modulus } => {
            let mut v: Vec<u64> = (0..modulus).collect();
            v.shuffle(rng);
            v.truncate(n);
            v.into_iter()
                .map(|value| Point::Residue { value, modulus })
                .collect()
        }
    }
}

fn max_rel_discrepancy(a: &[CVector], b: &[CVector]) -> f64 {
    let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

const LAMBDAS: [f64; 3] = [1e-3, 1e-1, 1.0];

fn decoupling(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=10);
        let m = rng.gen_range(1..=4);
        let rank = rng.gen_range(1..=m);
        let b = random_psd(rng, m, rank);
        let kappa = Kernel::gaussian(uniform(rng, 0.5, 2.0), 1)?;
        let lambda = LAMBDAS[rng.gen_range(0..3)];
        let xs = sample_points(rng, Domain::real(1), n);
        let ys = (0..n).map(|_| random_vector(rng, m)).collect();
        let data = TrainingSet::new(xs, ys)?;
        let dec = learn::rls_fit_decoupled_kb(&kappa, &b, &data, lambda)?;
        let block = learn::rls_fit_block(&kappa_b(&kappa, &b)?, &data, lambda)?;
        let tests: Vec<Point> = (0..20).map(|_| Point::scalar(uniform(rng, -4.0, 4.0))).collect();
        let pd = tests.iter().map(|t| learn::predict(&dec, t)).collect::<Result<Vec<_>>>()?;
        let pb = tests.iter().map(|t| learn::predict(&block, t)).collect::<Result<Vec<_>>>()?;
        worst = worst.max(max_rel_discrepancy(&pb, &pd));
    }
    Ok(vec![Check::new(
        "max relative prediction discrepancy, 50 instances",
        worst,
        Relation::AtMost,
        1e-8,
    )])
}

fn random_affine(rng: &mut ChaCha8Rng, from: usize, to: usize) -> Result<PointMap> {
    let matrix = (0..to)
        .map(|_| (0..from).map(|_| uniform(rng, -1.0, 1.0)).collect())
        .collect();
    let offset = (0..to).map(|_| uniform(rng, -1.0, 1.0)).collect();
    PointMap::affine(matrix, offset)
}

fn psi(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut worst = 0.0f64;
    let mut worst_obj = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=3);
        let (dt, dx) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let maps = (0..m).map(|_| random_affine(rng, dt, dx)).collect::<Result<Vec<_>>>()?;
        let kappa = Kernel::gaussian(uniform(rng, 0.5, 2.0), dx)?;
        let lambda = LAMBDAS[rng.gen_range(0..3)];
        let ts = sample_points(rng, Domain::real(dt), n);
        let ys = (0..n).map(|_| random_vector(rng, m)).collect();
        let data = TrainingSet::new(ts, ys)?;
        let reduced = learn::rls_fit_psi(&kappa, &maps, &data, lambda)?;
        let block = learn::rls_fit_block(&psi_matrix(&kappa, &maps)?, &data, lambda)?;
        let tests = sample_points(rng, Domain::real(dt), 20);
        let pr = tests.iter().map(|t| learn::predict(&reduced, t)).collect::<Result<Vec<_>>>()?;
        let pb = tests.iter().map(|t| learn::predict(&block, t)).collect::<Result<Vec<_>>>()?;
        worst = worst.max(max_rel_discrepancy(&pb, &pr));
        let (ob, or) = (learn::objective(&block, &data)?, learn::objective(&reduced, &data)?);
        worst_obj = worst_obj.max((ob - or).abs() / ob.abs().max(f64::MIN_POSITIVE));
    }
    Ok(vec![
        Check::new("max relative prediction discrepancy, 50 instances", worst, Relation::AtMost, 1e-8),
        Check::new("max relative objective discrepancy", worst_obj, Relation::AtMost, 1e-8),
    ])
}

fn counterexample() -> Vec<Check> {
    let inner = universality::c0_counterexample(30);
    let worst = inner.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let g = universality::counterexample_gram(16);
    let min = linalg::hermitian_eigen(&g).map(|e| e.min()).unwrap_or(f64::NAN);
    vec![
        Check::new("max |<f_k, f>|, k = 1..30", worst, Relation::AtMost, 1e-14),
        Check::new("min eigenvalue of the Gram of f_1..f_16 on {1..17}", min, Relation::Above, 1e-6),
    ]
}

fn zn_dichotomy(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let n = 8u64;
    let m = 2;
    let weights: Vec<f64> = (0..n).map(|_| uniform(rng, 0.5, 1.5) / n as f64).collect();
    let mats: Vec<CMatrix> = (0..n)
        .map(|_| random_psd(rng, m, m) + crate::kernel::identity(m) * re(0.1))
        .collect();
    let full = SpectralDensity::cyclic(n, (0..n).collect(), weights.clone(), mats.clone())?;
    let pts: Vec<Point> = (0..n).map(|x| Point::residue(x, n)).collect::<Result<_>>()?;
    let mu = DiscreteMeasure::uniform(pts)?;
    let spec_full = universality::lmu_spectrum(&synth_kernel(&full), &mu)?;
    let min_full = *spec_full.last().expect("nonempty");
    let predicted = weights
        .iter()
        .zip(&mats)
        .map(|(w, b)| w * linalg::hermitian_eigen(b).map(|e| e.min()).unwrap_or(f64::NAN))
        .fold(f64::INFINITY, f64::min);

    let r0 = rng.gen_range(0..n);
    let keep: Vec<u64> = (0..n).filter(|&r| r != r0).collect();
    let gap = SpectralDensity::cyclic(
        n,
        keep.clone(),
        keep.iter().map(|&r| weights[r as usize]).collect(),
        keep.iter().map(|&r| mats[r as usize].clone()).collect(),
    )?;
    let witness = (0..m)
        .map(|i| {
            let mut y = CVector::zeros(m);
            y[i] = re(1.0);
            universality::missing_character_witness(&gap, r0, Some(&y)).map(f64::abs)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let spec_gap = universality::lmu_spectrum(&synth_kernel(&gap), &mu)?;
    let min_gap = *spec_gap.last().expect("nonempty");
    Ok(vec![
        Check::new("full support: min L_mu eigenvalue", min_full, Relation::Above, 1e-10),
        Check::new(
            "full support: min eigenvalue vs min_k w_k lambda_min(B_k)",
            (min_full - predicted).abs(),
            Relation::AtMost,
            1e-12,
        ),
        Check::flag(
            "full support: support verdict passes",
            universality::density_support_verdict(&full, 1e-10).verdict == Verdict::Pass,
        ),
        Check::new(format!("character {r0} deleted: witness"), witness, Relation::AtMost, 1e-14),
        Check::new(format!("character {r0} deleted: min L_mu eigenvalue"), min_gap, Relation::AtMost, 1e-12),
        Check::flag(
            "character deleted: support verdict fails",
            universality::density_support_verdict(&gap, 1e-10).verdict == Verdict::Fail,
        ),
    ])
}

/// Points in `[−10, 10]` at mutual distance at least `sep`.
fn separated_points(rng: &mut ChaCha8Rng, n: usize, sep: f64) -> Vec<Point> {
    let mut xs: Vec<f64> = Vec::with_capacity(n);
    while xs.len() < n {
        let x = uniform(rng, -10.0, 10.0);
        if xs.iter().all(|y| (x - y).abs() >= sep) {
            xs.push(x);
        }
    }
    xs.into_iter().map(Point::scalar).collect()
}

fn spd(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let gauss = Kernel::gaussian(1.0, 1)?;
    let sinc = Kernel::sinc();
    let r1 = rank_one(VectorFn::affine(vec![vec![1.0]], vec![1.0])?);
    let (mut g_fail, mut s_fail, mut r_pass) = (0, 0, 0);
    let mut sizes = Vec::new();
    for _ in 0..10 {
        let n = rng.gen_range(2..=20);
        sizes.push(n);
        let pts = separated_points(rng, n, 0.25);
        g_fail += usize::from(!universality::spd_test(&gauss, &pts, 1e-10)?.passed());
        s_fail += usize::from(!universality::spd_test(&sinc, &pts, 1e-10)?.passed());
        r_pass += usize::from(universality::spd_test(&r1, &pts, 1e-10)?.passed());
    }
    log::debug!("spd point set sizes {sizes:?}");
    Ok(vec![
        Check::new("gaussian failures on 10 point sets", g_fail as f64, Relation::AtMost, 0.0),
        Check::new("sinc failures on 10 point sets", s_fail as f64, Relation::AtMost, 0.0),
        Check::new("rank-one passes on 10 point sets", r_pass as f64, Relation::AtMost, 0.0),
    ])
}

fn matrix_json(b: &CMatrix) -> String {
    serde_json::to_string(&MatrixFile::from_matrix(b)).expect("matrix serializes")
}

/// A corpus of built-in kernel expressions and the files they reference.
pub fn corpus() -> (MemoryLoader, Vec<&'static str>) {
    let b3 = CMatrix::from_fn(3, 2, |i, j| C64::new((i + j) as f64 * 0.5 - 0.4, 0.3 * i as f64 - 0.2 * j as f64));
    let b3 = &b3 * b3.adjoint();
    let c2 = CMatrix::from_row_slice(2, 2, &[re(2.0), C64::new(0.5, -0.5), C64::new(0.5, 0.5), re(1.0)]);
    let w = CMatrix::from_row_slice(
        3,
        2,
        &[re(1.0), C64::new(0.0, 1.0), re(0.5), re(-1.0), C64::new(0.2, 0.3), re(0.7)],
    );
    let cyclic = SpectralDensity::cyclic(
        6,
        vec![0, 1, 2, 4],
        vec![0.2, 0.3, 0.1, 0.4],
        vec![
            crate::kernel::identity(2),
            c2.clone(),
            linalg::real_diag(&[1.0, 0.0]),
            linalg::real_matrix(&[&[1.0, 1.0], &[1.0, 1.0]]),
        ],
    )
    .expect("valid cyclic density");
    let loader = MemoryLoader::new()
        .with("B2.json", matrix_json(&linalg::real_matrix(&[&[2.0, 1.0], &[1.0, 2.0]])))
        .with("B3.json", matrix_json(&b3))
        .with("C2.json", matrix_json(&c2))
        .with("I2.json", matrix_json(&crate::kernel::identity(2)))
        .with("W.json", matrix_json(&w))
        .with("f.json", r#"{"type":"affine","matrix":[[1.0],[-0.5]],"offset":[0.5,1.0]}"#)
        .with(
            "maps.json",
            r#"[{"type":"identity","domain":{"type":"real","dim":1}},
                {"type":"affine","matrix":[[2.0]],"offset":[0.5]}]"#,
        )
        .with("lift.json", r#"{"type":"affine","matrix":[[1.0],[0.5]],"offset":[0.0,-1.0]}"#)
        .with(
            "gauss_density.json",
            gaussian_density(1.0, 1, 4.0, 61).expect("valid density").to_json(),
        )
        .with("cyclic_density.json", cyclic.to_json());
    let exprs = vec![
        "gauss(sigma=1)",
        "gauss(sigma=0.7, d=2)",
        "laplace()",
        "sinc()",
        "linear(d=2)",
        "delta()",
        "delta(n=5)",
        "const(@C2.json)",
        "rank1(@f.json)",
        "kb(scalar=gauss(sigma=1), b=@B3.json)",
        "psi(scalar=gauss(sigma=1), maps=@maps.json)",
        "conj(expr=kb(scalar=sinc(), b=@B2.json), w=@W.json)",
        "compose(expr=gauss(sigma=0.7, d=2), map=@lift.json)",
        "spectral(@gauss_density.json)",
        "spectral(@cyclic_density.json)",
        "kb(scalar=laplace(), b=@I2.json) + const(@C2.json)",
        "gauss(sigma=2) * kb(scalar=sinc(), b=@C2.json)",
        "gauss(sigma=1) * laplace() + sinc()",
        "delta(n=6) * spectral(@cyclic_density.json)",
    ];
    (loader, exprs)
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn properties(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (loader, exprs) = corpus();
    let kernels: Vec<Kernel> = exprs.iter().map(|e| dsl::compile(e, &loader)).collect::<Result<_>>()?;
    let mut out = Vec::new();

    // Hermitian symmetry and Gram positivity over the corpus
    let mut herm = 0.0f64;
    let mut psd = f64::INFINITY;
    for k in &kernels {
        for _ in 0..20 {
            let p = sample_points(rng, k.domain(), 2);
            let (x, t) = (&p[0], p.get(1).unwrap_or(&p[0]));
            let a = k.eval(x, t)?;
            herm = herm.max((&a - k.eval(t, x)?.adjoint()).norm() / (1.0 + a.norm()));
        }
        for _ in 0..5 {
            let n = rng.gen_range(1..=12);
            let c = check_psd(&gram(k, &sample_points(rng, k.domain(), n))?, 1e-9)?;
            psd = psd.min(c.min_eig / c.max_eig.max(1.0));
        }
    }
    out.push(Check::new("hermitian symmetry, relative", herm, Relation::AtMost, 1e-10));
    out.push(Check::new("gram min eigenvalue / max(1, max)", psd, Relation::Above, -1e-9));

    // permutation invariance of gram, section norms and L_mu spectra
    let (mut gperm, mut nperm, mut sperm) = (0.0f64, 0.0f64, 0.0f64);
    for k in &kernels {
        let pts = sample_points(rng, k.domain(), 6);
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(rng);
        let moved: Vec<Point> = perm.iter().map(|&i| pts[i].clone()).collect();
        let (g, h) = (gram(k, &pts)?, gram(k, &moved)?);
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                gperm = gperm.max((h.block(a, b) - g.block(perm[a], perm[b])).norm());
            }
        }
        let coeffs: Vec<CVector> = (0..pts.len()).map(|_| random_vector(rng, k.dim())).collect();
        let moved_c: Vec<CVector> = perm.iter().map(|&i| coeffs[i].clone()).collect();
        let n1 = KernelSection::new(k.clone(), pts.clone(), coeffs)?.norm_squared()?;
        let n2 = KernelSection::new(k.clone(), moved.clone(), moved_c)?.norm_squared()?;
        nperm = nperm.max((n1 - n2).abs() / n1.max(1.0));
        let s1 = universality::lmu_spectrum(k, &DiscreteMeasure::uniform(pts)?)?;
        let s2 = universality::lmu_spectrum(k, &DiscreteMeasure::uniform(moved)?)?;
        sperm = sperm.max(worst(s1.iter().zip(&s2).map(|(a, b)| (a - b).abs())));
    }
    out.push(Check::new("gram block permutation, abs", gperm, Relation::AtMost, 0.0));
    out.push(Check::new("section norm permutation, relative", nperm, Relation::AtMost, 1e-12));
    out.push(Check::new("L_mu spectrum permutation", sperm, Relation::AtMost, 1e-10));

    // algebra identities
    let (mut ident, mut sum_exact, mut schur) = (0.0f64, 0.0f64, f64::INFINITY);
    for k in &kernels {
        let id = compose(k, &PointMap::identity(k.domain()))?;
        let cj = conjugate(k, &crate::kernel::identity(k.dim()))?;
        for _ in 0..10 {
            let p = sample_points(rng, k.domain(), 2);
            let (x, t) = (&p[0], p.get(1).unwrap_or(&p[0]));
            let v = k.eval(x, t)?;
            ident = ident.max((id.eval(x, t)? - &v).norm()).max((cj.eval(x, t)? - &v).norm());
        }
    }
    let scalars = [Kernel::gaussian(1.3, 1)?, Kernel::laplace(), Kernel::sinc()];
    for k in kernels.iter().filter(|k| k.domain().unify(Domain::real(1)).is_some()) {
        for s in &scalars {
            let prod = schur_product(s, k)?;
            let n = rng.gen_range(1..=10);
            let c = check_psd(&gram(&prod, &sample_points(rng, Domain::real(1), n))?, 1e-9)?;
            schur = schur.min(c.min_eig / c.max_eig.max(1.0));
            let sum = crate::algebra::sum_kernels(&[kappa_b(s, &crate::kernel::identity(k.dim()))?, k.clone()])?;
            let p = sample_points(rng, Domain::real(1), 2);
            let direct = kappa_b(s, &crate::kernel::identity(k.dim()))?.eval(&p[0], &p[1])? + k.eval(&p[0], &p[1])?;
            sum_exact = sum_exact.max((sum.eval(&p[0], &p[1])? - direct).norm());
        }
    }
    out.push(Check::new("compose(k, id) and conj(k, I) vs k", ident, Relation::AtMost, 1e-12));
    out.push(Check::new("schur product gram min eigenvalue / max(1, max)", schur, Relation::Above, -1e-9));
    out.push(Check::new("sum kernel vs sum of values, abs", sum_exact, Relation::AtMost, 0.0));

    let g1 = Kernel::gaussian(0.9, 1)?;
    let p1 = psi_matrix(&g1, &[PointMap::identity(Domain::real(1))])?;
    let lift = random_affine(rng, 1, 2)?;
    let g2 = Kernel::gaussian(0.8, 2)?;
    let restricted = compose(&g2, &lift)?;
    let pts = sample_points(rng, Domain::real(1), 8);
    let mapped = pts.iter().map(|t| lift.apply(t)).collect::<Result<Vec<_>>>()?;
    let psi_dev = (gram(&p1, &pts)?.matrix - gram(&g1, &pts)?.matrix).norm();
    let restrict_dev = (gram(&restricted, &pts)?.matrix - gram(&g2, &mapped)?.matrix).norm();
    out.push(Check::new("psi_matrix with m = 1, id vs scalar gram", psi_dev, Relation::AtMost, 0.0));
    out.push(Check::new("restricted gram vs gram on mapped points", restrict_dev, Relation::AtMost, 0.0));

    // Mercer feature operator and frame identity
    let (mut iso, mut proj, mut frame) = (0.0f64, 0.0f64, 0.0f64);
    for k in &kernels {
        let pts = sample_points(rng, k.domain(), 8);
        let mu = DiscreteMeasure::uniform(pts.clone())?;
        let dec = spectral::mercer(k, &mu, spectral::RETENTION_TOL)?;
        let fm = spectral::mercer_feature(&dec)?;
        let gamma = spectral::feature_operator(&fm, &mu)?;
        let l = spectral::integral_operator(k, &mu)?;
        let lscale = l.norm().max(f64::MIN_POSITIVE);
        iso = iso.max((gamma.adjoint() * &gamma - &l).norm() / lscale);
        let inv_sigma = CMatrix::from_diagonal(&CVector::from_iterator(
            dec.rank(),
            dec.eigenvalues.iter().map(|s| re(1.0 / s)),
        ));
        let p = gamma.adjoint() * inv_sigma * &gamma;
        proj = proj.max((&p * &p - &p).norm());

        let g = gram(k, &pts)?;
        let c = CVector::from_fn(pts.len() * k.dim(), |_, _| complex(rng));
        let f_vals = &g.matrix * &c;
        let norm2 = (c.adjoint() * &g.matrix * &c)[(0, 0)].re;
        let mut total = 0.0;
        for i in 0..dec.rank() {
            let h = stack(&dec.eigenfunction(i)) * re(dec.eigenvalues[i].sqrt());
            total += spectral::hk_inner(&g.matrix, &f_vals, &h)?.norm_sqr();
        }
        frame = frame.max((total - norm2).abs() / norm2.max(1.0));
    }
    out.push(Check::new("feature operator: Gamma^* Gamma vs L_mu, relative", iso, Relation::AtMost, 1e-10));
    out.push(Check::new("feature operator: projection idempotency", proj, Relation::AtMost, 1e-9));
    out.push(Check::new("frame identity, relative", frame, Relation::AtMost, 1e-8));

    // translation-invariant synthesis
    let densities = [
        gaussian_density(1.0, 1, 4.0, 61)?,
        gaussian_density(0.8, 2, 4.0, 15)?,
        laplace_density(50.0, 201)?,
        sinc_density(32)?,
        vector_gaussian_density(
            &[1.0, 1.5],
            &[random_vector(rng, 2), random_vector(rng, 2)],
            1,
            8.0,
            81,
        )?,
        random_cyclic_density(rng, 7, 2, &[0, 2, 3, 6])?,
    ];
    let (mut stat, mut k0, mut diag) = (0.0f64, 0.0f64, 0.0f64);
    for (i, sd) in densities.iter().enumerate() {
        let k = synth_kernel(sd);
        stat = stat.max(check_invariance(&k, 100, 1e-10, rng.gen())?.max_deviation);
        let mass = sd.total_mass();
        for _ in 0..10 {
            let p = sample_points(rng, k.domain(), 2);
            let (x, t) = (&p[0], p.get(1).unwrap_or(&p[0]));
            k0 = k0.max((k.eval(x, t)? - k.eval(t, x)?.adjoint()).norm());
            diag = diag.max((k.eval(x, x)? - &mass).norm());
        }
        log::trace!("density {i} checked");
    }
    out.push(Check::new("stationarity of synthesized kernels", stat, Relation::AtMost, 1e-10));
    out.push(Check::new("K0(-u) vs K0(u)^*", k0, Relation::AtMost, 1e-10));
    out.push(Check::new("constant diagonal vs total mass", diag, Relation::AtMost, 1e-12));

    let full = random_cyclic_density(rng, 6, 2, &[0, 1, 2, 3, 4, 5])?;
    let back = density_from_kernel(&synth_kernel(&full), &Recovery::Cyclic { characters: None }, 1e-10)?;
    let roundtrip = worst(
        full.weights()
            .iter()
            .zip(full.matrices())
            .zip(back.weights().iter().zip(back.matrices()))
            .map(|((w, b), (w2, b2))| (b * re(*w) - b2 * re(*w2)).norm()),
    );
    out.push(Check::new("Z_n density roundtrip", roundtrip, Relation::AtMost, 1e-12));

    // universality invariants
    let gauss = Kernel::gaussian(1.0, 1)?;
    let mut monotone = true;
    for _ in 0..5 {
        let pts = separated_points(rng, 10, 0.5);
        if universality::spd_test(&gauss, &pts, 1e-10)?.passed() {
            for _ in 0..5 {
                let mut sub = pts.clone();
                sub.shuffle(rng);
                sub.truncate(rng.gen_range(1..=pts.len()));
                monotone &= universality::spd_test(&gauss, &sub, 1e-10)?.passed();
            }
        }
    }
    out.push(Check::flag("spd pass on S implies pass on subsets", monotone));

    let mut lmu_min = f64::INFINITY;
    for k in &kernels {
        let mu = DiscreteMeasure::uniform(sample_points(rng, k.domain(), 8))?;
        let s = universality::lmu_spectrum(k, &mu)?;
        lmu_min = lmu_min.min(s.last().copied().unwrap_or(0.0) / s[0].max(1.0));
    }
    out.push(Check::new("L_mu spectrum min / max(1, max)", lmu_min, Relation::Above, -1e-10));

    let mut agree = true;
    for _ in 0..10 {
        let n = rng.gen_range(2..=8u64);
        let mut chars: Vec<u64> = (0..n).collect();
        chars.shuffle(rng);
        chars.truncate(rng.gen_range(1..=n as usize));
        chars.sort_unstable();
        let sd = random_cyclic_density(rng, n, 1, &chars)?;
        let verdict = universality::density_support_verdict(&sd, 1e-10);
        for r0 in 0..n {
            let w = universality::missing_character_witness(&sd, r0, None)?;
            agree &= (w.abs() <= 1e-14) == !chars.contains(&r0);
        }
        agree &= (verdict.verdict == Verdict::Fail) == (chars.len() < n as usize);
    }
    out.push(Check::flag("zero witness iff support verdict fails", agree));

    let incl = PointMap::identity(Domain::real(1));
    let mu = DiscreteMeasure::uniform(sample_points(rng, Domain::real(1), 8))?;
    let same = universality::lmu_spectrum(&gauss, &mu)? == universality::lmu_spectrum(&compose(&gauss, &incl)?, &mu)?;
    out.push(Check::flag("restriction keeps the L_mu spectrum exactly", same));

    // learning invariants
    let (mut opt_gap, mut monotone_norm) = (f64::INFINITY, true);
    for _ in 0..5 {
        let m = rng.gen_range(1..=3);
        let b = random_psd(rng, m, m);
        let k = kappa_b(&gauss, &b)?;
        let n = rng.gen_range(2..=8);
        let data = TrainingSet::new(sample_points(rng, Domain::real(1), n), (0..n).map(|_| random_vector(rng, m)).collect())?;
        let model = learn::rls_fit_block(&k, &data, 0.1)?;
        let best = learn::objective(&model, &data)?;
        for _ in 0..10 {
            let moved: Vec<CVector> = model
                .coeffs
                .iter()
                .map(|c| c + random_vector(rng, m) * re(1e-3 / (2.0 * (m * n) as f64).sqrt()))
                .collect();
            let v = learn::objective_of(&k, &model.anchors, &moved, &data, 0.1)?;
            opt_gap = opt_gap.min((v - best) / best.max(1.0));
        }
        let mut last = f64::INFINITY;
        for lambda in [1e-3, 1e-2, 1e-1, 1.0, 10.0] {
            let nm = learn::norm(&learn::rls_fit_block(&k, &data, lambda)?)?;
            monotone_norm &= nm <= last * (1.0 + 1e-10);
            last = nm;
        }
    }
    out.push(Check::new("objective increase under perturbation", opt_gap, Relation::Above, -1e-12));
    out.push(Check::flag("||f*||_K nonincreasing in lambda", monotone_norm));

    // DSL
    let mut idempotent = true;
    let mut deterministic = true;
    let mut strings: Vec<String> = exprs.iter().map(|s| s.to_string()).collect();
    strings.extend((0..50).map(|_| random_expr(rng, 3).to_string()));
    for s in &strings {
        let e = dsl::parse(s)?;
        let printed = e.to_string();
        idempotent &= dsl::parse(&printed)? == e && dsl::parse(&printed)?.to_string() == printed;
        deterministic &= dsl::typecheck(&e, &loader) == dsl::typecheck(&e, &loader);
    }
    out.push(Check::flag("parse(print(parse(s))) = parse(s)", idempotent));
    out.push(Check::flag("typecheck deterministic", deterministic));
    Ok(out)
}

fn stack(vs: &[CVector]) -> CVector {
    let m = vs.first().map_or(0, |v| v.len());
    let mut out = CVector::zeros(vs.len() * m);
    for (i, v) in vs.iter().enumerate() {
        out.rows_mut(i * m, m).copy_from(v);
    }
    out
}

fn random_cyclic_density(rng: &mut ChaCha8Rng, n: u64, m: usize, chars: &[u64]) -> Result<SpectralDensity> {
    let d = SpectralDensity::cyclic(
        n,
        chars.to_vec(),
        chars.iter().map(|_| uniform(rng, 0.1, 1.0)).collect(),
        chars
            .iter()
            .map(|_| random_psd(rng, m, m) + crate::kernel::identity(m) * re(0.05))
            .collect(),
    )?;
    debug_assert!(matches!(d.nodes(), Nodes::Cyclic(_)));
    Ok(d)
}

/// Random grammar-valid expression (not necessarily well typed).
fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> KernelExpr {
    use crate::dsl::{Arg, Func, Value};
    let leaf = |rng: &mut ChaCha8Rng| {
        let sigma = (uniform(rng, 0.1, 5.0) * 1000.0).round() / 1000.0;
        let (name, args) = match rng.gen_range(0..5) {
            0 => ("gauss", vec![("sigma", Value::Number(sigma))]),
            1 => ("sinc", vec![]),
            2 => ("laplace", vec![]),
            3 => ("gauss", vec![("sigma", Value::Number(sigma)), ("d", Value::Number(2.0))]),
            _ => ("const", vec![("", Value::FileRef("B2.json".into()))]),
        };
        KernelExpr::Func(Func {
            name: name.into(),
            args: args
                .into_iter()
                .map(|(n, value)| Arg {
                    name: (!n.is_empty()).then(|| n.to_string()),
                    value,
                })
                .collect(),
        })
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0..4) {
        0 => leaf(rng),
        1 => KernelExpr::Sum((0..rng.gen_range(2..=3)).map(|_| random_expr(rng, depth - 1)).collect()),
        2 => KernelExpr::Product(Box::new(random_expr(rng, depth - 1)), Box::new(random_expr(rng, depth - 1))),
        _ => KernelExpr::Func(Func {
            name: "kb".into(),
            args: vec![
                Arg {
                    name: Some("scalar".into()),
                    value: Value::Expr(random_expr(rng, depth - 1)),
                },
                Arg {
                    name: Some("b".into()),
                    value: Value::FileRef("B2.json".into()),
                },
            ],
        }),
    }
}

/// `Loader` over the corpus files, for tests that build corpus expressions.
pub fn corpus_loader() -> impl Loader {
    corpus().0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        for s in ["sinc", "vector-gaussian", "counterexample", "zn-dichotomy", "spd"] {
            let r = run(s, 1).unwrap();
            assert!(r.passed(), "{}", r.summary());
        }
    }

    #[test]
    fn unknown_suite() {
        assert!(run("nope", 0).is_err());
        assert_eq!(run_named("gaussian", 0).unwrap().len(), 1);
    }

    #[test]
    fn corpus_builds() {
        let (loader, exprs) = corpus();
        for e in exprs {
            dsl::compile(e, &loader).unwrap_or_else(|err| panic!("{e}: {err}"));
        }
    }

    #[test]
    fn check_display() {
        let c = Check::new("x", 1e-7, Relation::AtMost, 1e-6);
        assert!(c.passed);
        assert_eq!(c.to_string(), "pass x: 1.000e-7 <= 1.0e-6");
        assert!(!Check::new("y", 1.0, Relation::Above, 1.0).passed);
    }
}
