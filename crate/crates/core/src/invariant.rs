//! Translation-invariant kernels on ℝ^d and ℤ_n.
//!
//! A discretized spectral density is a list of dual-group nodes `χ_k` with
//! positive weights `w_k` and PSD matrices `B_k`, i.e. a discrete positive
//! operator valued measure `Q({χ_k}) = w_k B_k`. The synthesized kernel is
//!
//! ```text
//! K(x, t) = Σ_k w_k χ_k(t − x) B_k,   χ_p(u) = e^{2πi p·u}  on ℝ^d,
//!                                     χ_r(u) = e^{2πi r u / n} on ℤ_n.
//! ```
//!
//! Conversely, for an integrable translation-invariant kernel the density is
//! recovered by `B(χ) = ∫ χ(x) K(x, 0) dx` (an exact DFT on ℤ_n).

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Node, Regularity};
use crate::linalg::{self, re, serde_matrices, CMatrix, CVector, CompensatedSum, C64};
use crate::point::{Domain, Point};
use crate::quadrature::{self, Grading, Rule};

pub const CONVENTION: &str = "e^{2 pi i p x}";
/// Relative tolerance for PSD validation of density matrices.
pub const DENSITY_PSD_TOL: f64 = 1e-9;

pub const DEFAULT_GAUSSIAN_NODES: usize = 201;
pub const DEFAULT_LAPLACE_NODES: usize = 4001;
pub const DEFAULT_SINC_NODES: usize = 64;

/// Dual-group nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Nodes {
    /// Frequencies `p ∈ ℝ^d`.
    Real(Vec<Vec<f64>>),
    /// Character indices `r ∈ ℤ_n`.
    Cyclic(Vec<u64>),
}

impl Nodes {
    fn len(&self) -> usize {
        match self {
            Nodes::Real(v) => v.len(),
            Nodes::Cyclic(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMetadata {
    /// Bound on the spectral mass cut off by truncating the frequency domain.
    #[serde(default)]
    pub truncation_bound: Option<f64>,
    #[serde(default = "default_convention")]
    pub convention: String,
    /// Axis-aligned box containing the support of the underlying density when
    /// it is compact; `None` when the density is positive on the whole dual
    /// group and the nodes only truncate it.
    #[serde(default)]
    pub support: Option<Vec<[f64; 2]>>,
}

fn default_convention() -> String {
    CONVENTION.to_string()
}

impl Default for DensityMetadata {
    fn default() -> Self {
        Self {
            truncation_bound: None,
            convention: default_convention(),
            support: None,
        }
    }
}

/// Discretized spectral density (equivalently a discrete POVM) on the dual group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity")]
pub struct SpectralDensity {
    domain: Domain,
    nodes: Nodes,
    weights: Vec<f64>,
    #[serde(with = "serde_matrices")]
    matrices: Vec<CMatrix>,
    metadata: DensityMetadata,
}

#[derive(Deserialize)]
struct RawDensity {
    domain: Domain,
    nodes: Nodes,
    weights: Vec<f64>,
    #[serde(with = "serde_matrices")]
    matrices: Vec<CMatrix>,
    #[serde(default)]
    metadata: DensityMetadata,
}

impl TryFrom<RawDensity> for SpectralDensity {
    type Error = Error;

    fn try_from(r: RawDensity) -> Result<Self> {
        SpectralDensity::new(r.domain, r.nodes, r.weights, r.matrices, r.metadata)
    }
}

impl SpectralDensity {
    /// Validates weights (positive), matrices (Hermitian PSD, common size) and
    /// nodes (dimension `d` on ℝ^d; distinct residues below `n` on ℤ_n).
    pub fn new(
        domain: Domain,
        nodes: Nodes,
        weights: Vec<f64>,
        matrices: Vec<CMatrix>,
        metadata: DensityMetadata,
    ) -> Result<Self> {
        let q = nodes.len();
        if q == 0 {
            return Err(Error::InvalidParameter("density needs at least one node".into()));
        }
        if weights.len() != q || matrices.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "{q} nodes, {} weights, {} matrices",
                weights.len(),
                matrices.len()
            )));
        }
        match (&domain, &nodes) {
            (Domain::Real { dim }, Nodes::Real(ps)) => {
                if ps.iter().any(|p| p.len() != *dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "frequency nodes must have dimension {dim}"
                    )));
                }
                if ps.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite frequency".into()));
                }
            }
            (Domain::Cyclic { n }, Nodes::Cyclic(rs)) => {
                for (i, r) in rs.iter().enumerate() {
                    if r >= n {
                        return Err(Error::InvalidParameter(format!(
                            "character {r} out of range for Z_{n}"
                        )));
                    }
                    if rs[..i].contains(r) {
                        return Err(Error::InvalidParameter(format!("character {r} repeated")));
                    }
                }
            }
            // integral node lists parse as cyclic; accept them as 1-d frequencies
            (Domain::Real { dim: 1 }, Nodes::Cyclic(rs)) => {
                let ps = rs.iter().map(|&r| vec![r as f64]).collect();
                return Self::new(domain, Nodes::Real(ps), weights, matrices, metadata);
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "spectral densities live on R^d or Z_n, not {domain}"
                )))
            }
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("quadrature weight {w} is not positive")));
        }
        let m = matrices[0].nrows();
        if m == 0 {
            return Err(Error::DimensionMismatch("density matrices must be at least 1x1".into()));
        }
        let mut clean = Vec::with_capacity(q);
        for b in &matrices {
            if b.shape() != (m, m) {
                return Err(Error::DimensionMismatch(format!(
                    "density matrix of shape {:?} where {m}x{m} expected",
                    b.shape()
                )));
            }
            clean.push(linalg::validate_psd(b, DENSITY_PSD_TOL)?);
        }
        Ok(Self {
            domain,
            nodes,
            weights,
            matrices: clean,
            metadata,
        })
    }

    /// Density on ℤ_n with the given characters.
    pub fn cyclic(n: u64, characters: Vec<u64>, weights: Vec<f64>, matrices: Vec<CMatrix>) -> Result<Self> {
        Self::new(
            Domain::cyclic(n),
            Nodes::Cyclic(characters),
            weights,
            matrices,
            DensityMetadata::default(),
        )
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn nodes(&self) -> &Nodes {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn metadata(&self) -> &DensityMetadata {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Output dimension `m`.
    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// `Σ_k w_k B_k`, the constant diagonal value `K(x, x)`.
    pub fn total_mass(&self) -> CMatrix {
        let m = self.dim();
        let mut acc = CompensatedSum::new(m, m);
        for (w, b) in self.weights.iter().zip(&self.matrices) {
            acc.add_scaled(re(*w), b);
        }
        acc.finish()
    }

    /// `χ_k(u)` for node `k`, where `u` is a group element.
    fn character(&self, k: usize, u: &Lag) -> C64 {
        match (&self.nodes, u) {
            (Nodes::Real(ps), Lag::Real(u)) => {
                let phase = TAU * ps[k].iter().zip(u).map(|(p, x)| p * x).sum::<f64>();
                C64::new(phase.cos(), phase.sin())
            }
            (Nodes::Cyclic(rs), Lag::Cyclic { value, modulus }) => {
                cyclic_character(rs[k], *value, *modulus)
            }
            _ => unreachable!("lag built from the density's domain"),
        }
    }

    fn lag(&self, x: &Point, t: &Point) -> Result<Lag> {
        match (self.domain, x, t) {
            (Domain::Real { dim }, Point::Real(a), Point::Real(b)) if a.len() == dim && b.len() == dim => {
                Ok(Lag::Real(b.iter().zip(a).map(|(tb, xa)| tb - xa).collect()))
            }
            (Domain::Cyclic { n }, Point::Residue { value: a, modulus }, Point::Residue { value: b, .. })
                if *modulus == n =>
            {
                Ok(Lag::Cyclic {
                    value: (b + n - a) % n,
                    modulus: n,
                })
            }
            _ => Err(Error::domain(self.domain, x.domain())),
        }
    }

    /// `Σ_k w_k χ_k(t − x) B_k` with compensated summation.
    pub(crate) fn eval_stationary(&self, x: &Point, t: &Point) -> Result<CMatrix> {
        let u = self.lag(x, t)?;
        let m = self.dim();
        let mut acc = CompensatedSum::new(m, m);
        for (k, (w, b)) in self.weights.iter().zip(&self.matrices).enumerate() {
            acc.add_scaled(self.character(k, &u) * *w, b);
        }
        Ok(acc.finish())
    }

    /// Whether the node set is symmetric under `p ↦ −p` with equal matrices at
    /// paired nodes (ℝ^d only).
    pub fn is_symmetric(&self) -> bool {
        let Nodes::Real(ps) = &self.nodes else {
            return false;
        };
        ps.iter().enumerate().all(|(i, p)| {
            ps.iter().enumerate().any(|(j, q)| {
                p.iter().zip(q).all(|(a, b)| *a == -*b)
                    && self.weights[i] == self.weights[j]
                    && self.matrices[i] == self.matrices[j]
            })
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("density serializes")
    }
}

enum Lag {
    Real(Vec<f64>),
    Cyclic { value: u64, modulus: u64 },
}

/// `e^{2πi r u / n}` with the phase reduced exactly in integers.
pub fn cyclic_character(r: u64, u: u64, n: u64) -> C64 {
    let k = ((r as u128 * u as u128) % n as u128) as u64;
    if k == 0 {
        return re(1.0);
    }
    // quarter turns are exact
    if (4 * k as u128).is_multiple_of(n as u128) {
        return match (4 * k as u128) / n as u128 {
            1 => C64::new(0.0, 1.0),
            2 => re(-1.0),
            _ => C64::new(0.0, -1.0),
        };
    }
    let phase = TAU * k as f64 / n as f64;
    C64::new(phase.cos(), phase.sin())
}

/// The translation-invariant kernel of a density.
pub fn synth_kernel(sd: &SpectralDensity) -> Kernel {
    Kernel::from_node(
        Node::Spectral(sd.clone()),
        sd.dim(),
        sd.domain(),
        Regularity {
            mercer: true,
            // a discrete measure on the dual of a noncompact group gives an
            // almost periodic kernel, which does not vanish at infinity
            c0: matches!(sd.domain(), Domain::Cyclic { .. }),
            translation_invariant: true,
        },
    )
}

fn symmetric_real_density(
    d: usize,
    xs: &[f64],
    ws: &[f64],
    density: impl Fn(&[f64]) -> CMatrix,
    metadata: DensityMetadata,
) -> Result<SpectralDensity> {
    let rule = quadrature::tensorize(xs, ws, d)?;
    let matrices = rule.nodes.iter().map(|p| density(p)).collect();
    SpectralDensity::new(
        Domain::real(d),
        Nodes::Real(rule.nodes),
        rule.weights,
        matrices,
        metadata,
    )
}

fn check_grid(half_width: f64, nodes: usize) -> Result<()> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidParameter(format!("half width must be positive, got {half_width}")));
    }
    if nodes < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {nodes}")));
    }
    Ok(())
}

/// Density of the Gaussian `exp(-|x−t|²/2σ²)`:
/// `B(p) = (2πσ²)^{d/2} exp(−2π²σ²|p|²)`, Gauss–Legendre on `[−L, L]^d`.
pub fn gaussian_density(sigma: f64, d: usize, half_width: f64, nodes: usize) -> Result<SpectralDensity> {
    if !(sigma > 0.0 && sigma.is_finite()) || d == 0 {
        return Err(Error::InvalidParameter(format!("invalid gaussian parameters sigma={sigma}, d={d}")));
    }
    check_grid(half_width, nodes)?;
    let (xs, ws) = quadrature::gauss_legendre_interval(nodes, -half_width, half_width)?;
    let amp = (TAU * sigma * sigma).powf(0.5 * d as f64);
    let a = 2.0 * PI * PI * sigma * sigma;
    let tail = d as f64 * (TAU.sqrt() * sigma) * (-a * half_width * half_width).exp() / (a * half_width);
    symmetric_real_density(
        d,
        &xs,
        &ws,
        |p| {
            let r2: f64 = p.iter().map(|v| v * v).sum();
            CMatrix::from_element(1, 1, re(amp * (-a * r2).exp()))
        },
        DensityMetadata {
            truncation_bound: Some(tail),
            ..Default::default()
        },
    )
}

/// Density of `exp(−π|x−t|)`: `B(p) = 2/(π + 4πp²)` on `[−L, L]`, graded
/// composite Gauss–Legendre. The recorded truncation bound is the cut-off mass
/// `(2/π)(π/2 − atan 2L) ≈ 1/(πL)`.
pub fn laplace_density(half_width: f64, nodes: usize) -> Result<SpectralDensity> {
    check_grid(half_width, nodes)?;
    let (xs, ws) = quadrature::graded_symmetric(nodes, half_width, Grading::default())?;
    let tail = (2.0 / PI) * (0.5 * PI - (2.0 * half_width).atan());
    symmetric_real_density(
        1,
        &xs,
        &ws,
        |p| CMatrix::from_element(1, 1, re(2.0 / (PI + 4.0 * PI * p[0] * p[0]))),
        DensityMetadata {
            truncation_bound: Some(tail),
            ..Default::default()
        },
    )
}

/// Lebesgue measure on `[−1, 1]` with `B ≡ 1`; synthesizes
/// `sin(2π(t−x)) / (π(t−x))`.
pub fn sinc_density(nodes: usize) -> Result<SpectralDensity> {
    check_grid(1.0, nodes)?;
    let (xs, ws) = quadrature::gauss_legendre(nodes)?;
    symmetric_real_density(
        1,
        &xs,
        &ws,
        |_| CMatrix::from_element(1, 1, re(1.0)),
        DensityMetadata {
            truncation_bound: Some(0.0),
            support: Some(vec![[-1.0, 1.0]]),
            ..Default::default()
        },
    )
}

/// `B(p)_{ij} = ⟨f_j(p), f_i(p)⟩` with `f_i(p) = (2π)^{−d/4} e^{−σ_i²|p|²/2} v_i`,
/// which synthesizes
/// `K(t−x)_{ij} = (σ_i²+σ_j²)^{−d/2} e^{−2π²|x−t|²/(σ_i²+σ_j²)} ⟨v_j, v_i⟩`.
pub fn vector_gaussian_density(
    sigmas: &[f64],
    vs: &[CVector],
    d: usize,
    half_width: f64,
    nodes: usize,
) -> Result<SpectralDensity> {
    if sigmas.is_empty() || sigmas.len() != vs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sigmas but {} vectors",
            sigmas.len(),
            vs.len()
        )));
    }
    if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) || d == 0 {
        return Err(Error::InvalidParameter("sigmas must be positive".into()));
    }
    let k = vs[0].len();
    if vs.iter().any(|v| v.len() != k) || k == 0 {
        return Err(Error::DimensionMismatch("vectors must share a positive length".into()));
    }
    check_grid(half_width, nodes)?;
    let m = sigmas.len();
    // ⟨v_j, v_i⟩ = v_i^† v_j
    let inner = CMatrix::from_fn(m, m, |i, j| vs[i].dotc(&vs[j]));
    let norm = TAU.powf(-0.5 * d as f64);
    let s_min = sigmas.iter().cloned().fold(f64::INFINITY, f64::min);
    let v_max = vs.iter().map(|v| v.norm_squared()).fold(0.0, f64::max);
    let s = 2.0 * s_min * s_min;
    let tail = d as f64 * v_max * norm * 2.0 * (-0.5 * s * half_width * half_width).exp() / (s * half_width);
    let (xs, ws) = quadrature::gauss_legendre_interval(nodes, -half_width, half_width)?;
    symmetric_real_density(
        d,
        &xs,
        &ws,
        |p| {
            let r2: f64 = p.iter().map(|v| v * v).sum();
            CMatrix::from_fn(m, m, |i, j| {
                let e = (-(sigmas[i] * sigmas[i] + sigmas[j] * sigmas[j]) * r2 / 2.0).exp();
                inner[(i, j)] * (norm * e)
            })
        },
        DensityMetadata {
            truncation_bound: Some(tail),
            ..Default::default()
        },
    )
}

/// Closed form of the vector Gaussian kernel at lag `u = t − x`.
pub fn vector_gaussian_closed_form(sigmas: &[f64], vs: &[CVector], u: &[f64]) -> CMatrix {
    let m = sigmas.len();
    let d = u.len() as f64;
    let r2: f64 = u.iter().map(|v| v * v).sum();
    CMatrix::from_fn(m, m, |i, j| {
        let s = sigmas[i] * sigmas[i] + sigmas[j] * sigmas[j];
        vs[i].dotc(&vs[j]) * (s.powf(-0.5 * d) * (-2.0 * PI * PI * r2 / s).exp())
    })
}

/// How to recover a density from a kernel.
#[derive(Debug, Clone)]
pub enum Recovery {
    /// Exact DFT over all of ℤ_n; `characters = None` requests all of them.
    Cyclic { characters: Option<Vec<u64>> },
    /// Quadrature `grid` over a box in ℝ^d, evaluated at the frequency rule's
    /// nodes; the frequency rule's weights become the density weights.
    Real { grid: Rule, frequencies: Rule },
}

/// `B(χ) = ∫_X χ(x) K(x, 0) dx`, symmetrized; negative eigenvalues within
/// `tol · max(1, λ_max)` are clipped, larger ones are an error.
pub fn density_from_kernel(k: &Kernel, recovery: &Recovery, tol: f64) -> Result<SpectralDensity> {
    if !k.flags().translation_invariant {
        return Err(Error::Unsupported("kernel is not declared translation-invariant".into()));
    }
    let m = k.dim();
    let (nodes, weights, raw): (Nodes, Vec<f64>, Vec<CMatrix>) = match (k.domain(), recovery) {
        (Domain::Cyclic { n }, Recovery::Cyclic { characters }) => {
            let chars: Vec<u64> = characters.clone().unwrap_or_else(|| (0..n).collect());
            let origin = Point::residue(0, n)?;
            let k0: Vec<CMatrix> = (0..n)
                .map(|x| k.eval(&Point::residue(x, n)?, &origin))
                .collect::<Result<_>>()?;
            let bs = chars
                .iter()
                .map(|&r| {
                    let mut acc = CompensatedSum::new(m, m);
                    for (x, kx) in k0.iter().enumerate() {
                        acc.add_scaled(cyclic_character(r, x as u64, n), kx);
                    }
                    acc.finish()
                })
                .collect();
            (Nodes::Cyclic(chars.clone()), vec![1.0 / n as f64; chars.len()], bs)
        }
        (Domain::Real { dim }, Recovery::Real { grid, frequencies }) => {
            if !k.flags().c0 {
                return Err(Error::Unsupported(
                    "kernel is not declared C0; its profile is not integrable and recovery would be \
                     dominated by truncation"
                        .into(),
                ));
            }
            if grid.nodes.iter().chain(&frequencies.nodes).any(|p| p.len() != dim) {
                return Err(Error::DimensionMismatch(format!("grids must live in R^{dim}")));
            }
            let origin = Point::Real(vec![0.0; dim]);
            let k0: Vec<CMatrix> = grid
                .nodes
                .iter()
                .map(|x| k.eval(&Point::Real(x.clone()), &origin))
                .collect::<Result<_>>()?;
            let bs = frequencies
                .nodes
                .iter()
                .map(|p| {
                    let mut acc = CompensatedSum::new(m, m);
                    for ((x, w), kx) in grid.nodes.iter().zip(&grid.weights).zip(&k0) {
                        let phase = TAU * p.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                        acc.add_scaled(C64::new(phase.cos(), phase.sin()) * *w, kx);
                    }
                    acc.finish()
                })
                .collect();
            (
                Nodes::Real(frequencies.nodes.clone()),
                frequencies.weights.clone(),
                bs,
            )
        }
        (d, _) => {
            return Err(Error::Unsupported(format!(
                "recovery grid does not match the kernel domain {d}"
            )))
        }
    };
    let mut matrices = Vec::with_capacity(raw.len());
    for b in raw {
        let (h, _) = linalg::hermitian_part(&b);
        let eig = linalg::hermitian_eigen(&h)?;
        let floor = -tol * eig.max().max(1.0);
        if eig.min() < floor {
            return Err(Error::NotPositive { min_eig: eig.min() });
        }
        if eig.min() < 0.0 {
            let mut clipped = CMatrix::zeros(m, m);
            for (i, &lam) in eig.values.iter().enumerate() {
                if lam > 0.0 {
                    let v = eig.vectors.column(i);
                    clipped += (v * v.adjoint()) * re(lam);
                }
            }
            matrices.push(clipped);
        } else {
            matrices.push(h);
        }
    }
    SpectralDensity::new(k.domain(), nodes, weights, matrices, DensityMetadata::default())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub holds: bool,
    pub trials: usize,
    pub max_deviation: f64,
    /// `(x, t, z)` with the largest deviation, when it exceeds the tolerance.
    pub witness: Option<(Point, Point, Point)>,
}

/// Samples `trials` random `(x, t, z)` and checks `‖K(x+z, t+z) − K(x, t)‖_F ≤ tol`.
pub fn check_invariance(k: &Kernel, trials: usize, tol: f64, seed: u64) -> Result<InvarianceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = match k.domain() {
        Domain::Any => Domain::real(1),
        d => d,
    };
    let sample = |rng: &mut ChaCha8Rng| -> Point {
        match domain {
            Domain::Real { dim } => Point::Real((0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()),
            Domain::Naturals => Point::Natural(rng.gen_range(0..64)),
            Domain::Cyclic { n } => Point::Residue {
                value: rng.gen_range(0..n),
                modulus: n,
            },
            Domain::Any => unreachable!(),
        }
    };
    let mut worst = 0.0f64;
    let mut witness = None;
    for _ in 0..trials {
        let x = sample(&mut rng);
        let t = sample(&mut rng);
        let z = sample(&mut rng);
        let base = k.eval(&x, &t)?;
        let shifted = k.eval(&x.shift(&z)?, &t.shift(&z)?)?;
        let dev = (shifted - base).norm();
        if dev > worst || dev.is_nan() {
            worst = if dev.is_nan() { f64::INFINITY } else { dev };
            if worst > tol {
                witness = Some((x, t, z));
            }
        }
    }
    Ok(InvarianceReport {
        holds: worst <= tol,
        trials,
        max_deviation: worst,
        witness,
    })
}
