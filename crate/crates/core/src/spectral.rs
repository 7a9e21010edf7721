//! Discrete measures, the integral operator `L_μ`, Mercer decompositions and
//! feature maps.
//!
//! For a finitely supported `μ = Σ_j μ_j δ_{x_j}` the operator `L_μ` acting on
//! `L²(X, μ; ℂ^m)` is unitarily equivalent to the Hermitian matrix
//! `D^{1/2} G D^{1/2}` where `G` is the block Gram matrix on the support and
//! `D = diag(μ_j) ⊗ I_m`. Its eigenvectors, rescaled by `μ_j^{-1/2}`, are the
//! Mercer eigenfunctions sampled on the support.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::gram;
use crate::kernel::{Kernel, Node, Regularity};
use crate::linalg::{self, re, serde_cvec, serde_matrix, CMatrix, CVector};
use crate::point::{Domain, Point};

/// Default eigenvalue retention threshold, relative to the largest eigenvalue.
pub const RETENTION_TOL: f64 = 1e-12;
/// Default pseudo-inverse cutoff for Gram-based RKHS inner products.
pub const PINV_CUTOFF: f64 = 1e-10;

/// A finitely supported probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights must be positive and sum to one within `1e-12`; support points
    /// must be distinct.
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
        }
        let total = linalg::sum_compensated(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        crate::point::ensure_distinct(&points)
            .map_err(|e| Error::InvalidMeasure(e.to_string()))?;
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    /// Normalizes positive weights to total mass one.
    pub fn normalized(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let total = linalg::sum_compensated(weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total mass must be positive".into()));
        }
        Self::new(points, weights.iter().map(|w| w / total).collect())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `⟨f, g⟩_μ = Σ_j μ_j g(x_j)^† f(x_j)` for functions sampled on the support.
    pub fn inner(&self, f: &[CVector], g: &[CVector]) -> linalg::C64 {
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((a, b), w)| b.dotc(a) * w)
            .sum()
    }
}

/// `D^{1/2} G D^{1/2}`, the matrix of `L_μ` in the `√μ`-weighted basis.
pub fn integral_operator(kernel: &Kernel, mu: &DiscreteMeasure) -> Result<CMatrix> {
    let g = gram(kernel, mu.points())?;
    let m = kernel.dim();
    let sqrt_w: Vec<f64> = mu.weights().iter().map(|w| w.sqrt()).collect();
    let n = mu.len() * m;
    Ok(CMatrix::from_fn(n, n, |r, c| {
        g.matrix[(r, c)] * (sqrt_w[r / m] * sqrt_w[c / m])
    }))
}

/// Eigenpairs of `L_μ` above the retention threshold, eigenfunctions sampled
/// on the support of `μ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MercerDecomposition {
    pub measure: DiscreteMeasure,
    pub dim: usize,
    /// Descending, all above the threshold.
    pub eigenvalues: Vec<f64>,
    /// `eigenfunctions[i][j] = f_i(x_j)`.
    pub eigenfunctions: Vec<Vec<Sample>>,
    /// Eigenvalues that were below the threshold.
    pub discarded: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sample(#[serde(with = "serde_cvec")] pub CVector);

/// Mercer decomposition of `kernel` on `mu`. `tol` is relative to the largest
/// eigenvalue (see [`RETENTION_TOL`]).
pub fn mercer(kernel: &Kernel, mu: &DiscreteMeasure, tol: f64) -> Result<MercerDecomposition> {
    let l = integral_operator(kernel, mu)?;
    let eig = linalg::hermitian_eigen(&l)?;
    let m = kernel.dim();
    let cutoff = tol * eig.max().max(0.0);
    let mut eigenvalues = Vec::new();
    let mut eigenfunctions = Vec::new();
    let mut discarded = Vec::new();
    for (k, &s) in eig.values.iter().enumerate() {
        if !(s > cutoff) || s <= 0.0 {
            discarded.push(s);
            continue;
        }
        let mut v = eig.vectors.column(k).into_owned();
        linalg::fix_phase(&mut v);
        let f: Vec<Sample> = (0..mu.len())
            .map(|j| Sample(v.rows(j * m, m) * re(1.0 / mu.weights()[j].sqrt())))
            .collect();
        eigenvalues.push(s);
        eigenfunctions.push(f);
    }
    if eigenvalues.is_empty() {
        return Err(Error::EmptySpectrum(cutoff));
    }
    Ok(MercerDecomposition {
        measure: mu.clone(),
        dim: m,
        eigenvalues,
        eigenfunctions,
        discarded,
    })
}

impl MercerDecomposition {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Keeps only the `r` largest eigenpairs.
    pub fn truncated(&self, r: usize) -> Self {
        let r = r.min(self.rank());
        let mut out = self.clone();
        out.discarded.splice(0..0, out.eigenvalues.drain(r..));
        out.eigenfunctions.truncate(r);
        out
    }

    pub fn eigenfunction(&self, i: usize) -> Vec<CVector> {
        self.eigenfunctions[i].iter().map(|s| s.0.clone()).collect()
    }

    /// `Σ_k σ_k f_k(x_i) ⊗ \overline{f_k(x_j)}`.
    pub fn reconstruct(&self, i: usize, j: usize) -> Result<CMatrix> {
        let n = self.measure.len();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfBounds { index: idx, len: n });
            }
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (s, f) in self.eigenvalues.iter().zip(&self.eigenfunctions) {
            out += (&f[i].0 * f[j].0.adjoint()) * re(*s);
        }
        Ok(out)
    }

    /// Matrix of `⟨f_i, f_k⟩_μ`.
    pub fn orthonormality(&self) -> CMatrix {
        let r = self.rank();
        let fs: Vec<Vec<CVector>> = (0..r).map(|i| self.eigenfunction(i)).collect();
        CMatrix::from_fn(r, r, |a, b| self.measure.inner(&fs[b], &fs[a]))
    }

    /// Largest deviation of the orthonormality matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.orthonormality();
        let r = g.nrows();
        (g - crate::kernel::identity(r)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `mercer_reconstruct(dec, i, j)`.
pub fn mercer_reconstruct(dec: &MercerDecomposition, i: usize, j: usize) -> Result<CMatrix> {
    dec.reconstruct(i, j)
}

/// `x ↦ γ_x ∈ ℂ^{p×m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    features: usize,
    dim: usize,
    rule: FeatureRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureRule {
    /// The same `γ` at every point.
    Constant {
        #[serde(with = "serde_matrix")]
        gamma: CMatrix,
    },
    /// Values on a finite set of points.
    Table { domain: Domain, entries: Vec<FeatureEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub point: Point,
    #[serde(with = "serde_matrix")]
    pub gamma: CMatrix,
}

impl FeatureMap {
    pub fn constant(gamma: CMatrix) -> Self {
        Self {
            features: gamma.nrows(),
            dim: gamma.ncols(),
            rule: FeatureRule::Constant { gamma },
        }
    }

    /// All `γ` must share one shape.
    pub fn table(domain: Domain, entries: Vec<(Point, CMatrix)>) -> Result<Self> {
        let Some((_, first)) = entries.first() else {
            return Err(Error::InvalidParameter("feature table needs entries".into()));
        };
        let shape = first.shape();
        for (x, g) in &entries {
            domain.check(x)?;
            if g.shape() != shape {
                return Err(Error::DimensionMismatch(format!(
                    "feature at {x} has shape {:?}, expected {shape:?}",
                    g.shape()
                )));
            }
        }
        Ok(Self {
            features: shape.0,
            dim: shape.1,
            rule: FeatureRule::Table {
                domain,
                entries: entries
                    .into_iter()
                    .map(|(point, gamma)| FeatureEntry { point, gamma })
                    .collect(),
            },
        })
    }

    /// Feature dimension `p`.
    pub fn features(&self) -> usize {
        self.features
    }

    /// Output dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        match &self.rule {
            FeatureRule::Constant { .. } => Domain::Any,
            FeatureRule::Table { domain, .. } => *domain,
        }
    }

    pub fn gamma(&self, x: &Point) -> Result<CMatrix> {
        match &self.rule {
            FeatureRule::Constant { gamma } => Ok(gamma.clone()),
            FeatureRule::Table { entries, .. } => entries
                .iter()
                .find(|e| &e.point == x)
                .map(|e| e.gamma.clone())
                .ok_or_else(|| Error::InvalidPoint(format!("no feature recorded at {x}"))),
        }
    }
}

/// `(γ_x)_{i,·} = √σ_i f_i(x)^†` on the support of the decomposition.
pub fn mercer_feature(dec: &MercerDecomposition) -> Result<FeatureMap> {
    let p = dec.rank();
    let m = dec.dim;
    let domain = dec
        .measure
        .points()
        .first()
        .map(Point::domain)
        .unwrap_or(Domain::Any);
    let entries = dec
        .measure
        .points()
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let g = CMatrix::from_fn(p, m, |i, c| {
                dec.eigenfunctions[i][j].0[c].conj() * dec.eigenvalues[i].sqrt()
            });
            (x.clone(), g)
        })
        .collect();
    if p == 0 {
        return Ok(FeatureMap {
            features: 0,
            dim: m,
            rule: FeatureRule::Constant {
                gamma: CMatrix::zeros(0, m),
            },
        });
    }
    FeatureMap::table(domain, entries)
}

/// `K(x, t) = γ_x^† γ_t`.
pub fn feature_kernel(fm: &FeatureMap) -> Kernel {
    Kernel::from_node(
        Node::Feature(fm.clone()),
        fm.dim(),
        fm.domain(),
        Regularity {
            mercer: matches!(fm.rule, FeatureRule::Constant { .. }),
            c0: false,
            translation_invariant: matches!(fm.rule, FeatureRule::Constant { .. }),
        },
    )
}

/// The `p × Nm` matrix `Γ = [γ_{x_1}√μ_1 ⋯ γ_{x_N}√μ_N]`; `Γ^†Γ` is the
/// integral operator matrix.
pub fn feature_operator(fm: &FeatureMap, mu: &DiscreteMeasure) -> Result<CMatrix> {
    let (p, m) = (fm.features(), fm.dim());
    let mut out = CMatrix::zeros(p, mu.len() * m);
    for (j, (x, w)) in mu.points().iter().zip(mu.weights()).enumerate() {
        let g = fm.gamma(x)? * re(w.sqrt());
        out.view_mut((0, j * m), (p, m)).copy_from(&g);
    }
    Ok(out)
}

/// `⟨g, h⟩_K = h^† G^+ g` for functions in the span of `K(·, x_j)` given by
/// their stacked values on the points of the Gram matrix.
pub fn hk_inner(gram: &CMatrix, g_vals: &CVector, h_vals: &CVector) -> Result<linalg::C64> {
    let pinv = linalg::hermitian_pinv(gram, PINV_CUTOFF)?;
    Ok((h_vals.adjoint() * pinv * g_vals)[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{constant, rank_one, VectorFn};
    use crate::linalg::{real_matrix, real_vector};

    fn pts(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| Point::scalar(x)).collect()
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(pts(&[0.0, 1.0]), vec![0.5, 0.4]).is_err());
        assert!(DiscreteMeasure::new(pts(&[0.0, 1.0]), vec![1.0, 0.0]).is_err());
        assert!(DiscreteMeasure::new(pts(&[0.0, 0.0]), vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::new(pts(&[0.0]), vec![]).is_err());
        assert!(DiscreteMeasure::uniform(pts(&[0.0, 1.0, 2.0])).is_ok());
    }

    #[test]
    fn integral_operator_constant() {
        let k = constant(real_matrix(&[&[1.0]])).unwrap();
        let mu = DiscreteMeasure::uniform(pts(&[0.0, 1.0])).unwrap();
        let l = integral_operator(&k, &mu).unwrap();
        assert!((l.clone() - real_matrix(&[&[0.5, 0.5], &[0.5, 0.5]])).norm() < 1e-15);
        let ev = linalg::eigenvalues_desc(&l).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-15 && ev[1].abs() < 1e-15);
    }

    #[test]
    fn integral_operator_single_point() {
        let k = constant(real_matrix(&[&[2.0, 1.0], &[1.0, 3.0]])).unwrap();
        let mu = DiscreteMeasure::uniform(pts(&[4.0])).unwrap();
        assert_eq!(integral_operator(&k, &mu).unwrap(), real_matrix(&[&[2.0, 1.0], &[1.0, 3.0]]));
    }

    #[test]
    fn gaussian_two_point_spectrum() {
        let k = Kernel::gaussian(1.0, 1).unwrap();
        let mu = DiscreteMeasure::uniform(pts(&[0.0, 1.0])).unwrap();
        let ev = linalg::eigenvalues_desc(&integral_operator(&k, &mu).unwrap()).unwrap();
        let e = (-0.5f64).exp();
        assert!((ev[0] - (1.0 + e) / 2.0).abs() < 1e-15);
        assert!((ev[1] - (1.0 - e) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn mercer_constant() {
        let k = constant(real_matrix(&[&[1.0]])).unwrap();
        let mu = DiscreteMeasure::uniform(pts(&[0.0, 1.0])).unwrap();
        let d = mercer(&k, &mu, RETENTION_TOL).unwrap();
        assert_eq!(d.rank(), 1);
        assert!((d.eigenvalues[0] - 1.0).abs() < 1e-15);
        for s in &d.eigenfunctions[0] {
            assert!((s.0[0] - re(1.0)).norm() < 1e-14);
        }
        assert!((d.reconstruct(0, 1).unwrap()[(0, 0)] - re(1.0)).norm() < 1e-14);
        let fm = mercer_feature(&d).unwrap();
        assert_eq!(fm.features(), 1);
        assert!((fm.gamma(&Point::scalar(0.0)).unwrap()[(0, 0)] - re(1.0)).norm() < 1e-14);
    }

    #[test]
    fn mercer_rank_one() {
        let k = rank_one(VectorFn::affine(vec![vec![1.0]], vec![0.0]).unwrap());
        let mu = DiscreteMeasure::uniform(pts(&[1.0, 2.0])).unwrap();
        let d = mercer(&k, &mu, RETENTION_TOL).unwrap();
        assert_eq!(d.rank(), 1);
        assert!((d.eigenvalues[0] - 2.5).abs() < 1e-14);
        assert_eq!(mercer_feature(&d).unwrap().features(), 1);
    }

    #[test]
    fn mercer_gaussian_four_points() {
        let k = Kernel::gaussian(1.0, 1).unwrap();
        let xs = pts(&[-1.0, 0.0, 0.5, 2.0]);
        let mu = DiscreteMeasure::uniform(xs.clone()).unwrap();
        let d = mercer(&k, &mu, RETENTION_TOL).unwrap();
        assert_eq!(d.rank(), 4);
        assert!(d.eigenvalues.iter().all(|&s| s > 0.0));
        assert!(d.orthonormality_error() < 1e-12);
        let fm = mercer_feature(&d).unwrap();
        let fk = feature_kernel(&fm);
        for i in 0..4 {
            for j in 0..4 {
                let kij = k.eval(&xs[i], &xs[j]).unwrap();
                assert!((d.reconstruct(i, j).unwrap() - &kij).norm() < 1e-12);
                assert!((fk.eval(&xs[i], &xs[j]).unwrap() - &kij).norm() < 1e-12);
            }
        }
        // dropping the smallest eigenvalue leaves exactly its contribution
        let t = d.truncated(3);
        let s4 = d.eigenvalues[3];
        let f4 = d.eigenfunction(3);
        for i in 0..4 {
            for j in 0..4 {
                let resid = k.eval(&xs[i], &xs[j]).unwrap() - t.reconstruct(i, j).unwrap();
                let expect = (&f4[i] * f4[j].adjoint()) * re(s4);
                assert!((resid - expect).norm() < 1e-12);
            }
        }
        assert!(d.reconstruct(4, 0).is_err());
    }

    #[test]
    fn all_below_threshold_is_an_error() {
        let k = constant(real_matrix(&[&[0.0]])).unwrap();
        let mu = DiscreteMeasure::uniform(pts(&[0.0])).unwrap();
        assert!(matches!(mercer(&k, &mu, RETENTION_TOL), Err(Error::EmptySpectrum(_))));
    }

    #[test]
    fn feature_kernels() {
        // γ = B^{1/2} gives the constant kernel B
        let b = real_matrix(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let fk = feature_kernel(&FeatureMap::constant(linalg::psd_sqrt(&b).unwrap()));
        let v = fk.eval(&Point::scalar(0.0), &Point::scalar(9.0)).unwrap();
        assert!((v - &b).norm() < 1e-14);

        // γ_x = f(x)^† gives the rank-one kernel
        let xs = pts(&[1.0, 2.0]);
        let fm = FeatureMap::table(
            Domain::real(1),
            xs.iter()
                .map(|x| {
                    let f = real_vector(&[x.as_real().unwrap()[0], 1.0]);
                    (x.clone(), CMatrix::from_fn(1, 2, |_, j| f[j].conj()))
                })
                .collect(),
        )
        .unwrap();
        let v = feature_kernel(&fm).eval(&xs[0], &xs[1]).unwrap();
        assert_eq!(v, real_matrix(&[&[2.0, 1.0], &[2.0, 1.0]]));

        let empty = feature_kernel(&FeatureMap::constant(CMatrix::zeros(0, 2)));
        assert_eq!(empty.eval(&xs[0], &xs[1]).unwrap(), CMatrix::zeros(2, 2));

        let bad = FeatureMap::table(
            Domain::real(1),
            vec![(xs[0].clone(), CMatrix::zeros(1, 2)), (xs[1].clone(), CMatrix::zeros(2, 2))],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn measure_json_round_trip() {
        let mu = DiscreteMeasure::new(pts(&[0.0, 1.0]), vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&mu).unwrap();
        let back: DiscreteMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, mu);
    }
}
