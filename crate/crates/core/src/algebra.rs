//! Closure operations on kernels: sums, Schur products with scalar kernels,
//! conjugation by an operator, composition with point maps (restriction being
//! composition with an inclusion), Ψ-matrices, rank-one and constant kernels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Node, Regularity};
use crate::linalg::{self, re, serde_cvec, CMatrix, CVector, C64};
use crate::point::{Domain, Point};

/// Relative tolerance used when validating user-supplied PSD operators.
pub const OPERATOR_PSD_TOL: f64 = 1e-9;
/// Eigenvalues of `B` at or below this fraction of the largest are dropped.
pub const B_EIG_CUTOFF: f64 = 1e-12;

/// A map `Ψ : T → X` between point domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMap {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(flatten)]
    pub rule: MapRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MapRule {
    Identity { domain: Domain },
    /// `t ↦ A t + b`, `A` given as `k` rows of length `n`.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// Keeps the listed coordinates of a point of ℝ^n.
    Projection { input_dim: usize, coords: Vec<usize> },
    /// Places a point of ℝ^k into the listed coordinates of ℝ^n, zero elsewhere.
    Embedding { output_dim: usize, coords: Vec<usize> },
    /// ℤ₊ ⊂ ℝ.
    IntegerInclusion,
    /// Finite lookup table.
    Table {
        domain: Domain,
        codomain: Domain,
        entries: Vec<(Point, Point)>,
    },
}

impl PointMap {
    pub fn new(rule: MapRule) -> Result<Self> {
        let map = Self {
            name: String::new(),
            rule,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn identity(domain: Domain) -> Self {
        Self {
            name: "id".into(),
            rule: MapRule::Identity { domain },
        }
    }

    pub fn affine(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        Self::new(MapRule::Affine { matrix, offset })
    }

    /// `t ↦ c t` on ℝ.
    pub fn scaling(c: f64) -> Self {
        Self {
            name: format!("{c}*t"),
            rule: MapRule::Affine {
                matrix: vec![vec![c]],
                offset: vec![0.0],
            },
        }
    }

    pub fn projection(input_dim: usize, coords: Vec<usize>) -> Result<Self> {
        Self::new(MapRule::Projection { input_dim, coords })
    }

    pub fn embedding(output_dim: usize, coords: Vec<usize>) -> Result<Self> {
        Self::new(MapRule::Embedding { output_dim, coords })
    }

    pub fn integer_inclusion() -> Self {
        Self {
            name: "Z+ -> R".into(),
            rule: MapRule::IntegerInclusion,
        }
    }

    pub fn table(domain: Domain, codomain: Domain, entries: Vec<(Point, Point)>) -> Result<Self> {
        Self::new(MapRule::Table {
            domain,
            codomain,
            entries,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.rule {
            MapRule::Identity { .. } | MapRule::IntegerInclusion => Ok(()),
            MapRule::Affine { matrix, offset } => {
                let n = matrix.first().map_or(0, |r| r.len());
                if matrix.is_empty() || n == 0 {
                    return Err(Error::InvalidParameter("affine map needs a nonempty matrix".into()));
                }
                if matrix.iter().any(|r| r.len() != n) || offset.len() != matrix.len() {
                    return Err(Error::DimensionMismatch(
                        "affine map rows and offset must have consistent lengths".into(),
                    ));
                }
                if matrix.iter().flatten().chain(offset).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("affine map has non-finite entries".into()));
                }
                Ok(())
            }
            MapRule::Projection { input_dim, coords } => {
                if coords.is_empty() || coords.iter().any(|&c| c >= *input_dim) {
                    return Err(Error::InvalidParameter(format!(
                        "projection coordinates {coords:?} invalid for R^{input_dim}"
                    )));
                }
                Ok(())
            }
            MapRule::Embedding { output_dim, coords } => {
                let mut seen = coords.clone();
                seen.sort_unstable();
                seen.dedup();
                if coords.is_empty() || seen.len() != coords.len() || coords.iter().any(|&c| c >= *output_dim) {
                    return Err(Error::InvalidParameter(format!(
                        "embedding coordinates {coords:?} invalid for R^{output_dim}"
                    )));
                }
                Ok(())
            }
            MapRule::Table {
                domain,
                codomain,
                entries,
            } => {
                for (i, (a, b)) in entries.iter().enumerate() {
                    domain.check(a)?;
                    codomain.check(b)?;
                    if entries[..i].iter().any(|(p, _)| p == a) {
                        return Err(Error::DuplicatePoint(a.to_string()));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn domain(&self) -> Domain {
        match &self.rule {
            MapRule::Identity { domain } => *domain,
            MapRule::Affine { matrix, .. } => Domain::real(matrix[0].len()),
            MapRule::Projection { input_dim, .. } => Domain::real(*input_dim),
            MapRule::Embedding { coords, .. } => Domain::real(coords.len()),
            MapRule::IntegerInclusion => Domain::Naturals,
            MapRule::Table { domain, .. } => *domain,
        }
    }

    pub fn codomain(&self) -> Domain {
        match &self.rule {
            MapRule::Identity { domain } => *domain,
            MapRule::Affine { matrix, .. } => Domain::real(matrix.len()),
            MapRule::Projection { coords, .. } => Domain::real(coords.len()),
            MapRule::Embedding { output_dim, .. } => Domain::real(*output_dim),
            MapRule::IntegerInclusion => Domain::real(1),
            MapRule::Table { codomain, .. } => *codomain,
        }
    }

    pub fn apply(&self, t: &Point) -> Result<Point> {
        self.domain().check(t)?;
        match &self.rule {
            MapRule::Identity { .. } => Ok(t.clone()),
            MapRule::Affine { matrix, offset } => {
                let x = t.as_real().expect("checked");
                Ok(Point::Real(
                    matrix
                        .iter()
                        .zip(offset)
                        .map(|(row, b)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
                        .collect(),
                ))
            }
            MapRule::Projection { coords, .. } => {
                let x = t.as_real().expect("checked");
                Ok(Point::Real(coords.iter().map(|&c| x[c]).collect()))
            }
            MapRule::Embedding { output_dim, coords } => {
                let x = t.as_real().expect("checked");
                let mut out = vec![0.0; *output_dim];
                for (&c, &v) in coords.iter().zip(x) {
                    out[c] = v;
                }
                Ok(Point::Real(out))
            }
            MapRule::IntegerInclusion => match t {
                Point::Natural(k) => Ok(Point::scalar(*k as f64)),
                _ => unreachable!("checked"),
            },
            MapRule::Table { entries, .. } => entries
                .iter()
                .find(|(a, _)| a == t)
                .map(|(_, b)| b.clone())
                .ok_or_else(|| Error::InvalidPoint(format!("{t} is not in the map's table"))),
        }
    }

    fn is_affine(&self) -> bool {
        !matches!(self.rule, MapRule::Table { .. } | MapRule::IntegerInclusion)
    }

    fn is_closed_embedding(&self) -> bool {
        matches!(
            self.rule,
            MapRule::Identity { .. } | MapRule::Embedding { .. } | MapRule::IntegerInclusion
        )
    }
}

impl fmt::Display for PointMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.name.is_empty() {
            return write!(f, "{}", self.name);
        }
        let kind = match &self.rule {
            MapRule::Identity { .. } => "identity",
            MapRule::Affine { .. } => "affine",
            MapRule::Projection { .. } => "projection",
            MapRule::Embedding { .. } => "embedding",
            MapRule::IntegerInclusion => "integer_inclusion",
            MapRule::Table { .. } => "table",
        };
        write!(f, "{kind}:{}->{}", self.domain(), self.codomain())
    }
}

/// A vector-valued function `f : X → ℂ^m`, used for rank-one kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VectorFn {
    /// `f(x) = A x + b` on ℝ^d with `A` of shape `m × d`.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// Finite lookup table.
    Table { domain: Domain, entries: Vec<VectorEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEntry {
    pub point: Point,
    #[serde(with = "serde_cvec")]
    pub value: CVector,
}

impl VectorFn {
    pub fn affine(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let f = VectorFn::Affine { matrix, offset };
        f.validate()?;
        Ok(f)
    }

    pub fn table(domain: Domain, entries: Vec<(Point, CVector)>) -> Result<Self> {
        let f = VectorFn::Table {
            domain,
            entries: entries
                .into_iter()
                .map(|(point, value)| VectorEntry { point, value })
                .collect(),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            VectorFn::Affine { matrix, offset } => {
                let d = matrix.first().map_or(0, |r| r.len());
                if matrix.is_empty() || d == 0 {
                    return Err(Error::InvalidParameter("affine function needs a nonempty matrix".into()));
                }
                if matrix.iter().any(|r| r.len() != d) || offset.len() != matrix.len() {
                    return Err(Error::DimensionMismatch(
                        "affine function rows and offset must have consistent lengths".into(),
                    ));
                }
                Ok(())
            }
            VectorFn::Table { domain, entries } => {
                let Some(first) = entries.first() else {
                    return Err(Error::InvalidParameter("table function needs entries".into()));
                };
                let m = first.value.len();
                if m == 0 {
                    return Err(Error::DimensionMismatch("table values must be nonempty".into()));
                }
                for e in entries {
                    domain.check(&e.point)?;
                    if e.value.len() != m {
                        return Err(Error::DimensionMismatch(format!(
                            "table value of length {} where {m} expected",
                            e.value.len()
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorFn::Affine { matrix, .. } => matrix.len(),
            VectorFn::Table { entries, .. } => entries[0].value.len(),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            VectorFn::Affine { matrix, .. } => Domain::real(matrix[0].len()),
            VectorFn::Table { domain, .. } => *domain,
        }
    }

    pub fn apply(&self, x: &Point) -> Result<CVector> {
        self.domain().check(x)?;
        match self {
            VectorFn::Affine { matrix, offset } => {
                let v = x.as_real().expect("checked");
                Ok(CVector::from_iterator(
                    matrix.len(),
                    matrix
                        .iter()
                        .zip(offset)
                        .map(|(row, b)| re(row.iter().zip(v).map(|(a, t)| a * t).sum::<f64>() + b)),
                ))
            }
            VectorFn::Table { entries, .. } => entries
                .iter()
                .find(|e| &e.point == x)
                .map(|e| e.value.clone())
                .ok_or_else(|| Error::InvalidPoint(format!("{x} is not in the function's table"))),
        }
    }
}

/// `Σ_k K_k`. All summands share `m`; domains must unify.
pub fn sum_kernels(ks: &[Kernel]) -> Result<Kernel> {
    let Some(first) = ks.first() else {
        return Err(Error::InvalidParameter("sum of an empty list".into()));
    };
    if ks.len() == 1 {
        return Ok(first.clone());
    }
    let mut domain = first.domain();
    let mut flags = first.flags();
    for k in &ks[1..] {
        if k.dim() != first.dim() {
            return Err(Error::DimensionMismatch(format!(
                "summands have m = {} and m = {}",
                first.dim(),
                k.dim()
            )));
        }
        domain = domain
            .unify(k.domain())
            .ok_or_else(|| Error::domain(domain, k.domain()))?;
        flags = flags.and(k.flags());
    }
    Ok(Kernel::from_node(Node::Sum(ks.to_vec()), first.dim(), domain, flags))
}

/// `(κK)(x, t) = κ(x, t) K(x, t)` for a scalar kernel `κ`.
pub fn schur_product(scalar: &Kernel, k: &Kernel) -> Result<Kernel> {
    if !scalar.is_scalar() {
        return Err(if k.is_scalar() {
            Error::InvalidParameter("first factor of a Schur product must be scalar".into())
        } else {
            Error::OperatorTimesOperator {
                left: scalar.dim(),
                right: k.dim(),
            }
        });
    }
    let domain = scalar
        .domain()
        .unify(k.domain())
        .ok_or_else(|| Error::domain(scalar.domain(), k.domain()))?;
    let (a, b) = (scalar.flags(), k.flags());
    let flags = Regularity {
        mercer: a.mercer && b.mercer,
        c0: a.mercer && b.mercer && (a.c0 || b.c0),
        translation_invariant: a.translation_invariant && b.translation_invariant,
    };
    Ok(Kernel::from_node(
        Node::Schur {
            scalar: scalar.clone(),
            inner: k.clone(),
        },
        k.dim(),
        domain,
        flags,
    ))
}

/// `K_w(x, t) = w K(x, t) w^†` for `w` of shape `m' × m`.
pub fn conjugate(k: &Kernel, w: &CMatrix) -> Result<Kernel> {
    if w.ncols() != k.dim() || w.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "conjugating operator has shape {}x{}, kernel has m = {}",
            w.nrows(),
            w.ncols(),
            k.dim()
        )));
    }
    if !linalg::is_finite(w) {
        return Err(Error::NonFinite);
    }
    Ok(Kernel::from_node(
        Node::Conjugate {
            inner: k.clone(),
            w: w.clone(),
            w_adj: w.adjoint(),
        },
        w.nrows(),
        k.domain(),
        k.flags(),
    ))
}

/// `K_Ψ(t₁, t₂) = K(Ψ(t₁), Ψ(t₂))`.
pub fn compose(k: &Kernel, psi: &PointMap) -> Result<Kernel> {
    psi.validate()?;
    if k.domain().unify(psi.codomain()).is_none() {
        return Err(Error::domain(k.domain(), psi.codomain()));
    }
    let f = k.flags();
    let flags = Regularity {
        mercer: f.mercer,
        c0: f.c0 && psi.is_closed_embedding(),
        translation_invariant: f.translation_invariant && psi.is_affine(),
    };
    Ok(Kernel::from_node(
        Node::Compose {
            inner: k.clone(),
            map: psi.clone(),
        },
        k.dim(),
        psi.domain(),
        flags,
    ))
}

/// Restriction of `k` to a subset, given by its inclusion map.
pub fn restrict(k: &Kernel, inclusion: &PointMap) -> Result<Kernel> {
    compose(k, inclusion)
}

/// `K(t₁, t₂)_{ij} = κ(Ψ_i(t₁), Ψ_j(t₂))`.
pub fn psi_matrix(scalar: &Kernel, psis: &[PointMap]) -> Result<Kernel> {
    if !scalar.is_scalar() {
        return Err(Error::InvalidParameter("psi_matrix needs a scalar kernel".into()));
    }
    let Some(first) = psis.first() else {
        return Err(Error::InvalidParameter("psi_matrix needs at least one map".into()));
    };
    let domain = first.domain();
    for psi in psis {
        psi.validate()?;
        if psi.domain() != domain {
            return Err(Error::domain(domain, psi.domain()));
        }
        if scalar.domain().unify(psi.codomain()).is_none() {
            return Err(Error::domain(scalar.domain(), psi.codomain()));
        }
    }
    let flags = Regularity {
        mercer: scalar.flags().mercer,
        c0: false,
        translation_invariant: false,
    };
    Ok(Kernel::from_node(
        Node::PsiMatrix {
            scalar: scalar.clone(),
            maps: psis.to_vec(),
        },
        psis.len(),
        domain,
        flags,
    ))
}

/// `K(x, t) = f(x) ⊗ \overline{f(t)}`. A zero `f` gives the zero kernel.
pub fn rank_one(f: VectorFn) -> Kernel {
    let (m, domain) = (f.dim(), f.domain());
    Kernel::from_node(
        Node::RankOne(f),
        m,
        domain,
        Regularity {
            mercer: true,
            c0: false,
            translation_invariant: false,
        },
    )
}

/// `K(x, t) = B` on any domain. `B` must be Hermitian PSD.
pub fn constant(b: CMatrix) -> Result<Kernel> {
    constant_on(b, Domain::Any)
}

pub fn constant_on(b: CMatrix, domain: Domain) -> Result<Kernel> {
    let b = linalg::validate_psd(&b, OPERATOR_PSD_TOL)?;
    let m = b.nrows();
    if m == 0 {
        return Err(Error::DimensionMismatch("operator must be at least 1x1".into()));
    }
    Ok(Kernel::from_node(
        Node::Constant(b),
        m,
        domain,
        Regularity {
            mercer: true,
            c0: false,
            translation_invariant: true,
        },
    ))
}

/// `K(x, t) = κ(x, t) B`, carrying the eigenpairs `(σ_i, y_i)` of `B` with
/// `σ_i > 1e-12 σ_max`.
pub fn kappa_b(scalar: &Kernel, b: &CMatrix) -> Result<Kernel> {
    if !scalar.is_scalar() {
        return Err(Error::InvalidParameter("kappa_b needs a scalar kernel".into()));
    }
    let b = linalg::validate_psd(b, OPERATOR_PSD_TOL)?;
    let eig = linalg::hermitian_eigen(&b)?;
    let cutoff = B_EIG_CUTOFF * eig.max().max(0.0);
    let eigen = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cutoff)
        .map(|(k, &s)| {
            let mut v = eig.vectors.column(k).into_owned();
            linalg::fix_phase(&mut v);
            (s, v)
        })
        .collect();
    let m = b.nrows();
    Ok(Kernel::from_node(
        Node::KappaB {
            scalar: scalar.clone(),
            b,
            eigen,
        },
        m,
        scalar.domain(),
        scalar.flags(),
    ))
}

/// Scalar multiple `c K` for `c ≥ 0`, realized as conjugation by `√c I`.
pub fn scale(k: &Kernel, c: f64) -> Result<Kernel> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be nonnegative, got {c}")));
    }
    let m = k.dim();
    let w = crate::kernel::identity(m) * C64::new(c.sqrt(), 0.0);
    conjugate(k, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::{check_psd, gram, PSD_TOL};
    use crate::linalg::{real_diag, real_matrix};

    fn p(x: f64) -> Point {
        Point::scalar(x)
    }

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn sums() {
        let g1 = Kernel::gaussian(1.0, 1).unwrap();
        let g2 = Kernel::gaussian(2.0, 1).unwrap();
        let s = sum_kernels(&[g1.clone(), Kernel::laplace()]).unwrap();
        assert!(close(&s.eval(&p(0.3), &p(0.3)).unwrap(), &real_matrix(&[&[2.0]]), 1e-15));
        let s = sum_kernels(&[g1.clone(), g2]).unwrap();
        let expect = (-0.5f64).exp() + (-1.0f64 / 8.0).exp();
        assert!(close(&s.eval(&p(0.0), &p(1.0)).unwrap(), &real_matrix(&[&[expect]]), 1e-15));
        let one = sum_kernels(std::slice::from_ref(&g1)).unwrap();
        assert_eq!(one.eval(&p(0.2), &p(1.1)).unwrap(), g1.eval(&p(0.2), &p(1.1)).unwrap());
    }

    #[test]
    fn sum_rejects_mismatches() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        let c2 = constant(real_diag(&[1.0, 1.0])).unwrap();
        assert!(matches!(sum_kernels(&[g.clone(), c2]), Err(Error::DimensionMismatch(_))));
        let g2 = Kernel::gaussian(1.0, 2).unwrap();
        assert!(matches!(sum_kernels(&[g, g2]), Err(Error::DomainMismatch { .. })));
        assert!(sum_kernels(&[]).is_err());
    }

    #[test]
    fn schur_products() {
        let lin = Kernel::linear(1);
        let c = constant(real_diag(&[1.0, 2.0])).unwrap();
        let k = schur_product(&lin, &c).unwrap();
        assert_eq!(k.eval(&p(1.0), &p(2.0)).unwrap(), real_diag(&[2.0, 4.0]));

        let g = Kernel::gaussian(1.0, 1).unwrap();
        let k = schur_product(&g, &constant(real_matrix(&[&[3.0]])).unwrap()).unwrap();
        let v = 3.0 * (-0.5f64).exp();
        assert!(close(&k.eval(&p(0.0), &p(1.0)).unwrap(), &real_matrix(&[&[v]]), 1e-15));

        let one = constant(real_matrix(&[&[1.0]])).unwrap();
        let k = schur_product(&one, &c).unwrap();
        assert_eq!(k.eval(&p(0.4), &p(-1.0)).unwrap(), c.eval(&p(0.4), &p(-1.0)).unwrap());

        assert!(matches!(
            schur_product(&c, &c),
            Err(Error::OperatorTimesOperator { left: 2, right: 2 })
        ));
        assert!(schur_product(&c, &g).is_err());
    }

    #[test]
    fn conjugation() {
        let i2 = constant(real_diag(&[1.0, 1.0])).unwrap();
        let k = conjugate(&i2, &real_matrix(&[&[1.0, 0.0]])).unwrap();
        assert_eq!(k.dim(), 1);
        assert_eq!(k.eval(&p(0.0), &p(3.0)).unwrap(), real_matrix(&[&[1.0]]));

        let d = constant(real_diag(&[1.0, 2.0])).unwrap();
        let k = conjugate(&d, &real_matrix(&[&[1.0, 1.0]])).unwrap();
        assert_eq!(k.eval(&p(0.0), &p(3.0)).unwrap(), real_matrix(&[&[3.0]]));

        assert!(conjugate(&d, &real_matrix(&[&[1.0, 1.0, 1.0]])).is_err());
    }

    #[test]
    fn composition() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        let k = compose(&g, &PointMap::scaling(2.0)).unwrap();
        let v = k.eval(&p(1.0), &p(2.0)).unwrap()[(0, 0)].re;
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);

        let id = compose(&g, &PointMap::identity(Domain::real(1))).unwrap();
        assert_eq!(id.eval(&p(0.3), &p(1.7)).unwrap(), g.eval(&p(0.3), &p(1.7)).unwrap());

        let c = constant(real_matrix(&[&[2.0]])).unwrap();
        let k = compose(&c, &PointMap::scaling(5.0)).unwrap();
        assert_eq!(k.eval(&p(1.0), &p(2.0)).unwrap(), real_matrix(&[&[2.0]]));

        let proj = PointMap::projection(2, vec![0]).unwrap();
        let k2 = compose(&g, &proj).unwrap();
        assert_eq!(k2.domain(), Domain::real(2));
        assert!(compose(&Kernel::gaussian(1.0, 3).unwrap(), &proj).is_err());
    }

    #[test]
    fn restriction_to_integers() {
        let g = Kernel::gaussian(1.5, 1).unwrap();
        let r = restrict(&g, &PointMap::integer_inclusion()).unwrap();
        assert_eq!(r.domain(), Domain::Naturals);
        assert!(r.flags().c0);
        let v = r.eval(&Point::Natural(1), &Point::Natural(3)).unwrap();
        assert_eq!(v, g.eval(&p(1.0), &p(3.0)).unwrap());
    }

    #[test]
    fn psi_matrices() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        let maps = [PointMap::identity(Domain::real(1)), PointMap::scaling(-1.0)];
        let k = psi_matrix(&g, &maps).unwrap();
        let e = (-2.0f64).exp();
        let v = k.eval(&p(1.0), &p(1.0)).unwrap();
        assert!(close(&v, &real_matrix(&[&[1.0, e], &[e, 1.0]]), 1e-15));

        let k1 = psi_matrix(&g, &maps[..1]).unwrap();
        assert_eq!(k1.eval(&p(0.2), &p(0.9)).unwrap(), g.eval(&p(0.2), &p(0.9)).unwrap());

        let dup = psi_matrix(&g, &[PointMap::scaling(2.0), PointMap::scaling(2.0)]).unwrap();
        let b = dup.eval(&p(0.5), &p(0.1)).unwrap();
        assert_eq!(b[(0, 0)], b[(0, 1)]);
        assert_eq!(b[(1, 0)], b[(1, 1)]);
        let diag = dup.eval(&p(0.5), &p(0.5)).unwrap();
        let ev = crate::linalg::eigenvalues_desc(&diag).unwrap();
        assert!(ev[1].abs() < 1e-14);

        assert!(psi_matrix(&g, &[]).is_err());
        let proj = PointMap::projection(2, vec![0]).unwrap();
        assert!(psi_matrix(&g, &[maps[0].clone(), proj]).is_err());
    }

    #[test]
    fn rank_one_kernels() {
        let f = VectorFn::affine(vec![vec![0.0], vec![0.0]], vec![1.0, 0.0]).unwrap();
        let k = rank_one(f);
        assert_eq!(k.eval(&p(3.0), &p(3.0)).unwrap(), real_diag(&[1.0, 0.0]));

        let f = VectorFn::affine(vec![vec![1.0], vec![0.5]], vec![0.1, 1.0]).unwrap();
        let k = rank_one(f);
        let g = gram(&k, &[p(0.0), p(1.0), p(-2.0)]).unwrap();
        let ev = crate::linalg::eigenvalues_desc(&g.matrix).unwrap();
        assert!(ev[1].abs() <= 1e-10 * ev[0]);
    }

    #[test]
    fn constant_kernels() {
        assert!(constant(real_matrix(&[&[-1.0]])).is_err());
        let z = constant(real_matrix(&[&[0.0]])).unwrap();
        assert_eq!(z.eval(&p(1.0), &p(2.0)).unwrap(), real_matrix(&[&[0.0]]));

        // Kronecker structure: eigenvalues N·1, N·2 and zeros
        let k = constant(real_diag(&[1.0, 2.0])).unwrap();
        let pts: Vec<Point> = (0..4).map(|i| p(i as f64)).collect();
        let ev = crate::linalg::eigenvalues_desc(&gram(&k, &pts).unwrap().matrix).unwrap();
        assert!((ev[0] - 8.0).abs() < 1e-12);
        assert!((ev[1] - 4.0).abs() < 1e-12);
        assert!(ev[2..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn kappa_b_kernels() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        let k = kappa_b(&g, &real_diag(&[1.0, 2.0])).unwrap();
        assert_eq!(k.eval(&p(0.0), &p(0.0)).unwrap(), real_diag(&[1.0, 2.0]));
        let e = (-0.5f64).exp();
        assert!(close(&k.eval(&p(0.0), &p(1.0)).unwrap(), &real_diag(&[e, 2.0 * e]), 1e-15));
        let (_, _, eig) = k.as_kappa_b().unwrap();
        assert_eq!(eig.len(), 2);
        assert!((eig[0].0 - 2.0).abs() < 1e-14);

        let k = kappa_b(&g, &real_diag(&[1.0, 0.0])).unwrap();
        assert_eq!(k.as_kappa_b().unwrap().2.len(), 1);
        let pts: Vec<Point> = [0.0, 0.6, 1.9].iter().map(|&x| p(x)).collect();
        let gm = gram(&k, &pts).unwrap();
        let c = check_psd(&gm, PSD_TOL).unwrap();
        assert!(c.is_psd);
        let ev = crate::linalg::eigenvalues_desc(&gm.matrix).unwrap();
        assert_eq!(ev.iter().filter(|v| v.abs() < 1e-12).count(), 3);
    }

    #[test]
    fn point_map_json() {
        let json = r#"{"type":"affine","name":"shift","matrix":[[2.0]],"offset":[1.0]}"#;
        let m: PointMap = serde_json::from_str(json).unwrap();
        m.validate().unwrap();
        assert_eq!(m.name, "shift");
        assert_eq!(m.apply(&p(1.0)).unwrap(), p(3.0));
        let back = serde_json::to_string(&m).unwrap();
        let again: PointMap = serde_json::from_str(&back).unwrap();
        assert_eq!(again, m);

        let table = r#"{"type":"table","domain":{"type":"cyclic","n":3},"codomain":{"type":"real","dim":1},
            "entries":[[{"value":0,"modulus":3},[0.0]],[{"value":1,"modulus":3},[0.5]]]}"#;
        let t: PointMap = serde_json::from_str(table).unwrap();
        t.validate().unwrap();
        assert_eq!(t.apply(&Point::residue(1, 3).unwrap()).unwrap(), p(0.5));
        assert!(t.apply(&Point::residue(2, 3).unwrap()).is_err());
    }

    #[test]
    fn vector_fn_json() {
        let json = r#"{"type":"table","domain":{"type":"naturals"},
            "entries":[{"point":0,"value":[1.0,[0.0,1.0]]},{"point":1,"value":[0.0,2.0]}]}"#;
        let f: VectorFn = serde_json::from_str(json).unwrap();
        f.validate().unwrap();
        assert_eq!(f.dim(), 2);
        let k = rank_one(f);
        let v = k.eval(&Point::Natural(0), &Point::Natural(0)).unwrap();
        // (1, i)(1, i)^† = [[1, -i], [i, 1]]
        assert_eq!(v[(0, 1)], C64::new(0.0, -1.0));
        assert_eq!(v[(1, 0)], C64::new(0.0, 1.0));
    }
}
