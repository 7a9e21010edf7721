//! Operator-valued kernels as immutable expression trees.
//!
//! A [`Kernel`] maps a pair of points of its [`Domain`] to an `m × m` complex
//! matrix. Leaves are the built-in scalar kernels, constant operators, rank-one
//! kernels, spectral densities and feature maps; inner nodes are the closure
//! operations (sum, Schur product, conjugation, composition, Ψ-matrix).

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::algebra::{PointMap, VectorFn};
use crate::error::{Error, Result};
use crate::invariant::SpectralDensity;
use crate::linalg::{re, CMatrix, CVector, ONE, ZERO};
use crate::point::{Domain, Point};
use crate::spectral::FeatureMap;

/// Declared regularity. These are metadata carried through the algebra, not
/// verified globally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Regularity {
    /// The RKHS consists of continuous functions.
    pub mercer: bool,
    /// The RKHS sits inside continuous functions vanishing at infinity.
    pub c0: bool,
    /// `K(x+z, t+z) = K(x, t)`.
    pub translation_invariant: bool,
}

impl Regularity {
    pub const NONE: Regularity = Regularity {
        mercer: false,
        c0: false,
        translation_invariant: false,
    };

    pub(crate) fn and(self, o: Regularity) -> Regularity {
        Regularity {
            mercer: self.mercer && o.mercer,
            c0: self.c0 && o.c0,
            translation_invariant: self.translation_invariant && o.translation_invariant,
        }
    }
}

#[derive(Debug)]
pub(crate) enum Node {
    Gaussian { sigma: f64 },
    Laplace,
    Sinc,
    Linear,
    Delta,
    Constant(CMatrix),
    RankOne(VectorFn),
    Sum(Vec<Kernel>),
    Schur { scalar: Kernel, inner: Kernel },
    Conjugate { inner: Kernel, w: CMatrix, w_adj: CMatrix },
    Compose { inner: Kernel, map: PointMap },
    PsiMatrix { scalar: Kernel, maps: Vec<PointMap> },
    KappaB { scalar: Kernel, b: CMatrix, eigen: Vec<(f64, CVector)> },
    Spectral(SpectralDensity),
    Feature(FeatureMap),
}

/// An operator-valued reproducing kernel `K : X × X → ℂ^{m×m}`.
///
/// Cloning is cheap; the expression tree is shared.
#[derive(Debug, Clone)]
pub struct Kernel {
    node: Arc<Node>,
    dim: usize,
    domain: Domain,
    flags: Regularity,
}

impl Kernel {
    pub(crate) fn from_node(node: Node, dim: usize, domain: Domain, flags: Regularity) -> Self {
        Self {
            node: Arc::new(node),
            dim,
            domain,
            flags,
        }
    }

    /// Gaussian `exp(-|x-t|² / 2σ²)` on ℝ^d.
    pub fn gaussian(sigma: f64, d: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self::from_node(
            Node::Gaussian { sigma },
            1,
            Domain::real(d),
            Regularity {
                mercer: true,
                c0: true,
                translation_invariant: true,
            },
        ))
    }

    /// `exp(-π|x-t|)` on ℝ, the reproducing kernel of the Sobolev space W¹(ℝ).
    pub fn laplace() -> Self {
        Self::from_node(
            Node::Laplace,
            1,
            Domain::real(1),
            Regularity {
                mercer: true,
                c0: true,
                translation_invariant: true,
            },
        )
    }

    /// `sin(2π(t-x)) / (π(t-x))` on ℝ, equal to 2 on the diagonal.
    pub fn sinc() -> Self {
        Self::from_node(
            Node::Sinc,
            1,
            Domain::real(1),
            Regularity {
                mercer: true,
                c0: true,
                translation_invariant: true,
            },
        )
    }

    /// Linear kernel `x · t` on ℝ^d.
    pub fn linear(d: usize) -> Self {
        Self::from_node(
            Node::Linear,
            1,
            Domain::real(d),
            Regularity {
                mercer: true,
                c0: false,
                translation_invariant: false,
            },
        )
    }

    /// Kronecker delta `δ_{x,t}` on ℤ₊ or ℤ_n (the kernel of ℓ²).
    pub fn delta(domain: Domain) -> Result<Self> {
        let ti = match domain {
            Domain::Cyclic { .. } => true,
            Domain::Naturals => false,
            other => {
                return Err(Error::Unsupported(format!(
                    "delta kernel needs a discrete domain, got {other}"
                )))
            }
        };
        Ok(Self::from_node(
            Node::Delta,
            1,
            domain,
            Regularity {
                mercer: true,
                c0: true,
                translation_invariant: ti,
            },
        ))
    }

    /// Output dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn flags(&self) -> Regularity {
        self.flags
    }

    pub fn is_scalar(&self) -> bool {
        self.dim == 1
    }

    /// `K(x, t)`.
    pub fn eval(&self, x: &Point, t: &Point) -> Result<CMatrix> {
        self.domain.check(x)?;
        self.domain.check(t)?;
        self.eval_unchecked(x, t)
    }

    /// Scalar value of an `m = 1` kernel.
    pub fn eval_scalar(&self, x: &Point, t: &Point) -> Result<crate::linalg::C64> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch(format!(
                "scalar evaluation of a kernel with m = {}",
                self.dim
            )));
        }
        Ok(self.eval(x, t)?[(0, 0)])
    }

    pub(crate) fn eval_unchecked(&self, x: &Point, t: &Point) -> Result<CMatrix> {
        let scalar = |v: f64| CMatrix::from_element(1, 1, re(v));
        match &*self.node {
            Node::Gaussian { sigma } => {
                let r2 = sq_dist(x, t)?;
                Ok(scalar((-r2 / (2.0 * sigma * sigma)).exp()))
            }
            Node::Laplace => {
                let r = sq_dist(x, t)?.sqrt();
                Ok(scalar((-std::f64::consts::PI * r).exp()))
            }
            Node::Sinc => {
                let u = real1(t)? - real1(x)?;
                Ok(scalar(sinc(u)))
            }
            Node::Linear => {
                let (a, b) = (real_of(x)?, real_of(t)?);
                Ok(scalar(a.iter().zip(b).map(|(p, q)| p * q).sum()))
            }
            Node::Delta => Ok(scalar(if x == t { 1.0 } else { 0.0 })),
            Node::Constant(b) => Ok(b.clone()),
            Node::RankOne(f) => {
                let fx = f.apply(x)?;
                let ft = f.apply(t)?;
                Ok(&fx * ft.adjoint())
            }
            Node::Sum(ks) => {
                let mut acc = ks[0].eval_unchecked(x, t)?;
                for k in &ks[1..] {
                    acc += k.eval_unchecked(x, t)?;
                }
                Ok(acc)
            }
            Node::Schur { scalar, inner } => {
                let s = scalar.eval_unchecked(x, t)?[(0, 0)];
                Ok(inner.eval_unchecked(x, t)? * s)
            }
            Node::Conjugate { inner, w, w_adj } => {
                let k = inner.eval_unchecked(x, t)?;
                Ok(w * k * w_adj)
            }
            Node::Compose { inner, map } => {
                let px = map.apply(x)?;
                let pt = map.apply(t)?;
                inner.eval(&px, &pt)
            }
            Node::PsiMatrix { scalar, maps } => {
                let xs: Vec<Point> = maps.iter().map(|m| m.apply(x)).collect::<Result<_>>()?;
                let ts: Vec<Point> = maps.iter().map(|m| m.apply(t)).collect::<Result<_>>()?;
                let m = maps.len();
                let mut out = CMatrix::zeros(m, m);
                for i in 0..m {
                    for j in 0..m {
                        out[(i, j)] = scalar.eval(&xs[i], &ts[j])?[(0, 0)];
                    }
                }
                Ok(out)
            }
            Node::KappaB { scalar, b, .. } => {
                let s = scalar.eval_unchecked(x, t)?[(0, 0)];
                Ok(b * s)
            }
            Node::Spectral(sd) => sd.eval_stationary(x, t),
            Node::Feature(fm) => {
                let gx = fm.gamma(x)?;
                let gt = fm.gamma(t)?;
                if gx.nrows() == 0 {
                    return Ok(CMatrix::zeros(fm.dim(), fm.dim()));
                }
                Ok(gx.adjoint() * gt)
            }
        }
    }

    /// The scalar kernel and operator `B` when this is a `κ·B` kernel.
    pub fn as_kappa_b(&self) -> Option<(&Kernel, &CMatrix, &[(f64, CVector)])> {
        match &*self.node {
            Node::KappaB { scalar, b, eigen } => Some((scalar, b, eigen)),
            _ => None,
        }
    }

    /// The scalar kernel and maps when this is a Ψ-matrix kernel.
    pub fn as_psi_matrix(&self) -> Option<(&Kernel, &[PointMap])> {
        match &*self.node {
            Node::PsiMatrix { scalar, maps } => Some((scalar, maps)),
            _ => None,
        }
    }

    pub fn as_density(&self) -> Option<&SpectralDensity> {
        match &*self.node {
            Node::Spectral(sd) => Some(sd),
            _ => None,
        }
    }
}

fn real_of(p: &Point) -> Result<&[f64]> {
    p.as_real()
        .ok_or_else(|| Error::domain("R^d", p.domain()))
}

fn real1(p: &Point) -> Result<f64> {
    match p.as_real() {
        Some([x]) => Ok(*x),
        _ => Err(Error::domain("R^1", p.domain())),
    }
}

fn sq_dist(x: &Point, t: &Point) -> Result<f64> {
    let (a, b) = (real_of(x)?, real_of(t)?);
    if a.len() != b.len() {
        return Err(Error::domain(x.domain(), t.domain()));
    }
    Ok(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum())
}

/// `sin(2πu) / (πu)`, with the limit 2 at zero.
pub fn sinc(u: f64) -> f64 {
    if u == 0.0 {
        2.0
    } else {
        let pu = std::f64::consts::PI * u;
        (2.0 * pu).sin() / pu
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.node {
            Node::Gaussian { sigma } => match self.domain {
                Domain::Real { dim } if dim != 1 => write!(f, "gauss(sigma={sigma}, d={dim})"),
                _ => write!(f, "gauss(sigma={sigma})"),
            },
            Node::Laplace => write!(f, "laplace()"),
            Node::Sinc => write!(f, "sinc()"),
            Node::Linear => write!(f, "linear()"),
            Node::Delta => write!(f, "delta()"),
            Node::Constant(b) => write!(f, "const(<{}x{}>)", b.nrows(), b.ncols()),
            Node::RankOne(_) => write!(f, "rank1(<m={}>)", self.dim),
            Node::Sum(ks) => {
                for (i, k) in ks.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{k}")?;
                }
                Ok(())
            }
            Node::Schur { scalar, inner } => write!(f, "({scalar}) * ({inner})"),
            Node::Conjugate { inner, w, .. } => {
                write!(f, "conj(expr={inner}, w=<{}x{}>)", w.nrows(), w.ncols())
            }
            Node::Compose { inner, map } => write!(f, "compose(expr={inner}, map={map})"),
            Node::PsiMatrix { scalar, maps } => {
                write!(f, "psi(scalar={scalar}, maps=<{}>)", maps.len())
            }
            Node::KappaB { scalar, b, .. } => {
                write!(f, "kb(scalar={scalar}, b=<{}x{}>)", b.nrows(), b.ncols())
            }
            Node::Spectral(sd) => write!(f, "spectral(<{} nodes>)", sd.len()),
            Node::Feature(fm) => write!(f, "feature(<p={}, m={}>)", fm.features(), fm.dim()),
        }
    }
}

/// Identity matrix helper used by several modules.
pub(crate) fn identity(m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |i, j| if i == j { ONE } else { ZERO })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{constant, rank_one, VectorFn};
    use crate::linalg::real_matrix;

    fn p(x: f64) -> Point {
        Point::scalar(x)
    }

    #[test]
    fn gaussian_diagonal_is_one() {
        let k = Kernel::gaussian(1.0, 1).unwrap();
        assert_eq!(k.eval(&p(0.0), &p(0.0)).unwrap()[(0, 0)], re(1.0));
    }

    #[test]
    fn constant_is_constant() {
        let k = constant(real_matrix(&[&[2.0]])).unwrap();
        for (x, t) in [(0.0, 0.0), (1.5, -3.0)] {
            assert_eq!(k.eval(&p(x), &p(t)).unwrap()[(0, 0)], re(2.0));
        }
    }

    #[test]
    fn rank_one_outer_product() {
        // f(x) = (x, 1)
        let f = VectorFn::affine(vec![vec![1.0], vec![0.0]], vec![0.0, 1.0]).unwrap();
        let k = rank_one(f);
        let v = k.eval(&p(1.0), &p(2.0)).unwrap();
        assert_eq!(v, real_matrix(&[&[2.0, 1.0], &[2.0, 1.0]]));
    }

    #[test]
    fn domain_mismatch_is_reported() {
        let k = Kernel::gaussian(1.0, 1).unwrap();
        let err = k.eval(&p(0.0), &Point::Natural(1)).unwrap_err();
        assert!(matches!(err, Error::DomainMismatch { .. }));
        let err = k.eval(&Point::Real(vec![0.0, 1.0]), &p(0.0)).unwrap_err();
        assert!(matches!(err, Error::DomainMismatch { .. }));
    }

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 2.0);
        assert!((sinc(0.25) - 4.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!(sinc(0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_sigma() {
        assert!(Kernel::gaussian(0.0, 1).is_err());
        assert!(Kernel::gaussian(f64::NAN, 1).is_err());
    }

    #[test]
    fn kernels_are_send_and_sync() {
        fn check<T: Send + Sync>() {}
        check::<Kernel>();
    }
}
