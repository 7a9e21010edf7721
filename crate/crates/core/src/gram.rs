//! Block Gram matrices, positivity checks and RKHS norms of kernel sections.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::point::Point;

/// Relative asymmetry above which a Gram matrix is rejected.
pub const HARD_ASYMMETRY: f64 = 1e-6;
/// Default relative PSD tolerance.
pub const PSD_TOL: f64 = 1e-9;

/// `Nm × Nm` matrix with block `(i, j) = K(x_i, x_j)`, symmetrized.
#[derive(Debug, Clone)]
pub struct BlockGram {
    pub points: usize,
    pub dim: usize,
    pub matrix: CMatrix,
    /// `‖G − G^†‖_F / ‖G‖_F` before symmetrization.
    pub asymmetry: f64,
}

impl BlockGram {
    /// Wraps an arbitrary square matrix (e.g. for testing the PSD check).
    pub fn from_matrix(matrix: CMatrix, dim: usize) -> Result<Self> {
        if !matrix.is_square() || dim == 0 || !matrix.nrows().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} is not a block matrix with {dim}x{dim} blocks",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let (h, asymmetry) = linalg::hermitian_part(&matrix);
        Ok(Self {
            points: matrix.nrows() / dim,
            dim,
            matrix: h,
            asymmetry,
        })
    }

    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let m = self.dim;
        self.matrix.view((i * m, j * m), (m, m)).into_owned()
    }
}

/// Assembles the block Gram matrix of `kernel` on `points`.
pub fn gram(kernel: &Kernel, points: &[Point]) -> Result<BlockGram> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("gram needs at least one point".into()));
    }
    for p in points {
        kernel.domain().check(p)?;
    }
    let n = points.len();
    let m = kernel.dim();
    let rows: Vec<Vec<CMatrix>> = points
        .par_iter()
        .map(|x| {
            points
                .iter()
                .map(|t| kernel.eval_unchecked(x, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut g = CMatrix::zeros(n * m, n * m);
    for (i, row) in rows.iter().enumerate() {
        for (j, block) in row.iter().enumerate() {
            if block.shape() != (m, m) {
                return Err(Error::DimensionMismatch(format!(
                    "kernel block has shape {:?}, expected {m}x{m}",
                    block.shape()
                )));
            }
            g.view_mut((i * m, j * m), (m, m)).copy_from(block);
        }
    }
    if !linalg::is_finite(&g) {
        return Err(Error::NonFinite);
    }
    let (h, asymmetry) = linalg::hermitian_part(&g);
    if asymmetry > HARD_ASYMMETRY {
        return Err(Error::NotHermitian { asymmetry });
    }
    if asymmetry > 1e-12 {
        log::warn!("gram matrix asymmetry {asymmetry:.3e} removed by symmetrization");
    }
    Ok(BlockGram {
        points: n,
        dim: m,
        matrix: h,
        asymmetry,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdCheck {
    pub is_psd: bool,
    pub min_eig: f64,
    pub max_eig: f64,
}

/// `is_psd = min_eig ≥ −tol · max(1, max_eig)`.
pub fn check_psd(g: &BlockGram, tol: f64) -> Result<PsdCheck> {
    let eig = linalg::eigenvalues_desc(&g.matrix)?;
    let max_eig = eig.first().copied().unwrap_or(0.0);
    let min_eig = eig.last().copied().unwrap_or(0.0);
    Ok(PsdCheck {
        is_psd: min_eig >= -tol * max_eig.max(1.0),
        min_eig,
        max_eig,
    })
}

/// `f = Σ_j K(·, x_j) c_j`.
#[derive(Debug, Clone)]
pub struct KernelSection {
    pub kernel: Kernel,
    pub anchors: Vec<Point>,
    pub coeffs: Vec<CVector>,
}

impl KernelSection {
    pub fn new(kernel: Kernel, anchors: Vec<Point>, coeffs: Vec<CVector>) -> Result<Self> {
        if anchors.len() != coeffs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} anchors but {} coefficient blocks",
                anchors.len(),
                coeffs.len()
            )));
        }
        for (x, c) in anchors.iter().zip(&coeffs) {
            kernel.domain().check(x)?;
            if c.len() != kernel.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient of length {} for m = {}",
                    c.len(),
                    kernel.dim()
                )));
            }
        }
        Ok(Self {
            kernel,
            anchors,
            coeffs,
        })
    }

    /// `f(x) = Σ_j K(x, x_j) c_j`.
    pub fn value(&self, x: &Point) -> Result<CVector> {
        let mut out = CVector::zeros(self.kernel.dim());
        for (a, c) in self.anchors.iter().zip(&self.coeffs) {
            out += self.kernel.eval(x, a)? * c;
        }
        Ok(out)
    }

    /// Stacked coefficient vector of length `J·m`.
    pub fn stacked(&self) -> CVector {
        let m = self.kernel.dim();
        let mut v = CVector::zeros(self.coeffs.len() * m);
        for (j, c) in self.coeffs.iter().enumerate() {
            v.rows_mut(j * m, m).copy_from(c);
        }
        v
    }

    /// `‖f‖²_K = Σ_{i,j} c_i^† K(x_i, x_j) c_j`, imaginary residue discarded.
    pub fn norm_squared(&self) -> Result<f64> {
        if self.anchors.is_empty() {
            return Ok(0.0);
        }
        let g = gram(&self.kernel, &self.anchors)?;
        let c = self.stacked();
        let q: C64 = (c.adjoint() * &g.matrix * &c)[(0, 0)];
        let scale = g.matrix.norm() * c.norm_squared();
        if q.im.abs() > 1e-10 * scale.max(1e-300) {
            log::warn!("section norm has imaginary residue {:.3e}", q.im);
        }
        if q.re < -1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NegativeNorm(q.re));
        }
        Ok(q.re.max(0.0))
    }
}

/// `‖f‖_K`.
pub fn section_norm(f: &KernelSection) -> Result<f64> {
    Ok(f.norm_squared()?.sqrt())
}
