//! Dense complex linear algebra used throughout the crate.
//!
//! Everything is `nalgebra` backed. Hermitian eigenproblems always return
//! eigenvalues in descending order with eigenvectors in matching columns.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Builds a complex matrix from real row-major rows.
pub fn real_matrix(rows: &[&[f64]]) -> CMatrix {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    CMatrix::from_fn(r, c, |i, j| re(rows[i][j]))
}

pub fn real_diag(d: &[f64]) -> CMatrix {
    CMatrix::from_fn(d.len(), d.len(), |i, j| if i == j { re(d[i]) } else { ZERO })
}

pub fn real_vector(v: &[f64]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&x| re(x)))
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Returns `(a + a^†)/2` and the relative asymmetry `‖a − a^†‖_F / max(‖a‖_F, tiny)`.
pub fn hermitian_part(a: &CMatrix) -> (CMatrix, f64) {
    let adj = a.adjoint();
    let diff = (a - &adj).norm();
    let scale = a.norm();
    let h = (a + adj) * re(0.5);
    let asym = if scale > 0.0 { diff / scale } else { 0.0 };
    (h, asym)
}

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// Eigendecomposition of a Hermitian matrix. Only the lower triangle is read.
pub fn hermitian_eigen(a: &CMatrix) -> Result<Eigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigenproblem needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the solver's order among ties
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok(Eigen { values, vectors })
}

pub fn eigenvalues_desc(a: &CMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(a)?.values)
}

/// Rotates `v` so that its largest-magnitude entry is real and positive.
/// Ties go to the first index.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = a;
        }
    }
    if best_abs > 0.0 {
        let phase = v[best].conj() / best_abs;
        for z in v.iter_mut() {
            *z *= phase;
        }
        v[best] = re(v[best].re);
    }
}

/// Moore–Penrose pseudo-inverse of a Hermitian matrix; eigenvalues at or below
/// `rel_cutoff · λ_max` are treated as zero.
pub fn hermitian_pinv(a: &CMatrix, rel_cutoff: f64) -> Result<CMatrix> {
    let eig = hermitian_eigen(a)?;
    let n = a.nrows();
    let cutoff = rel_cutoff * eig.max().max(0.0);
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam > cutoff {
            let v = eig.vectors.column(k);
            out += (v * v.adjoint()) * re(1.0 / lam);
        }
    }
    Ok(out)
}

/// Square root of a Hermitian PSD matrix; small negative eigenvalues are clipped.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eigen(a)?;
    let n = a.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam > 0.0 {
            let v = eig.vectors.column(k);
            out += (v * v.adjoint()) * re(lam.sqrt());
        }
    }
    Ok(out)
}

/// Checks that `a` is Hermitian PSD within `tol` (relative to `max(1, λ_max)`)
/// and returns its Hermitian part.
pub fn validate_psd(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let (h, asym) = hermitian_part(a);
    if asym > 1e-6 {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    let eig = hermitian_eigen(&h)?;
    if eig.min() < -tol * eig.max().max(1.0) {
        return Err(Error::NotPositive { min_eig: eig.min() });
    }
    Ok(h)
}

/// Solves the Hermitian positive definite system `a x = b`.
/// Returns the solution and a crude condition estimate from the Cholesky diagonal.
pub fn solve_hpd(a: &CMatrix, b: &CVector) -> Result<(CVector, f64)> {
    let chol = Cholesky::new(a.clone()).ok_or(Error::SolveFailure {
        condition: f64::INFINITY,
    })?;
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..l.nrows() {
        let d = l[(i, i)].norm();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let condition = if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY };
    let x = chol.solve(b);
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SolveFailure { condition });
    }
    Ok((x, condition))
}

/// Neumaier-compensated accumulator for complex matrices.
#[derive(Debug, Clone)]
pub struct CompensatedSum {
    sum: DMatrix<C64>,
    comp: DMatrix<C64>,
}

impl CompensatedSum {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            sum: CMatrix::zeros(rows, cols),
            comp: CMatrix::zeros(rows, cols),
        }
    }

    pub fn add_scaled(&mut self, scale: C64, m: &CMatrix) {
        for ((s, c), x) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(m.iter()) {
            let v = scale * x;
            s.re = neumaier(s.re, &mut c.re, v.re);
            s.im = neumaier(s.im, &mut c.im, v.im);
        }
    }

    pub fn finish(self) -> CMatrix {
        self.sum + self.comp
    }
}

#[inline]
fn neumaier(sum: f64, comp: &mut f64, x: f64) -> f64 {
    let t = sum + x;
    if sum.abs() >= x.abs() {
        *comp += (sum - t) + x;
    } else {
        *comp += (x - t) + sum;
    }
    t
}

/// Compensated sum of real numbers.
pub fn sum_compensated(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for x in xs {
        s = neumaier(s, &mut c, x);
    }
    s + c
}

/// A complex scalar in files: either a bare real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexEntry> for C64 {
    fn from(e: ComplexEntry) -> C64 {
        match e {
            ComplexEntry::Real(x) => re(x),
            ComplexEntry::Pair([a, b]) => C64::new(a, b),
        }
    }
}

impl From<C64> for ComplexEntry {
    fn from(z: C64) -> Self {
        ComplexEntry::Pair([z.re, z.im])
    }
}

/// On-disk matrix: row-major `data`, entries as `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub m: usize,
    pub shape: [usize; 2],
    pub data: Vec<ComplexEntry>,
}

impl MatrixFile {
    pub fn from_matrix(a: &CMatrix) -> Self {
        let (r, c) = a.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(a[(i, j)].into());
            }
        }
        Self {
            m: r,
            shape: [r, c],
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let [r, c] = self.shape;
        if self.data.len() != r * c {
            return Err(Error::DimensionMismatch(format!(
                "matrix of shape {r}x{c} has {} entries",
                self.data.len()
            )));
        }
        let a = CMatrix::from_fn(r, c, |i, j| self.data[i * c + j].into());
        if !is_finite(&a) {
            return Err(Error::NonFinite);
        }
        Ok(a)
    }
}

pub(crate) mod serde_matrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(a: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixFile::from_matrix(a).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let f = MatrixFile::deserialize(d)?;
        f.to_matrix().map_err(serde::de::Error::custom)
    }
}

pub(crate) mod serde_matrices {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(a: &[CMatrix], s: S) -> std::result::Result<S::Ok, S::Error> {
        let files: Vec<MatrixFile> = a.iter().map(MatrixFile::from_matrix).collect();
        files.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<CMatrix>, D::Error> {
        let files = Vec::<MatrixFile>::deserialize(d)?;
        files
            .iter()
            .map(|f| f.to_matrix().map_err(serde::de::Error::custom))
            .collect()
    }
}

pub(crate) mod serde_cvec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &CVector, s: S) -> std::result::Result<S::Ok, S::Error> {
        let e: Vec<ComplexEntry> = v.iter().map(|&z| z.into()).collect();
        e.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CVector, D::Error> {
        let e = Vec::<ComplexEntry>::deserialize(d)?;
        Ok(CVector::from_iterator(e.len(), e.into_iter().map(C64::from)))
    }
}

pub(crate) mod serde_cvecs {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[CVector], s: S) -> std::result::Result<S::Ok, S::Error> {
        let e: Vec<Vec<ComplexEntry>> = v
            .iter()
            .map(|col| col.iter().map(|&z| z.into()).collect())
            .collect();
        e.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<CVector>, D::Error> {
        let e = Vec::<Vec<ComplexEntry>>::deserialize(d)?;
        Ok(e.into_iter()
            .map(|col| CVector::from_iterator(col.len(), col.into_iter().map(C64::from)))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_are_descending() {
        let a = real_matrix(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = hermitian_eigen(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_hermitian_spectrum() {
        // [[2, i], [-i, 2]] has eigenvalues 3 and 1
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[re(2.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), re(2.0)],
        );
        let e = hermitian_eigen(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let v = e.vectors.column(0);
        let av = &a * v;
        assert!((av - v * re(3.0)).norm() < 1e-13);
    }

    #[test]
    fn non_finite_rejected() {
        let a = real_matrix(&[&[f64::NAN]]);
        assert_eq!(hermitian_eigen(&a).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn phase_fix_makes_largest_entry_positive() {
        let mut v = CVector::from_vec(vec![C64::new(0.0, 0.1), C64::new(0.0, -2.0)]);
        fix_phase(&mut v);
        assert!((v[1] - re(2.0)).norm() < 1e-15);
        assert!((v[0] - re(-0.1)).norm() < 1e-15);
    }

    #[test]
    fn matrix_file_accepts_reals_and_pairs() {
        let json = r#"{"m":2,"shape":[2,2],"data":[1.0,[0,1],[0,-1],2]}"#;
        let f: MatrixFile = serde_json::from_str(json).unwrap();
        let a = f.to_matrix().unwrap();
        assert_eq!(a[(0, 1)], C64::new(0.0, 1.0));
        assert_eq!(a[(1, 1)], re(2.0));
        let back = serde_json::to_string(&MatrixFile::from_matrix(&a)).unwrap();
        assert!(back.contains("\"shape\":[2,2]"));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s = sum_compensated([1e16, 1.0, -1e16]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn pinv_of_singular_matrix() {
        let a = real_matrix(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let p = hermitian_pinv(&a, 1e-10).unwrap();
        // A A^+ A = A
        assert!((&a * &p * &a - &a).norm() < 1e-14);
    }
}
