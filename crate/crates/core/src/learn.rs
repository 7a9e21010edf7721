//! Vector-valued regularized least squares
//!
//! ```text
//! min_f (1/n) Σ_ℓ ‖y_ℓ − f(x_ℓ)‖² + λ ‖f‖²_K
//! ```
//!
//! solved in representer form `f = Σ_ℓ K(·, x_ℓ) c_ℓ`, either directly on the
//! block Gram, decoupled along the eigenvectors of `B` for `K = κB`, or reduced
//! to a single scalar problem for `K = [κ(Ψ_i ·, Ψ_j ·)]_{ij}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{kappa_b, psi_matrix, PointMap};
use crate::error::{Error, Result};
use crate::gram::gram;
use crate::kernel::Kernel;
use crate::linalg::{self, re, serde_cvec, serde_cvecs, CMatrix, CVector, C64};
use crate::point::Point;

/// Condition estimates above this are logged.
pub const CONDITION_WARN: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrainingSet")]
pub struct TrainingSet {
    inputs: Vec<Point>,
    #[serde(with = "serde_cvecs")]
    outputs: Vec<CVector>,
}

#[derive(Deserialize)]
struct RawTrainingSet {
    inputs: Vec<Point>,
    #[serde(with = "serde_cvecs")]
    outputs: Vec<CVector>,
}

impl TryFrom<RawTrainingSet> for TrainingSet {
    type Error = Error;

    fn try_from(r: RawTrainingSet) -> Result<Self> {
        TrainingSet::new(r.inputs, r.outputs)
    }
}

impl TrainingSet {
    pub fn new(inputs: Vec<Point>, outputs: Vec<CVector>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidParameter("training set is empty".into()));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        let m = outputs[0].len();
        if m == 0 || outputs.iter().any(|y| y.len() != m) {
            return Err(Error::DimensionMismatch("outputs must share a positive length".into()));
        }
        if outputs.iter().any(|y| y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        let d = inputs[0].domain();
        if let Some(p) = inputs.iter().find(|p| p.domain() != d) {
            return Err(Error::domain(d, p.domain()));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn inputs(&self) -> &[Point] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[CVector] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.outputs[0].len()
    }

    fn stacked(&self) -> CVector {
        stack(&self.outputs)
    }
}

fn stack(vs: &[CVector]) -> CVector {
    let m = vs.first().map_or(0, |v| v.len());
    let mut out = CVector::zeros(vs.len() * m);
    for (l, v) in vs.iter().enumerate() {
        out.rows_mut(l * m, m).copy_from(v);
    }
    out
}

fn unstack(v: &CVector, m: usize) -> Vec<CVector> {
    (0..v.len() / m).map(|l| v.rows(l * m, m).into_owned()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Block,
    Decoupled,
    Psi,
}

/// One scalar problem of the decoupled solver: `φ_i = Σ_ℓ κ(·, x_ℓ) a_{iℓ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub sigma: f64,
    #[serde(with = "serde_cvec")]
    pub direction: CVector,
    #[serde(with = "serde_cvec")]
    pub coeffs: CVector,
}

/// The reduced-form predictor the model was fitted with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Reduced {
    /// `f(x) = Σ_i φ_i(x) y_i`.
    Decoupled { components: Vec<Component> },
    /// `f(t)_i = φ(Ψ_i(t))`, `φ = Σ_s κ(·, x_s) a_s` over the mapped samples.
    Psi {
        samples: Vec<Point>,
        #[serde(with = "serde_cvec")]
        coeffs: CVector,
    },
}

#[derive(Debug, Clone)]
pub struct RLSModel {
    /// Operator-valued kernel whose RKHS the predictor lives in.
    pub kernel: Kernel,
    /// Textual form of `kernel`, when known.
    pub kernel_expr: Option<String>,
    pub anchors: Vec<Point>,
    /// Block coefficients `c_ℓ`, equivalent to the reduced form if any.
    pub coeffs: Vec<CVector>,
    pub lambda: f64,
    pub solver: Solver,
    pub condition: f64,
    pub reduced: Option<Reduced>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")))
    }
}

fn shifted_solve(g: &CMatrix, shift: f64, y: &CVector) -> Result<(CVector, f64)> {
    let mut a = g.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += re(shift);
    }
    let (x, condition) = linalg::solve_hpd(&a, y)?;
    if condition > CONDITION_WARN {
        log::warn!("regularized system is ill-conditioned (estimate {condition:.3e})");
    }
    Ok((x, condition))
}

/// Solves `(G + nλ I) c = y` on the block Gram.
pub fn rls_fit_block(kernel: &Kernel, data: &TrainingSet, lambda: f64) -> Result<RLSModel> {
    check_lambda(lambda)?;
    if kernel.dim() != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "kernel has m = {} but outputs have length {}",
            kernel.dim(),
            data.dim()
        )));
    }
    let n = data.len();
    let g = gram(kernel, data.inputs())?;
    let (c, condition) = shifted_solve(&g.matrix, n as f64 * lambda, &data.stacked())?;
    Ok(RLSModel {
        kernel: kernel.clone(),
        kernel_expr: None,
        anchors: data.inputs().to_vec(),
        coeffs: unstack(&c, data.dim()),
        lambda,
        solver: Solver::Block,
        condition,
        reduced: None,
    })
}

/// Decoupled solver for `K = κB`: with `B = Σ σ_i y_i y_i^†`, solves the scalar
/// problems with targets `⟨y_ℓ, y_i⟩ = y_i^† y_ℓ` and regularization `λ/σ_i`.
pub fn rls_fit_decoupled_kb(scalar: &Kernel, b: &CMatrix, data: &TrainingSet, lambda: f64) -> Result<RLSModel> {
    check_lambda(lambda)?;
    let kernel = kappa_b(scalar, b)?;
    fit_decoupled(&kernel, data, lambda)
}

fn fit_decoupled(kernel: &Kernel, data: &TrainingSet, lambda: f64) -> Result<RLSModel> {
    let (scalar, _, eigen) = kernel
        .as_kappa_b()
        .ok_or_else(|| Error::Unsupported("decoupled solver needs a kappa*B kernel".into()))?;
    if eigen.is_empty() {
        return Err(Error::EmptySpectrum(0.0));
    }
    let m = kernel.dim();
    if m != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "B is {m}x{m} but outputs have length {}",
            data.dim()
        )));
    }
    let n = data.len();
    let g = gram(scalar, data.inputs())?;
    let solved: Vec<(Component, f64)> = eigen
        .par_iter()
        .map(|(sigma, dir)| {
            let targets = CVector::from_iterator(n, data.outputs().iter().map(|y| dir.dotc(y)));
            let (a, cond) = shifted_solve(&g.matrix, n as f64 * lambda / sigma, &targets)?;
            Ok((
                Component {
                    sigma: *sigma,
                    direction: dir.clone(),
                    coeffs: a,
                },
                cond,
            ))
        })
        .collect::<Result<_>>()?;
    let condition = solved.iter().map(|s| s.1).fold(0.0, f64::max);
    let components: Vec<Component> = solved.into_iter().map(|s| s.0).collect();
    // c_ℓ = Σ_i (a_{iℓ} / σ_i) y_i
    let coeffs = (0..n)
        .map(|l| {
            components.iter().fold(CVector::zeros(m), |acc, c| {
                acc + &c.direction * (c.coeffs[l] / c.sigma)
            })
        })
        .collect();
    Ok(RLSModel {
        kernel: kernel.clone(),
        kernel_expr: None,
        anchors: data.inputs().to_vec(),
        coeffs,
        lambda,
        solver: Solver::Decoupled,
        condition,
        reduced: Some(Reduced::Decoupled { components }),
    })
}

/// Ψ-reduced solver: one scalar problem on the `nm` samples `(Ψ_i(t_ℓ), y_ℓi)`
/// with objective `(1/n) Σ_ℓ Σ_i |y_ℓi − φ(Ψ_i(t_ℓ))|² + λ‖φ‖²_κ`, i.e.
/// `(G' + nλ I) a = y` with the factor `n`, not `nm`.
pub fn rls_fit_psi(scalar: &Kernel, psis: &[PointMap], data: &TrainingSet, lambda: f64) -> Result<RLSModel> {
    check_lambda(lambda)?;
    let kernel = psi_matrix(scalar, psis)?;
    fit_psi(&kernel, data, lambda)
}

fn fit_psi(kernel: &Kernel, data: &TrainingSet, lambda: f64) -> Result<RLSModel> {
    let (scalar, psis) = kernel
        .as_psi_matrix()
        .ok_or_else(|| Error::Unsupported("psi solver needs a psi-matrix kernel".into()))?;
    let m = psis.len();
    if m != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{m} maps but outputs have length {}",
            data.dim()
        )));
    }
    let n = data.len();
    let mut samples = Vec::with_capacity(n * m);
    for t in data.inputs() {
        for psi in psis {
            samples.push(psi.apply(t)?);
        }
    }
    let g = gram(scalar, &samples)?;
    let (a, condition) = shifted_solve(&g.matrix, n as f64 * lambda, &data.stacked())?;
    Ok(RLSModel {
        kernel: kernel.clone(),
        kernel_expr: None,
        anchors: data.inputs().to_vec(),
        coeffs: unstack(&a, m),
        lambda,
        solver: Solver::Psi,
        condition,
        reduced: Some(Reduced::Psi { samples, coeffs: a }),
    })
}

/// Fits with the requested solver, which must match the kernel's structure.
pub fn fit(kernel: &Kernel, data: &TrainingSet, lambda: f64, solver: Solver) -> Result<RLSModel> {
    check_lambda(lambda)?;
    match solver {
        Solver::Block => rls_fit_block(kernel, data, lambda),
        Solver::Decoupled => fit_decoupled(kernel, data, lambda),
        Solver::Psi => fit_psi(kernel, data, lambda),
    }
}

/// `f(x)`, through the reduced form when the model has one.
pub fn predict(model: &RLSModel, x: &Point) -> Result<CVector> {
    model.kernel.domain().check(x)?;
    let m = model.kernel.dim();
    match (&model.reduced, model.kernel.as_kappa_b(), model.kernel.as_psi_matrix()) {
        (Some(Reduced::Decoupled { components }), Some((scalar, _, _)), _) => {
            let ks: Vec<C64> = model
                .anchors
                .iter()
                .map(|a| scalar.eval_scalar(x, a))
                .collect::<Result<_>>()?;
            Ok(components.iter().fold(CVector::zeros(m), |acc, c| {
                let phi: C64 = ks.iter().zip(c.coeffs.iter()).map(|(k, a)| k * a).sum();
                acc + &c.direction * phi
            }))
        }
        (Some(Reduced::Psi { samples, coeffs }), _, Some((scalar, psis))) => {
            let mut out = CVector::zeros(m);
            for (i, psi) in psis.iter().enumerate() {
                let xi = psi.apply(x)?;
                let mut acc = C64::new(0.0, 0.0);
                for (s, a) in samples.iter().zip(coeffs.iter()) {
                    acc += scalar.eval_scalar(&xi, s)? * a;
                }
                out[i] = acc;
            }
            Ok(out)
        }
        _ => {
            let mut out = CVector::zeros(m);
            for (a, c) in model.anchors.iter().zip(&model.coeffs) {
                out += model.kernel.eval(x, a)? * c;
            }
            Ok(out)
        }
    }
}

/// `‖f‖²_K = c^† G c` for block coefficients on `anchors`.
pub fn norm_squared(kernel: &Kernel, anchors: &[Point], coeffs: &[CVector]) -> Result<f64> {
    if anchors.is_empty() {
        return Ok(0.0);
    }
    let g = gram(kernel, anchors)?;
    let c = stack(coeffs);
    Ok((c.adjoint() * &g.matrix * &c)[(0, 0)].re.max(0.0))
}

/// The regularized objective of `f = Σ K(·, x_ℓ) c_ℓ` on `data`.
pub fn objective_of(kernel: &Kernel, anchors: &[Point], coeffs: &[CVector], data: &TrainingSet, lambda: f64) -> Result<f64> {
    let n = data.len() as f64;
    let mut fit = Vec::with_capacity(data.len());
    for (x, y) in data.inputs().iter().zip(data.outputs()) {
        let mut f = CVector::zeros(kernel.dim());
        for (a, c) in anchors.iter().zip(coeffs) {
            f += kernel.eval(x, a)? * c;
        }
        fit.push((y - f).norm_squared());
    }
    Ok(linalg::sum_compensated(fit) / n + lambda * norm_squared(kernel, anchors, coeffs)?)
}

pub fn objective(model: &RLSModel, data: &TrainingSet) -> Result<f64> {
    objective_of(&model.kernel, &model.anchors, &model.coeffs, data, model.lambda)
}

/// `‖f*‖_K`.
pub fn norm(model: &RLSModel) -> Result<f64> {
    Ok(norm_squared(&model.kernel, &model.anchors, &model.coeffs)?.sqrt())
}

/// Serialized form of a model: the kernel is stored as an expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kernel: String,
    /// Directory that file references in `kernel` are relative to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_dir: Option<String>,
    pub solver: Solver,
    pub lambda: f64,
    pub anchors: Vec<Point>,
    #[serde(with = "serde_cvecs")]
    pub coefficients: Vec<CVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced: Option<Reduced>,
}

impl RLSModel {
    pub fn with_expr(mut self, expr: impl Into<String>) -> Self {
        self.kernel_expr = Some(expr.into());
        self
    }

    pub fn to_file(&self, base_dir: Option<String>) -> Result<ModelFile> {
        let kernel = self
            .kernel_expr
            .clone()
            .ok_or_else(|| Error::Unsupported("model kernel has no expression form".into()))?;
        Ok(ModelFile {
            kernel,
            base_dir,
            solver: self.solver,
            lambda: self.lambda,
            anchors: self.anchors.clone(),
            coefficients: self.coeffs.clone(),
            reduced: self.reduced.clone(),
        })
    }

    /// Rebuilds a model from its file form and the kernel built from `file.kernel`.
    pub fn from_file(file: ModelFile, kernel: Kernel) -> Result<Self> {
        check_lambda(file.lambda)?;
        let section = crate::gram::KernelSection::new(kernel.clone(), file.anchors, file.coefficients)?;
        Ok(Self {
            kernel,
            kernel_expr: Some(file.kernel),
            anchors: section.anchors,
            coeffs: section.coeffs,
            lambda: file.lambda,
            solver: file.solver,
            condition: f64::NAN,
            reduced: file.reduced,
        })
    }
}
