//! Finite-scale universality diagnostics.
//!
//! Verdicts are exact only where finite computations decide the question:
//! strict positive definiteness on a finite point set, injectivity of `L_μ`
//! for a finitely supported `μ`, and the support/injectivity dichotomy for
//! densities on ℤ_n. On ℝ^d the support check is a necessary condition only.

use std::f64::consts::E;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gram::gram;
use crate::invariant::{cyclic_character, Nodes, SpectralDensity};
use crate::kernel::Kernel;
use crate::linalg::{self, re, CMatrix, CVector, C64};
use crate::point::{ensure_distinct, Domain, Point};
use crate::spectral::{integral_operator, DiscreteMeasure};

/// Default injectivity threshold, relative to the largest eigenvalue.
pub const INJECTIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Stacked block vector `v` with `v^† G v` minimal.
    Vector {
        #[serde(with = "crate::linalg::serde_cvec")]
        vector: CVector,
    },
    /// A character missing from the density, or one whose matrix is singular.
    Character {
        character: u64,
        #[serde(skip_serializing_if = "Option::is_none", with = "opt_cvec")]
        direction: Option<CVector>,
    },
    /// Compact support box of a density on ℝ^d.
    Support { support: Vec<[f64; 2]> },
}

mod opt_cvec {
    use serde::Serializer;

    use crate::linalg::CVector;

    pub fn serialize<S: Serializer>(v: &Option<CVector>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => crate::linalg::serde_cvec::serialize(v, s),
            None => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub kernel: String,
    pub test: String,
    pub min_eig: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Strict positive definiteness on distinct points: pass iff
/// `λ_min(G) > tol · λ_max(G)`.
pub fn spd_test(kernel: &Kernel, points: &[Point], tol: f64) -> Result<DiagnosticsReport> {
    ensure_distinct(points)?;
    let g = gram(kernel, points)?;
    let eig = linalg::hermitian_eigen(&g.matrix)?;
    let threshold = tol * eig.max();
    let min_eig = eig.min();
    let pass = min_eig > threshold;
    let witness = (!pass).then(|| {
        let mut v: CVector = eig.vectors.column(eig.values.len() - 1).into_owned();
        linalg::fix_phase(&mut v);
        Witness::Vector { vector: v }
    });
    Ok(DiagnosticsReport {
        kernel: kernel.to_string(),
        test: "spd".into(),
        min_eig,
        threshold,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        witness,
        notes: vec![],
    })
}

/// Eigenvalues of `L_μ`, descending.
pub fn lmu_spectrum(kernel: &Kernel, mu: &DiscreteMeasure) -> Result<Vec<f64>> {
    linalg::eigenvalues_desc(&integral_operator(kernel, mu)?)
}

/// Injectivity of `L_μ`: pass iff `λ_min > tol · λ_max`.
pub fn lmu_report(kernel: &Kernel, mu: &DiscreteMeasure, tol: f64) -> Result<DiagnosticsReport> {
    let l = integral_operator(kernel, mu)?;
    let eig = linalg::hermitian_eigen(&l)?;
    let threshold = tol * eig.max().max(0.0);
    let min_eig = eig.min();
    let pass = min_eig > threshold;
    let witness = (!pass).then(|| {
        let mut v: CVector = eig.vectors.column(eig.values.len() - 1).into_owned();
        linalg::fix_phase(&mut v);
        Witness::Vector { vector: v }
    });
    Ok(DiagnosticsReport {
        kernel: kernel.to_string(),
        test: "spectrum".into(),
        min_eig,
        threshold,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        witness,
        notes: vec![],
    })
}

/// Support and fiberwise injectivity of a density.
///
/// On ℤ_n the verdict is exact: pass iff every character carries a matrix with
/// smallest eigenvalue above `tol`. On ℝ^d it fails when the density declares
/// a compact support (the dual group is not covered) and is otherwise
/// inconclusive, reporting the smallest eigenvalue over the nodes.
pub fn density_support_verdict(sd: &SpectralDensity, tol: f64) -> DiagnosticsReport {
    let min_eigs: Vec<(f64, CVector)> = sd
        .matrices()
        .iter()
        .map(|b| {
            let eig = linalg::hermitian_eigen(b).expect("validated density matrix");
            let mut v: CVector = eig.vectors.column(eig.values.len() - 1).into_owned();
            linalg::fix_phase(&mut v);
            (eig.min(), v)
        })
        .collect();
    let overall = min_eigs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let kernel = format!("spectral density with {} nodes on the dual of {}", sd.len(), sd.domain());
    match (sd.domain(), sd.nodes()) {
        (Domain::Cyclic { n }, Nodes::Cyclic(rs)) => {
            let missing = (0..n).find(|r| !rs.contains(r));
            let (min_eig, witness) = if let Some(r) = missing {
                (
                    0.0,
                    Some(Witness::Character {
                        character: r,
                        direction: None,
                    }),
                )
            } else {
                let (k, (lam, v)) = min_eigs
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                    .expect("nonempty density");
                let w = (*lam <= tol).then(|| Witness::Character {
                    character: rs[k],
                    direction: Some(v.clone()),
                });
                (*lam, w)
            };
            let pass = witness.is_none();
            DiagnosticsReport {
                kernel,
                test: "support".into(),
                min_eig,
                threshold: tol,
                verdict: if pass { Verdict::Pass } else { Verdict::Fail },
                witness,
                notes: vec![],
            }
        }
        _ => {
            let mut notes = vec!["necessary-condition check only on R^d".to_string()];
            if let Some(tail) = sd.metadata().truncation_bound {
                notes.push(format!("truncation bound {tail:.3e}"));
            }
            if let Some(support) = sd.metadata().support.clone() {
                notes.push("density support is compact, so it does not cover the dual group".into());
                DiagnosticsReport {
                    kernel,
                    test: "support".into(),
                    min_eig: overall,
                    threshold: tol,
                    verdict: Verdict::Fail,
                    witness: Some(Witness::Support { support }),
                    notes,
                }
            } else {
                let singular = min_eigs.iter().filter(|p| p.0 <= tol).count();
                if singular > 0 {
                    notes.push(format!("{singular} of {} node matrices are singular", sd.len()));
                }
                DiagnosticsReport {
                    kernel,
                    test: "support".into(),
                    min_eig: overall,
                    threshold: tol,
                    verdict: Verdict::Inconclusive,
                    witness: None,
                    notes,
                }
            }
        }
    }
}

/// `⟨L_μ φ, φ⟩` for `μ` uniform on ℤ_n and `φ(x) = conj(χ_{r0}(x)) y`.
///
/// The value is `w_{r0} y^† B_{r0} y` when `r0` is a node and zero otherwise.
/// With `y = None` the direction is `[1]` for `m = 1`, else the eigenvector of
/// `B_{r0}` with the smallest eigenvalue (or `e_1` when `r0` is missing).
pub fn missing_character_witness(sd: &SpectralDensity, r0: u64, y: Option<&CVector>) -> Result<f64> {
    let Domain::Cyclic { n } = sd.domain() else {
        return Err(Error::Unsupported("missing-character witness needs a density on Z_n".into()));
    };
    if r0 >= n {
        return Err(Error::InvalidParameter(format!("character {r0} out of range for Z_{n}")));
    }
    let m = sd.dim();
    let y = match y {
        Some(y) if y.len() == m => y.clone(),
        Some(y) => {
            return Err(Error::DimensionMismatch(format!("direction of length {} for m = {m}", y.len())))
        }
        None => default_direction(sd, r0),
    };
    let k = crate::invariant::synth_kernel(sd);
    let points: Vec<Point> = (0..n).map(|x| Point::residue(x, n)).collect::<Result<_>>()?;
    let g = gram(&k, &points)?;
    let mut phi = CVector::zeros(n as usize * m);
    for x in 0..n {
        let c = cyclic_character(r0, x, n).conj();
        phi.rows_mut(x as usize * m, m).copy_from(&(&y * c));
    }
    let q: C64 = (phi.adjoint() * &g.matrix * &phi)[(0, 0)];
    Ok(q.re / (n as f64 * n as f64))
}

fn default_direction(sd: &SpectralDensity, r0: u64) -> CVector {
    let m = sd.dim();
    if m == 1 {
        return CVector::from_element(1, re(1.0));
    }
    if let Nodes::Cyclic(rs) = sd.nodes() {
        if let Some(k) = rs.iter().position(|&r| r == r0) {
            let eig = linalg::hermitian_eigen(&sd.matrices()[k]).expect("validated density matrix");
            let mut v: CVector = eig.vectors.column(m - 1).into_owned();
            linalg::fix_phase(&mut v);
            return v;
        }
    }
    let mut e = CVector::zeros(m);
    e[0] = re(1.0);
    e
}

/// `μ({j}) = (e − 1) e^{−j}` on ℤ₊ = {1, 2, …}.
pub fn counterexample_measure(j: u64) -> f64 {
    (E - 1.0) * (-(j as f64)).exp()
}

/// `f_k(j) = δ_{j,k} + e δ_{j,k+1}`.
pub fn counterexample_fk(k: u64, j: u64) -> f64 {
    if j == k {
        1.0
    } else if j == k + 1 {
        E
    } else {
        0.0
    }
}

/// `⟨f_k, f⟩_{L²(μ)}` for `f(j) = (−1)^j` and `k = 1..=k_max`; each vanishes,
/// so `f` is orthogonal to the span of the `f_k`, which is dense in `C₀(ℤ₊)`.
pub fn c0_counterexample(k_max: u64) -> Vec<f64> {
    let sign = |j: u64| if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    (1..=k_max)
        .map(|k| {
            linalg::sum_compensated(
                (k..=k + 1).map(|j| counterexample_measure(j) * counterexample_fk(k, j) * sign(j)),
            )
        })
        .collect()
}

/// `ℓ²` Gram matrix of `f_1..f_n` restricted to `{1..n+1}`.
pub fn counterexample_gram(n: u64) -> CMatrix {
    let n_us = n as usize;
    CMatrix::from_fn(n_us, n_us, |a, b| {
        let (k, l) = (a as u64 + 1, b as u64 + 1);
        re((1..=n + 1).map(|j| counterexample_fk(k, j) * counterexample_fk(l, j)).sum())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{constant, rank_one, restrict, PointMap, VectorFn};
    use crate::invariant::{sinc_density, synth_kernel};
    use crate::linalg::{real_diag, real_matrix};

    fn pts(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| Point::scalar(x)).collect()
    }

    fn ones(n: usize) -> Vec<CMatrix> {
        vec![real_matrix(&[&[1.0]]); n]
    }

    #[test]
    fn spd_examples() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        assert!(spd_test(&g, &pts(&[0.0, 1.0, 2.0]), 1e-10).unwrap().passed());

        let r = rank_one(VectorFn::affine(vec![vec![0.0]], vec![1.0]).unwrap());
        let rep = spd_test(&r, &pts(&[0.0, 1.0]), 1e-10).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        let Some(Witness::Vector { vector }) = rep.witness else { panic!() };
        let s = 0.5f64.sqrt();
        // phase fixed: largest entry real positive, so (1, −1)/√2 up to order
        assert!((vector[0].norm() - s).abs() < 1e-12 && (vector[1].norm() - s).abs() < 1e-12);
        assert!((vector[0] + vector[1]).norm() < 1e-12);

        let k = synth_kernel(&sinc_density(64).unwrap());
        assert!(spd_test(&k, &pts(&[0.0, 0.3, 0.7]), 1e-10).unwrap().passed());

        assert!(matches!(
            spd_test(&g, &pts(&[0.0, 0.0]), 1e-10),
            Err(Error::DuplicatePoint(_))
        ));
    }

    #[test]
    fn lmu_examples() {
        let mu = DiscreteMeasure::uniform(pts(&[0.0, 1.0])).unwrap();
        let c = constant(real_matrix(&[&[1.0]])).unwrap();
        let s = lmu_spectrum(&c, &mu).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15 && s[1].abs() < 1e-15);
        assert_eq!(lmu_report(&c, &mu, INJECTIVITY_TOL).unwrap().verdict, Verdict::Fail);

        let g = Kernel::gaussian(1.0, 1).unwrap();
        let e = (-0.5f64).exp();
        let s = lmu_spectrum(&g, &mu).unwrap();
        assert!((s[0] - (1.0 + e) / 2.0).abs() < 1e-15);
        assert!((s[1] - (1.0 - e) / 2.0).abs() < 1e-15);
        assert!(lmu_report(&g, &mu, INJECTIVITY_TOL).unwrap().passed());

        let r = rank_one(VectorFn::affine(vec![vec![1.0]], vec![0.5]).unwrap());
        let mu3 = DiscreteMeasure::uniform(pts(&[0.0, 1.0, 2.0])).unwrap();
        let s = lmu_spectrum(&r, &mu3).unwrap();
        assert!(s[0] > 0.1 && s[1].abs() < 1e-14 && s[2].abs() < 1e-14);
    }

    #[test]
    fn restriction_keeps_spectrum() {
        let g = Kernel::gaussian(0.7, 1).unwrap();
        let incl = PointMap::identity(Domain::real(1));
        let r = restrict(&g, &incl).unwrap();
        let mu = DiscreteMeasure::uniform(pts(&[0.0, 0.4, 1.5])).unwrap();
        assert_eq!(lmu_spectrum(&g, &mu).unwrap(), lmu_spectrum(&r, &mu).unwrap());
    }

    #[test]
    fn cyclic_support_verdicts() {
        let full = SpectralDensity::cyclic(4, vec![0, 1, 2, 3], vec![0.25; 4], ones(4)).unwrap();
        assert!(density_support_verdict(&full, 1e-10).passed());

        let gap = SpectralDensity::cyclic(4, vec![0, 1, 3], vec![0.25; 3], ones(3)).unwrap();
        let rep = density_support_verdict(&gap, 1e-10);
        assert_eq!(rep.verdict, Verdict::Fail);
        assert_eq!(
            rep.witness,
            Some(Witness::Character {
                character: 2,
                direction: None
            })
        );

        let singular = SpectralDensity::cyclic(
            2,
            vec![0, 1],
            vec![0.5, 0.5],
            vec![real_diag(&[1.0, 1.0]), real_diag(&[1.0, 0.0])],
        )
        .unwrap();
        let rep = density_support_verdict(&singular, 1e-10);
        assert_eq!(rep.verdict, Verdict::Fail);
        assert!(matches!(rep.witness, Some(Witness::Character { character: 1, .. })));
    }

    #[test]
    fn real_support_verdicts() {
        let rep = density_support_verdict(&sinc_density(16).unwrap(), 1e-10);
        assert_eq!(rep.verdict, Verdict::Fail);
        assert!(matches!(rep.witness, Some(Witness::Support { .. })));

        let g = crate::invariant::gaussian_density(1.0, 1, 4.0, 21).unwrap();
        assert_eq!(density_support_verdict(&g, 1e-10).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn missing_character_examples() {
        let gap = SpectralDensity::cyclic(4, vec![0, 1, 3], vec![0.25; 3], ones(3)).unwrap();
        assert!(missing_character_witness(&gap, 2, None).unwrap().abs() <= 1e-14);

        let w = [0.1, 0.2, 0.3, 0.4];
        let b = [1.0, 2.0, 3.0, 4.0];
        let full = SpectralDensity::cyclic(
            4,
            vec![0, 1, 2, 3],
            w.to_vec(),
            b.iter().map(|v| real_matrix(&[&[*v]])).collect(),
        )
        .unwrap();
        let v = missing_character_witness(&full, 2, None).unwrap();
        assert!((v - w[2] * b[2]).abs() < 1e-14);

        let z2 = SpectralDensity::cyclic(2, vec![0], vec![0.5], ones(1)).unwrap();
        assert!(missing_character_witness(&z2, 1, None).unwrap().abs() <= 1e-14);
    }

    #[test]
    fn counterexample_vanishes() {
        let v = c0_counterexample(30);
        assert_eq!(v.len(), 30);
        assert!(v.iter().all(|x| x.abs() <= 1e-14), "{v:?}");
        let g = counterexample_gram(4);
        assert_eq!(g[(0, 0)], re(1.0 + E * E));
        assert_eq!(g[(0, 1)], re(E));
        assert_eq!(g[(0, 2)], re(0.0));
        let min = linalg::hermitian_eigen(&g).unwrap().min();
        assert!(min >= (E - 1.0).powi(2) - 1e-12);
    }

    #[test]
    fn report_json_shape() {
        let g = Kernel::gaussian(1.0, 1).unwrap();
        let rep = spd_test(&g, &pts(&[0.0, 1.0]), 1e-10).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        for key in ["test", "verdict", "min_eig", "threshold"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["verdict"], "pass");
    }
}
