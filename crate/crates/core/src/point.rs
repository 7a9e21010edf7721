use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The input space of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Domain {
    /// ℝ^d.
    Real { dim: usize },
    /// ℤ₊, the nonnegative integers.
    Naturals,
    /// ℤ_n, the cyclic group of order n.
    Cyclic { n: u64 },
    /// Accepts points of any domain (constant kernels).
    Any,
}

impl Domain {
    pub fn real(dim: usize) -> Self {
        Domain::Real { dim }
    }

    pub fn cyclic(n: u64) -> Self {
        Domain::Cyclic { n }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match (self, p) {
            (Domain::Any, _) => true,
            (Domain::Real { dim }, Point::Real(x)) => x.len() == *dim,
            (Domain::Naturals, Point::Natural(_)) => true,
            (Domain::Cyclic { n }, Point::Residue { value, modulus }) => modulus == n && value < n,
            _ => false,
        }
    }

    pub fn check(&self, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::domain(self, p.domain()))
        }
    }

    /// Common domain of two kernels, `None` if incompatible.
    pub fn unify(self, other: Domain) -> Option<Domain> {
        match (self, other) {
            (Domain::Any, d) | (d, Domain::Any) => Some(d),
            (a, b) if a == b => Some(a),
            _ => None,
        }
    }

    /// Whether the domain is a group (or semigroup for ℤ₊) acting on itself by shifts.
    pub fn supports_shifts(&self) -> bool {
        !matches!(self, Domain::Any)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Real { dim } => write!(f, "R^{dim}"),
            Domain::Naturals => write!(f, "Z+"),
            Domain::Cyclic { n } => write!(f, "Z_{n}"),
            Domain::Any => write!(f, "*"),
        }
    }
}

/// A point of ℝ^d, ℤ₊ or ℤ_n.
///
/// Serialized untagged: a JSON array is a real vector, a bare integer is a
/// natural number, `{"value": r, "modulus": n}` is a residue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Real(Vec<f64>),
    Natural(u64),
    Residue { value: u64, modulus: u64 },
}

impl Point {
    pub fn scalar(x: f64) -> Self {
        Point::Real(vec![x])
    }

    pub fn real(x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint(format!("{x:?} has non-finite entries")));
        }
        Ok(Point::Real(x))
    }

    pub fn residue(value: u64, modulus: u64) -> Result<Self> {
        if modulus == 0 || value >= modulus {
            return Err(Error::InvalidPoint(format!(
                "residue {value} out of range for Z_{modulus}"
            )));
        }
        Ok(Point::Residue { value, modulus })
    }

    pub fn domain(&self) -> Domain {
        match self {
            Point::Real(x) => Domain::Real { dim: x.len() },
            Point::Natural(_) => Domain::Naturals,
            Point::Residue { modulus, .. } => Domain::Cyclic { n: *modulus },
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Point::Real(x) => Some(x),
            _ => None,
        }
    }

    /// Group shift `self + z`.
    pub fn shift(&self, z: &Point) -> Result<Point> {
        match (self, z) {
            (Point::Real(x), Point::Real(y)) if x.len() == y.len() => {
                Ok(Point::Real(x.iter().zip(y).map(|(a, b)| a + b).collect()))
            }
            (Point::Natural(a), Point::Natural(b)) => Ok(Point::Natural(a + b)),
            (
                Point::Residue { value: a, modulus: n },
                Point::Residue { value: b, modulus: m },
            ) if n == m => Ok(Point::Residue {
                value: (a + b) % n,
                modulus: *n,
            }),
            _ => Err(Error::domain(self.domain(), z.domain())),
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Real(x) if x.len() == 1 => write!(f, "{}", x[0]),
            Point::Real(x) => {
                write!(f, "(")?;
                for (i, v) in x.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            Point::Natural(k) => write!(f, "{k}"),
            Point::Residue { value, modulus } => write!(f, "{value} mod {modulus}"),
        }
    }
}

/// Rejects lists containing a repeated point.
pub fn ensure_distinct(points: &[Point]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if points[..i].contains(p) {
            return Err(Error::DuplicatePoint(p.to_string()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residue_range_checked() {
        assert!(Point::residue(3, 4).is_ok());
        assert!(Point::residue(4, 4).is_err());
        assert!(Point::real(vec![f64::NAN]).is_err());
    }

    #[test]
    fn shift_wraps_on_cyclic_groups() {
        let a = Point::residue(3, 4).unwrap();
        let b = Point::residue(2, 4).unwrap();
        assert_eq!(a.shift(&b).unwrap(), Point::residue(1, 4).unwrap());
        assert!(a.shift(&Point::scalar(1.0)).is_err());
    }

    #[test]
    fn untagged_json_forms() {
        let pts: Vec<Point> =
            serde_json::from_str(r#"[[0.5, 1.0], 7, {"value": 2, "modulus": 5}]"#).unwrap();
        assert_eq!(pts[0], Point::Real(vec![0.5, 1.0]));
        assert_eq!(pts[1], Point::Natural(7));
        assert_eq!(pts[2], Point::residue(2, 5).unwrap());
    }

    #[test]
    fn any_unifies() {
        assert_eq!(Domain::Any.unify(Domain::real(2)), Some(Domain::real(2)));
        assert_eq!(Domain::real(1).unify(Domain::Naturals), None);
    }

    #[test]
    fn duplicates_detected() {
        let pts = vec![Point::scalar(0.0), Point::scalar(1.0), Point::scalar(0.0)];
        assert!(matches!(ensure_distinct(&pts), Err(Error::DuplicatePoint(_))));
    }
}
