//! CSV inputs. Rows may be separated by commas, `#` starts a comment and a
//! non-numeric first row is taken as a header.

use std::path::Path;

use num_complex::Complex64;
use okernel::learn::TrainingSet;
use okernel::linalg::CVector;
use okernel::spectral::DiscreteMeasure;
use okernel::{Domain, Point};

use crate::CliError;

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Numeric rows of a CSV file.
pub fn rows(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    parse_rows(&read_file(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => out.push(row),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(format!("row {}: non-numeric field in {:?}", i + 1, rec.iter().collect::<Vec<_>>())),
        }
    }
    if out.is_empty() {
        return Err("no data rows".into());
    }
    Ok(out)
}

fn integer(x: f64) -> Result<u64, CliError> {
    if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(CliError::Input(format!("expected a nonnegative integer, found {x}")))
    }
}

/// Interprets coordinates as a point of `domain`.
pub fn point(domain: Domain, coords: &[f64]) -> Result<Point, CliError> {
    let p = match domain {
        Domain::Real { dim } if coords.len() != dim => {
            return Err(CliError::Input(format!(
                "expected {dim} coordinates, found {}",
                coords.len()
            )))
        }
        Domain::Real { .. } | Domain::Any => Point::real(coords.to_vec())?,
        Domain::Naturals | Domain::Cyclic { .. } if coords.len() != 1 => {
            return Err(CliError::Input(format!(
                "points of {domain} have one coordinate, found {}",
                coords.len()
            )))
        }
        Domain::Naturals => Point::Natural(integer(coords[0])?),
        Domain::Cyclic { n } => Point::residue(integer(coords[0])?, n)?,
    };
    domain.check(&p)?;
    Ok(p)
}

/// Comma-separated coordinates from a flag value.
pub fn point_arg(domain: Domain, text: &str) -> Result<Point, CliError> {
    let coords = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Input(format!("point `{text}`: {e}")))?;
    point(domain, &coords)
}

pub fn points(domain: Domain, path: &Path) -> Result<Vec<Point>, CliError> {
    rows(path)?.iter().map(|r| point(domain, r)).collect()
}

/// Number of coordinates a point of `domain` takes in a row.
fn width(domain: Domain, row: &[f64], trailing: usize) -> Result<usize, CliError> {
    match domain {
        Domain::Real { dim } => Ok(dim),
        Domain::Naturals | Domain::Cyclic { .. } => Ok(1),
        Domain::Any if row.len() > trailing => Ok(row.len() - trailing),
        Domain::Any => Err(CliError::Input("row too short".into())),
    }
}

/// Rows `point…, weight`.
pub fn measure(domain: Domain, path: &Path) -> Result<DiscreteMeasure, CliError> {
    let mut pts = Vec::new();
    let mut weights = Vec::new();
    for r in rows(path)? {
        let w = width(domain, &r, 1)?;
        if r.len() != w + 1 {
            return Err(CliError::Input(format!("measure row {r:?}: expected {w} coordinates and a weight")));
        }
        pts.push(point(domain, &r[..w])?);
        weights.push(r[w]);
    }
    Ok(DiscreteMeasure::new(pts, weights)?)
}

/// Rows `input…, output…`; outputs are `m` real values or `m` `re, im` pairs.
pub fn training(domain: Domain, m: usize, path: &Path) -> Result<TrainingSet, CliError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in rows(path)? {
        let w = match domain {
            Domain::Any => r.len().checked_sub(m).ok_or_else(|| CliError::Input("row too short".into()))?,
            _ => width(domain, &r, m)?,
        };
        let rest = &r[w.min(r.len())..];
        let y = if rest.len() == m {
            CVector::from_iterator(m, rest.iter().map(|&v| Complex64::new(v, 0.0)))
        } else if rest.len() == 2 * m {
            CVector::from_fn(m, |i, _| Complex64::new(rest[2 * i], rest[2 * i + 1]))
        } else {
            return Err(CliError::Input(format!(
                "data row {r:?}: expected {w} inputs then {m} outputs (or {} re/im columns)",
                2 * m
            )));
        };
        xs.push(point(domain, &r[..w])?);
        ys.push(y);
    }
    Ok(TrainingSet::new(xs, ys)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_comments() {
        let rows = parse_rows("x,y\n# note\n1, 2\n3,4\n").unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(parse_rows("1,2\nx,y\n").is_err());
        assert!(parse_rows("a\n").is_err());
    }

    #[test]
    fn points_by_domain() {
        assert_eq!(point(Domain::cyclic(5), &[3.0]).unwrap(), Point::residue(3, 5).unwrap());
        assert!(point(Domain::cyclic(5), &[5.0]).is_err());
        assert!(point(Domain::cyclic(5), &[1.5]).is_err());
        assert!(point(Domain::real(2), &[1.0]).is_err());
        assert_eq!(point_arg(Domain::real(2), "1, -2").unwrap(), Point::Real(vec![1.0, -2.0]));
    }
}
