use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{Arg, Func, KernelExpr, Loader, Value};
use crate::algebra::{self, PointMap, VectorFn};
use crate::error::{Error, Result};
use crate::invariant::{synth_kernel, SpectralDensity};
use crate::kernel::Kernel;
use crate::linalg::{CMatrix, MatrixFile};
use crate::point::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelType {
    pub m: usize,
    pub domain: Domain,
}

fn read_json<T: DeserializeOwned>(loader: &dyn Loader, path: &str) -> Result<T> {
    let text = loader.read(path)?;
    serde_json::from_str(&text).map_err(|e| Error::File {
        path: path.into(),
        message: e.to_string(),
    })
}

fn load_matrix(loader: &dyn Loader, path: &str) -> Result<CMatrix> {
    read_json::<MatrixFile>(loader, path)?.to_matrix().map_err(|e| Error::File {
        path: path.into(),
        message: e.to_string(),
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MapsFile {
    List(Vec<PointMap>),
    Wrapped { maps: Vec<PointMap> },
}

fn load_maps(loader: &dyn Loader, path: &str) -> Result<Vec<PointMap>> {
    let maps = match read_json::<MapsFile>(loader, path)? {
        MapsFile::List(v) | MapsFile::Wrapped { maps: v } => v,
    };
    for m in &maps {
        m.validate()?;
    }
    Ok(maps)
}

/// Argument list of one call, checked against the function's signature.
struct Args<'a> {
    func: &'a Func,
}

impl<'a> Args<'a> {
    fn new(func: &'a Func, named: &[&str], positional_file: bool) -> Result<Self> {
        let mut seen: Vec<&str> = Vec::new();
        let mut positional = 0;
        for Arg { name, value } in &func.args {
            match name {
                None => {
                    positional += 1;
                    if !positional_file || positional > 1 {
                        return Err(bad(func, "unexpected positional argument"));
                    }
                    debug_assert!(matches!(value, Value::FileRef(_)));
                }
                Some(n) => {
                    if !named.contains(&n.as_str()) {
                        return Err(bad(func, &format!("unknown argument `{n}`")));
                    }
                    if seen.contains(&n.as_str()) {
                        return Err(bad(func, &format!("argument `{n}` given twice")));
                    }
                    seen.push(n);
                }
            }
        }
        Ok(Self { func })
    }

    fn get(&self, name: &str) -> Option<&'a Value> {
        self.func
            .args
            .iter()
            .find(|a| a.name.as_deref() == Some(name))
            .map(|a| &a.value)
    }

    fn number(&self, name: &str) -> Result<Option<f64>> {
        match self.get(name) {
            None => Ok(None),
            Some(Value::Number(x)) => Ok(Some(*x)),
            Some(_) => Err(bad(self.func, &format!("`{name}` must be a number"))),
        }
    }

    fn required_number(&self, name: &str) -> Result<f64> {
        self.number(name)?
            .ok_or_else(|| bad(self.func, &format!("missing argument `{name}`")))
    }

    fn count(&self, name: &str) -> Result<Option<usize>> {
        match self.number(name)? {
            None => Ok(None),
            Some(x) if x >= 1.0 && x.fract() == 0.0 && x < 1e9 => Ok(Some(x as usize)),
            Some(x) => Err(bad(self.func, &format!("`{name}` must be a positive integer, got {x}"))),
        }
    }

    fn expr(&self, name: &str) -> Result<&'a KernelExpr> {
        match self.get(name) {
            Some(Value::Expr(e)) => Ok(e),
            Some(_) => Err(bad(self.func, &format!("`{name}` must be a kernel expression"))),
            None => Err(bad(self.func, &format!("missing argument `{name}`"))),
        }
    }

    fn file(&self, name: &str) -> Result<&'a str> {
        match self.get(name) {
            Some(Value::FileRef(p)) => Ok(p),
            Some(_) => Err(bad(self.func, &format!("`{name}` must be a file reference"))),
            None => Err(bad(self.func, &format!("missing argument `{name}`"))),
        }
    }

    fn positional(&self) -> Result<&'a str> {
        self.func
            .args
            .iter()
            .find_map(|a| match (&a.name, &a.value) {
                (None, Value::FileRef(p)) => Some(p.as_str()),
                _ => None,
            })
            .ok_or_else(|| bad(self.func, "missing file reference argument"))
    }
}

fn bad(func: &Func, msg: &str) -> Error {
    Error::BadArgument(format!("{}(): {msg}", func.name))
}

fn unify(a: Domain, b: Domain) -> Result<Domain> {
    a.unify(b).ok_or_else(|| Error::MixedDomains {
        left: a.to_string(),
        right: b.to_string(),
    })
}

fn scalar_arg(func: &Func, t: KernelType) -> Result<()> {
    if t.m == 1 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{}() needs a scalar kernel, got m = {}",
            func.name, t.m
        )))
    }
}

/// Output dimension and domain of an expression; reads referenced files.
pub fn typecheck(e: &KernelExpr, loader: &dyn Loader) -> Result<KernelType> {
    match e {
        KernelExpr::Sum(terms) => {
            let mut acc = typecheck(&terms[0], loader)?;
            for t in &terms[1..] {
                let ty = typecheck(t, loader)?;
                if ty.m != acc.m {
                    return Err(Error::DimensionMismatch(format!(
                        "summands have m = {} and m = {}",
                        acc.m, ty.m
                    )));
                }
                acc.domain = unify(acc.domain, ty.domain)?;
            }
            Ok(acc)
        }
        KernelExpr::Product(a, b) => {
            let (ta, tb) = (typecheck(a, loader)?, typecheck(b, loader)?);
            if ta.m > 1 && tb.m > 1 {
                return Err(Error::OperatorTimesOperator {
                    left: ta.m,
                    right: tb.m,
                });
            }
            Ok(KernelType {
                m: ta.m.max(tb.m),
                domain: unify(ta.domain, tb.domain)?,
            })
        }
        KernelExpr::Func(f) => typecheck_func(f, loader),
    }
}

fn typecheck_func(f: &Func, loader: &dyn Loader) -> Result<KernelType> {
    let scalar_on = |domain| KernelType { m: 1, domain };
    match f.name.as_str() {
        "gauss" => {
            let a = Args::new(f, &["sigma", "d"], false)?;
            let sigma = a.required_number("sigma")?;
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(bad(f, &format!("sigma must be positive, got {sigma}")));
            }
            Ok(scalar_on(Domain::real(a.count("d")?.unwrap_or(1))))
        }
        "laplace" | "sinc" => {
            Args::new(f, &[], false)?;
            Ok(scalar_on(Domain::real(1)))
        }
        "linear" => {
            let a = Args::new(f, &["d"], false)?;
            Ok(scalar_on(Domain::real(a.count("d")?.unwrap_or(1))))
        }
        "delta" => {
            let a = Args::new(f, &["n"], false)?;
            Ok(scalar_on(match a.count("n")? {
                Some(n) => Domain::cyclic(n as u64),
                None => Domain::Naturals,
            }))
        }
        "const" => {
            let a = Args::new(f, &[], true)?;
            let b = load_matrix(loader, a.positional()?)?;
            if !b.is_square() || b.nrows() == 0 {
                return Err(Error::DimensionMismatch(format!("const() needs a square matrix, got {:?}", b.shape())));
            }
            Ok(KernelType {
                m: b.nrows(),
                domain: Domain::Any,
            })
        }
        "rank1" => {
            let a = Args::new(f, &[], true)?;
            let v: VectorFn = read_json(loader, a.positional()?)?;
            v.validate()?;
            Ok(KernelType {
                m: v.dim(),
                domain: v.domain(),
            })
        }
        "kb" => {
            let a = Args::new(f, &["scalar", "b"], false)?;
            let s = typecheck(a.expr("scalar")?, loader)?;
            scalar_arg(f, s)?;
            let b = load_matrix(loader, a.file("b")?)?;
            if !b.is_square() || b.nrows() == 0 {
                return Err(Error::DimensionMismatch(format!("kb() needs a square B, got {:?}", b.shape())));
            }
            Ok(KernelType {
                m: b.nrows(),
                domain: s.domain,
            })
        }
        "psi" => {
            let a = Args::new(f, &["scalar", "maps"], false)?;
            let s = typecheck(a.expr("scalar")?, loader)?;
            scalar_arg(f, s)?;
            let maps = load_maps(loader, a.file("maps")?)?;
            let Some(first) = maps.first() else {
                return Err(bad(f, "maps file is empty"));
            };
            for m in &maps {
                unify(first.domain(), m.domain())?;
                unify(s.domain, m.codomain())?;
            }
            Ok(KernelType {
                m: maps.len(),
                domain: first.domain(),
            })
        }
        "compose" => {
            let a = Args::new(f, &["expr", "map"], false)?;
            let k = typecheck(a.expr("expr")?, loader)?;
            let map: PointMap = read_json(loader, a.file("map")?)?;
            map.validate()?;
            unify(k.domain, map.codomain())?;
            Ok(KernelType {
                m: k.m,
                domain: map.domain(),
            })
        }
        "conj" => {
            let a = Args::new(f, &["expr", "w"], false)?;
            let k = typecheck(a.expr("expr")?, loader)?;
            let w = load_matrix(loader, a.file("w")?)?;
            if w.ncols() != k.m || w.nrows() == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "conj() needs w with {} columns, got {}x{}",
                    k.m,
                    w.nrows(),
                    w.ncols()
                )));
            }
            Ok(KernelType {
                m: w.nrows(),
                domain: k.domain,
            })
        }
        "spectral" => {
            let a = Args::new(f, &[], true)?;
            let sd: SpectralDensity = read_json(loader, a.positional()?)?;
            Ok(KernelType {
                m: sd.dim(),
                domain: sd.domain(),
            })
        }
        other => Err(Error::UnknownFunction(other.into())),
    }
}

/// Constructs the kernel. Call [`typecheck`] first for precise diagnostics;
/// the algebra constructors re-validate everything regardless.
pub fn build(e: &KernelExpr, loader: &dyn Loader) -> Result<Kernel> {
    match e {
        KernelExpr::Sum(terms) => {
            let ks = terms.iter().map(|t| build(t, loader)).collect::<Result<Vec<_>>>()?;
            algebra::sum_kernels(&ks)
        }
        KernelExpr::Product(a, b) => {
            let (ka, kb) = (build(a, loader)?, build(b, loader)?);
            if ka.is_scalar() {
                algebra::schur_product(&ka, &kb)
            } else {
                algebra::schur_product(&kb, &ka)
            }
        }
        KernelExpr::Func(f) => build_func(f, loader),
    }
}

fn build_func(f: &Func, loader: &dyn Loader) -> Result<Kernel> {
    match f.name.as_str() {
        "gauss" => {
            let a = Args::new(f, &["sigma", "d"], false)?;
            Kernel::gaussian(a.required_number("sigma")?, a.count("d")?.unwrap_or(1))
        }
        "laplace" => Args::new(f, &[], false).map(|_| Kernel::laplace()),
        "sinc" => Args::new(f, &[], false).map(|_| Kernel::sinc()),
        "linear" => {
            let a = Args::new(f, &["d"], false)?;
            Ok(Kernel::linear(a.count("d")?.unwrap_or(1)))
        }
        "delta" => {
            let a = Args::new(f, &["n"], false)?;
            Kernel::delta(match a.count("n")? {
                Some(n) => Domain::cyclic(n as u64),
                None => Domain::Naturals,
            })
        }
        "const" => {
            let a = Args::new(f, &[], true)?;
            algebra::constant(load_matrix(loader, a.positional()?)?)
        }
        "rank1" => {
            let a = Args::new(f, &[], true)?;
            let v: VectorFn = read_json(loader, a.positional()?)?;
            v.validate()?;
            Ok(algebra::rank_one(v))
        }
        "kb" => {
            let a = Args::new(f, &["scalar", "b"], false)?;
            let s = build(a.expr("scalar")?, loader)?;
            algebra::kappa_b(&s, &load_matrix(loader, a.file("b")?)?)
        }
        "psi" => {
            let a = Args::new(f, &["scalar", "maps"], false)?;
            let s = build(a.expr("scalar")?, loader)?;
            algebra::psi_matrix(&s, &load_maps(loader, a.file("maps")?)?)
        }
        "compose" => {
            let a = Args::new(f, &["expr", "map"], false)?;
            let k = build(a.expr("expr")?, loader)?;
            let map: PointMap = read_json(loader, a.file("map")?)?;
            algebra::compose(&k, &map)
        }
        "conj" => {
            let a = Args::new(f, &["expr", "w"], false)?;
            let k = build(a.expr("expr")?, loader)?;
            algebra::conjugate(&k, &load_matrix(loader, a.file("w")?)?)
        }
        "spectral" => {
            let a = Args::new(f, &[], true)?;
            let sd: SpectralDensity = read_json(loader, a.positional()?)?;
            Ok(synth_kernel(&sd))
        }
        other => Err(Error::UnknownFunction(other.into())),
    }
}
