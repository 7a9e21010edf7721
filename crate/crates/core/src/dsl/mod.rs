//! A small expression language for kernels.
//!
//! ```text
//! expr  := term { "+" term }
//! term  := atom { "*" atom }
//! atom  := func | "(" expr ")"
//! func  := IDENT "(" [ arg { "," arg } ] ")"
//! arg   := IDENT "=" value | "@" path
//! value := NUMBER | "@" path | expr
//! ```
//!
//! Built-ins: `gauss(sigma[, d])`, `laplace()`, `sinc()`, `linear([d])`,
//! `delta([n])`, `const(@matrix)`, `rank1(@vectorfn)`,
//! `kb(scalar=…, b=@matrix)`, `psi(scalar=…, maps=@maps)`,
//! `compose(expr=…, map=@map)`, `conj(expr=…, w=@matrix)`,
//! `spectral(@density)`. File references resolve through a [`Loader`].

mod check;
mod loader;
mod parse;

use std::fmt;

pub use check::{build, typecheck, KernelType};
pub use loader::{FsLoader, Loader, MemoryLoader};
pub use parse::parse;

use crate::error::{Error, Result};
use crate::learn::{ModelFile, RLSModel};

#[derive(Debug, Clone, PartialEq)]
pub enum KernelExpr {
    Sum(Vec<KernelExpr>),
    /// Left-associative binary product.
    Product(Box<KernelExpr>, Box<KernelExpr>),
    Func(Func),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Func {
    pub name: String,
    pub args: Vec<Arg>,
}

/// `name = value`, or a positional file reference when `name` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub name: Option<String>,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    FileRef(String),
    Expr(KernelExpr),
}

impl fmt::Display for KernelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelExpr::Sum(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    match t {
                        KernelExpr::Sum(_) => write!(f, "({t})")?,
                        _ => write!(f, "{t}")?,
                    }
                }
                Ok(())
            }
            KernelExpr::Product(a, b) => {
                match **a {
                    KernelExpr::Sum(_) => write!(f, "({a})")?,
                    _ => write!(f, "{a}")?,
                }
                f.write_str(" * ")?;
                match **b {
                    KernelExpr::Func(_) => write!(f, "{b}"),
                    _ => write!(f, "({b})"),
                }
            }
            KernelExpr::Func(func) => write!(f, "{func}"),
        }
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            if let Some(n) = &a.name {
                write!(f, "{n}=")?;
            }
            match &a.value {
                Value::Number(x) => write!(f, "{x:?}")?,
                Value::FileRef(p) => write!(f, "@{p}")?,
                Value::Expr(e) => write!(f, "{e}")?,
            }
        }
        f.write_str(")")
    }
}

/// Parses, type checks and builds an expression.
pub fn compile(text: &str, loader: &dyn Loader) -> Result<crate::kernel::Kernel> {
    let e = parse(text)?;
    typecheck(&e, loader)?;
    build(&e, loader)
}

/// Reads a model file, rebuilding its kernel from the stored expression.
pub fn load_model(json: &str, loader: &dyn Loader) -> Result<RLSModel> {
    let file: ModelFile = serde_json::from_str(json).map_err(|e| Error::File {
        path: "model".into(),
        message: e.to_string(),
    })?;
    let kernel = match &file.base_dir {
        Some(dir) => compile(&file.kernel, &FsLoader::new(dir)),
        None => compile(&file.kernel, loader),
    }?;
    RLSModel::from_file(file, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printing_round_trips() {
        for s in [
            "gauss(sigma=1.0)",
            "gauss(sigma=0.5) * const(@B.json)",
            "gauss(sigma=1) + sinc() + laplace()",
            "(gauss(sigma=1) + sinc()) * const(@B.json)",
            "gauss(sigma=1) * (sinc() * laplace())",
            "(gauss(sigma=1) + sinc()) + laplace()",
            "kb(scalar=gauss(sigma=2, d=3), b=@dir/I2.json)",
            "conj(expr=kb(scalar=sinc(), b=@B.json) + const(@C.json), w=@W.json)",
            "spectral(@gauss_density.json)",
            "gauss(sigma=1e-3)",
        ] {
            let e = parse(s).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{s} -> {printed}");
            assert_eq!(parse(&printed).unwrap().to_string(), printed);
        }
    }
}
