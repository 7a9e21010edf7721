use super::{Arg, Func, KernelExpr, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Path(String),
    LParen,
    RParen,
    Comma,
    Eq,
    Plus,
    Star,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(x) => format!("number {x}"),
            Tok::Path(p) => format!("file reference @{p}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Star => "`*`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '(' | ')' | ',' | '=' | '+' | '*' => {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '=' => Tok::Eq,
                    '+' => Tok::Plus,
                    _ => Tok::Star,
                };
                i += 1;
                col += 1;
                out.push(Spanned { tok, line: l0, col: c0 });
            }
            '@' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && !chars[j].is_whitespace() && !"(),=+*@".contains(chars[j]) {
                    j += 1;
                }
                if j == start {
                    return Err(syntax(l0, c0, "empty file reference"));
                }
                let path: String = chars[start..j].iter().collect();
                col += j - i;
                i = j;
                out.push(Spanned {
                    tok: Tok::Path(path),
                    line: l0,
                    col: c0,
                });
            }
            c if c.is_ascii_lowercase() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_lowercase() || chars[j].is_ascii_digit() || chars[j] == '_') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_uppercase() {
                    return Err(syntax(line, col + (j - i), "identifiers are lowercase ASCII"));
                }
                let s: String = chars[i..j].iter().collect();
                col += j - i;
                i = j;
                out.push(Spanned {
                    tok: Tok::Ident(s),
                    line: l0,
                    col: c0,
                });
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' => {
                let mut j = i;
                if chars[j] == '-' {
                    j += 1;
                }
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s: String = chars[i..j].iter().collect();
                let x: f64 = s
                    .parse()
                    .map_err(|_| syntax(l0, c0, format!("malformed number `{s}`")))?;
                col += j - i;
                i = j;
                out.push(Spanned {
                    tok: Tok::Number(x),
                    line: l0,
                    col: c0,
                });
            }
            other => return Err(syntax(l0, c0, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> &Spanned {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, what: &str) -> Result<T> {
        let t = self.peek();
        Err(syntax(t.line, t.col, format!("expected {what}, found {}", t.tok.describe())))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            self.fail(what)
        }
    }

    fn expr(&mut self) -> Result<KernelExpr> {
        let mut terms = vec![self.term()?];
        while self.peek().tok == Tok::Plus {
            self.next();
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().expect("one term")
        } else {
            KernelExpr::Sum(terms)
        })
    }

    fn term(&mut self) -> Result<KernelExpr> {
        let mut acc = self.atom()?;
        while self.peek().tok == Tok::Star {
            self.next();
            let rhs = self.atom()?;
            acc = KernelExpr::Product(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<KernelExpr> {
        match self.peek().tok.clone() {
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.next();
                self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                let mut args = Vec::new();
                if self.peek().tok != Tok::RParen {
                    loop {
                        args.push(self.arg()?);
                        if self.peek().tok == Tok::Comma {
                            self.next();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, "`,` or `)`")?;
                Ok(KernelExpr::Func(Func { name, args }))
            }
            _ => self.fail("a kernel expression"),
        }
    }

    fn arg(&mut self) -> Result<Arg> {
        match self.peek().tok.clone() {
            Tok::Path(p) => {
                self.next();
                Ok(Arg {
                    name: None,
                    value: Value::FileRef(p),
                })
            }
            Tok::Ident(name) => {
                self.next();
                self.expect(Tok::Eq, &format!("`=` after argument `{name}`"))?;
                let value = match self.peek().tok.clone() {
                    Tok::Number(x) => {
                        self.next();
                        Value::Number(x)
                    }
                    Tok::Path(p) => {
                        self.next();
                        Value::FileRef(p)
                    }
                    Tok::Ident(_) | Tok::LParen => Value::Expr(self.expr()?),
                    _ => return self.fail("a value"),
                };
                Ok(Arg {
                    name: Some(name),
                    value,
                })
            }
            _ => self.fail("an argument"),
        }
    }
}

/// Parses a kernel expression.
pub fn parse(text: &str) -> Result<KernelExpr> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return p.fail("`+`, `*` or end of input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn func(name: &str, args: Vec<Arg>) -> KernelExpr {
        KernelExpr::Func(Func {
            name: name.into(),
            args,
        })
    }

    fn named(n: &str, value: Value) -> Arg {
        Arg {
            name: Some(n.into()),
            value,
        }
    }

    #[test]
    fn simple_call() {
        assert_eq!(
            parse("gauss(sigma=1.0)").unwrap(),
            func("gauss", vec![named("sigma", Value::Number(1.0))])
        );
    }

    #[test]
    fn product_and_sum_precedence() {
        let e = parse("gauss(sigma=0.5) * const(@B.json)").unwrap();
        let KernelExpr::Product(a, b) = &e else { panic!("{e:?}") };
        assert_eq!(**a, func("gauss", vec![named("sigma", Value::Number(0.5))]));
        assert_eq!(
            **b,
            func(
                "const",
                vec![Arg {
                    name: None,
                    value: Value::FileRef("B.json".into())
                }]
            )
        );

        let e = parse("sinc() + sinc() * laplace()").unwrap();
        let KernelExpr::Sum(ts) = e else { panic!() };
        assert!(matches!(ts[1], KernelExpr::Product(..)));

        let e = parse("sinc() * sinc() * laplace()").unwrap();
        let KernelExpr::Product(l, _) = e else { panic!() };
        assert!(matches!(*l, KernelExpr::Product(..)));
    }

    #[test]
    fn empty_value_is_a_syntax_error() {
        let err = parse("gauss(sigma=)").unwrap_err();
        assert_eq!(
            err,
            Error::Syntax {
                line: 1,
                col: 13,
                message: "expected a value, found `)`".into()
            }
        );
    }

    #[test]
    fn errors_carry_positions() {
        let Error::Syntax { line, col, .. } = parse("gauss(sigma=1)\n  + ").unwrap_err() else { panic!() };
        assert_eq!((line, col), (2, 5));
        let Error::Syntax { line, col, .. } = parse("sinc() sinc()").unwrap_err() else { panic!() };
        assert_eq!((line, col), (1, 8));
        assert!(parse("Gauss(sigma=1)").is_err());
        assert!(parse("gauss(sigma=1").is_err());
        assert!(parse("gauss(@)").is_err());
        assert!(parse("").is_err());
        assert!(parse("gauss(sigma=1.2.3)").is_err());
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(
            parse(" kb( scalar = gauss( sigma = 1 ) ,\n b = @I2.json ) ").unwrap(),
            parse("kb(scalar=gauss(sigma=1),b=@I2.json)").unwrap()
        );
    }
}
