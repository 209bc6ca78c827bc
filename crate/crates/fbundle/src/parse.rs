//! The polynomial/rational-function literal grammar and canonical printers.
//!
//! Grammar: integers, symbols `[A-Za-z][A-Za-z0-9_]*`, operators `+ - * / ^`,
//! parentheses; whitespace insignificant; `/` only between a polynomial (or
//! series) and a nonzero one. Canonical output round-trips byte-identically.

use std::sync::Arc;

use num::{BigInt, BigRational, One, Signed};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::scalar::Scalar;
use crate::series::{Series, TruncOrder, VarSet};
use crate::symbols::{ParamSpec, SymbolSet};

// ---------------------------------------------------------------------------
// Lexer / AST
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

fn lex(input: &str) -> Result<Lexer> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = input.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (l, co) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                chars.next();
                col += 1;
                toks.push((
                    match c {
                        '+' => Tok::Plus,
                        '-' => Tok::Minus,
                        '*' => Tok::Star,
                        '/' => Tok::Slash,
                        '^' => Tok::Caret,
                        '(' => Tok::LParen,
                        _ => Tok::RParen,
                    },
                    l,
                    co,
                ));
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        s.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Int(s.parse().unwrap()), l, co));
            }
            c if c.is_ascii_alphabetic() => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Ident(s), l, co));
            }
            other => {
                return Err(Error::Parse {
                    line,
                    col,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(Lexer { toks, pos: 0 })
}

#[derive(Debug, Clone)]
enum Ast {
    Int(BigInt),
    Ident(String, usize, usize),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>, usize, usize),
    Pow(Box<Ast>, i64, usize, usize),
    Neg(Box<Ast>),
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn loc(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|(_, l, c)| (*l, *c))
            .unwrap_or((1, 1))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.loc();
        Error::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }
}

fn parse_expr(lx: &mut Lexer) -> Result<Ast> {
    let mut lhs = parse_term(lx)?;
    loop {
        match lx.peek() {
            Some(Tok::Plus) => {
                lx.next();
                let rhs = parse_term(lx)?;
                lhs = Ast::Add(Box::new(lhs), Box::new(rhs));
            }
            Some(Tok::Minus) => {
                lx.next();
                let rhs = parse_term(lx)?;
                lhs = Ast::Sub(Box::new(lhs), Box::new(rhs));
            }
            _ => return Ok(lhs),
        }
    }
}

fn parse_term(lx: &mut Lexer) -> Result<Ast> {
    let mut lhs = parse_unary(lx)?;
    loop {
        match lx.peek() {
            Some(Tok::Star) => {
                lx.next();
                let rhs = parse_unary(lx)?;
                lhs = Ast::Mul(Box::new(lhs), Box::new(rhs));
            }
            Some(Tok::Slash) => {
                let (l, c) = lx.loc();
                lx.next();
                let rhs = parse_unary(lx)?;
                lhs = Ast::Div(Box::new(lhs), Box::new(rhs), l, c);
            }
            _ => return Ok(lhs),
        }
    }
}

fn parse_unary(lx: &mut Lexer) -> Result<Ast> {
    match lx.peek() {
        Some(Tok::Minus) => {
            lx.next();
            Ok(Ast::Neg(Box::new(parse_unary(lx)?)))
        }
        Some(Tok::Plus) => {
            lx.next();
            parse_unary(lx)
        }
        _ => parse_power(lx),
    }
}

fn parse_power(lx: &mut Lexer) -> Result<Ast> {
    let base = parse_atom(lx)?;
    if let Some(Tok::Caret) = lx.peek() {
        let (l, c) = lx.loc();
        lx.next();
        // Exponent: integer, optionally negated or parenthesized.
        let mut neg = false;
        let mut parens = false;
        if let Some(Tok::LParen) = lx.peek() {
            lx.next();
            parens = true;
        }
        if let Some(Tok::Minus) = lx.peek() {
            lx.next();
            neg = true;
        }
        let n = match lx.next() {
            Some(Tok::Int(n)) => n,
            _ => return Err(lx.err("expected integer exponent after `^`")),
        };
        if parens {
            match lx.next() {
                Some(Tok::RParen) => {}
                _ => return Err(lx.err("expected `)` after exponent")),
            }
        }
        let e: i64 = n
            .to_string()
            .parse()
            .map_err(|_| lx.err("exponent too large"))?;
        let e = if neg { -e } else { e };
        return Ok(Ast::Pow(Box::new(base), e, l, c));
    }
    Ok(base)
}

fn parse_atom(lx: &mut Lexer) -> Result<Ast> {
    let (l, c) = lx.loc();
    match lx.next() {
        Some(Tok::Int(n)) => Ok(Ast::Int(n)),
        Some(Tok::Ident(s)) => Ok(Ast::Ident(s, l, c)),
        Some(Tok::LParen) => {
            let e = parse_expr(lx)?;
            match lx.next() {
                Some(Tok::RParen) => Ok(e),
                _ => Err(lx.err("expected `)`")),
            }
        }
        other => Err(lx.err(format!("unexpected token {other:?}"))),
    }
}

fn parse_input(input: &str) -> Result<Ast> {
    let mut lx = lex(input)?;
    let ast = parse_expr(&mut lx)?;
    if lx.pos != lx.toks.len() {
        return Err(lx.err("trailing input"));
    }
    Ok(ast)
}

// ---------------------------------------------------------------------------
// Lowering
// ---------------------------------------------------------------------------

/// Parse a parameter-only expression into a `Scalar`.
pub fn parse_scalar(input: &str, spec: &ParamSpec) -> Result<Scalar> {
    let ast = parse_input(input)?;
    lower_scalar(&ast, spec.symbols())
}

fn lower_scalar(ast: &Ast, syms: &Arc<SymbolSet>) -> Result<Scalar> {
    match ast {
        Ast::Int(n) => Ok(Scalar::from_rat(
            syms,
            BigRational::from_integer(n.clone()),
        )),
        Ast::Ident(name, l, c) => match syms.index_of(name) {
            Some(i) => Ok(Scalar::symbol(syms, i)),
            None => Err(Error::Parse {
                line: *l,
                col: *c,
                msg: format!("unknown parameter `{name}`"),
            }),
        },
        Ast::Add(a, b) => Ok(lower_scalar(a, syms)?.add(&lower_scalar(b, syms)?)),
        Ast::Sub(a, b) => Ok(lower_scalar(a, syms)?.sub(&lower_scalar(b, syms)?)),
        Ast::Mul(a, b) => Ok(lower_scalar(a, syms)?.mul(&lower_scalar(b, syms)?)),
        Ast::Div(a, b, l, c) => lower_scalar(a, syms)?
            .div(&lower_scalar(b, syms)?)
            .map_err(|_| Error::Parse {
                line: *l,
                col: *c,
                msg: "division by zero".into(),
            }),
        Ast::Pow(a, e, l, c) => {
            let base = lower_scalar(a, syms)?;
            if *e >= 0 {
                Ok(base.pow(*e as u32))
            } else {
                base.pow((-e) as u32).inv().map_err(|_| Error::Parse {
                    line: *l,
                    col: *c,
                    msg: "negative power of zero".into(),
                })
            }
        }
        Ast::Neg(a) => Ok(lower_scalar(a, syms)?.neg()),
    }
}

/// Parse a series expression over `vars` ∪ {u} with parameter coefficients.
pub fn parse_series(
    input: &str,
    spec: &ParamSpec,
    vars: &Arc<VarSet>,
    order: TruncOrder,
) -> Result<Series> {
    let ast = parse_input(input)?;
    lower_series(&ast, spec, vars, order)
}

fn lower_series(
    ast: &Ast,
    spec: &ParamSpec,
    vars: &Arc<VarSet>,
    order: TruncOrder,
) -> Result<Series> {
    let syms = spec.symbols();
    match ast {
        Ast::Int(n) => Ok(Series::constant(
            vars,
            order,
            Scalar::from_rat(syms, BigRational::from_integer(n.clone())),
        )),
        Ast::Ident(name, l, c) => {
            if name == "u" {
                return Ok(Series::u_power(vars, order, 1, syms));
            }
            if let Some(i) = vars.index_of(name) {
                return Ok(Series::var(vars, order, i, syms));
            }
            if let Some(i) = syms.index_of(name) {
                return Ok(Series::constant(vars, order, Scalar::symbol(syms, i)));
            }
            Err(Error::Parse {
                line: *l,
                col: *c,
                msg: format!("unknown symbol `{name}`"),
            })
        }
        Ast::Add(a, b) => Ok(lower_series(a, spec, vars, order)?
            .add(&lower_series(b, spec, vars, order)?)),
        Ast::Sub(a, b) => Ok(lower_series(a, spec, vars, order)?
            .sub(&lower_series(b, spec, vars, order)?)),
        Ast::Mul(a, b) => lower_series(a, spec, vars, order)?
            .mul(&lower_series(b, spec, vars, order)?),
        Ast::Div(a, b, l, c) => {
            let num = lower_series(a, spec, vars, order)?;
            let den = lower_series(b, spec, vars, order)?;
            series_div(&num, &den, syms).map_err(|e| match e {
                Error::DivisionByZero => Error::Parse {
                    line: *l,
                    col: *c,
                    msg: "division by zero or non-invertible series".into(),
                },
                other => other,
            })
        }
        Ast::Pow(a, e, l, c) => {
            let base = lower_series(a, spec, vars, order)?;
            let mut acc = Series::one(vars, order, syms);
            for _ in 0..e.unsigned_abs() {
                acc = acc.mul(&base)?;
            }
            if *e >= 0 {
                Ok(acc)
            } else {
                series_div(&Series::one(vars, order, syms), &acc, syms).map_err(|err| match err {
                    Error::DivisionByZero => Error::Parse {
                        line: *l,
                        col: *c,
                        msg: "negative power of a non-invertible series".into(),
                    },
                    other => other,
                })
            }
        }
        Ast::Neg(a) => Ok(lower_series(a, spec, vars, order)?.neg()),
    }
}

/// Divide by a series of the form `u^k · (unit + higher t-order)`.
fn series_div(num: &Series, den: &Series, syms: &Arc<SymbolSet>) -> Result<Series> {
    if den.is_zero() {
        return Err(Error::DivisionByZero);
    }
    // Lowest u-exponent present in the denominator.
    let k = den.terms().map(|((_, u), _)| *u).min().unwrap();
    let shifted = den.mul_u_power(-k)?;
    // Constant (t=0, u=0) part must be invertible.
    let c0 = shifted.coeff_t0(0);
    if c0.is_zero() {
        return Err(Error::DivisionByZero);
    }
    let cinv = c0.inv()?;
    let unit = shifted.mul_scalar(&cinv);
    // unit = 1 + n where n has positive (t, u)-valuation; invert by the
    // finite Neumann sum (exact at the truncation order).
    let order = unit.order();
    let one = Series::one(num.vars(), order, syms);
    let n = unit.sub(&one);
    let mut inv = one.clone();
    let mut pow = one.clone();
    let steps = order.t_cap + (order.u_max - order.u_min).max(0) as u32 + 1;
    for _ in 0..steps {
        pow = pow.mul(&n)?.neg();
        if pow.is_zero() {
            break;
        }
        inv = inv.add(&pow);
    }
    num.mul(&inv)?.mul_scalar(&cinv).mul_u_power(-k)
}

// ---------------------------------------------------------------------------
// Canonical printers
// ---------------------------------------------------------------------------

fn rat_to_string(c: &BigRational) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// Canonical polynomial string: terms in descending graded-lex order.
pub fn poly_to_string(p: &Poly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let syms = p.symbols();
    let mut terms: Vec<(&crate::poly::Exp, &BigRational)> = p.terms().collect();
    terms.sort_by(|a, b| {
        let da: u32 = a.0.iter().map(|&x| x as u32).sum();
        let db: u32 = b.0.iter().map(|&x| x as u32).sum();
        db.cmp(&da).then(b.0.cmp(a.0))
    });
    let mut out = String::new();
    for (i, (e, c)) in terms.iter().enumerate() {
        let neg = c.is_negative();
        let mag = if neg { -(*c).clone() } else { (*c).clone() };
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mut factors: Vec<String> = Vec::new();
        if !mag.is_one() || e.iter().all(|&x| x == 0) {
            factors.push(rat_to_string(&mag));
        }
        for (idx, &exp) in e.iter().enumerate() {
            match exp {
                0 => {}
                1 => factors.push(syms.name(idx).to_string()),
                k => factors.push(format!("{}^{}", syms.name(idx), k)),
            }
        }
        out.push_str(&factors.join("*"));
    }
    out
}

/// Canonical scalar string: `num` or `(num)/(den)`.
pub fn scalar_to_string(s: &Scalar) -> String {
    if s.den().as_constant().map(|c| c.is_one()).unwrap_or(false) {
        poly_to_string(s.num())
    } else {
        format!("({})/({})", poly_to_string(s.num()), poly_to_string(s.den()))
    }
}

fn scalar_factor_string(s: &Scalar) -> Option<String> {
    // A printable multiplier for a coefficient; None means "1".
    if s.is_one() {
        return None;
    }
    if let Some(c) = s.as_rat() {
        return Some(rat_to_string(&c));
    }
    if s.den().as_constant().map(|c| c.is_one()).unwrap_or(false) && s.num().num_terms() == 1 {
        return Some(poly_to_string(s.num()));
    }
    Some(format!("({})", scalar_to_string(s)))
}

/// Canonical series string: ascending (total t-degree, exponents, u).
pub fn series_to_string(s: &Series) -> String {
    if s.is_zero() {
        return "0".into();
    }
    let vars = s.vars();
    let mut terms: Vec<(&crate::series::Mono, &Scalar)> = s.terms().collect();
    terms.sort_by(|a, b| {
        let da: u32 = a.0 .0.iter().map(|&x| x as u32).sum();
        let db: u32 = b.0 .0.iter().map(|&x| x as u32).sum();
        da.cmp(&db).then(a.0 .0.cmp(&b.0 .0)).then(a.0 .1.cmp(&b.0 .1))
    });
    let mut out = String::new();
    for (i, ((e, u), c)) in terms.iter().enumerate() {
        // Extract a leading sign when the coefficient is a plain rational.
        let (neg, coeff) = match c.as_rat() {
            Some(r) if r.is_negative() => (true, Scalar::from_rat(c.symbols(), -r)),
            _ => (false, (*c).clone()),
        };
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mut factors: Vec<String> = Vec::new();
        if let Some(f) = scalar_factor_string(&coeff) {
            factors.push(f);
        }
        for (idx, &exp) in e.iter().enumerate() {
            match exp {
                0 => {}
                1 => factors.push(vars.name(idx).to_string()),
                k => factors.push(format!("{}^{}", vars.name(idx), k)),
            }
        }
        if *u > 0 {
            factors.push(if *u == 1 {
                "u".into()
            } else {
                format!("u^{}", u)
            });
        }
        if factors.is_empty() {
            factors.push("1".into());
        }
        out.push_str(&factors.join("*"));
        if *u < 0 {
            out.push_str(&if *u == -1 {
                "/u".to_string()
            } else {
                format!("/u^{}", -u)
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::Flavor;

    fn spec() -> ParamSpec {
        ParamSpec::new(&["q"], &["l1", "l2"], Flavor::Polynomial).unwrap()
    }

    #[test]
    fn scalar_round_trip() {
        let sp = spec();
        for src in [
            "l1^2*l2 + l2^2 - 3*l1*l2",
            "(l1 + l2)/(l1)",
            "-1/2*q",
            "0",
            "(q^2 - 1)/(q)",
        ] {
            let s = parse_scalar(src, &sp).unwrap();
            let printed = scalar_to_string(&s);
            let back = parse_scalar(&printed, &sp).unwrap();
            assert_eq!(s, back, "round trip failed for {src}");
            assert_eq!(printed, scalar_to_string(&back));
        }
    }

    #[test]
    fn series_round_trip() {
        let sp = spec();
        let vars = VarSet::new(vec!["t1".into(), "t2".into()]);
        let order = TruncOrder::new(4, -2, 4);
        for src in [
            "1 + t1*t2 - l1*t1^2*u + q*t2/u^2",
            "u^2 - 2*u + 1",
            "(l1 + 1)*t1/u",
            "t1/u^2",
        ] {
            let s = parse_series(src, &sp, &vars, order).unwrap();
            let printed = series_to_string(&s);
            let back = parse_series(&printed, &sp, &vars, order).unwrap();
            assert_eq!(s, back, "round trip failed for {src}: printed {printed}");
            assert_eq!(printed, series_to_string(&back));
        }
    }

    #[test]
    fn series_division_by_unit() {
        let sp = spec();
        let vars = VarSet::new(vec!["t1".into()]);
        let order = TruncOrder::new(3, -2, 3);
        let s = parse_series("1/(1 + t1)", &sp, &vars, order).unwrap();
        let expect = parse_series("1 - t1 + t1^2 - t1^3", &sp, &vars, order).unwrap();
        assert_eq!(s, expect);
        // q/(q) = 1 via scalar coefficients
        let one = parse_series("q/q", &sp, &vars, order).unwrap();
        assert_eq!(one, parse_series("1", &sp, &vars, order).unwrap());
    }

    #[test]
    fn parse_error_has_location() {
        let sp = spec();
        match parse_scalar("l1 + $", &sp) {
            Err(Error::Parse { line: 1, col, .. }) => assert_eq!(col, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_scalar("l1/0", &sp) {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
