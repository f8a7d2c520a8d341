//! Minimal arithmetic expression grammar for configuration files.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'pi' | 'e' | 'x1'..'xn' | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | sqrt | ln
//! ```
//!
//! Expressions evaluate together with their gradient (forward-mode dual
//! numbers), so metrics and level sets built from them carry exact first
//! derivatives.

use std::fmt;

use crate::error::{Error, Result};

/// Largest chart dimension an expression may reference.
pub const MAX_EXPR_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Ln,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Value together with its gradient with respect to the chart coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Dual {
    pub v: f64,
    pub g: [f64; MAX_EXPR_DIM],
}

impl Dual {
    fn constant(v: f64) -> Self {
        Dual { v, g: [0.0; MAX_EXPR_DIM] }
    }

    fn chain(self, v: f64, dv: f64) -> Self {
        let mut g = self.g;
        g.iter_mut().for_each(|x| *x *= dv);
        Dual { v, g }
    }
}

#[derive(Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
    max_var: usize,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let err = |msg: String| Error::Parse { line: 0, msg };
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent suffix: 1e-3, 2.5E+4
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| err(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else if c == '−' {
            out.push(Tok::Op('-'));
            i += 1;
        } else {
            return Err(err(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    max_var: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: 0, msg: format!("{} (token {})", msg.into(), self.pos) }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.bump() {
            Some(Tok::Op(o)) if o == c => Ok(()),
            _ => Err(self.err(format!("expected `{c}`"))),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if let Some(Tok::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Node::Const(v)),
            Some(Tok::Op('(')) => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                let func = match name.as_str() {
                    "pi" => return Ok(Node::Const(std::f64::consts::PI)),
                    "e" => return Ok(Node::Const(std::f64::consts::E)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    "ln" => Func::Ln,
                    var if var.starts_with('x') => {
                        let idx: usize = var[1..]
                            .parse()
                            .map_err(|_| self.err(format!("unknown identifier `{var}`")))?;
                        if idx == 0 || idx > MAX_EXPR_DIM {
                            return Err(self.err(format!("variable `{var}` out of range")));
                        }
                        self.max_var = self.max_var.max(idx);
                        return Ok(Node::Var(idx - 1));
                    }
                    other => return Err(self.err(format!("unknown identifier `{other}`"))),
                };
                self.expect('(')?;
                let arg = self.expr()?;
                self.expect(')')?;
                Ok(Node::Call(func, Box::new(arg)))
            }
            Some(t) => Err(self.err(format!("unexpected token {t:?}"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let toks = tokenize(src)?;
        let mut p = Parser { toks, pos: 0, max_var: 0 };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Expr { root, source: src.trim().to_string(), max_var: p.max_var })
    }

    /// Highest variable index referenced (x3 → 3).
    pub fn max_var(&self) -> usize {
        self.max_var
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_dual(x).v
    }

    pub fn eval_dual(&self, x: &[f64]) -> Dual {
        eval_node(&self.root, x)
    }
}

fn eval_node(node: &Node, x: &[f64]) -> Dual {
    match node {
        Node::Const(c) => Dual::constant(*c),
        Node::Var(i) => {
            let mut d = Dual::constant(x.get(*i).copied().unwrap_or(0.0));
            d.g[*i] = 1.0;
            d
        }
        Node::Neg(a) => {
            let a = eval_node(a, x);
            a.chain(-a.v, -1.0)
        }
        Node::Add(a, b) => {
            let (a, b) = (eval_node(a, x), eval_node(b, x));
            let mut g = a.g;
            g.iter_mut().zip(b.g).for_each(|(p, q)| *p += q);
            Dual { v: a.v + b.v, g }
        }
        Node::Sub(a, b) => {
            let (a, b) = (eval_node(a, x), eval_node(b, x));
            let mut g = a.g;
            g.iter_mut().zip(b.g).for_each(|(p, q)| *p -= q);
            Dual { v: a.v - b.v, g }
        }
        Node::Mul(a, b) => {
            let (a, b) = (eval_node(a, x), eval_node(b, x));
            let mut g = [0.0; MAX_EXPR_DIM];
            for k in 0..MAX_EXPR_DIM {
                g[k] = a.g[k] * b.v + a.v * b.g[k];
            }
            Dual { v: a.v * b.v, g }
        }
        Node::Div(a, b) => {
            let (a, b) = (eval_node(a, x), eval_node(b, x));
            let mut g = [0.0; MAX_EXPR_DIM];
            for k in 0..MAX_EXPR_DIM {
                g[k] = (a.g[k] * b.v - a.v * b.g[k]) / (b.v * b.v);
            }
            Dual { v: a.v / b.v, g }
        }
        Node::Pow(a, b) => {
            let (a, b) = (eval_node(a, x), eval_node(b, x));
            let v = a.v.powf(b.v);
            let exponent_const = b.g.iter().all(|&d| d == 0.0);
            let mut g = [0.0; MAX_EXPR_DIM];
            if exponent_const {
                // keeps integer powers of negative bases differentiable
                let dv = if b.v == 0.0 { 0.0 } else { b.v * a.v.powf(b.v - 1.0) };
                for k in 0..MAX_EXPR_DIM {
                    g[k] = dv * a.g[k];
                }
            } else {
                let ln_a = a.v.ln();
                for k in 0..MAX_EXPR_DIM {
                    g[k] = v * (b.g[k] * ln_a + b.v * a.g[k] / a.v);
                }
            }
            Dual { v, g }
        }
        Node::Call(f, a) => {
            let a = eval_node(a, x);
            match f {
                Func::Sin => a.chain(a.v.sin(), a.v.cos()),
                Func::Cos => a.chain(a.v.cos(), -a.v.sin()),
                Func::Exp => {
                    let e = a.v.exp();
                    a.chain(e, e)
                }
                Func::Sqrt => {
                    let s = a.v.sqrt();
                    a.chain(s, 0.5 / s)
                }
                Func::Ln => a.chain(a.v.ln(), 1.0 / a.v),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_power() {
        let e = Expr::parse("1 + 2*3^2 - -4/2").unwrap();
        assert_eq!(e.eval(&[]), 1.0 + 18.0 + 2.0);
        let e = Expr::parse("2^3^2").unwrap();
        assert_eq!(e.eval(&[]), 512.0);
        let e = Expr::parse("-x1^2").unwrap();
        assert_eq!(e.eval(&[3.0]), -9.0);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let e = Expr::parse("exp(-((x1-0.1)^2 + x2^2)/0.16) * sin(x1*x2) + sqrt(1 + x1^2) - ln(2 + x2)").unwrap();
        let x = [0.31, -0.27];
        let d = e.eval_dual(&x);
        for k in 0..2 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * h);
            assert!((fd - d.g[k]).abs() < 1e-8, "k={k}: {fd} vs {}", d.g[k]);
        }
    }

    #[test]
    fn scientific_notation_and_constants() {
        let e = Expr::parse("2.5e-1 * pi + e").unwrap();
        assert!((e.eval(&[]) - (0.25 * std::f64::consts::PI + std::f64::consts::E)).abs() < 1e-15);
        assert_eq!(Expr::parse("x1 + x3").unwrap().max_var(), 3);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
    }
}
