//! Scalar expressions in one time variable.
//!
//! The grammar is deliberately tiny so that system definitions in config
//! files stay auditable: numeric literals, the time variable (`s` or `t`),
//! the four arithmetic operators, unary minus, integer powers, and the
//! functions `exp`, `sin`, `cos`, `abs`.
//!
//! Precedence, tightest first: `^`, unary `-`, `*` `/`, `+` `-`. Binary
//! operators associate to the left.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Abs => x.abs(),
        }
    }
}

/// Abstract syntax tree of a scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// The time variable; `s` and `t` both parse to this node.
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power; the exponent is restricted to integer literals.
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Parses an expression from text.
    pub fn parse(text: &str) -> Result<Expr> {
        let tokens = lex(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(tok) => Err(Error::Parse {
                position: tok.pos,
                message: format!("unexpected {}", tok.kind.describe()),
            }),
        }
    }

    /// Evaluates at a value of the time variable.
    pub fn eval(&self, s: f64) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var => s,
            Expr::Neg(e) => -e.eval(s)?,
            Expr::Add(a, b) => a.eval(s)? + b.eval(s)?,
            Expr::Sub(a, b) => a.eval(s)? - b.eval(s)?,
            Expr::Mul(a, b) => a.eval(s)? * b.eval(s)?,
            Expr::Div(a, b) => {
                let den = b.eval(s)?;
                if den == 0.0 {
                    return Err(Error::Eval("division by zero".into()));
                }
                a.eval(s)? / den
            }
            Expr::Pow(b, k) => {
                let base = b.eval(s)?;
                if base == 0.0 && *k < 0 {
                    return Err(Error::Eval("division by zero".into()));
                }
                base.powi(*k)
            }
            Expr::Call(f, e) => f.apply(e.eval(s)?),
        })
    }

    /// True when the tree contains no variable node.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Pow(e, _) => e.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Substitutes `-s` for the time variable (no simplification).
    pub fn reflect(&self) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var => Expr::Neg(Box::new(Expr::Var)),
            Expr::Neg(e) => Expr::Neg(Box::new(e.reflect())),
            Expr::Add(a, b) => Expr::Add(Box::new(a.reflect()), Box::new(b.reflect())),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.reflect()), Box::new(b.reflect())),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.reflect()), Box::new(b.reflect())),
            Expr::Div(a, b) => Expr::Div(Box::new(a.reflect()), Box::new(b.reflect())),
            Expr::Pow(e, k) => Expr::Pow(Box::new(e.reflect()), *k),
            Expr::Call(f, e) => Expr::Call(*f, Box::new(e.reflect())),
        }
    }

    /// Wraps the whole expression in a sign flip.
    pub fn negated(&self) -> Expr {
        Expr::Neg(Box::new(self.clone()))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(_) | Expr::Var | Expr::Call(..) => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let prec = self.precedence();
        let parens = prec < min;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Expr::Num(v) => {
                if *v == v.trunc() && v.abs() < 1e15 {
                    write!(f, "{}", *v as i64)?;
                } else {
                    write!(f, "{v}")?;
                }
            }
            Expr::Var => write!(f, "s")?,
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_prec(f, 4)?;
            }
            Expr::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)?;
            }
            Expr::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)?;
            }
            Expr::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)?;
            }
            Expr::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)?;
            }
            Expr::Pow(b, k) => {
                b.fmt_prec(f, 5)?;
                write!(f, "^{k}")?;
            }
            Expr::Call(func, e) => {
                write!(f, "{}(", func.name())?;
                e.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Num(v) => format!("number {v}"),
            TokKind::Ident(s) => format!("identifier '{s}'"),
            TokKind::Plus => "'+'".into(),
            TokKind::Minus => "'-'".into(),
            TokKind::Star => "'*'".into(),
            TokKind::Slash => "'/'".into(),
            TokKind::Caret => "'^'".into(),
            TokKind::LParen => "'('".into(),
            TokKind::RParen => "')'".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push(Token {
                    kind: TokKind::Plus,
                    pos: i,
                });
                i += 1;
            }
            '-' => {
                tokens.push(Token {
                    kind: TokKind::Minus,
                    pos: i,
                });
                i += 1;
            }
            '*' => {
                tokens.push(Token {
                    kind: TokKind::Star,
                    pos: i,
                });
                i += 1;
            }
            '/' => {
                tokens.push(Token {
                    kind: TokKind::Slash,
                    pos: i,
                });
                i += 1;
            }
            '^' => {
                tokens.push(Token {
                    kind: TokKind::Caret,
                    pos: i,
                });
                i += 1;
            }
            '(' => {
                tokens.push(Token {
                    kind: TokKind::LParen,
                    pos: i,
                });
                i += 1;
            }
            ')' => {
                tokens.push(Token {
                    kind: TokKind::RParen,
                    pos: i,
                });
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] as char == '.' {
                    i += 1;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let slice = &text[start..i];
                let value: f64 = slice.parse().map_err(|_| Error::Parse {
                    position: start,
                    message: format!("bad number literal '{slice}'"),
                })?;
                tokens.push(Token {
                    kind: TokKind::Num(value),
                    pos: start,
                });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] as char == '_')
                {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokKind::Ident(text[start..i].to_string()),
                    pos: start,
                });
            }
            other => {
                return Err(Error::Parse {
                    position: i,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_pos(&self) -> usize {
        self.tokens.last().map(|t| t.pos + 1).unwrap_or(0)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(tok) = self.peek() {
            let op = match tok.kind {
                TokKind::Plus => true,
                TokKind::Minus => false,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = if op {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(tok) = self.peek() {
            let mul = match tok.kind {
                TokKind::Star => true,
                TokKind::Slash => false,
                _ => break,
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = if mul {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        if let Some(tok) = self.peek() {
            if tok.kind == TokKind::Minus {
                self.bump();
                let inner = self.factor()?;
                return Ok(Expr::Neg(Box::new(inner)));
            }
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.atom()?;
        while let Some(tok) = self.peek() {
            if tok.kind != TokKind::Caret {
                break;
            }
            self.bump();
            let exponent = self.int_literal()?;
            base = Expr::Pow(Box::new(base), exponent);
        }
        Ok(base)
    }

    fn int_literal(&mut self) -> Result<i32> {
        let mut sign = 1i32;
        if let Some(tok) = self.peek() {
            if tok.kind == TokKind::Minus {
                self.bump();
                sign = -1;
            }
        }
        match self.bump() {
            Some(Token {
                kind: TokKind::Num(v),
                pos,
            }) => {
                if v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
                    Err(Error::Parse {
                        position: pos,
                        message: "power exponent must be an integer literal".into(),
                    })
                } else {
                    Ok(sign * v as i32)
                }
            }
            Some(tok) => Err(Error::Parse {
                position: tok.pos,
                message: "power exponent must be an integer literal".into(),
            }),
            None => Err(Error::Parse {
                position: self.end_pos(),
                message: "power exponent must be an integer literal".into(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token {
                kind: TokKind::Num(v),
                ..
            }) => Ok(Expr::Num(v)),
            Some(Token {
                kind: TokKind::Ident(name),
                pos,
            }) => match name.as_str() {
                "s" | "t" => Ok(Expr::Var),
                "exp" | "sin" | "cos" | "abs" => {
                    let func = match name.as_str() {
                        "exp" => Func::Exp,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        _ => Func::Abs,
                    };
                    self.expect(TokKind::LParen)?;
                    let arg = self.expr()?;
                    self.expect(TokKind::RParen)?;
                    Ok(Expr::Call(func, Box::new(arg)))
                }
                _ => Err(Error::Parse {
                    position: pos,
                    message: format!("unknown identifier '{name}'"),
                }),
            },
            Some(Token {
                kind: TokKind::LParen,
                ..
            }) => {
                let e = self.expr()?;
                self.expect(TokKind::RParen)?;
                Ok(e)
            }
            Some(tok) => Err(Error::Parse {
                position: tok.pos,
                message: format!("unexpected {}", tok.kind.describe()),
            }),
            None => Err(Error::Parse {
                position: self.end_pos(),
                message: "unexpected end of expression".into(),
            }),
        }
    }

    fn expect(&mut self, kind: TokKind) -> Result<()> {
        match self.bump() {
            Some(tok) if tok.kind == kind => Ok(()),
            Some(tok) => Err(Error::Parse {
                position: tok.pos,
                message: format!(
                    "expected {}, found {}",
                    kind.describe(),
                    tok.kind.describe()
                ),
            }),
            None => Err(Error::Parse {
                position: self.end_pos(),
                message: format!("expected {}", kind.describe()),
            }),
        }
    }
}

/// A rectangular matrix whose entries are parsed expressions in the time
/// variable. Carrier for the time-varying system matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixExpr {
    rows: usize,
    cols: usize,
    entries: Vec<Expr>,
}

impl MatrixExpr {
    /// Builds a matrix from expression text, row-major.
    pub fn parse(rows: &[Vec<String>]) -> Result<MatrixExpr> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::ShapeMismatch("matrix must be non-empty".into()));
        }
        let cols = rows[0].len();
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::ShapeMismatch("ragged matrix rows".into()));
            }
            for text in row {
                entries.push(Expr::parse(text)?);
            }
        }
        Ok(MatrixExpr {
            rows: rows.len(),
            cols,
            entries,
        })
    }

    /// Builds a matrix from already-parsed entries, row-major.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Expr>) -> Result<MatrixExpr> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {rows}x{cols} entries, got {}",
                entries.len()
            )));
        }
        Ok(MatrixExpr {
            rows,
            cols,
            entries,
        })
    }

    /// Constant matrix from numeric values.
    pub fn from_constant(m: &DMatrix<f64>) -> MatrixExpr {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| {
                let v = m[(i, j)];
                if v < 0.0 {
                    Expr::Neg(Box::new(Expr::Num(-v)))
                } else {
                    Expr::Num(v)
                }
            })
            .collect();
        MatrixExpr {
            rows: m.nrows(),
            cols: m.ncols(),
            entries,
        }
    }

    /// Identity matrix expression.
    pub fn identity(n: usize) -> MatrixExpr {
        MatrixExpr::from_constant(&DMatrix::identity(n, n))
    }

    /// All-zero matrix expression.
    pub fn zeros(rows: usize, cols: usize) -> MatrixExpr {
        MatrixExpr::from_constant(&DMatrix::zeros(rows, cols))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.cols + j]
    }

    /// Entrywise evaluation at a time value.
    pub fn eval(&self, s: f64) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self.entry(i, j).eval(s)?;
            }
        }
        Ok(m)
    }

    /// True when every entry is free of the time variable.
    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(Expr::is_constant)
    }

    /// Evaluates a constant matrix; errors on time-varying entries.
    pub fn constant_value(&self) -> Result<DMatrix<f64>> {
        if !self.is_constant() {
            return Err(Error::TimeVarying(
                "matrix has entries depending on the time variable".into(),
            ));
        }
        self.eval(0.0)
    }

    /// Substitutes `-s` into every entry.
    pub fn reflect(&self) -> MatrixExpr {
        MatrixExpr {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(Expr::reflect).collect(),
        }
    }

    /// Substitutes `-s` and flips the sign of every entry.
    pub fn reflect_negated(&self) -> MatrixExpr {
        MatrixExpr {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.reflect().negated()).collect(),
        }
    }

    /// Entry text in the canonical printer form, row-major.
    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| self.entry(i, j).to_string())
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_eval_examples() {
        assert_eq!(Expr::parse("s^2").unwrap().eval(-3.0).unwrap(), 9.0);
        assert_eq!(Expr::parse("-s").unwrap().eval(2.0).unwrap(), -2.0);
        assert_eq!(Expr::parse("exp(s)").unwrap().eval(0.0).unwrap(), 1.0);
        assert_eq!(
            Expr::parse("s^2 + 2*s + 1").unwrap().eval(-1.0).unwrap(),
            0.0
        );
        assert_eq!(Expr::parse("3").unwrap().eval(123.0).unwrap(), 3.0);
    }

    #[test]
    fn division_by_zero() {
        let e = Expr::parse("1/(1-s)").unwrap();
        assert_eq!(e.eval(1.0), Err(Error::Eval("division by zero".into())));
        assert_eq!(e.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn precedence() {
        // ^ binds tighter than unary minus
        assert_eq!(Expr::parse("-s^2").unwrap().eval(3.0).unwrap(), -9.0);
        assert_eq!(Expr::parse("(-s)^2").unwrap().eval(3.0).unwrap(), 9.0);
        // left associativity
        assert_eq!(Expr::parse("8 - 2 - 1").unwrap().eval(0.0).unwrap(), 5.0);
        assert_eq!(Expr::parse("8/2/2").unwrap().eval(0.0).unwrap(), 2.0);
        assert_eq!(Expr::parse("1 + 2*s").unwrap().eval(3.0).unwrap(), 7.0);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match Expr::parse("1 + @") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(Expr::parse("foo(2)").is_err());
        assert!(Expr::parse("s^2.5").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
    }

    #[test]
    fn t_is_an_alias_for_the_time_variable() {
        assert_eq!(Expr::parse("t^2").unwrap(), Expr::parse("s^2").unwrap());
    }

    #[test]
    fn print_parse_round_trip() {
        for text in [
            "s^2",
            "-s^2",
            "(-s)^2",
            "1/(1 - s)",
            "exp(-s)*sin(s) + cos(s^3)/2",
            "-(s + 1)",
            "2 - -s",
            "s^-2",
            "abs(s - 3)*1.5",
        ] {
            let once = Expr::parse(text).unwrap();
            let twice = Expr::parse(&once.to_string()).unwrap();
            assert_eq!(once, twice, "round trip failed for {text}");
        }
    }

    #[test]
    fn matrix_eval() {
        let m = MatrixExpr::parse(&[
            vec!["1".into(), "s^2".into()],
            vec!["0".into(), "-1".into()],
        ])
        .unwrap();
        let at2 = m.eval(2.0).unwrap();
        assert_eq!(at2, DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 0.0, -1.0]));
        assert!(!m.is_constant());

        let b = MatrixExpr::parse(&[vec!["1".into(), "0".into()], vec!["0".into(), "-s".into()]])
            .unwrap();
        assert_eq!(
            b.eval(2.0).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0])
        );

        let c = MatrixExpr::parse(&[vec!["7".into()]]).unwrap();
        assert!(c.is_constant());
        assert_eq!(c.eval(-4.0).unwrap(), c.eval(9.0).unwrap());
    }

    #[test]
    fn reflection() {
        let m = MatrixExpr::parse(&[vec!["s^2".into()]]).unwrap();
        let r = m.reflect();
        assert_eq!(r.entry(0, 0).to_string(), "(-s)^2");
        assert_eq!(r.eval(3.0).unwrap()[(0, 0)], 9.0);
        let n = m.reflect_negated();
        assert_eq!(n.eval(3.0).unwrap()[(0, 0)], -9.0);
        // double reflection evaluates identically
        let rr = r.reflect();
        assert_eq!(rr.eval(5.0).unwrap(), m.eval(5.0).unwrap());
    }
}
