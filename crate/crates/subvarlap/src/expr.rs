//! Closed-form expression grammar for exponent, weight, and source fields.
//!
//! Grammar (recursive descent, f64 semantics):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers `x`, `y`, `t` name the grid coordinates (axis 0, 1, 2), `pi`
//! and `e` the usual constants. Functions: `abs`, `sin`, `cos`, `exp`, `log`,
//! `sqrt`, unary and binary `min`/`max`, `pow(a,b)`, and `step(v)` = 1 for
//! `v ≥ 0` else 0, the piecewise building block.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call1(Func1, Box<Expr>),
    Call2(Func2, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func1 {
    Abs,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func2 {
    Min,
    Max,
    Pow,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser::new(src);
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, coords: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(a) => coords.get(*a).copied().unwrap_or(0.0),
            Expr::Neg(e) => -e.eval(coords),
            Expr::Add(a, b) => a.eval(coords) + b.eval(coords),
            Expr::Sub(a, b) => a.eval(coords) - b.eval(coords),
            Expr::Mul(a, b) => a.eval(coords) * b.eval(coords),
            Expr::Div(a, b) => a.eval(coords) / b.eval(coords),
            Expr::Pow(a, b) => a.eval(coords).powf(b.eval(coords)),
            Expr::Call1(f, e) => {
                let v = e.eval(coords);
                match f {
                    Func1::Abs => v.abs(),
                    Func1::Sin => v.sin(),
                    Func1::Cos => v.cos(),
                    Func1::Exp => v.exp(),
                    Func1::Log => v.ln(),
                    Func1::Sqrt => v.sqrt(),
                    Func1::Step => {
                        if v >= 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
            Expr::Call2(f, a, b) => {
                let (u, v) = (a.eval(coords), b.eval(coords));
                match f {
                    Func2::Min => u.min(v),
                    Func2::Max => u.max(v),
                    Func2::Pow => u.powf(v),
                }
            }
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Coord(a) => Some(*a),
            Expr::Neg(e) | Expr::Call1(_, e) => e.max_coord(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Call2(_, a, b) => a.max_coord().into_iter().chain(b.max_coord()).max(),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            line: 1,
            col: self.pos + 1,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            if self.eat(b'+') {
                e = Expr::Add(Box::new(e), Box::new(self.term()?));
            } else if self.eat(b'-') {
                e = Expr::Sub(Box::new(e), Box::new(self.term()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            if self.eat(b'*') {
                e = Expr::Mul(Box::new(e), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                e = Expr::Div(Box::new(e), Box::new(self.unary()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.err("expected number, identifier, or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // Scientific notation.
        if self.pos < self.src.len() && (self.src[self.pos] | 32) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| self.err(&format!("bad number {text:?}")))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        if self.eat(b'(') {
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.err("expected ')'"));
            }
            return self.call(&name, args);
        }
        match name.as_str() {
            "x" => Ok(Expr::Coord(0)),
            "y" => Ok(Expr::Coord(1)),
            "t" | "z" => Ok(Expr::Coord(2)),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "e" => Ok(Expr::Const(std::f64::consts::E)),
            other => Err(self.err(&format!("unknown identifier {other:?}"))),
        }
    }

    fn call(&mut self, name: &str, mut args: Vec<Expr>) -> Result<Expr> {
        let f1 = |f, args: &mut Vec<Expr>, p: &Self| -> Result<Expr> {
            if args.len() != 1 {
                return Err(p.err(&format!("{name} takes 1 argument")));
            }
            Ok(Expr::Call1(f, Box::new(args.pop().unwrap())))
        };
        let f2 = |f, args: &mut Vec<Expr>, p: &Self| -> Result<Expr> {
            if args.len() != 2 {
                return Err(p.err(&format!("{name} takes 2 arguments")));
            }
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            Ok(Expr::Call2(f, Box::new(a), Box::new(b)))
        };
        match name {
            "abs" => f1(Func1::Abs, &mut args, self),
            "sin" => f1(Func1::Sin, &mut args, self),
            "cos" => f1(Func1::Cos, &mut args, self),
            "exp" => f1(Func1::Exp, &mut args, self),
            "log" => f1(Func1::Log, &mut args, self),
            "sqrt" => f1(Func1::Sqrt, &mut args, self),
            "step" => f1(Func1::Step, &mut args, self),
            "pow" => f2(Func2::Pow, &mut args, self),
            "min" if args.len() == 2 => f2(Func2::Min, &mut args, self),
            "max" if args.len() == 2 => f2(Func2::Max, &mut args, self),
            other => Err(self.err(&format!("unknown function {other:?}"))),
        }
    }
}
