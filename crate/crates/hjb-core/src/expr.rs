//! Tiny arithmetic expression language for scenario files: expressions in
//! the spatial variables `x`, `y` and the state variable `s`, with the usual
//! operators, `pi`, and a small function set. Used for right-hand sides and
//! piecewise user nonlinearities.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sign,
    Min,
    Max,
    Pow,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            chars: src.chars().collect(),
            pos: 0,
            src,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.chars.len() {
            return Err(Error::Expr(format!(
                "trailing input at byte {} in `{src}`",
                p.pos
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64, s: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::S) => s,
            Expr::Neg(e) => -e.eval(x, y, s),
            Expr::Add(a, b) => a.eval(x, y, s) + b.eval(x, y, s),
            Expr::Sub(a, b) => a.eval(x, y, s) - b.eval(x, y, s),
            Expr::Mul(a, b) => a.eval(x, y, s) * b.eval(x, y, s),
            Expr::Div(a, b) => a.eval(x, y, s) / b.eval(x, y, s),
            Expr::Pow(a, b) => a.eval(x, y, s).powf(b.eval(x, y, s)),
            Expr::Call(f, args) => {
                let v: Vec<f64> = args.iter().map(|a| a.eval(x, y, s)).collect();
                match f {
                    Func::Sin => v[0].sin(),
                    Func::Cos => v[0].cos(),
                    Func::Tan => v[0].tan(),
                    Func::Exp => v[0].exp(),
                    Func::Log => v[0].ln(),
                    Func::Sqrt => v[0].sqrt(),
                    Func::Abs => v[0].abs(),
                    Func::Sign => {
                        if v[0] > 0.0 {
                            1.0
                        } else if v[0] < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    Func::Min => v[0].min(v[1]),
                    Func::Max => v[0].max(v[1]),
                    Func::Pow => v[0].powf(v[1]),
                }
            }
        }
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary minus binds looser than `^`: -2^2 = -(2^2)
    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek() == Some('^') {
            self.bump();
            let exp = self.factor()?; // right-associative, allows 2^-3
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                if self.bump() != Some(')') {
                    return Err(Error::Expr(format!("missing `)` in `{}`", self.src)));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.ident(),
            other => Err(Error::Expr(format!(
                "unexpected {:?} at byte {} in `{}`",
                other, self.pos, self.src
            ))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_ascii_digit() || c == '.' {
                self.pos += 1;
            } else if (c == 'e' || c == 'E')
                && self.pos > start
                && self
                    .chars
                    .get(self.pos + 1)
                    .is_some_and(|n| n.is_ascii_digit() || *n == '+' || *n == '-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        let txt: String = self.chars[start..self.pos].iter().collect();
        txt.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::Expr(format!("bad number `{txt}` in `{}`", self.src)))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_ascii_alphanumeric() || self.chars[self.pos] == '_')
        {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        match name.as_str() {
            "x" => return Ok(Expr::Var(Var::X)),
            "y" => return Ok(Expr::Var(Var::Y)),
            "s" | "u" => return Ok(Expr::Var(Var::S)),
            "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
            _ => {}
        }
        let func = match name.as_str() {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            _ => {
                return Err(Error::Expr(format!(
                    "unknown identifier `{name}` in `{}`",
                    self.src
                )))
            }
        };
        if self.bump() != Some('(') {
            return Err(Error::Expr(format!("`{name}` needs arguments")));
        }
        let mut args = vec![self.expr()?];
        while self.peek() == Some(',') {
            self.bump();
            args.push(self.expr()?);
        }
        if self.bump() != Some(')') {
            return Err(Error::Expr(format!("missing `)` after `{name}(`")));
        }
        let arity = match func {
            Func::Min | Func::Max | Func::Pow => 2,
            _ => 1,
        };
        if args.len() != arity {
            return Err(Error::Expr(format!(
                "`{name}` takes {arity} argument(s), got {}",
                args.len()
            )));
        }
        Ok(Expr::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64, s: f64) -> f64 {
        Expr::parse(src).unwrap().eval(x, 0.0, s)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1+2*3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1+2)*3", 0.0, 0.0), 9.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0); // right assoc
        assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(ev("6/3/2", 0.0, 0.0), 1.0);
    }

    #[test]
    fn vars_and_functions() {
        assert!((ev("sin(pi*x)", 0.5, 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(ev("sign(s)*abs(s)^0.5", 0.0, -9.0), -3.0);
        assert_eq!(ev("max(x, s)", 2.0, 3.0), 3.0);
        assert_eq!(ev("min(1, 2)", 0.0, 0.0), 1.0);
        assert!((ev("1.5e-2 + 1e2", 0.0, 0.0) - 100.015).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_context() {
        assert!(Expr::parse("sin(").is_err());
        assert!(Expr::parse("2 +").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("min(1)").is_err());
    }
}
