//! A small arithmetic language for writing nonlinearities `f(xi, eta)`.
//!
//! The grammar is ordinary infix notation over the variables `xi` and `eta`,
//! named parameters, numeric literals, the operators `+ - * / ^` and the
//! functions `sin cos tan sinh cosh tanh exp abs sqrt`. `^` binds tightest and
//! is right-associative, then unary minus, then `* /`, then `+ -`. The
//! identifier `pi` is a built-in constant.
//!
//! ```
//! use kyorbit::expr::{parse, Bindings};
//!
//! let e = parse("-alpha*tanh(eta)").unwrap();
//! let mut params = Bindings::new();
//! params.insert("alpha".into(), 2.0);
//! assert_eq!(e.eval(3.0, 0.0, &params).unwrap(), 0.0);
//! ```

mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub use parse::parse;

/// Parameter name to value map.
pub type Bindings = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Xi,
    Eta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    /// Functions that are not twice differentiable everywhere on their domain.
    pub fn is_irregular(self) -> bool {
        matches!(self, Func::Abs | Func::Sqrt)
    }

    fn apply(self, x: f64) -> Result<f64, ExprError> {
        let y = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Abs => x.abs(),
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(ExprError::Domain(format!("sqrt of negative value {x}")));
                }
                x.sqrt()
            }
        };
        finite(y, || format!("{}({x})", self.name()))
    }
}

/// Abstract syntax tree of a parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Var(Var),
    Param(String),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

fn finite(y: f64, what: impl FnOnce() -> String) -> Result<f64, ExprError> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(ExprError::Domain(format!("non-finite result of {}", what())))
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(ExprError::Domain(format!("negative base {base} raised to non-integer power {exponent}")));
    }
    let y = if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    };
    finite(y, || format!("{base}^{exponent}"))
}

impl Expression {
    pub fn eval(&self, xi: f64, eta: f64, params: &Bindings) -> Result<f64, ExprError> {
        match self {
            Expression::Num(v) => Ok(*v),
            Expression::Var(Var::Xi) => Ok(xi),
            Expression::Var(Var::Eta) => Ok(eta),
            Expression::Param(name) => {
                params.get(name).copied().ok_or_else(|| ExprError::UnboundParameter(name.clone()))
            }
            Expression::Neg(inner) => Ok(-inner.eval(xi, eta, params)?),
            Expression::Binary(op, lhs, rhs) => {
                let a = lhs.eval(xi, eta, params)?;
                let b = rhs.eval(xi, eta, params)?;
                match op {
                    BinOp::Add => finite(a + b, || format!("{a}+{b}")),
                    BinOp::Sub => finite(a - b, || format!("{a}-{b}")),
                    BinOp::Mul => finite(a * b, || format!("{a}*{b}")),
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(ExprError::Domain(format!("division of {a} by zero")));
                        }
                        finite(a / b, || format!("{a}/{b}"))
                    }
                    BinOp::Pow => power(a, b),
                }
            }
            Expression::Call(func, arg) => func.apply(arg.eval(xi, eta, params)?),
        }
    }

    /// Every identifier other than `xi` and `eta`.
    pub fn free_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |node| {
            if let Expression::Param(name) = node {
                out.insert(name.clone());
            }
        });
        out
    }

    /// Replaces every parameter by its bound value.
    pub fn bind(&self, params: &Bindings) -> Result<Expression, ExprError> {
        Ok(match self {
            Expression::Param(name) => {
                Expression::Num(params.get(name).copied().ok_or_else(|| ExprError::UnboundParameter(name.clone()))?)
            }
            Expression::Num(_) | Expression::Var(_) => self.clone(),
            Expression::Neg(inner) => Expression::Neg(Box::new(inner.bind(params)?)),
            Expression::Binary(op, l, r) => {
                Expression::Binary(*op, Box::new(l.bind(params)?), Box::new(r.bind(params)?))
            }
            Expression::Call(func, arg) => Expression::Call(*func, Box::new(arg.bind(params)?)),
        })
    }

    pub fn uses_irregular_functions(&self) -> bool {
        let mut found = false;
        self.visit(&mut |node| {
            if let Expression::Call(func, _) = node {
                found |= func.is_irregular();
            }
        });
        found
    }

    fn visit(&self, f: &mut impl FnMut(&Expression)) {
        f(self);
        match self {
            Expression::Neg(inner) | Expression::Call(_, inner) => inner.visit(f),
            Expression::Binary(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
            Expression::Num(_) | Expression::Var(_) | Expression::Param(_) => {}
        }
    }

    fn fmt_prec(&self, out: &mut fmt::Formatter<'_>, parent: u8, right_of_pow: bool) -> fmt::Result {
        match self {
            Expression::Num(v) => {
                if *v < 0.0 {
                    write!(out, "({v:?})")
                } else {
                    write!(out, "{v:?}")
                }
            }
            Expression::Var(Var::Xi) => out.write_str("xi"),
            Expression::Var(Var::Eta) => out.write_str("eta"),
            Expression::Param(name) => out.write_str(name),
            Expression::Neg(inner) => {
                // unary minus sits between ^ and * /
                let wrap = parent > 3 && !right_of_pow;
                if wrap {
                    out.write_str("(")?;
                }
                out.write_str("-")?;
                inner.fmt_prec(out, 3, false)?;
                if wrap {
                    out.write_str(")")?;
                }
                Ok(())
            }
            Expression::Binary(op, l, r) => {
                let p = op.precedence();
                let wrap = p < parent;
                if wrap {
                    out.write_str("(")?;
                }
                match op {
                    BinOp::Pow => {
                        l.fmt_prec(out, p + 1, false)?;
                        out.write_str("^")?;
                        r.fmt_prec(out, p, true)?;
                    }
                    _ => {
                        l.fmt_prec(out, p, false)?;
                        write!(out, " {} ", op.symbol())?;
                        r.fmt_prec(out, p + 1, false)?;
                    }
                }
                if wrap {
                    out.write_str(")")?;
                }
                Ok(())
            }
            Expression::Call(func, arg) => {
                write!(out, "{}(", func.name())?;
                arg.fmt_prec(out, 0, false)?;
                out.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}
