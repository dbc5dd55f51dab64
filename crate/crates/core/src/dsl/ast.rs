//! Expression AST: evaluation, symbolic differentiation, printing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::geom::Point3;
use crate::real::Real;

/// Spatial variable of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Z,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "x" => Some(Var::X),
            "y" => Some(Var::Y),
            "z" => Some(Var::Z),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

/// Arithmetic expression over `x, y, z` and named parameters.
///
/// Exponents of `^` are always numeric literals (possibly negated), which
/// keeps differentiation total.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Param(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    /// Literal value if the expression is a (possibly negated) number.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(inner) => inner.as_const().map(|v| -v),
            _ => None,
        }
    }

    /// Collects the names of all parameters referenced by the expression.
    pub fn collect_params<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Param(name) => {
                out.insert(name);
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_params(out),
            Expr::Bin(_, l, r) => {
                l.collect_params(out);
                r.collect_params(out);
            }
        }
    }

    pub fn references_vars(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Param(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.references_vars(),
            Expr::Bin(_, l, r) => l.references_vars() || r.references_vars(),
        }
    }
}

/// Evaluates an expression at a phase-space point with the given parameter
/// bindings. Domain violations (square roots of negatives, division by
/// zero, non-finite results) are reported rather than propagated as NaN.
pub fn eval_expr<T: Real>(
    e: &Expr,
    p: Point3<T>,
    params: &BTreeMap<String, f64>,
) -> Result<T, EvalError> {
    let v = eval_inner(e, p, params)?;
    if !v.is_finite() {
        return Err(EvalError::Domain("non-finite result".into()));
    }
    Ok(v)
}

fn eval_inner<T: Real>(
    e: &Expr,
    p: Point3<T>,
    params: &BTreeMap<String, f64>,
) -> Result<T, EvalError> {
    match e {
        Expr::Num(v) => Ok(T::of(*v)),
        Expr::Var(Var::X) => Ok(p.x),
        Expr::Var(Var::Y) => Ok(p.y),
        Expr::Var(Var::Z) => Ok(p.z),
        Expr::Param(name) => params
            .get(name)
            .map(|v| T::of(*v))
            .ok_or_else(|| EvalError::UnboundParameter(name.clone())),
        Expr::Neg(inner) => Ok(-eval_inner(inner, p, params)?),
        Expr::Bin(op, l, r) => {
            let a = eval_inner(l, p, params)?;
            let b = eval_inner(r, p, params)?;
            match op {
                BinOp::Add => Ok(a + b),
                BinOp::Sub => Ok(a - b),
                BinOp::Mul => Ok(a * b),
                BinOp::Div => {
                    if b == T::zero() {
                        Err(EvalError::Domain("division by zero".into()))
                    } else {
                        Ok(a / b)
                    }
                }
                BinOp::Pow => {
                    let exp = r.as_const().ok_or_else(|| {
                        EvalError::Domain("exponent must be a numeric literal".into())
                    })?;
                    if exp.fract() == 0.0 && exp.abs() < i32::MAX as f64 {
                        let n = exp as i32;
                        if n < 0 && a == T::zero() {
                            return Err(EvalError::Domain("zero to a negative power".into()));
                        }
                        Ok(a.powi(n))
                    } else if a < T::zero() {
                        Err(EvalError::Domain(format!(
                            "negative base {a} with non-integer exponent {exp}"
                        )))
                    } else {
                        Ok(a.powf(T::of(exp)))
                    }
                }
            }
        }
        Expr::Call(f, arg) => {
            let a = eval_inner(arg, p, params)?;
            match f {
                Func::Sin => Ok(a.sin()),
                Func::Cos => Ok(a.cos()),
                Func::Exp => Ok(a.exp()),
                Func::Sqrt => {
                    if a < T::zero() {
                        Err(EvalError::Domain(format!("sqrt of negative value {a}")))
                    } else {
                        Ok(a.sqrt())
                    }
                }
            }
        }
    }
}

/// Symbolic partial derivative with respect to `var`, with 0/1 folding.
///
/// Exponents of `^` must be numeric literals, which the parser guarantees;
/// hand-built trees violating this panic here.
pub fn diff_expr(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Num(_) | Expr::Param(_) => Expr::Num(0.0),
        Expr::Var(v) => {
            if *v == var {
                Expr::Num(1.0)
            } else {
                Expr::Num(0.0)
            }
        }
        Expr::Neg(inner) => neg(diff_expr(inner, var)),
        Expr::Bin(op, l, r) => {
            let dl = diff_expr(l, var);
            let dr = diff_expr(r, var);
            match op {
                BinOp::Add => add(dl, dr),
                BinOp::Sub => sub(dl, dr),
                BinOp::Mul => add(mul(dl, (**r).clone()), mul((**l).clone(), dr)),
                BinOp::Div => {
                    // (l'r - l r') / r^2
                    let num = sub(mul(dl, (**r).clone()), mul((**l).clone(), dr));
                    div(num, pow((**r).clone(), 2.0))
                }
                BinOp::Pow => {
                    let p = r.as_const().expect("parser guarantees literal exponents");
                    // d(u^p) = p * u^(p-1) * u'
                    mul(mul(const_expr(p), pow((**l).clone(), p - 1.0)), dl)
                }
            }
        }
        Expr::Call(f, arg) => {
            let da = diff_expr(arg, var);
            let outer = match f {
                Func::Sin => Expr::Call(Func::Cos, arg.clone()),
                Func::Cos => neg(Expr::Call(Func::Sin, arg.clone())),
                Func::Exp => Expr::Call(Func::Exp, arg.clone()),
                Func::Sqrt => div(
                    Expr::Num(1.0),
                    mul(Expr::Num(2.0), Expr::Call(Func::Sqrt, arg.clone())),
                ),
            };
            mul(outer, da)
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 1.0)
}

fn neg(e: Expr) -> Expr {
    if is_zero(&e) {
        e
    } else {
        Expr::Neg(Box::new(e))
    }
}

fn add(l: Expr, r: Expr) -> Expr {
    if is_zero(&l) {
        r
    } else if is_zero(&r) {
        l
    } else {
        Expr::Bin(BinOp::Add, Box::new(l), Box::new(r))
    }
}

fn sub(l: Expr, r: Expr) -> Expr {
    if is_zero(&r) {
        l
    } else if is_zero(&l) {
        neg(r)
    } else {
        Expr::Bin(BinOp::Sub, Box::new(l), Box::new(r))
    }
}

fn mul(l: Expr, r: Expr) -> Expr {
    if is_zero(&l) || is_zero(&r) {
        Expr::Num(0.0)
    } else if is_one(&l) {
        r
    } else if is_one(&r) {
        l
    } else {
        Expr::Bin(BinOp::Mul, Box::new(l), Box::new(r))
    }
}

fn div(l: Expr, r: Expr) -> Expr {
    if is_zero(&l) {
        Expr::Num(0.0)
    } else if is_one(&r) {
        l
    } else {
        Expr::Bin(BinOp::Div, Box::new(l), Box::new(r))
    }
}

/// Numeric literal; negatives are represented as negated positive literals,
/// matching what the parser produces.
fn const_expr(v: f64) -> Expr {
    if v < 0.0 {
        Expr::Neg(Box::new(Expr::Num(-v)))
    } else {
        Expr::Num(v)
    }
}

fn pow(base: Expr, exp: f64) -> Expr {
    if exp == 0.0 {
        Expr::Num(1.0)
    } else if exp == 1.0 {
        base
    } else if exp < 0.0 {
        Expr::Bin(
            BinOp::Pow,
            Box::new(base),
            Box::new(Expr::Neg(Box::new(Expr::Num(-exp)))),
        )
    } else {
        Expr::Bin(BinOp::Pow, Box::new(base), Box::new(Expr::Num(exp)))
    }
}

// Precedence levels for printing with minimal parentheses.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if prec(e) < min {
                write!(f, "(")?;
                write!(f, "{e}")?;
                write!(f, ")")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Param(name) => write!(f, "{name}"),
            Expr::Neg(inner) => {
                write!(f, "-")?;
                wrap(f, inner, 3)
            }
            Expr::Bin(BinOp::Pow, l, r) => {
                // Exponents are literal (possibly negated) numbers and are
                // printed bare so `x ^ -2` re-parses.
                wrap(f, l, 5)?;
                match &**r {
                    Expr::Num(v) => write!(f, " ^ {v}"),
                    Expr::Neg(inner) => write!(f, " ^ -{inner}"),
                    other => write!(f, " ^ ({other})"),
                }
            }
            Expr::Bin(op, l, r) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => ("+", 1, 2),
                    BinOp::Sub => ("-", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                    BinOp::Pow => unreachable!(),
                };
                wrap(f, l, lp)?;
                write!(f, " {sym} ")?;
                wrap(f, r, rp)
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}
