//! Text format and expression DSL for piecewise systems.
//!
//! A system file is line-oriented UTF-8 with four sections:
//!
//! ```text
//! [field.X]            # upper field, z >= 0
//! dx = "a"
//! dy = "lambda"
//! dz = "b*(y + x^2)"
//!
//! [field.Y]            # lower field, z <= 0
//! dx = "c"
//! dy = "d"
//! dz = "x"
//!
//! [params]
//! a = -1
//! b = -1
//! c = 1
//! d = -2
//! lambda = 0
//!
//! [meta]               # optional
//! description = anything
//! ```
//!
//! `#` starts a comment, blank lines are ignored, field components are
//! quoted expression strings. Every parameter an expression references must
//! be bound in `[params]`.

mod ast;
mod parse;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use ast::{diff_expr, eval_expr, BinOp, EvalError, Expr, Func, Var};
pub use parse::{parse_expression, SyntaxError};

use crate::geom::{Point3, Vec3};
use crate::real::Real;
use crate::system::{FieldSide, System};

/// The cusp-fold normal form at the reference parameters, in the system
/// file format. Shipped as `systems/cuspfold.psvf` at the repository root.
pub const CUSPFOLD_SYSTEM: &str = include_str!("../../../../systems/cuspfold.psvf");

/// A fully parsed and bound piecewise system definition.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    /// Components `(dx, dy, dz)` of the upper field.
    pub field_x: [Expr; 3],
    /// Components `(dx, dy, dz)` of the lower field.
    pub field_y: [Expr; 3],
    pub params: BTreeMap<String, f64>,
    pub description: Option<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SystemFileError {
    #[error("line {line}: {err}")]
    Expr { line: usize, err: SyntaxError },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("section [{section}] is missing key `{key}`")]
    MissingKey { section: String, key: String },
    #[error("parameter `{0}` is referenced but not bound in [params]")]
    UnboundParameter(String),
    #[error("line {line}: parameter name `{name}` shadows a variable")]
    ReservedName { line: usize, name: String },
}

/// Parses a system file into a fully bound [`SystemSpec`].
pub fn parse_system(text: &str) -> Result<SystemSpec, SystemFileError> {
    let mut sections: BTreeMap<String, Vec<(usize, String, String)>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| SystemFileError::Malformed {
                line: line_no,
                msg: "unterminated section header".into(),
            })?;
            current = Some(name.trim().to_string());
            sections.entry(current.clone().unwrap()).or_default();
            continue;
        }
        let section = current.clone().ok_or_else(|| SystemFileError::Malformed {
            line: line_no,
            msg: "key outside of any section".into(),
        })?;
        let (key, value) = line.split_once('=').ok_or_else(|| SystemFileError::Malformed {
            line: line_no,
            msg: "expected `key = value`".into(),
        })?;
        sections.get_mut(&section).unwrap().push((
            line_no,
            key.trim().to_string(),
            value.trim().to_string(),
        ));
    }

    let field_x = parse_field_section(&sections, "field.X")?;
    let field_y = parse_field_section(&sections, "field.Y")?;
    let params = parse_params_section(&sections)?;
    let description = sections.get("meta").and_then(|entries| {
        entries
            .iter()
            .find(|(_, k, _)| k == "description")
            .map(|(_, _, v)| unquote(v).to_string())
    });

    let spec = SystemSpec {
        field_x,
        field_y,
        params,
        description,
    };

    let mut referenced = BTreeSet::new();
    for e in spec.field_x.iter().chain(spec.field_y.iter()) {
        e.collect_params(&mut referenced);
    }
    for name in referenced {
        if !spec.params.contains_key(name) {
            return Err(SystemFileError::UnboundParameter(name.to_string()));
        }
    }
    Ok(spec)
}

fn strip_comment(line: &str) -> &str {
    // A `#` inside a quoted expression does not start a comment.
    let mut in_quotes = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

fn parse_field_section(
    sections: &BTreeMap<String, Vec<(usize, String, String)>>,
    name: &str,
) -> Result<[Expr; 3], SystemFileError> {
    let entries = sections
        .get(name)
        .ok_or_else(|| SystemFileError::MissingSection(name.to_string()))?;
    let mut components: [Option<Expr>; 3] = [None, None, None];
    for (line, key, value) in entries {
        let slot = match key.as_str() {
            "dx" => 0,
            "dy" => 1,
            "dz" => 2,
            other => {
                return Err(SystemFileError::Malformed {
                    line: *line,
                    msg: format!("unknown key `{other}` in [{name}]"),
                })
            }
        };
        let text = unquote(value);
        let expr = parse_expression(text).map_err(|err| SystemFileError::Expr {
            line: *line,
            err,
        })?;
        components[slot] = Some(expr);
    }
    let [dx, dy, dz] = components;
    let missing = |key: &str| SystemFileError::MissingKey {
        section: name.to_string(),
        key: key.to_string(),
    };
    Ok([
        dx.ok_or_else(|| missing("dx"))?,
        dy.ok_or_else(|| missing("dy"))?,
        dz.ok_or_else(|| missing("dz"))?,
    ])
}

fn parse_params_section(
    sections: &BTreeMap<String, Vec<(usize, String, String)>>,
) -> Result<BTreeMap<String, f64>, SystemFileError> {
    let entries = sections
        .get("params")
        .ok_or_else(|| SystemFileError::MissingSection("params".to_string()))?;
    let mut params = BTreeMap::new();
    for (line, key, value) in entries {
        if Var::from_name(key).is_some() {
            return Err(SystemFileError::ReservedName {
                line: *line,
                name: key.clone(),
            });
        }
        let v: f64 = value.parse().map_err(|_| SystemFileError::Malformed {
            line: *line,
            msg: format!("`{value}` is not a decimal literal"),
        })?;
        params.insert(key.clone(), v);
    }
    Ok(params)
}

/// A [`System`] backed by parsed expressions.
///
/// The Lie derivatives needed by tangency classification are prepared
/// symbolically at construction: `L^1 z` is the normal component itself and
/// each next one is the directional derivative of the previous along the
/// field.
#[derive(Clone, Debug)]
pub struct DslSystem {
    spec: SystemSpec,
    lie_x: [Expr; 3],
    lie_y: [Expr; 3],
}

impl DslSystem {
    pub fn new(spec: SystemSpec) -> Self {
        let lie_x = lie_chain(&spec.field_x);
        let lie_y = lie_chain(&spec.field_y);
        Self { spec, lie_x, lie_y }
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    fn eval<T: Real>(&self, e: &Expr, p: Point3<T>) -> T {
        // Unbound parameters are excluded by construction; domain errors
        // surface as NaN and are caught by the integrator's finiteness
        // guards.
        eval_expr(e, p, &self.spec.params).unwrap_or_else(|_| T::nan())
    }
}

fn lie_chain(field: &[Expr; 3]) -> [Expr; 3] {
    let l1 = field[2].clone();
    let l2 = directional_derivative(&l1, field);
    let l3 = directional_derivative(&l2, field);
    [l1, l2, l3]
}

fn directional_derivative(g: &Expr, field: &[Expr; 3]) -> Expr {
    let mut acc = Expr::Num(0.0);
    for (var, f) in [Var::X, Var::Y, Var::Z].into_iter().zip(field) {
        let dg = diff_expr(g, var);
        if dg == Expr::Num(0.0) {
            continue;
        }
        let term = Expr::Bin(BinOp::Mul, Box::new(dg), Box::new(f.clone()));
        acc = if acc == Expr::Num(0.0) {
            term
        } else {
            Expr::Bin(BinOp::Add, Box::new(acc), Box::new(term))
        };
    }
    acc
}

impl<T: Real> System<T> for DslSystem {
    fn field(&self, side: FieldSide, p: Point3<T>) -> Vec3<T> {
        let exprs = match side {
            FieldSide::X => &self.spec.field_x,
            FieldSide::Y => &self.spec.field_y,
        };
        Vec3 {
            v1: self.eval(&exprs[0], p),
            v2: self.eval(&exprs[1], p),
            v3: self.eval(&exprs[2], p),
        }
    }

    fn lie_derivatives(&self, side: FieldSide, p: Point3<T>) -> [T; 3] {
        let lie = match side {
            FieldSide::X => &self.lie_x,
            FieldSide::Y => &self.lie_y,
        };
        [
            self.eval(&lie[0], p),
            self.eval(&lie[1], p),
            self.eval(&lie[2], p),
        ]
    }
}
