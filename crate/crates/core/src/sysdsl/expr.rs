//! Expression trees for right-hand sides, plus numeric evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Unary operators. Only negation exists in the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
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
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => PREC_SUM,
            BinOp::Mul | BinOp::Div => PREC_PRODUCT,
            BinOp::Pow => PREC_POWER,
        }
    }
}

/// Elementary functions callable from the DSL. All are C-infinity on their domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub(crate) fn apply(self, x: f64) -> Result<f64, EvalError> {
        let y = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Ln => {
                if x <= 0.0 {
                    return Err(EvalError::Domain(format!("ln of non-positive value {x}")));
                }
                x.ln()
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(EvalError::Domain(format!("sqrt of negative value {x}")));
                }
                x.sqrt()
            }
            Func::Tanh => x.tanh(),
        };
        if y.is_nan() && !x.is_nan() {
            return Err(EvalError::Domain(format!("{}({x}) is undefined", self.name())));
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// A right-hand-side expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    Constant(f64),
    Variable(String),
    Unary(UnaryOp, Box<ExprNode>),
    Binary(BinOp, Box<ExprNode>, Box<ExprNode>),
    Call(Func, Box<ExprNode>),
}

/// Anything that can resolve a variable name to a value.
pub trait Binding {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl Binding for HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Binding for BTreeMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Binding for [(&str, f64)] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Binding for [(&str, f64); N] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.as_slice().lookup(name)
    }
}

pub(crate) fn apply_binary(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    let y = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(EvalError::Domain(format!("division of {a} by zero")));
            }
            a / b
        }
        BinOp::Pow => {
            if a == 0.0 && b < 0.0 {
                return Err(EvalError::Domain(format!("zero raised to negative power {b}")));
            }
            if a < 0.0 && b.fract() != 0.0 && b.is_finite() {
                return Err(EvalError::Domain(format!(
                    "negative base {a} raised to non-integer power {b}"
                )));
            }
            a.powf(b)
        }
    };
    if y.is_nan() && !a.is_nan() && !b.is_nan() {
        return Err(EvalError::Domain(format!("{a} {} {b} is undefined", op.symbol())));
    }
    Ok(y)
}

impl ExprNode {
    pub fn constant(value: f64) -> Self {
        ExprNode::Constant(value)
    }

    pub fn var(name: impl Into<String>) -> Self {
        ExprNode::Variable(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(child: ExprNode) -> Self {
        ExprNode::Unary(UnaryOp::Neg, Box::new(child))
    }

    pub fn binary(op: BinOp, left: ExprNode, right: ExprNode) -> Self {
        ExprNode::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn call(func: Func, arg: ExprNode) -> Self {
        ExprNode::Call(func, Box::new(arg))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ExprNode::Constant(c) => Some(*c),
            _ => None,
        }
    }

    /// Names of all variables appearing in the tree.
    pub fn free_vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            ExprNode::Constant(_) => {}
            ExprNode::Variable(name) => {
                out.insert(name.as_str());
            }
            ExprNode::Unary(_, c) | ExprNode::Call(_, c) => c.collect_vars(out),
            ExprNode::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        match self {
            ExprNode::Constant(_) => false,
            ExprNode::Variable(name) => name == var,
            ExprNode::Unary(_, c) | ExprNode::Call(_, c) => c.depends_on(var),
            ExprNode::Binary(_, l, r) => l.depends_on(var) || r.depends_on(var),
        }
    }

    /// Evaluates in IEEE double precision. Domain violations are errors, never NaN.
    pub fn eval<B: Binding + ?Sized>(&self, binding: &B) -> Result<f64, EvalError> {
        match self {
            ExprNode::Constant(c) => Ok(*c),
            ExprNode::Variable(name) => binding
                .lookup(name)
                .ok_or_else(|| EvalError::Unbound(name.clone())),
            ExprNode::Unary(UnaryOp::Neg, c) => Ok(-c.eval(binding)?),
            ExprNode::Binary(op, l, r) => apply_binary(*op, l.eval(binding)?, r.eval(binding)?),
            ExprNode::Call(f, arg) => f.apply(arg.eval(binding)?),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            ExprNode::Constant(c) if c.is_sign_negative() => PREC_UNARY,
            ExprNode::Constant(_) | ExprNode::Variable(_) | ExprNode::Call(..) => PREC_ATOM,
            ExprNode::Unary(..) => PREC_UNARY,
            ExprNode::Binary(op, ..) => op.precedence(),
        }
    }
}

/// Evaluates `expr` under `binding`.
pub fn eval_expr<B: Binding + ?Sized>(expr: &ExprNode, binding: &B) -> Result<f64, EvalError> {
    expr.eval(binding)
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_POWER: u8 = 3;
const PREC_UNARY: u8 = 4;
const PREC_ATOM: u8 = 5;

fn write_with_min(f: &mut fmt::Formatter<'_>, e: &ExprNode, min: u8) -> fmt::Result {
    if e.precedence() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

// Printing mirrors the grammar so that reparsing rebuilds the same tree:
// unary minus binds tighter than `^`, `^` is right-associative, and the
// parser folds `-<number>` into a negative constant.
impl fmt::Display for ExprNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprNode::Constant(c) => write!(f, "{c:?}"),
            ExprNode::Variable(name) => f.write_str(name),
            ExprNode::Unary(UnaryOp::Neg, child) => {
                f.write_str("-")?;
                if matches!(**child, ExprNode::Constant(_)) {
                    write!(f, "({child})")
                } else {
                    write_with_min(f, child, PREC_UNARY)
                }
            }
            ExprNode::Binary(op, l, r) => {
                let (lmin, rmin) = match op {
                    BinOp::Add => (PREC_SUM, PREC_PRODUCT),
                    BinOp::Sub => (PREC_SUM, PREC_PRODUCT),
                    BinOp::Mul => (PREC_PRODUCT, PREC_POWER),
                    BinOp::Div => (PREC_PRODUCT, PREC_POWER),
                    BinOp::Pow => (PREC_UNARY, PREC_POWER),
                };
                write_with_min(f, l, lmin)?;
                let sep = if *op == BinOp::Pow { "^" } else { op.symbol() };
                if *op == BinOp::Pow {
                    f.write_str(sep)?;
                } else {
                    write!(f, " {sep} ")?;
                }
                write_with_min(f, r, rmin)
            }
            ExprNode::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

/// An expression with variables resolved to slot indices, for repeated evaluation.
#[derive(Debug, Clone)]
pub(crate) enum SlotExpr {
    Const(f64),
    Slot(usize),
    Neg(Box<SlotExpr>),
    Binary(BinOp, Box<SlotExpr>, Box<SlotExpr>),
    Call(Func, Box<SlotExpr>),
}

impl SlotExpr {
    /// Panics if a variable has no slot; callers validate free variables first.
    pub(crate) fn compile(expr: &ExprNode, slot_of: &impl Fn(&str) -> Option<usize>) -> SlotExpr {
        match expr {
            ExprNode::Constant(c) => SlotExpr::Const(*c),
            ExprNode::Variable(name) => {
                SlotExpr::Slot(slot_of(name).unwrap_or_else(|| panic!("no slot for `{name}`")))
            }
            ExprNode::Unary(UnaryOp::Neg, c) => SlotExpr::Neg(Box::new(Self::compile(c, slot_of))),
            ExprNode::Binary(op, l, r) => SlotExpr::Binary(
                *op,
                Box::new(Self::compile(l, slot_of)),
                Box::new(Self::compile(r, slot_of)),
            ),
            ExprNode::Call(func, a) => SlotExpr::Call(*func, Box::new(Self::compile(a, slot_of))),
        }
    }

    pub(crate) fn eval(&self, slots: &[f64]) -> Result<f64, EvalError> {
        match self {
            SlotExpr::Const(c) => Ok(*c),
            SlotExpr::Slot(i) => Ok(slots[*i]),
            SlotExpr::Neg(c) => Ok(-c.eval(slots)?),
            SlotExpr::Binary(op, l, r) => apply_binary(*op, l.eval(slots)?, r.eval(slots)?),
            SlotExpr::Call(f, a) => f.apply(a.eval(slots)?),
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        matches!(self, SlotExpr::Const(c) if *c == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> ExprNode {
        ExprNode::var(name)
    }

    #[test]
    fn cubic_term_at_three() {
        // v - v^3/3 at v = 3
        let e = ExprNode::binary(
            BinOp::Sub,
            v("v"),
            ExprNode::binary(
                BinOp::Div,
                ExprNode::binary(BinOp::Pow, v("v"), ExprNode::constant(3.0)),
                ExprNode::constant(3.0),
            ),
        );
        assert_eq!(eval_expr(&e, &[("v", 3.0)]).unwrap(), -6.0);
    }

    #[test]
    fn unbound_variable_is_reported() {
        let e = ExprNode::binary(BinOp::Add, v("x"), v("y"));
        assert_eq!(
            eval_expr(&e, &[("x", 1.0)]),
            Err(EvalError::Unbound("y".into()))
        );
    }

    #[test]
    fn domain_errors_are_not_nan() {
        let ln = ExprNode::call(Func::Ln, v("x"));
        assert!(matches!(ln.eval(&[("x", 0.0)]), Err(EvalError::Domain(_))));
        assert!(matches!(ln.eval(&[("x", -1.0)]), Err(EvalError::Domain(_))));
        let sqrt = ExprNode::call(Func::Sqrt, v("x"));
        assert!(matches!(sqrt.eval(&[("x", -1e-300)]), Err(EvalError::Domain(_))));
        let div = ExprNode::binary(BinOp::Div, ExprNode::constant(1.0), v("x"));
        assert!(matches!(div.eval(&[("x", 0.0)]), Err(EvalError::Domain(_))));
        let pow = ExprNode::binary(BinOp::Pow, v("x"), ExprNode::constant(0.5));
        assert!(matches!(pow.eval(&[("x", -2.0)]), Err(EvalError::Domain(_))));
        let inf_minus_inf = ExprNode::binary(
            BinOp::Sub,
            ExprNode::call(Func::Exp, v("x")),
            ExprNode::call(Func::Exp, v("x")),
        );
        assert!(matches!(
            inf_minus_inf.eval(&[("x", 1000.0)]),
            Err(EvalError::Domain(_))
        ));
    }

    #[test]
    fn integer_power_of_negative_base() {
        let e = ExprNode::binary(BinOp::Pow, v("x"), ExprNode::constant(3.0));
        assert_eq!(e.eval(&[("x", -2.0)]).unwrap(), -8.0);
    }

    #[test]
    fn display_parenthesizes_by_precedence() {
        let e = ExprNode::binary(
            BinOp::Mul,
            ExprNode::binary(BinOp::Sub, v("a"), v("b")),
            ExprNode::binary(BinOp::Pow, v("c"), ExprNode::constant(2.0)),
        );
        assert_eq!(e.to_string(), "(a - b) * c^2.0");
        let nested = ExprNode::binary(
            BinOp::Sub,
            v("a"),
            ExprNode::binary(BinOp::Sub, v("b"), v("c")),
        );
        assert_eq!(nested.to_string(), "a - (b - c)");
    }
}
