//! Symbolic differentiation and local simplification.

use super::expr::{apply_binary, BinOp, ExprNode, Func, UnaryOp};

fn c(value: f64) -> ExprNode {
    ExprNode::Constant(value)
}

fn add(a: ExprNode, b: ExprNode) -> ExprNode {
    ExprNode::binary(BinOp::Add, a, b)
}

fn sub(a: ExprNode, b: ExprNode) -> ExprNode {
    ExprNode::binary(BinOp::Sub, a, b)
}

fn mul(a: ExprNode, b: ExprNode) -> ExprNode {
    ExprNode::binary(BinOp::Mul, a, b)
}

fn div(a: ExprNode, b: ExprNode) -> ExprNode {
    ExprNode::binary(BinOp::Div, a, b)
}

fn pow(a: ExprNode, b: ExprNode) -> ExprNode {
    ExprNode::binary(BinOp::Pow, a, b)
}

/// Partial derivative of `expr` with respect to `var`, simplified.
pub fn differentiate(expr: &ExprNode, var: &str) -> ExprNode {
    simplify(&raw_derivative(expr, var))
}

fn raw_derivative(expr: &ExprNode, var: &str) -> ExprNode {
    if !expr.depends_on(var) {
        return c(0.0);
    }
    match expr {
        ExprNode::Constant(_) => c(0.0),
        ExprNode::Variable(name) => c(if name == var { 1.0 } else { 0.0 }),
        ExprNode::Unary(UnaryOp::Neg, inner) => ExprNode::neg(raw_derivative(inner, var)),
        ExprNode::Binary(op, l, r) => {
            let (f, g) = (l.as_ref(), r.as_ref());
            match op {
                BinOp::Add => add(raw_derivative(f, var), raw_derivative(g, var)),
                BinOp::Sub => sub(raw_derivative(f, var), raw_derivative(g, var)),
                BinOp::Mul => add(
                    mul(raw_derivative(f, var), g.clone()),
                    mul(f.clone(), raw_derivative(g, var)),
                ),
                BinOp::Div if !g.depends_on(var) => div(raw_derivative(f, var), g.clone()),
                BinOp::Div => div(
                    sub(
                        mul(raw_derivative(f, var), g.clone()),
                        mul(f.clone(), raw_derivative(g, var)),
                    ),
                    pow(g.clone(), c(2.0)),
                ),
                // Power rule whenever the exponent does not involve `var`; this
                // keeps integer exponents away from ln of a possibly negative base.
                BinOp::Pow if !g.depends_on(var) => mul(
                    mul(g.clone(), pow(f.clone(), sub(g.clone(), c(1.0)))),
                    raw_derivative(f, var),
                ),
                // d(f^g) = f^g * (g' ln f + g f'/f)
                BinOp::Pow => mul(
                    expr.clone(),
                    add(
                        mul(raw_derivative(g, var), ExprNode::call(Func::Ln, f.clone())),
                        div(mul(g.clone(), raw_derivative(f, var)), f.clone()),
                    ),
                ),
            }
        }
        ExprNode::Call(func, arg) => {
            let a = arg.as_ref().clone();
            let outer = match func {
                Func::Sin => ExprNode::call(Func::Cos, a),
                Func::Cos => ExprNode::neg(ExprNode::call(Func::Sin, a)),
                Func::Tan => div(c(1.0), pow(ExprNode::call(Func::Cos, a), c(2.0))),
                Func::Exp => ExprNode::call(Func::Exp, a),
                Func::Ln => div(c(1.0), a),
                Func::Sqrt => div(c(1.0), mul(c(2.0), ExprNode::call(Func::Sqrt, a))),
                Func::Tanh => sub(c(1.0), pow(ExprNode::call(Func::Tanh, a), c(2.0))),
            };
            mul(outer, raw_derivative(arg, var))
        }
    }
}

/// Applies local rewrite rules bottom-up until nothing changes.
pub fn simplify(expr: &ExprNode) -> ExprNode {
    let mut current = expr.clone();
    loop {
        let next = simplify_once(&current);
        if next == current {
            return next;
        }
        current = next;
    }
}

fn fold(value: Result<f64, super::expr::EvalError>) -> Option<ExprNode> {
    match value {
        Ok(v) if v.is_finite() => Some(c(v)),
        _ => None,
    }
}

fn is(e: &ExprNode, value: f64) -> bool {
    matches!(e, ExprNode::Constant(x) if *x == value)
}

fn simplify_once(expr: &ExprNode) -> ExprNode {
    match expr {
        ExprNode::Constant(_) | ExprNode::Variable(_) => expr.clone(),
        ExprNode::Unary(UnaryOp::Neg, inner) => {
            let inner = simplify_once(inner);
            match inner {
                ExprNode::Constant(v) => c(-v),
                ExprNode::Unary(UnaryOp::Neg, x) => *x,
                other => ExprNode::neg(other),
            }
        }
        ExprNode::Call(func, arg) => {
            let arg = simplify_once(arg);
            if let Some(v) = arg.as_constant() {
                if let Some(folded) = fold(func.apply(v)) {
                    return folded;
                }
            }
            ExprNode::call(*func, arg)
        }
        ExprNode::Binary(op, l, r) => {
            let l = simplify_once(l);
            let r = simplify_once(r);
            if let (Some(a), Some(b)) = (l.as_constant(), r.as_constant()) {
                if let Some(folded) = fold(apply_binary(*op, a, b)) {
                    return folded;
                }
            }
            simplify_binary(*op, l, r)
        }
    }
}

fn simplify_binary(op: BinOp, l: ExprNode, r: ExprNode) -> ExprNode {
    match op {
        BinOp::Add => {
            if is(&l, 0.0) {
                return r;
            }
            if is(&r, 0.0) {
                return l;
            }
            if let ExprNode::Unary(UnaryOp::Neg, x) = r {
                return sub(l, *x);
            }
            add(l, r)
        }
        BinOp::Sub => {
            if is(&r, 0.0) {
                return l;
            }
            if is(&l, 0.0) {
                return ExprNode::neg(r);
            }
            if let ExprNode::Unary(UnaryOp::Neg, x) = r {
                return add(l, *x);
            }
            sub(l, r)
        }
        BinOp::Mul => {
            if is(&l, 0.0) || is(&r, 0.0) {
                return c(0.0);
            }
            if is(&l, 1.0) {
                return r;
            }
            if is(&r, 1.0) {
                return l;
            }
            if is(&l, -1.0) {
                return ExprNode::neg(r);
            }
            if is(&r, -1.0) {
                return ExprNode::neg(l);
            }
            // Constants move left and merge: x*k -> k*x, k1*(k2*x) -> (k1*k2)*x.
            if r.as_constant().is_some() {
                return mul(r, l);
            }
            if let (Some(k1), ExprNode::Binary(BinOp::Mul, inner_l, inner_r)) = (l.as_constant(), &r)
            {
                if let Some(k2) = inner_l.as_constant() {
                    return mul(c(k1 * k2), inner_r.as_ref().clone());
                }
            }
            if let ExprNode::Unary(UnaryOp::Neg, x) = &l {
                return ExprNode::neg(mul(x.as_ref().clone(), r));
            }
            if let ExprNode::Unary(UnaryOp::Neg, x) = &r {
                return ExprNode::neg(mul(l, x.as_ref().clone()));
            }
            mul(l, r)
        }
        BinOp::Div => {
            if is(&r, 1.0) {
                return l;
            }
            if is(&l, 0.0) {
                return c(0.0);
            }
            // (k1*x)/k2 -> (k1/k2)*x
            if let (ExprNode::Binary(BinOp::Mul, inner_l, inner_r), Some(k2)) = (&l, r.as_constant())
            {
                if let Some(k1) = inner_l.as_constant() {
                    if k2 != 0.0 {
                        return mul(c(k1 / k2), inner_r.as_ref().clone());
                    }
                }
            }
            if let ExprNode::Unary(UnaryOp::Neg, x) = &l {
                return ExprNode::neg(div(x.as_ref().clone(), r));
            }
            div(l, r)
        }
        BinOp::Pow => {
            if is(&r, 1.0) {
                return l;
            }
            if is(&r, 0.0) {
                return c(1.0);
            }
            pow(l, r)
        }
    }
}
