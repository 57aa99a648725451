//! Generators and oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use hessian_stability::sysdsl::{BinOp, ExprNode, Func};
use proptest::prelude::*;
use proptest::test_runner::Config;

pub fn leaf() -> impl Strategy<Value = ExprNode> {
    prop_oneof![
        (-12i32..=12).prop_map(|k| ExprNode::constant(k as f64 / 4.0)),
        Just(ExprNode::var("x")),
        Just(ExprNode::var("y")),
    ]
}

pub fn one_plus_square(e: ExprNode) -> ExprNode {
    ExprNode::binary(
        BinOp::Add,
        ExprNode::constant(1.0),
        ExprNode::binary(BinOp::Pow, e, ExprNode::constant(2.0)),
    )
}

/// Random expressions in `x` and `y` that are defined everywhere: divisions,
/// logarithms, roots and real powers only ever see `1 + e^2`.
pub fn expr() -> impl Strategy<Value = ExprNode> {
    leaf().prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(ExprNode::neg),
            (inner.clone(), inner.clone(), prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)])
                .prop_map(|(a, b, op)| ExprNode::binary(op, a, b)),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| ExprNode::binary(BinOp::Div, a, one_plus_square(b))),
            (inner.clone(), 2u32..=3)
                .prop_map(|(a, k)| ExprNode::binary(BinOp::Pow, a, ExprNode::constant(k as f64))),
            (inner.clone(), -3i32..=3).prop_map(|(a, k)| ExprNode::binary(
                BinOp::Pow,
                one_plus_square(a),
                ExprNode::constant(k as f64 / 2.0)
            )),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ExprNode::binary(
                BinOp::Pow,
                one_plus_square(a),
                ExprNode::call(Func::Tanh, b)
            )),
            (inner.clone(), prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Tanh), Just(Func::Exp)])
                .prop_map(|(a, f)| ExprNode::call(f, a)),
            (inner.clone(), prop_oneof![Just(Func::Ln), Just(Func::Sqrt)])
                .prop_map(|(a, f)| ExprNode::call(f, one_plus_square(a))),
        ]
    })
}

pub fn at(e: &ExprNode, x: f64, y: f64) -> Option<f64> {
    e.eval(&[("x", x), ("y", y)]).ok().filter(|v| v.is_finite())
}

/// Five-point central difference along `x` (`axis = 0`) or `y`.
pub fn central_difference(e: &ExprNode, x: f64, y: f64, axis: usize) -> Option<f64> {
    let h = 1e-4 * (1.0 + if axis == 0 { x.abs() } else { y.abs() });
    let f = |k: f64| {
        if axis == 0 {
            at(e, x + k * h, y)
        } else {
            at(e, x, y + k * h)
        }
    };
    Some((f(-2.0)? - 8.0 * f(-1.0)? + 8.0 * f(1.0)? - f(2.0)?) / (12.0 * h))
}

pub fn big_config(cases: u32) -> Config {
    Config {
        cases,
        max_global_rejects: 100_000,
        ..Config::default()
    }
}

pub fn linear_system(n: usize, a: &[f64]) -> String {
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut src = format!("system linear\nstate {}\n", names.join(", "));
    for i in 0..n {
        let terms: Vec<String> = (0..n).map(|j| format!("({:?})*{}", a[i * n + j], names[j])).collect();
        src.push_str(&format!("d{}/dt = {}\n", names[i], terms.join(" + ")));
    }
    src
}
