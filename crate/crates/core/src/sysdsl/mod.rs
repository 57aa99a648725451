//! System definitions: parsing, evaluation and symbolic derivative fields.

mod deriv;
mod expr;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use deriv::{differentiate, simplify};
pub use expr::{eval_expr, BinOp, Binding, EvalError, ExprNode, Func, UnaryOp};
pub use parse::{parse_expr, parse_system};

use crate::denselin::Matrix;
use expr::SlotExpr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: undeclared identifier `{name}`")]
    Undeclared { name: String, line: usize },
    #[error("line {line}: duplicate declaration of `{name}`")]
    Duplicate { name: String, line: usize },
    #[error("{states} state(s) declared but {equations} equation(s) given")]
    CountMismatch { states: usize, equations: usize },
    #[error("missing `{0}` declaration")]
    Missing(&'static str),
    #[error("`{0}` is not a declared parameter")]
    UnknownParam(String),
}

/// A parsed autonomous system `dx/dt = f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDef {
    pub name: String,
    pub states: Vec<String>,
    pub params: BTreeMap<String, f64>,
    /// `rhs[i]` is the time derivative of `states[i]`.
    pub rhs: Vec<ExprNode>,
    /// Equilibria the author of the system file claims exist (from `#@expect` lines).
    pub expected_equilibria: Vec<Vec<f64>>,
}

impl SystemDef {
    pub fn new(
        name: impl Into<String>,
        states: Vec<String>,
        params: BTreeMap<String, f64>,
        rhs: Vec<ExprNode>,
    ) -> Result<Self, DslError> {
        if states.is_empty() {
            return Err(DslError::Missing("state"));
        }
        if states.len() != rhs.len() {
            return Err(DslError::CountMismatch {
                states: states.len(),
                equations: rhs.len(),
            });
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) || params.contains_key(s) {
                return Err(DslError::Duplicate {
                    name: s.clone(),
                    line: 0,
                });
            }
        }
        for e in &rhs {
            for var in e.free_vars() {
                if !states.iter().any(|s| s == var) && !params.contains_key(var) {
                    return Err(DslError::Undeclared {
                        name: var.to_string(),
                        line: 0,
                    });
                }
            }
        }
        Ok(SystemDef {
            name: name.into(),
            states,
            params,
            rhs,
            expected_equilibria: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Returns a copy with parameter `name` set to `value`.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, DslError> {
        let mut out = self.clone();
        match out.params.get_mut(name) {
            Some(v) => *v = value,
            None => return Err(DslError::UnknownParam(name.to_string())),
        }
        Ok(out)
    }

    /// Binding of states (from `x`) and parameters, for use with [`eval_expr`].
    pub fn binding(&self, x: &[f64]) -> BTreeMap<String, f64> {
        let mut b = self.params.clone();
        for (s, v) in self.states.iter().zip(x) {
            b.insert(s.clone(), *v);
        }
        b
    }
}

impl fmt::Display for SystemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {}", self.name)?;
        for (name, value) in &self.params {
            writeln!(f, "param {name} = {value:?}")?;
        }
        writeln!(f, "state {}", self.states.join(", "))?;
        for point in &self.expected_equilibria {
            let coords: Vec<String> = point.iter().map(|v| format!("{v:?}")).collect();
            writeln!(f, "#@expect {}", coords.join(", "))?;
        }
        for (s, e) in self.states.iter().zip(&self.rhs) {
            writeln!(f, "d{s}/dt = {e}")?;
        }
        Ok(())
    }
}

/// A matrix of expressions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<ExprNode>,
}

impl SymMatrix {
    pub fn get(&self, i: usize, j: usize) -> &ExprNode {
        &self.entries[i * self.cols + j]
    }

    /// Evaluates every entry under `binding`.
    pub fn eval<B: Binding + ?Sized>(&self, binding: &B) -> Result<Matrix, EvalError> {
        let data = self
            .entries
            .iter()
            .map(|e| e.eval(binding))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix::from_row_major(self.rows, self.cols, data))
    }
}

/// Layout convention for second derivatives of the vector field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianMode {
    /// One symmetric matrix per component: `(H_k)_ij = d2 f_k / dx_i dx_j`.
    Tensor,
    /// A single matrix with entry `(i, j) = d2 f_i / dx_i dx_j`.
    PaperRow,
}

impl HessianMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HessianMode::Tensor => "tensor",
            HessianMode::PaperRow => "paper-row",
        }
    }
}

impl std::str::FromStr for HessianMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tensor" => Ok(HessianMode::Tensor),
            "paper-row" => Ok(HessianMode::PaperRow),
            other => Err(format!("unknown hessian mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianBundle {
    pub mode: HessianMode,
    pub matrices: Vec<SymMatrix>,
}

/// Symbolic Jacobian: entry `(i, j)` is `d rhs[i] / d states[j]`.
pub fn jacobian_sym(sys: &SystemDef) -> SymMatrix {
    let n = sys.dim();
    let entries = sys
        .rhs
        .iter()
        .flat_map(|f| sys.states.iter().map(move |x| differentiate(f, x)))
        .collect();
    SymMatrix {
        rows: n,
        cols: n,
        entries,
    }
}

fn hessian_from_jacobian(sys: &SystemDef, jac: &SymMatrix, mode: HessianMode) -> HessianBundle {
    let n = sys.dim();
    let matrices = match mode {
        HessianMode::Tensor => (0..n)
            .map(|k| {
                let mut entries = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        entries.push(differentiate(jac.get(k, i), &sys.states[j]));
                    }
                }
                SymMatrix {
                    rows: n,
                    cols: n,
                    entries,
                }
            })
            .collect(),
        HessianMode::PaperRow => {
            let mut entries = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    entries.push(differentiate(jac.get(i, i), &sys.states[j]));
                }
            }
            vec![SymMatrix {
                rows: n,
                cols: n,
                entries,
            }]
        }
    };
    HessianBundle { mode, matrices }
}

/// Symbolic second-derivative field in the requested layout.
pub fn hessian_sym(sys: &SystemDef, mode: HessianMode) -> HessianBundle {
    hessian_from_jacobian(sys, &jacobian_sym(sys), mode)
}

#[derive(Debug, Clone)]
struct CompiledMatrix {
    n: usize,
    entries: Vec<SlotExpr>,
}

impl CompiledMatrix {
    fn new(m: &SymMatrix, slot_of: &impl Fn(&str) -> Option<usize>) -> Self {
        CompiledMatrix {
            n: m.rows,
            entries: m
                .entries
                .iter()
                .map(|e| SlotExpr::compile(e, slot_of))
                .collect(),
        }
    }

    fn eval(&self, slots: &[f64]) -> Result<Matrix, EvalError> {
        let data = self
            .entries
            .iter()
            .map(|e| e.eval(slots))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix::from_row_major(self.n, self.n, data))
    }

    fn is_zero(&self) -> bool {
        self.entries.iter().all(SlotExpr::is_zero)
    }
}

#[derive(Debug)]
struct Symbolic {
    system: SystemDef,
    jacobian: SymMatrix,
    tensor: HessianBundle,
    paper_row: HessianBundle,
    rhs_c: Vec<SlotExpr>,
    jacobian_c: CompiledMatrix,
    tensor_c: Vec<CompiledMatrix>,
    paper_row_c: CompiledMatrix,
}

/// A system with its derivative fields differentiated once and compiled for
/// fast evaluation. Parameters are bound at evaluation time, so
/// [`VectorField::with_param`] reuses the symbolic work.
#[derive(Debug, Clone)]
pub struct VectorField {
    sym: Arc<Symbolic>,
    params: Vec<f64>,
}

impl VectorField {
    pub fn new(sys: &SystemDef) -> Self {
        let n = sys.dim();
        let names: Vec<&str> = sys.params.keys().map(String::as_str).collect();
        let slot_of = |name: &str| {
            sys.states
                .iter()
                .position(|s| s == name)
                .or_else(|| names.iter().position(|p| *p == name).map(|i| n + i))
        };
        let jacobian = jacobian_sym(sys);
        let tensor = hessian_from_jacobian(sys, &jacobian, HessianMode::Tensor);
        let paper_row = hessian_from_jacobian(sys, &jacobian, HessianMode::PaperRow);
        let rhs_c = sys.rhs.iter().map(|e| SlotExpr::compile(e, &slot_of)).collect();
        let jacobian_c = CompiledMatrix::new(&jacobian, &slot_of);
        let tensor_c = tensor
            .matrices
            .iter()
            .map(|m| CompiledMatrix::new(m, &slot_of))
            .collect();
        let paper_row_c = CompiledMatrix::new(&paper_row.matrices[0], &slot_of);
        VectorField {
            params: sys.params.values().copied().collect(),
            sym: Arc::new(Symbolic {
                system: sys.clone(),
                jacobian,
                tensor,
                paper_row,
                rhs_c,
                jacobian_c,
                tensor_c,
                paper_row_c,
            }),
        }
    }

    /// The system this field was built from, with current parameter values.
    pub fn system(&self) -> SystemDef {
        let mut sys = self.sym.system.clone();
        for (v, p) in sys.params.values_mut().zip(&self.params) {
            *v = *p;
        }
        sys
    }

    pub fn name(&self) -> &str {
        &self.sym.system.name
    }

    pub fn dim(&self) -> usize {
        self.sym.system.dim()
    }

    pub fn state_names(&self) -> &[String] {
        &self.sym.system.states
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        let i = self.sym.system.params.keys().position(|k| k == name)?;
        Some(self.params[i])
    }

    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, DslError> {
        let i = self
            .sym
            .system
            .params
            .keys()
            .position(|k| k == name)
            .ok_or_else(|| DslError::UnknownParam(name.to_string()))?;
        let mut out = self.clone();
        out.params[i] = value;
        Ok(out)
    }

    pub fn jacobian_sym(&self) -> &SymMatrix {
        &self.sym.jacobian
    }

    pub fn hessian_sym(&self, mode: HessianMode) -> &HessianBundle {
        match mode {
            HessianMode::Tensor => &self.sym.tensor,
            HessianMode::PaperRow => &self.sym.paper_row,
        }
    }

    fn slots(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "state vector has wrong dimension");
        let mut s = Vec::with_capacity(x.len() + self.params.len());
        s.extend_from_slice(x);
        s.extend_from_slice(&self.params);
        s
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let slots = self.slots(x);
        self.sym.rhs_c.iter().map(|e| e.eval(&slots)).collect()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let slots = self.slots(x);
        for (o, e) in out.iter_mut().zip(&self.sym.rhs_c) {
            *o = e.eval(&slots)?;
        }
        Ok(())
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix, EvalError> {
        self.sym.jacobian_c.eval(&self.slots(x))
    }

    /// Evaluated Hessians: `n` matrices in tensor mode, one in paper-row mode.
    pub fn hessians(&self, x: &[f64], mode: HessianMode) -> Result<Vec<Matrix>, EvalError> {
        let slots = self.slots(x);
        match mode {
            HessianMode::Tensor => self.sym.tensor_c.iter().map(|m| m.eval(&slots)).collect(),
            HessianMode::PaperRow => Ok(vec![self.sym.paper_row_c.eval(&slots)?]),
        }
    }

    /// True when every second derivative simplified to the constant zero.
    pub fn hessian_is_identically_zero(&self) -> bool {
        self.sym.tensor_c.iter().all(CompiledMatrix::is_zero)
    }
}
