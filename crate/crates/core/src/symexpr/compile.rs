//! Stack-machine form of an expression over a fixed slot layout.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::eval::{checked_func, checked_pow, domain, DomainKind, EvalError};
use super::expr::{Expr, Func, Rational};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Load(usize),
    Add(usize),
    Mul(usize),
    Neg,
    Sub,
    Div(usize),
    Square,
    Recip(usize),
    Pow(Rational, usize),
    Func(Func, usize),
    Integral {
        slot: usize,
        body: Arc<[Op]>,
        src: usize,
    },
}

/// An expression compiled against an ordered list of variable names, with
/// constants (typically parameters) folded in.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    ops: Arc<[Op]>,
    n_vars: usize,
    n_slots: usize,
    sources: Arc<[Expr]>,
}

struct Compiler<'a> {
    slots: Vec<String>,
    consts: &'a BTreeMap<String, f64>,
    sources: Vec<Expr>,
    n_slots: usize,
}

impl CompiledExpr {
    /// Compiles `e`; every free symbol must be in `vars` or `consts`.
    pub fn new(
        e: &Expr,
        vars: &[String],
        consts: &BTreeMap<String, f64>,
    ) -> Result<CompiledExpr, EvalError> {
        let mut c = Compiler {
            slots: vars.to_vec(),
            consts,
            sources: Vec::new(),
            n_slots: vars.len(),
        };
        c.source(e);
        let mut ops = Vec::new();
        c.emit(e, &mut ops)?;
        Ok(CompiledExpr {
            ops: ops.into(),
            n_vars: vars.len(),
            n_slots: c.n_slots,
            sources: c.sources.into(),
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// The value when the expression is a plain constant.
    pub fn constant(&self) -> Option<f64> {
        match &*self.ops {
            [Op::Const(v)] => Some(*v),
            _ => None,
        }
    }

    /// As [`CompiledExpr::eval`], reusing a caller-provided stack.
    pub fn eval_with(&self, x: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        if self.n_slots != self.n_vars {
            return self.eval(x);
        }
        let v = self.run(&self.ops, x, stack)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain(DomainKind::NonFinite, &self.sources[0]))
        }
    }

    /// Evaluates at `x`, which must have one entry per variable.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        debug_assert_eq!(x.len(), self.n_vars);
        let mut stack = Vec::with_capacity(16);
        let v = if self.n_slots == self.n_vars {
            self.run(&self.ops, x, &mut stack)?
        } else {
            let mut regs = x.to_vec();
            regs.resize(self.n_slots, 0.0);
            self.run_mut(&self.ops, &mut regs, &mut stack)?
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain(DomainKind::NonFinite, &self.sources[0]))
        }
    }

    /// The source expression.
    pub fn expr(&self) -> &Expr {
        &self.sources[0]
    }

    fn run(&self, ops: &[Op], regs: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        stack.clear();
        for op in ops {
            self.step(op, regs, stack)?;
        }
        Ok(stack.pop().unwrap_or(0.0))
    }

    fn run_mut(
        &self,
        ops: &[Op],
        regs: &mut Vec<f64>,
        stack: &mut Vec<f64>,
    ) -> Result<f64, EvalError> {
        stack.clear();
        for op in ops {
            if let Op::Integral { slot, body, src } = op {
                let rule = GaussLegendre::standard();
                let mut inner = Vec::with_capacity(16);
                let v = rule.integrate_adaptive(&mut |u| {
                    regs[*slot] = u;
                    self.run_mut(body, regs, &mut inner)
                })?;
                if !v.is_finite() {
                    return Err(domain(DomainKind::NonFinite, &self.sources[*src]));
                }
                stack.push(v);
            } else {
                self.step(op, regs, stack)?;
            }
        }
        Ok(stack.pop().unwrap_or(0.0))
    }

    #[inline]
    fn step(&self, op: &Op, regs: &[f64], stack: &mut Vec<f64>) -> Result<(), EvalError> {
        match op {
            Op::Const(v) => stack.push(*v),
            Op::Load(i) => stack.push(regs[*i]),
            Op::Add(n) => {
                let at = stack.len() - n;
                let s: f64 = stack[at..].iter().sum();
                stack.truncate(at);
                stack.push(s);
            }
            Op::Mul(n) => {
                let at = stack.len() - n;
                let p: f64 = stack[at..].iter().product();
                stack.truncate(at);
                stack.push(p);
            }
            Op::Neg => {
                let v = stack.last_mut().unwrap();
                *v = -*v;
            }
            Op::Sub => {
                let b = stack.pop().unwrap();
                *stack.last_mut().unwrap() -= b;
            }
            Op::Div(src) => {
                let b = stack.pop().unwrap();
                if b == 0.0 {
                    return Err(domain(DomainKind::DivisionByZero, &self.sources[*src]));
                }
                *stack.last_mut().unwrap() /= b;
            }
            Op::Square => {
                let v = stack.last_mut().unwrap();
                *v *= *v;
            }
            Op::Recip(src) => {
                let v = stack.last_mut().unwrap();
                if *v == 0.0 {
                    return Err(domain(DomainKind::DivisionByZero, &self.sources[*src]));
                }
                *v = 1.0 / *v;
            }
            Op::Pow(r, src) => {
                let v = stack.last_mut().unwrap();
                *v = checked_pow(*v, *r).map_err(|k| domain(k, &self.sources[*src]))?;
            }
            Op::Func(f, src) => {
                let v = stack.last_mut().unwrap();
                *v = checked_func(*f, *v).map_err(|k| domain(k, &self.sources[*src]))?;
            }
            Op::Integral { .. } => unreachable!("integrals run through run_mut"),
        }
        Ok(())
    }
}

impl Compiler<'_> {
    fn source(&mut self, e: &Expr) -> usize {
        self.sources.push(e.clone());
        self.sources.len() - 1
    }

    fn emit(&mut self, e: &Expr, ops: &mut Vec<Op>) -> Result<(), EvalError> {
        match e {
            Expr::Num(v) => ops.push(Op::Const(*v)),
            Expr::Sym(s) => {
                if let Some(i) = self.slots.iter().rposition(|n| n == &**s) {
                    ops.push(Op::Load(i));
                } else if let Some(v) = self.consts.get(&**s) {
                    ops.push(Op::Const(*v));
                } else {
                    return Err(EvalError::Unbound(s.to_string()));
                }
            }
            Expr::Neg(a) => {
                self.emit(a, ops)?;
                ops.push(Op::Neg);
            }
            Expr::Add(xs) => {
                for x in xs {
                    self.emit(x, ops)?;
                }
                ops.push(Op::Add(xs.len()));
            }
            Expr::Mul(xs) => {
                for x in xs {
                    self.emit(x, ops)?;
                }
                ops.push(Op::Mul(xs.len()));
            }
            Expr::Sub(a, b) => {
                self.emit(a, ops)?;
                self.emit(b, ops)?;
                ops.push(Op::Sub);
            }
            Expr::Div(a, b) => {
                self.emit(a, ops)?;
                self.emit(b, ops)?;
                let src = self.source(e);
                ops.push(Op::Div(src));
            }
            Expr::Pow(b, r) => {
                self.emit(b, ops)?;
                if *r == Rational::from_integer(2) {
                    ops.push(Op::Square);
                } else {
                    let src = self.source(e);
                    if *r == Rational::from_integer(-1) {
                        ops.push(Op::Recip(src));
                    } else {
                        ops.push(Op::Pow(*r, src));
                    }
                }
            }
            Expr::Func(f, a) => {
                self.emit(a, ops)?;
                let src = self.source(e);
                ops.push(Op::Func(*f, src));
            }
            Expr::Integral { var, body } => {
                let slot = self.slots.len();
                self.slots.push(var.to_string());
                self.n_slots = self.n_slots.max(self.slots.len());
                let mut inner = Vec::new();
                let r = self.emit(body, &mut inner);
                self.slots.pop();
                r?;
                let src = self.source(e);
                ops.push(Op::Integral {
                    slot,
                    body: inner.into(),
                    src,
                });
            }
        }
        Ok(())
    }
}
