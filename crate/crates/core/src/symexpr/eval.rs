use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::expr::{real_pow, Expr, Func, Rational};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    EvenRootOfNegative,
    NonFinite,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::LogOfNonPositive => "logarithm of a non-positive value",
            DomainKind::SqrtOfNegative => "square root of a negative value",
            DomainKind::EvenRootOfNegative => "even root of a negative value",
            DomainKind::NonFinite => "non-finite value",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("{kind} in `{expr}`")]
    Domain { kind: DomainKind, expr: String },
}

impl EvalError {
    pub fn is_domain(&self) -> bool {
        matches!(self, EvalError::Domain { .. })
    }
}

pub(crate) fn domain(kind: DomainKind, e: &Expr) -> EvalError {
    EvalError::Domain {
        kind,
        expr: e.to_string(),
    }
}

/// Power with the error classification used throughout the crate.
pub(crate) fn checked_pow(x: f64, r: Rational) -> Result<f64, DomainKind> {
    match real_pow(x, r) {
        Some(v) => Ok(v),
        None if x == 0.0 && *r.numer() < 0 => Err(DomainKind::DivisionByZero),
        None if x < 0.0 && *r.denom() % 2 == 0 => Err(DomainKind::EvenRootOfNegative),
        None => Err(DomainKind::NonFinite),
    }
}

pub(crate) fn checked_func(f: Func, x: f64) -> Result<f64, DomainKind> {
    match f.apply(x) {
        Some(v) => Ok(v),
        None => Err(match f {
            Func::Ln if x <= 0.0 => DomainKind::LogOfNonPositive,
            Func::Sqrt if x < 0.0 => DomainKind::SqrtOfNegative,
            _ => DomainKind::NonFinite,
        }),
    }
}

impl Expr {
    /// Tree-walking evaluation. Prefer [`super::CompiledExpr`] in hot loops.
    pub fn eval(&self, bindings: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Sym(s) => bindings(s).ok_or_else(|| EvalError::Unbound(s.to_string()))?,
            Expr::Neg(a) => -a.eval(bindings)?,
            Expr::Add(ts) => {
                let mut acc = 0.0;
                for t in ts {
                    acc += t.eval(bindings)?;
                }
                acc
            }
            Expr::Sub(a, b) => a.eval(bindings)? - b.eval(bindings)?,
            Expr::Mul(fs) => {
                let mut acc = 1.0;
                for f in fs {
                    acc *= f.eval(bindings)?;
                }
                acc
            }
            Expr::Div(a, b) => {
                let d = b.eval(bindings)?;
                if d == 0.0 {
                    return Err(domain(DomainKind::DivisionByZero, self));
                }
                a.eval(bindings)? / d
            }
            Expr::Pow(b, r) => checked_pow(b.eval(bindings)?, *r).map_err(|k| domain(k, self))?,
            Expr::Func(f, a) => checked_func(*f, a.eval(bindings)?).map_err(|k| domain(k, self))?,
            Expr::Integral { var, body } => {
                let rule = GaussLegendre::standard();
                rule.integrate_adaptive(&mut |u| {
                    body.eval(&|s: &str| if s == &**var { Some(u) } else { bindings(s) })
                })?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain(DomainKind::NonFinite, self))
        }
    }

    pub fn eval_map(&self, bindings: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
        self.eval(&|s| bindings.get(s).copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{parse, SymbolEnv};

    fn env() -> SymbolEnv {
        SymbolEnv::new(&["x", "y"], &[("a", 0.5)]).unwrap()
    }

    fn at(src: &str, pairs: &[(&str, f64)]) -> Result<f64, EvalError> {
        let e = parse(src, &env()).unwrap();
        let m: BTreeMap<String, f64> = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        e.eval_map(&m)
    }

    #[test]
    fn evaluates_raw_and_simplified_trees() {
        let v = at("(x + 1)^2 / y", &[("x", 1.0), ("y", 2.0)]).unwrap();
        assert_eq!(v, 2.0);
        let e = parse("(x + 1)^2 / y", &env()).unwrap().simplify();
        let v2 = e.eval(&|s| match s {
            "x" => Some(1.0),
            "y" => Some(2.0),
            _ => None,
        });
        assert_eq!(v2, Ok(2.0));
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let err = at("1 + ln(x)", &[("x", -1.0)]).unwrap_err();
        assert_eq!(
            err,
            EvalError::Domain {
                kind: DomainKind::LogOfNonPositive,
                expr: "ln(x)".into()
            }
        );
        let err = at("x/y", &[("x", 1.0), ("y", 0.0)]).unwrap_err();
        assert!(matches!(
            err,
            EvalError::Domain {
                kind: DomainKind::DivisionByZero,
                ..
            }
        ));
        let err = at("x^(1/2)", &[("x", -1.0)]).unwrap_err();
        assert!(matches!(
            err,
            EvalError::Domain {
                kind: DomainKind::EvenRootOfNegative,
                ..
            }
        ));
        assert!(matches!(at("y", &[]), Err(EvalError::Unbound(_))));
    }

    #[test]
    fn integral_nodes_use_quadrature() {
        let e = Expr::integral(
            "_u",
            Expr::func(Func::Exp, Expr::sym("_u") * Expr::sym("x")),
        );
        let v = e.eval(&|s| (s == "x").then_some(2.0)).unwrap();
        assert!((v - (2f64.exp() - 1.0) / 2.0).abs() < 1e-13);
    }
}
