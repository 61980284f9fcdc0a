//! Closed-form integration over `[0, 1]` for integrands that are Laurent
//! polynomials (with rational exponents) in the integration variable.

use std::collections::BTreeMap;

use super::expr::{Expr, Func, Rational};

const TERM_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitIntegral {
    /// The integrand is not a finite sum of powers of the variable.
    NotPolynomial,
    /// A term `u^k` with `k <= -1` makes the integral diverge at 0.
    Divergent,
}

type Laurent = BTreeMap<Rational, Expr>;

fn single(k: Rational, c: Expr) -> Laurent {
    let mut m = BTreeMap::new();
    m.insert(k, c);
    m
}

fn add_into(acc: &mut Laurent, k: Rational, c: Expr) {
    let entry = acc.remove(&k);
    let sum = match entry {
        Some(prev) => Expr::add(vec![prev, c]),
        None => c,
    };
    if !sum.is_zero() {
        acc.insert(k, sum);
    }
}

fn times(a: &Laurent, b: &Laurent) -> Option<Laurent> {
    if a.len() * b.len() > TERM_CAP * 4 {
        return None;
    }
    let mut out = Laurent::new();
    for (ka, ca) in a {
        for (kb, cb) in b {
            add_into(&mut out, ka + kb, Expr::mul(vec![ca.clone(), cb.clone()]));
        }
    }
    (out.len() <= TERM_CAP).then_some(out)
}

fn monomial(m: &Laurent) -> Option<(Rational, &Expr)> {
    if m.len() == 1 {
        m.iter().next().map(|(k, c)| (*k, c))
    } else {
        None
    }
}

/// Decomposes canonical `e` as `Σ c_k var^k` with `var`-free coefficients.
fn laurent(e: &Expr, var: &str) -> Option<Laurent> {
    if !e.contains_symbol(var) {
        return Some(single(Rational::from_integer(0), e.clone()));
    }
    match e {
        Expr::Sym(_) => Some(single(Rational::from_integer(1), Expr::one())),
        Expr::Add(ts) => {
            let mut acc = Laurent::new();
            for t in ts {
                for (k, c) in laurent(t, var)? {
                    add_into(&mut acc, k, c);
                }
                if acc.len() > TERM_CAP {
                    return None;
                }
            }
            Some(acc)
        }
        Expr::Mul(fs) => {
            let mut acc = single(Rational::from_integer(0), Expr::one());
            for f in fs {
                acc = times(&acc, &laurent(f, var)?)?;
            }
            Some(acc)
        }
        Expr::Pow(b, r) => {
            let lb = laurent(b, var)?;
            if let Some((k, c)) = monomial(&lb) {
                // valid for var > 0, where var^k > 0
                return Some(single(k * r, Expr::pow(c.clone(), *r)));
            }
            if r.is_integer() && *r.numer() > 0 && *r.numer() <= 16 {
                let mut acc = lb.clone();
                for _ in 1..*r.numer() {
                    acc = times(&acc, &lb)?;
                }
                return Some(acc);
            }
            None
        }
        Expr::Func(Func::Sqrt, a) => {
            let la = laurent(a, var)?;
            let (k, c) = monomial(&la)?;
            let half = Rational::new(1, 2);
            Some(single(k * half, Expr::func(Func::Sqrt, c.clone())))
        }
        Expr::Func(Func::Abs, a) => {
            let la = laurent(a, var)?;
            let (k, c) = monomial(&la)?;
            Some(single(k, Expr::func(Func::Abs, c.clone())))
        }
        _ => None,
    }
}

/// `∫₀¹ body d(var)` in closed form, when `body` is a Laurent polynomial in
/// `var` whose exponents all exceed `-1`.
pub fn integrate_unit(body: &Expr, var: &str) -> Result<Expr, UnitIntegral> {
    let body = body.simplify();
    let terms = laurent(&body, var).ok_or(UnitIntegral::NotPolynomial)?;
    let mut out = Vec::with_capacity(terms.len());
    for (k, c) in terms {
        let k1 = k + Rational::from_integer(1);
        if *k1.numer() <= 0 {
            return Err(UnitIntegral::Divergent);
        }
        let w = *k1.denom() as f64 / *k1.numer() as f64;
        out.push(Expr::mul(vec![Expr::Num(w), c]));
    }
    Ok(Expr::add(out))
}

/// Closed form when available, otherwise an `Integral` node.
pub fn integrate_unit_or_node(body: &Expr, var: &str) -> (Expr, bool) {
    match integrate_unit(body, var) {
        Ok(e) => (e, true),
        Err(_) => (Expr::integral(var, body.simplify()), false),
    }
}

/// Replaces each symbol in `names` by `scale * symbol`.
pub fn scale_args(e: &Expr, names: &[String], scale: &Expr) -> Expr {
    e.substitute(&|s| {
        names
            .iter()
            .any(|n| n == s)
            .then(|| Expr::mul(vec![scale.clone(), Expr::sym(s)]))
    })
}
