//! Printing in the input grammar, so that canonical expressions survive a
//! parse round trip. `Integral` nodes print as `integral(var, body)`, which
//! the parser deliberately does not accept.

use std::fmt::{self, Write};

use super::expr::{Expr, Rational};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 5;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self, 0);
        f.write_str(&s)
    }
}

fn write_num(out: &mut String, v: f64) {
    // `{}` never uses exponent notation and round-trips exactly through
    // `str::parse::<f64>`.
    let _ = write!(out, "{}", v.abs());
}

fn write_exponent(out: &mut String, r: Rational) {
    if r.is_integer() {
        let _ = write!(out, "^{}", r.numer());
    } else {
        let _ = write!(out, "^({}/{})", r.numer(), r.denom());
    }
}

fn is_negative_term(e: &Expr) -> bool {
    match e {
        Expr::Num(v) => *v < 0.0,
        Expr::Mul(fs) => matches!(fs.first(), Some(Expr::Num(c)) if *c < 0.0),
        _ => false,
    }
}

fn negated(e: &Expr) -> Expr {
    match e {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Mul(fs) => {
            let mut fs = fs.clone();
            if let Some(Expr::Num(c)) = fs.first_mut() {
                *c = -*c;
                if *c == 1.0 {
                    fs.remove(0);
                }
            }
            if fs.len() == 1 {
                fs.pop().unwrap()
            } else {
                Expr::Mul(fs)
            }
        }
        other => other.clone(),
    }
}

fn write_expr(out: &mut String, e: &Expr, parent: u8) {
    match e {
        Expr::Num(v) => {
            if *v < 0.0 {
                if parent > PREC_UNARY {
                    out.push('(');
                    out.push('-');
                    write_num(out, *v);
                    out.push(')');
                } else {
                    out.push('-');
                    write_num(out, *v);
                }
            } else {
                write_num(out, *v);
            }
        }
        Expr::Sym(s) => out.push_str(s),
        Expr::Add(ts) => {
            let paren = parent > PREC_ADD;
            if paren {
                out.push('(');
            }
            for (i, t) in ts.iter().enumerate() {
                if i == 0 {
                    write_expr(out, t, PREC_ADD);
                } else if is_negative_term(t) {
                    out.push_str(" - ");
                    write_expr(out, &negated(t), PREC_MUL);
                } else {
                    out.push_str(" + ");
                    write_expr(out, t, PREC_ADD);
                }
            }
            if paren {
                out.push(')');
            }
        }
        Expr::Mul(fs) => write_product(out, fs, parent),
        Expr::Pow(b, r) => {
            write_expr(out, b, PREC_ATOM);
            write_exponent(out, *r);
        }
        Expr::Func(func, a) => {
            out.push_str(func.name());
            out.push('(');
            write_expr(out, a, 0);
            out.push(')');
        }
        Expr::Integral { var, body } => {
            let _ = write!(out, "integral({var}, ");
            write_expr(out, body, 0);
            out.push(')');
        }
        Expr::Neg(a) => {
            let paren = parent > PREC_UNARY;
            if paren {
                out.push('(');
            }
            out.push('-');
            write_expr(out, a, PREC_ATOM);
            if paren {
                out.push(')');
            }
        }
        Expr::Sub(a, b) => {
            let paren = parent > PREC_ADD;
            if paren {
                out.push('(');
            }
            write_expr(out, a, PREC_ADD);
            out.push_str(" - ");
            write_expr(out, b, PREC_MUL);
            if paren {
                out.push(')');
            }
        }
        Expr::Div(a, b) => {
            let paren = parent > PREC_MUL;
            if paren {
                out.push('(');
            }
            write_expr(out, a, PREC_MUL);
            out.push('/');
            write_expr(out, b, PREC_UNARY + 1);
            if paren {
                out.push(')');
            }
        }
    }
}

fn write_product(out: &mut String, fs: &[Expr], parent: u8) {
    let mut coefficient = 1.0;
    let mut numer: Vec<&Expr> = Vec::new();
    let mut denom: Vec<Expr> = Vec::new();
    for f in fs {
        match f {
            Expr::Num(c) => coefficient *= c,
            Expr::Pow(b, r) if *r.numer() < 0 => denom.push(Expr::pow((**b).clone(), -*r)),
            other => numer.push(other),
        }
    }
    let negative = coefficient < 0.0;
    let paren = parent > PREC_MUL || (negative && parent > PREC_UNARY);
    if paren {
        out.push('(');
    }
    if negative {
        out.push('-');
    }
    let mut first = true;
    let mag = coefficient.abs();
    if mag != 1.0 || numer.is_empty() {
        write_num(out, mag);
        first = false;
    }
    for f in numer {
        if !first {
            out.push('*');
        }
        write_expr(out, f, PREC_UNARY + 1);
        first = false;
    }
    for d in &denom {
        out.push('/');
        write_expr(out, d, PREC_UNARY + 1);
    }
    if paren {
        out.push(')');
    }
}
