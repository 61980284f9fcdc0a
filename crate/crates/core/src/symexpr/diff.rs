use super::expr::{Expr, Func, Rational};

impl Expr {
    /// Exact partial derivative with respect to `s`, in canonical form.
    pub fn diff(&self, s: &str) -> Expr {
        derive(&self.simplify(), s)
    }
}

fn derive(e: &Expr, s: &str) -> Expr {
    if !e.contains_symbol(s) {
        return Expr::zero();
    }
    match e {
        Expr::Num(_) => Expr::zero(),
        Expr::Sym(name) => {
            if &**name == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Neg(a) => Expr::neg(derive(a, s)),
        Expr::Add(ts) => Expr::add(ts.iter().map(|t| derive(t, s)).collect()),
        Expr::Sub(a, b) => Expr::sub(derive(a, s), derive(b, s)),
        Expr::Mul(fs) => {
            let mut terms = Vec::new();
            for (i, f) in fs.iter().enumerate() {
                let df = derive(f, s);
                if df.is_zero() {
                    continue;
                }
                let mut prod: Vec<Expr> = Vec::with_capacity(fs.len());
                prod.push(df);
                prod.extend(
                    fs.iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, g)| g.clone()),
                );
                terms.push(Expr::mul(prod));
            }
            Expr::add(terms)
        }
        Expr::Div(a, b) => derive(&Expr::div(a.simplify(), b.simplify()), s),
        Expr::Pow(b, r) => {
            let db = derive(b, s);
            let r_f = *r.numer() as f64 / *r.denom() as f64;
            Expr::mul(vec![
                Expr::Num(r_f),
                Expr::pow((**b).clone(), *r - Rational::from_integer(1)),
                db,
            ])
        }
        Expr::Func(f, a) => {
            let da = derive(a, s);
            let a = (**a).clone();
            let outer = match f {
                Func::Exp => Expr::func(Func::Exp, a),
                Func::Ln => Expr::powi(a, -1),
                Func::Sin => Expr::func(Func::Cos, a),
                Func::Cos => Expr::neg(Expr::func(Func::Sin, a)),
                Func::Tan => Expr::add(vec![Expr::one(), Expr::powi(Expr::func(Func::Tan, a), 2)]),
                Func::Arctan => Expr::powi(Expr::add(vec![Expr::one(), Expr::powi(a, 2)]), -1),
                Func::Sqrt => Expr::mul(vec![
                    Expr::Num(0.5),
                    Expr::powi(Expr::func(Func::Sqrt, a), -1),
                ]),
                Func::Abs => Expr::mul(vec![a.clone(), Expr::powi(Expr::func(Func::Abs, a), -1)]),
            };
            Expr::mul(vec![outer, da])
        }
        Expr::Integral { var, body } => {
            if &**var == s {
                return Expr::zero();
            }
            Expr::integral(var, derive(body, s))
        }
    }
}
