use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_rational::Rational64;

/// Interned symbol name.
pub type Symbol = Arc<str>;

/// Constant exponents are restricted to rationals.
pub type Rational = Rational64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Arctan,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Exp,
        Func::Ln,
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Arctan,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Arctan => "arctan",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// Real-valued application; `None` outside the domain.
    pub fn apply(self, x: f64) -> Option<f64> {
        let v = match self {
            Func::Exp => x.exp(),
            Func::Ln => {
                if x <= 0.0 {
                    return None;
                }
                x.ln()
            }
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Arctan => x.atan(),
            Func::Sqrt => {
                if x < 0.0 {
                    return None;
                }
                x.sqrt()
            }
            Func::Abs => x.abs(),
        };
        v.is_finite().then_some(v)
    }
}

/// Symbolic expression tree.
///
/// `Neg`, `Sub` and `Div` only occur in raw parser output; every smart
/// constructor (and therefore [`Expr::simplify`]) rewrites them into sums,
/// products and powers. `Integral` denotes the definite integral of `body`
/// over `var` in `[0, 1]` and is evaluated by quadrature when no closed form
/// was found.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Sym(Symbol),
    Neg(Box<Expr>),
    Add(Vec<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Vec<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Rational),
    Func(Func, Box<Expr>),
    Integral { var: Symbol, body: Box<Expr> },
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn rat_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Real power with the sign-preserving convention for odd denominators.
pub fn real_pow(x: f64, r: Rational) -> Option<f64> {
    let (p, q) = (*r.numer(), *r.denom());
    if x == 0.0 && p < 0 {
        return None;
    }
    let v = if q == 1 {
        match i32::try_from(p) {
            Ok(p) => x.powi(p),
            Err(_) => x.powf(p as f64),
        }
    } else if x >= 0.0 {
        x.powf(rat_to_f64(r))
    } else if q % 2 == 0 {
        return None;
    } else {
        let mag = (-x).powf(rat_to_f64(r));
        if p % 2 == 0 {
            mag
        } else {
            -mag
        }
    };
    v.is_finite().then_some(v)
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn one() -> Expr {
        Expr::Num(1.0)
    }

    pub fn sym(name: &str) -> Expr {
        Expr::Sym(Arc::from(name))
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 1.0)
    }

    // ---- canonical constructors -------------------------------------------

    /// Canonical sum. Operands are assumed canonical.
    pub fn add(terms: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(terms.len());
        for t in terms {
            match t {
                Expr::Add(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        let mut constant = 0.0;
        let mut collected: Vec<(Expr, f64)> = Vec::new();
        for t in flat {
            match t {
                Expr::Num(v) => constant += v,
                other => {
                    let (c, rest) = split_coefficient(other);
                    if let Some(slot) = collected.iter_mut().find(|(r, _)| *r == rest) {
                        slot.1 += c;
                    } else {
                        collected.push((rest, c));
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(collected.len() + 1);
        for (rest, c) in collected {
            if c == 0.0 {
                continue;
            }
            out.push(with_coefficient(c, rest));
        }
        out.sort_by(cmp_expr);
        if constant != 0.0 {
            out.insert(0, Expr::Num(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::Add(out),
        }
    }

    /// Canonical product. Operands are assumed canonical.
    pub fn mul(factors: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(factors.len());
        for f in factors {
            match f {
                Expr::Mul(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        let mut coefficient = 1.0;
        let mut collected: Vec<(Expr, Rational)> = Vec::new();
        for f in flat {
            match f {
                Expr::Num(v) => coefficient *= v,
                Expr::Pow(base, r) => push_power(&mut collected, *base, r),
                other => push_power(&mut collected, other, Rational::from_integer(1)),
            }
        }
        if coefficient == 0.0 {
            return Expr::zero();
        }
        let mut out = Vec::with_capacity(collected.len() + 1);
        let mut needs_pass = false;
        for (base, r) in collected {
            let p = Expr::pow(base, r);
            match &p {
                Expr::Num(v) => coefficient *= v,
                Expr::Mul(_) => {
                    needs_pass = true;
                    out.push(p);
                }
                _ => out.push(p),
            }
        }
        if needs_pass {
            out.push(Expr::Num(coefficient));
            return Expr::mul(out);
        }
        if coefficient == 0.0 {
            return Expr::zero();
        }
        out.sort_by(cmp_expr);
        if coefficient != 1.0 || out.is_empty() {
            out.insert(0, Expr::Num(coefficient));
        }
        match out.len() {
            1 => out.pop().unwrap(),
            _ => Expr::Mul(out),
        }
    }

    /// Canonical power with constant rational exponent.
    pub fn pow(base: Expr, r: Rational) -> Expr {
        if r == Rational::from_integer(0) {
            return Expr::one();
        }
        if r == Rational::from_integer(1) {
            return base;
        }
        match base {
            Expr::Num(v) => match real_pow(v, r) {
                Some(x) => Expr::Num(x),
                None => Expr::Pow(Box::new(Expr::Num(v)), r),
            },
            Expr::Pow(inner, s) if r.is_integer() => Expr::pow(*inner, s * r),
            Expr::Mul(factors) if r.is_integer() => {
                Expr::mul(factors.into_iter().map(|f| Expr::pow(f, r)).collect())
            }
            other => Expr::Pow(Box::new(other), r),
        }
    }

    pub fn powi(base: Expr, k: i64) -> Expr {
        Expr::pow(base, Rational::from_integer(k))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        if let Expr::Num(v) = arg {
            if let Some(x) = f.apply(v) {
                return Expr::Num(x);
            }
        }
        Expr::Func(f, Box::new(arg))
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::mul(vec![Expr::Num(-1.0), e])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::mul(vec![a, Expr::powi(b, -1)])
    }

    /// `∫₀¹ body d(var)` kept symbolic.
    pub fn integral(var: &str, body: Expr) -> Expr {
        if !body.contains_symbol(var) {
            return body;
        }
        Expr::Integral {
            var: Arc::from(var),
            body: Box::new(body),
        }
    }

    // ---- structure ----------------------------------------------------------

    /// Rebuilds the tree bottom-up through the canonical constructors.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Sym(s) => Expr::Sym(s.clone()),
            Expr::Neg(a) => Expr::neg(a.simplify()),
            Expr::Add(ts) => Expr::add(ts.iter().map(Expr::simplify).collect()),
            Expr::Sub(a, b) => Expr::sub(a.simplify(), b.simplify()),
            Expr::Mul(fs) => Expr::mul(fs.iter().map(Expr::simplify).collect()),
            Expr::Div(a, b) => Expr::div(a.simplify(), b.simplify()),
            Expr::Pow(b, r) => Expr::pow(b.simplify(), *r),
            Expr::Func(f, a) => Expr::func(*f, a.simplify()),
            Expr::Integral { var, body } => Expr::integral(var, body.simplify()),
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Sym(s) => {
                out.insert(s.to_string());
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.collect_symbols(out),
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().for_each(|x| x.collect_symbols(out)),
            Expr::Sub(a, b) | Expr::Div(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
            Expr::Integral { var, body } => {
                let mut inner = BTreeSet::new();
                body.collect_symbols(&mut inner);
                inner.remove(&**var);
                out.extend(inner);
            }
        }
    }

    pub fn contains_symbol(&self, name: &str) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Sym(s) => &**s == name,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.contains_symbol(name),
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().any(|x| x.contains_symbol(name)),
            Expr::Sub(a, b) | Expr::Div(a, b) => a.contains_symbol(name) || b.contains_symbol(name),
            Expr::Integral { var, body } => &**var != name && body.contains_symbol(name),
        }
    }

    /// Replaces symbols for which `map` returns a value, then simplifies.
    /// Integration variables are never substituted.
    pub fn substitute(&self, map: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        self.subst_raw(map).simplify()
    }

    fn subst_raw(&self, map: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Sym(s) => map(s).unwrap_or_else(|| Expr::Sym(s.clone())),
            Expr::Neg(a) => Expr::Neg(Box::new(a.subst_raw(map))),
            Expr::Add(xs) => Expr::Add(xs.iter().map(|x| x.subst_raw(map)).collect()),
            Expr::Mul(xs) => Expr::Mul(xs.iter().map(|x| x.subst_raw(map)).collect()),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.subst_raw(map)), Box::new(b.subst_raw(map))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.subst_raw(map)), Box::new(b.subst_raw(map))),
            Expr::Pow(a, r) => Expr::Pow(Box::new(a.subst_raw(map)), *r),
            Expr::Func(f, a) => Expr::Func(*f, Box::new(a.subst_raw(map))),
            Expr::Integral { var, body } => {
                let v = var.clone();
                let inner = move |s: &str| if *s == *v { None } else { map(s) };
                Expr::Integral {
                    var: var.clone(),
                    body: Box::new(body.subst_raw(&inner)),
                }
            }
        }
    }

    /// Substitutes a single symbol.
    pub fn subs(&self, name: &str, value: &Expr) -> Expr {
        self.substitute(&|s| (s == name).then(|| value.clone()))
    }

    /// Distributes products over sums and expands small positive integer
    /// powers of sums. Products that would exceed `EXPAND_CAP` terms are left
    /// factored.
    pub fn expand(&self) -> Expr {
        const EXPAND_CAP: usize = 1024;
        fn terms(e: Expr) -> Vec<Expr> {
            match e {
                Expr::Add(ts) => ts,
                other => vec![other],
            }
        }
        fn product(parts: Vec<Expr>) -> Expr {
            let total = parts
                .iter()
                .map(|p| if let Expr::Add(ts) = p { ts.len() } else { 1 })
                .try_fold(1usize, |acc, k| {
                    acc.checked_mul(k).filter(|&n| n <= EXPAND_CAP)
                });
            if total.is_none() {
                return Expr::mul(parts);
            }
            let mut acc = vec![Expr::one()];
            for p in parts {
                let ts = terms(p);
                acc = acc
                    .iter()
                    .flat_map(|a| {
                        ts.iter()
                            .map(move |t| Expr::mul(vec![a.clone(), t.clone()]))
                    })
                    .collect();
            }
            Expr::add(acc)
        }
        match self {
            Expr::Add(ts) => Expr::add(ts.iter().map(Expr::expand).collect()),
            Expr::Mul(fs) => product(fs.iter().map(Expr::expand).collect()),
            Expr::Pow(b, r) => {
                let b = b.expand();
                if r.is_integer() && *r.numer() >= 2 && *r.numer() <= 8 && matches!(b, Expr::Add(_))
                {
                    product(vec![b; *r.numer() as usize])
                } else {
                    Expr::pow(b, *r)
                }
            }
            Expr::Func(f, a) => Expr::func(*f, a.expand()),
            Expr::Integral { var, body } => Expr::integral(var, body.expand()),
            Expr::Neg(_) | Expr::Sub(..) | Expr::Div(..) => self.simplify().expand(),
            Expr::Num(_) | Expr::Sym(_) => self.clone(),
        }
    }

    /// Node count, used to bound expansion work.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Sym(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => 1 + a.size(),
            Expr::Add(xs) | Expr::Mul(xs) => 1 + xs.iter().map(Expr::size).sum::<usize>(),
            Expr::Sub(a, b) | Expr::Div(a, b) => 1 + a.size() + b.size(),
            Expr::Integral { body, .. } => 1 + body.size(),
        }
    }

    pub fn has_integral(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Sym(_) => false,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.has_integral(),
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().any(Expr::has_integral),
            Expr::Sub(a, b) | Expr::Div(a, b) => a.has_integral() || b.has_integral(),
            Expr::Integral { .. } => true,
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(vec![self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(vec![self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::Num(v)
    }
}

fn split_coefficient(e: Expr) -> (f64, Expr) {
    match e {
        Expr::Mul(mut fs) => {
            if let Some(Expr::Num(c)) = fs.first() {
                let c = *c;
                fs.remove(0);
                let rest = if fs.len() == 1 {
                    fs.pop().unwrap()
                } else {
                    Expr::Mul(fs)
                };
                (c, rest)
            } else {
                (1.0, Expr::Mul(fs))
            }
        }
        other => (1.0, other),
    }
}

fn with_coefficient(c: f64, rest: Expr) -> Expr {
    if c == 1.0 {
        return rest;
    }
    match rest {
        Expr::Mul(mut fs) => {
            fs.insert(0, Expr::Num(c));
            Expr::Mul(fs)
        }
        other => Expr::Mul(vec![Expr::Num(c), other]),
    }
}

fn push_power(collected: &mut Vec<(Expr, Rational)>, base: Expr, r: Rational) {
    if let Some(slot) = collected.iter_mut().find(|(b, _)| *b == base) {
        slot.1 += r;
    } else {
        collected.push((base, r));
    }
}

fn rank(e: &Expr) -> u8 {
    match e {
        Expr::Num(_) => 0,
        Expr::Sym(_) => 1,
        Expr::Pow(..) => 2,
        Expr::Func(..) => 3,
        Expr::Mul(_) => 4,
        Expr::Add(_) => 5,
        Expr::Integral { .. } => 6,
        Expr::Neg(_) => 7,
        Expr::Sub(..) => 8,
        Expr::Div(..) => 9,
    }
}

/// Total structural order used to sort operands of sums and products.
pub fn cmp_expr(a: &Expr, b: &Expr) -> Ordering {
    let (ra, rb) = (rank(a), rank(b));
    if ra != rb {
        return ra.cmp(&rb);
    }
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => x.total_cmp(y),
        (Expr::Sym(x), Expr::Sym(y)) => x.cmp(y),
        (Expr::Pow(b1, r1), Expr::Pow(b2, r2)) => cmp_expr(b1, b2).then(r1.cmp(r2)),
        (Expr::Func(f1, a1), Expr::Func(f2, a2)) => f1.cmp(f2).then_with(|| cmp_expr(a1, a2)),
        (Expr::Mul(x), Expr::Mul(y)) | (Expr::Add(x), Expr::Add(y)) => cmp_slices(x, y),
        (Expr::Integral { var: v1, body: b1 }, Expr::Integral { var: v2, body: b2 }) => {
            v1.cmp(v2).then_with(|| cmp_expr(b1, b2))
        }
        (Expr::Neg(x), Expr::Neg(y)) => cmp_expr(x, y),
        (Expr::Sub(a1, b1), Expr::Sub(a2, b2)) | (Expr::Div(a1, b1), Expr::Div(a2, b2)) => {
            cmp_expr(a1, a2).then_with(|| cmp_expr(b1, b2))
        }
        _ => Ordering::Equal,
    }
}

fn cmp_slices(x: &[Expr], y: &[Expr]) -> Ordering {
    for (a, b) in x.iter().zip(y) {
        let o = cmp_expr(a, b);
        if o != Ordering::Equal {
            return o;
        }
    }
    x.len().cmp(&y.len())
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
