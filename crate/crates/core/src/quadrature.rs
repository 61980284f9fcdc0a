//! Gauss-Legendre quadrature on `[0, 1]`.

use std::f64::consts::PI;
use std::sync::OnceLock;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule mapped to `[0, 1]`; nodes by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussLegendre { nodes, weights }
    }

    /// The shared 32-node rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(32))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<E>(
        &self,
        a: f64,
        b: f64,
        f: &mut dyn FnMut(f64) -> Result<f64, E>,
    ) -> Result<f64, E> {
        let h = b - a;
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(a + h * x)?;
        }
        Ok(acc * h)
    }

    /// Integral over `[0, 1]` with bisection wherever the rule disagrees
    /// with its two-panel refinement.
    pub fn integrate_adaptive<E>(
        &self,
        f: &mut dyn FnMut(f64) -> Result<f64, E>,
    ) -> Result<f64, E> {
        let whole = self.integrate(0.0, 1.0, f)?;
        self.refine(0.0, 1.0, whole, 0, f)
    }

    fn refine<E>(
        &self,
        a: f64,
        b: f64,
        whole: f64,
        depth: u32,
        f: &mut dyn FnMut(f64) -> Result<f64, E>,
    ) -> Result<f64, E> {
        let m = 0.5 * (a + b);
        let left = self.integrate(a, m, f)?;
        let right = self.integrate(m, b, f)?;
        let split = left + right;
        let scale = split.abs().max(whole.abs()).max(1e-300);
        if (split - whole).abs() <= 1e-14 * scale.max(1.0) || depth >= 24 {
            return Ok(split);
        }
        Ok(self.refine(a, m, left, depth + 1, f)? + self.refine(m, b, right, depth + 1, f)?)
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}
