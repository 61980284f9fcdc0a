//! Randomised numerical checks.
//!
//! Every sample point draws from its own ChaCha stream keyed by
//! `(seed, index)`, so results do not depend on evaluation order or on the
//! number of worker threads.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::compile::CompiledExpr;
use super::env::SymbolEnv;
use super::eval::EvalError;
use super::expr::Expr;
use crate::exec::{map_range, Exec};

/// Per-point generator.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sampling region: by default every variable is drawn uniformly from
/// `[-hi, -lo] ∪ [lo, hi]`; individual variables may use a plain interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingBox {
    pub lo: f64,
    pub hi: f64,
    pub overrides: BTreeMap<String, (f64, f64)>,
}

impl Default for SamplingBox {
    fn default() -> Self {
        SamplingBox {
            lo: 0.1,
            hi: 2.0,
            overrides: BTreeMap::new(),
        }
    }
}

impl SamplingBox {
    pub fn with_interval(mut self, name: &str, a: f64, b: f64) -> Self {
        self.overrides.insert(name.to_string(), (a, b));
        self
    }

    pub fn draw(&self, name: &str, rng: &mut impl Rng) -> f64 {
        if let Some(&(a, b)) = self.overrides.get(name) {
            return rng.gen_range(a..=b);
        }
        let mag = rng.gen_range(self.lo..=self.hi);
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub samples: usize,
    pub seed: u64,
    pub sampling: SamplingBox,
    pub exec: Exec,
    /// Redraws allowed per point after a domain error.
    pub retries: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            samples: 64,
            seed: 42,
            sampling: SamplingBox::default(),
            exec: Exec::default(),
            retries: 10,
        }
    }
}

impl SampleOptions {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error(transparent)]
    Eval(EvalError),
    #[error("sampling exhausted after {resamples} redraws; last failure: {last}")]
    Exhausted { resamples: usize, last: EvalError },
}

/// Largest value of a residual over the sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMax {
    pub max: f64,
    /// Point at which `max` was attained.
    pub witness: BTreeMap<String, f64>,
    pub points: usize,
    pub resamples: usize,
}

/// Values of `f` at `opts.samples` seeded random points over `vars`, in
/// point order, together with the points. A domain error triggers a redraw
/// of that point, up to `opts.retries` times.
pub fn sample_values<T, F>(
    vars: &[String],
    opts: &SampleOptions,
    f: F,
) -> Result<Vec<(T, Vec<f64>, usize)>, SampleError>
where
    T: Send,
    F: Fn(&[f64]) -> Result<T, EvalError> + Sync,
{
    map_range(opts.exec, opts.samples, |i| {
        let mut rng = point_rng(opts.seed, i as u64);
        let mut point = vec![0.0; vars.len()];
        let mut last = None;
        for attempt in 0..=opts.retries {
            for (slot, name) in point.iter_mut().zip(vars) {
                *slot = opts.sampling.draw(name, &mut rng);
            }
            match f(&point) {
                Ok(v) => return Ok((v, point, attempt)),
                Err(e) if e.is_domain() => last = Some(e),
                Err(e) => return Err(SampleError::Eval(e)),
            }
        }
        Err(SampleError::Exhausted {
            resamples: opts.retries,
            last: last.expect("at least one attempt"),
        })
    })
    .into_iter()
    .collect()
}

/// Evaluates `f` at `opts.samples` random points over `vars` and returns the
/// largest value. Domain errors trigger a redraw of that point.
pub fn sample_max<F>(vars: &[String], opts: &SampleOptions, f: F) -> Result<SampleMax, SampleError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    let results = sample_values(vars, opts, f)?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut resamples = 0;
    for (v, point, redraws) in results {
        resamples += redraws;
        let better = match &best {
            None => true,
            Some((b, _)) => v > *b || (v.is_nan() && !b.is_nan()),
        };
        if better {
            best = Some((v, point));
        }
    }
    let (max, point) = best.unwrap_or((0.0, vec![0.0; vars.len()]));
    Ok(SampleMax {
        max,
        witness: vars.iter().cloned().zip(point).collect(),
        points: opts.samples,
        resamples,
    })
}

/// Free symbols of `exprs` that are not parameters of `env`, sorted.
pub fn sampled_variables<'a>(
    exprs: impl IntoIterator<Item = &'a Expr>,
    env: &SymbolEnv,
) -> Vec<String> {
    let mut vars = BTreeSet::new();
    for e in exprs {
        vars.extend(e.free_symbols());
    }
    vars.into_iter()
        .filter(|v| !env.parameters().contains_key(v))
        .collect()
}

/// Largest absolute value of any of `exprs` over random points.
pub fn max_abs(
    exprs: &[Expr],
    env: &SymbolEnv,
    opts: &SampleOptions,
) -> Result<SampleMax, SampleError> {
    let vars = sampled_variables(exprs, env);
    let compiled = exprs
        .iter()
        .map(|e| CompiledExpr::new(e, &vars, env.parameters()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(SampleError::Eval)?;
    sample_max(&vars, opts, |x| {
        let mut m: f64 = 0.0;
        for c in &compiled {
            m = m.max(c.eval(x)?.abs());
        }
        Ok(m)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equivalence {
    pub equivalent: bool,
    pub max_difference: f64,
    pub witness: BTreeMap<String, f64>,
}

/// Randomised test that `a` and `b` agree: `|a - b| < tol` at every sample.
pub fn equiv_random(
    a: &Expr,
    b: &Expr,
    env: &SymbolEnv,
    tol: f64,
    opts: &SampleOptions,
) -> Result<Equivalence, SampleError> {
    let vars = sampled_variables([a, b], env);
    let ca = CompiledExpr::new(a, &vars, env.parameters()).map_err(SampleError::Eval)?;
    let cb = CompiledExpr::new(b, &vars, env.parameters()).map_err(SampleError::Eval)?;
    let m = sample_max(&vars, opts, |x| Ok((ca.eval(x)? - cb.eval(x)?).abs()))?;
    Ok(Equivalence {
        equivalent: m.max < tol,
        max_difference: m.max,
        witness: m.witness,
    })
}
