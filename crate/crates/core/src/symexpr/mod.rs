//! Symbolic expressions: parsing, canonical simplification, exact
//! differentiation, evaluation and randomised equivalence testing.

mod compile;
mod diff;
mod display;
mod env;
mod eval;
mod expr;
mod integrate;
mod parse;
mod sample;

pub use compile::CompiledExpr;
pub use env::{EnvError, SymbolEnv, SymbolKind, TIME};
pub use eval::{DomainKind, EvalError};
pub use expr::{cmp_expr, rat, real_pow, Expr, Func, Rational, Symbol};
pub use integrate::{integrate_unit, integrate_unit_or_node, scale_args, UnitIntegral};
pub use parse::{parse, parse_with, ParseError};
pub use sample::{
    equiv_random, max_abs, point_rng, sample_max, sample_values, sampled_variables, Equivalence,
    SampleError, SampleMax, SampleOptions, SamplingBox,
};
