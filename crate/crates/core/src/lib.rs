#![allow(clippy::needless_range_loop, clippy::should_implement_trait)]

pub mod exec;
pub mod linalg;
pub mod ode;
pub mod quadrature;
pub mod report;
pub mod symexpr;
pub mod variational1;
pub mod variational2;
pub mod verifier;
