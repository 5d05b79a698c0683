//! Numerical toolkit for one-dimensional SDEs
//! `dX_t = (b1(t, X_t) + b2(t, X_t, ω)) dt + σ · dB_t`
//! with a measurable deterministic drift `b1` of linear growth and a random,
//! adapted, spatially smooth drift `b2`.
//!
//! The crate simulates such equations through mollified approximations,
//! evaluates Malliavin and spatial-flow derivatives by their exponential
//! representations and by local time-space integrals, and provides the Monte
//! Carlo diagnostics (martingale property, Hölder and moment bounds, relative
//! compactness, non-explosion) that go with them.
//!
//! Module map:
//!
//! * [`paths`]: grids, seedable Brownian paths, time reversal, Cameron–Martin shifts
//! * [`drift`]: drift decomposition, mollification, the built-in catalog
//! * [`sde`]: Euler–Maruyama solver, constants, convergence and non-explosion checks
//! * [`girsanov`]: Girsanov kernel, Doléans-Dade weights, weak-solution sampler
//! * [`malliavin`]: Malliavin derivatives and their diagnostics, Haar operator
//! * [`localtime`]: local time-space integrals and the local-time representation
//! * [`flow`]: flow derivatives and weighted Sobolev norms

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drift;
pub mod error;
pub mod flow;
pub mod girsanov;
pub mod localtime;
pub mod malliavin;
pub mod paths;
pub mod quadrature;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use paths::{BrownianEnsemble, BrownianPath, StreamId, TimeGrid};

/// Evaluates `f(0..n)` in parallel when the `parallel` feature is on; the
/// output is always in index order.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
