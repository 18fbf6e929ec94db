//! Wiener chaos solver for linear stochastic parabolic equations.
//!
//! The crate computes the chaos coefficients `u_α` of
//!
//! ```text
//! du = (A u + f) dt + (M_k u + g_k) dw_k
//! ```
//!
//! on a periodic finite-difference grid by solving the lower-triangular
//! deterministic propagator system, and provides the functionals built on
//! top of it (moments, weighted norms, pathwise evaluation, the `u_h`
//! pairing) together with independent oracles (direct Monte Carlo,
//! stochastic characteristics, closed-form Fourier modes).
//!
//! The crate is `no_std` and only needs `alloc`; float intrinsics come from
//! `libm` through `num_traits::Float`. IO, configuration and thread pools
//! live in the `wce` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basis;
pub mod chaos_field;
pub mod discretization;
mod error;
pub mod multiindex;
pub mod oracles;
pub mod profile;
pub mod propagator;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, Result};

/// Execution strategy for batches of independent work items.
///
/// The solver and the Monte Carlo oracles hand their embarrassingly parallel
/// batches to an executor. Implementations must return results in index
/// order; that is what keeps outputs independent of the thread count.
pub trait Executor: Sync {
    fn map<T, F>(&self, count: usize, f: F) -> alloc::vec::Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every item on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, count: usize, f: F) -> alloc::vec::Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
