//! Fractional Delaunay solutions of the constant `Q_s`-curvature equation on
//! the cylinder `R × S^{n-1}`, `0 < s < 1`, restricted to radial profiles.
//!
//! The pipeline runs [`constants`] → [`kernel`] → [`operator`] →
//! [`delaunay`] → [`spectrum`], with [`classical`] supplying the `s = 1`
//! Fowler ODE as a limiting reference.

// `!(x > 0.0)` is used on purpose throughout so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod classical;
pub mod constants;
pub mod delaunay;
pub mod error;
pub mod kernel;
pub mod operator;
pub mod quad;
pub mod spectrum;

pub use classical::{classical_period, fowler_flow, hamiltonian, limit_comparison, Fowler, OdeState};
pub use constants::{make_params, Params};
pub use error::{Error, Result};
pub use kernel::{Kernel, KernelForm, KernelSpec, KernelTable, Period};
pub use operator::{
    assemble_linearization, assemble_ps, residual, Field, Grid, NonlocalOperator, OperatorKind, Symbol,
};
