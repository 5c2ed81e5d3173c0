//! Numerics for one-dimensional Schrödinger expressions
//! `l[u] = -u'' + q u + i[(r u)' + r u']` with `q = s + Q'`, where `s`, `Q`
//! and `r` may be complex, `Q` and `r` may jump (so `q` may carry Dirac
//! masses), and the expression is read through the quasi-derivative
//! `u^[1] = u' - (Q + i r) u`.
//!
//! Modules, bottom-up:
//! - [`coeffs`]: exact piecewise-polynomial coefficient data.
//! - [`quasi`]: the first-order system for `l` and its formal adjoint, and
//!   quasi-derivatives of explicit functions.
//! - [`propagate`]: adaptive Dormand–Prince integration with dense output.
//! - [`lagrange_forms`]: brackets, the Lagrange identity, quadratic forms,
//!   numerical-range sampling.
//! - [`conditions`]: weight, growth and interval-scheme checkers, cut-offs.
//! - [`spectral`]: finite-interval eigenvalues and the null-space probe.

pub mod coeffs;
pub mod conditions;
pub mod error;
pub mod lagrange_forms;
pub mod poly;
pub mod propagate;
pub mod quad;
pub mod quasi;
pub mod report;
pub mod scaled;
pub mod spectral;

pub use num_complex::Complex64 as C64;

pub use coeffs::{CoefficientField, Limit, PiecewisePoly};
pub use error::{Error, Result};
pub use propagate::{FundamentalSystem, Tolerances, Trajectory};
pub use quasi::{QuasiState, ShinZettlSystem, Side};
pub use report::{ConditionReport, Verdict};
