//! Curve-on-curve regression with an operator-valued reproducing kernel.
//!
//! Given pairs of sampled curves `(x_i, y_i)` on a shared grid, the main
//! estimator ([`rkhs`]) fits `F(x) = sum_i a(||x_i - x||) alpha_i` with
//! `alpha_i = sum_l b^i_l k(t_l, .)` by a closed-form Kronecker solve, choosing
//! the smoothing parameter by generalised cross-validation. [`baselines`] holds
//! the Nadaraya-Watson and integral-linear comparison estimators, [`sim`] the
//! synthetic benchmark, and [`weather`] the station leave-one-out pipeline.
//!
//! The crate is `no_std` and needs only `alloc`; file formats and the
//! command-line front end live in the `funcreg` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod curve;
pub mod error;
pub mod kernel;
pub mod rkhs;
pub mod sim;
pub mod weather;

pub use curve::{l2_distance, l2_norm_sq, trapezoid_integral, Curve, CurveSet, Grid};
pub use error::{Error, Result};
pub use kernel::{GramPair, OperatorKernel, ScalarKernel};
pub use nalgebra;
pub use rkhs::{GcvCurve, PenaltyVariant, RkhsModel, RkhsParams};
