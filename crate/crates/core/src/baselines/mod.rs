//! Comparison estimators: Nadaraya-Watson kernel estimate and the penalised
//! integral linear model on a tensor B-spline basis.

pub mod bspline;
pub mod linear;
pub mod nw;

pub use bspline::BsplineBasis;
pub use linear::{linear_fit, LinearDesign, LinearModel};
pub use nw::{mean_squared_error, nw_bandwidth_search, nw_weights, BandwidthSearch, NwModel};
