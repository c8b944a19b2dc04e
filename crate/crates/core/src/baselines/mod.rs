//! Comparison estimators: gradient-capped least-squares convex regression,
//! Gaussian-kernel regression and linear regression.

pub mod kernel;
pub mod linear;
pub mod lse;

pub use kernel::{fit_kernel, kernel_predict, select_bandwidth, BandwidthChoice, KernelModel};
pub use linear::{fit_linear, LinearLoss};
pub use lse::{fit_convex_lse, fit_convex_lse_report, KktReport, LseConfig, LseFit};
