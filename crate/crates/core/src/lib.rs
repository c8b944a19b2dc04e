//! Distributionally robust convex regression (DRCR).
//!
//! The estimator minimizes the worst-case absolute loss over a 1-Wasserstein
//! ball of covariate perturbations. With an `l1` transport cost on `X` and an
//! infinite cost for moving `Y`, the worst case reduces to the empirical loss
//! plus `delta * ||grad f||_inf`, which over max-affine functions is a linear
//! program. This crate contains everything that problem needs and nothing that
//! touches the filesystem:
//!
//! * [`model`]: datasets, max-affine models, loss metrics.
//! * [`lp`]: a sparse linear-programming engine with certificates.
//! * [`fit`]: the DRCR program, its row-generation driver, and a brute-force
//!   transport oracle used to check the dual representation numerically.
//! * [`baselines`]: gradient-capped least-squares convex regression,
//!   Nadaraya-Watson kernel regression, and linear regression.
//! * [`rng`] and [`synth`]: counter-based random streams and the synthetic
//!   benchmark generator.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod fit;
mod linalg;
pub mod lp;
pub mod model;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use fit::{build_drcr_lp, default_radius, fit_drcr, worst_case_loss_oracle, FitConfig};

pub use model::{
    dual_objective, empirical_l1, empirical_l2, gradient_sup_norm, predict, AffinePiece, Dataset,
    MaxAffineModel,
};
