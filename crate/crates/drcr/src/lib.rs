//! Files, experiments and the command line around [`drcr_core`].
//!
//! * [`io`]: numeric CSV tables, schemas and dataset export.
//! * [`preprocess`]: log/standardize plans fitted on training rows, seeded splits.
//! * [`model_file`]: max-affine models as JSON.
//! * [`epa`]: a synthetic air-quality style CSV with a convex response.
//! * [`bench`]: the synthetic benchmark matrix and the train/test protocol.
//! * [`config`]: TOML settings for the `drcr` binary.

pub mod bench;
pub mod config;
pub mod epa;
pub mod error;
pub mod io;
pub mod model_file;
pub mod preprocess;

pub use drcr_core;
pub use error::{Error, Result};
