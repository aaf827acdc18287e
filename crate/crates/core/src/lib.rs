//! Joint state and parameter inference for linear Gaussian state-space models.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod mixture;
pub mod model;
pub mod oracle;
pub mod posterior;
pub mod precision;
pub mod recursive;
pub mod rng;
pub mod sampler;
pub mod series;
pub mod window;

pub use error::{Error, IoError, Result};
pub use model::{ModelKind, PriorSpec, Theta, TimeGrid};
pub use series::ObservationSeries;
