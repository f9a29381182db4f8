//! Path-integral pricing of vanilla and knock-up-and-out options under
//! cumulant-expanded (non-Gaussian) log-price densities.

pub mod calibration;
pub mod error;
pub mod expansion;
pub mod kernels;
pub mod martingale;
pub mod moving_barrier;
pub mod oracle;
pub mod pricing;
pub mod quadrature;
pub mod special;
pub mod symbolic;
pub mod validation;

pub use error::{Error, Result};
