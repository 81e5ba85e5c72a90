//! Lévy-driven CARMA(p, q) processes: simulation, Kalman-filter
//! quasi-likelihood estimation, recovery of the driving increments and
//! maximum-likelihood fits of the noise law.
//!
//! ```
//! use carma_levy::carma::CarmaSpec;
//! use carma_levy::levy::LevyModel;
//! use carma_levy::simulator::{simulate, SamplingScheme, SimulationOptions};
//!
//! let spec = CarmaSpec::new(vec![1.39631, 0.05029], vec![1.0, 2.0]).unwrap();
//! let noise = LevyModel::Brownian { mu: 0.0, sigma: 1.0 };
//! let scheme = SamplingScheme::new(10.0, 1000).unwrap();
//! let path = simulate(&spec, &noise, &SimulationOptions::new(scheme, 7)).unwrap();
//! assert_eq!(path.times.len(), 1001);
//! assert!((path.h() - 0.01).abs() < 1e-15);
//! ```

// negated comparisons are there to reject NaN; quadrature nodes keep their tabulated digits
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod carma;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod io;
pub mod kalman;
pub mod levy;
pub mod linalg;
pub mod optim;
pub mod quad;
pub mod simulator;
pub mod special;

pub use carma::CarmaSpec;
pub use error::{CarmaError, Result};
pub use levy::{LevyFamily, LevyModel};
