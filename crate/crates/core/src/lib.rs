//! Question-type classification for community forums.
//!
//! The crate covers the whole training and inference path of a deeply
//! regularized residual MLP ensemble (see [`drrnn`]), the classical baselines
//! it is compared against ([`baselines`]), stacked ensembles over probability
//! outputs ([`ensemble`]) and the task metrics ([`eval`]).
//!
//! Everything numerical is implemented here directly on top of `ndarray`;
//! randomness flows through [`rng::RngStream`] so runs are reproducible
//! bit-for-bit given a seed.

pub mod baselines;
pub mod container;
pub mod corpus;
pub mod drrnn;
pub mod ensemble;
mod error;
pub mod eval;
pub mod features;
pub mod neural;
pub mod preprocess;
pub mod rng;
pub mod synthetic;

pub use corpus::{Dataset, Label, Question};
pub use error::{Error, ErrorClass, Result};
