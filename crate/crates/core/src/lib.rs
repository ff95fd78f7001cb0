//! Tools for studying Bernstein–von Mises behaviour of Gaussian-regression
//! posteriors whose dimension grows with the sample size.

pub mod designs;
pub mod bayes;
pub mod distances;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod gaussian;
pub mod rng;
pub mod special;
pub mod truths;
pub mod univariate;

pub use error::{Error, Result};
