pub mod chebyshev;
pub mod error;
pub mod graph;
pub mod harness;
pub mod limits;
pub mod parallel;
pub mod rng;
pub mod spectra;
pub mod walks;
pub mod words;

pub use error::{Error, Result};
