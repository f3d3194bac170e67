pub mod cli;
pub mod dataprep;
pub mod error;
pub mod eval;
pub mod model;
pub mod neuralnet;
pub mod spatial;
pub mod stream;
pub mod synthgen;

pub use error::{Error, Result};
