pub mod cli;
pub mod config;
pub mod error;
pub mod explain;
pub mod feedback;
pub mod kg;
pub mod kge;
pub mod service;
pub mod sfe;
pub mod surrogate;
pub mod synth;

pub use error::{Error, Result};
