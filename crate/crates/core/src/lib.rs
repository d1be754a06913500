//! Surface-code memory experiments: circuit generation, noise injection,
//! Pauli-frame sampling, matching decoders and threshold analysis.

pub mod bench;
pub mod circuit;
pub mod codegen;
pub mod decode;
pub mod dem;
pub mod error;
pub mod noise;
pub mod pauli;
pub mod sim;

pub use error::{Error, Result};
