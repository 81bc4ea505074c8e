//! File formats, preprocessing pipeline, threaded executor and command line
//! around [`lrvp_core`].

pub mod checkpoint;
pub mod cli;
mod codec;
pub mod config;
pub mod error;
pub mod fetch;
pub mod gslc;
pub mod lrvv;
pub mod pipeline;
pub mod report;
pub mod threads;

pub use error::{Error, Result};
