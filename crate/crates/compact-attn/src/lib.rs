//! File formats, the benchmark harness and the command line for
//! [`compact_attn_core`].
//!
//! Tensors travel as `CTF1` files, configs as JSON, landmarks as JSON lines.
//! Every error that originates in a file carries the file's path.

pub mod bench;
pub mod cli;
mod error;
pub mod io;

pub use error::{Error, Result};

pub use compact_attn_core as core;
