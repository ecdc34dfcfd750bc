//! Compact basis attention over multi-reference feature maps.
//!
//! The crate is `no_std` (it needs `alloc`) and holds only the numerical and
//! geometric kernels:
//!
//! * [`tensor`]: dense `f32` storage with `f64` accumulation, softmax, row
//!   normalization and a reproducible SplitMix64 fill.
//! * [`format`]: the `CTF1` tensor byte format.
//! * [`encoder`]: shape-sharing convolutional feature extractors.
//! * [`attention`]: iterative basis extraction, shared-map appearance bases,
//!   basis aggregation, and the pixel-wise attention baseline.
//! * [`refselect`]: landmark embeddings, Delaunay appearance maps, point
//!   location and reference selection.
//! * [`flops`]: closed-form operation counts used by the benchmark harness.
//!
//! File IO, the benchmark timer and the command line live in the companion
//! `compact-attn` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

mod error;
pub use error::{Error, FormatError, Result};

pub mod attention;
pub mod encoder;
pub mod flops;
pub mod format;
pub mod meter;
pub mod refselect;
pub mod tensor;

pub use attention::{
    aggregate, appearance_basis, basis_em_step, compact_attention, extract_bases,
    pixelwise_attention, AttentionConfig, AttentionMap, BasisSet, CompactAttentionOutput, NormKind,
};
pub use encoder::{conv2d_forward, encode, init_encoder, EncoderConfig, EncoderWeights};
pub use meter::{NoMeter, OpCount, OpMeter};
pub use tensor::{FeatureTensor, Matrix, Seed};
