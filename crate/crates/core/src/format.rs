//! `CTF1` tensor byte format.
//!
//! ```text
//! offset 0   4 bytes   magic 43 54 46 31 ("CTF1")
//! offset 4   1 byte    ndim
//! offset 5   4·ndim    extents, u32 little-endian
//! then       4·N       values, IEEE-754 binary32 little-endian, row-major
//! ```
//!
//! No padding, no checksum. The fourth magic byte doubles as the format
//! version.

use alloc::vec::Vec;

use crate::tensor::FeatureTensor;
use crate::{Error, FormatError, Result};

pub const MAGIC: [u8; 4] = *b"CTF1";
pub const FORMAT_VERSION: &str = "CTF1";
const HEADER_FIXED: usize = 5;

pub fn encode(t: &FeatureTensor) -> Result<Vec<u8>> {
    let ndim = t.dims().len();
    if ndim > u8::MAX as usize {
        return Err(FormatError::TooManyDims { ndim }.into());
    }
    let mut out = Vec::with_capacity(HEADER_FIXED + 4 * ndim + 4 * t.len());
    out.extend_from_slice(&MAGIC);
    out.push(ndim as u8);
    for &d in t.dims() {
        let d = u32::try_from(d)
            .map_err(|_| Error::InvalidArgument(alloc::format!("extent {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn need(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8], FormatError> {
    bytes.get(offset..offset + len).ok_or(FormatError::Truncated {
        offset: bytes.len().min(offset),
        expected: offset + len,
        actual: bytes.len(),
    })
}

pub fn decode(bytes: &[u8]) -> Result<FeatureTensor> {
    let magic = need(bytes, 0, 4)?;
    if magic[..3] != MAGIC[..3] {
        let mut found = [0u8; 4];
        found.copy_from_slice(magic);
        return Err(FormatError::BadMagic { found }.into());
    }
    if magic[3] != MAGIC[3] {
        return Err(FormatError::UnsupportedVersion { found: magic[3] }.into());
    }
    let ndim = need(bytes, 4, 1)?[0] as usize;
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let offset = HEADER_FIXED + 4 * i;
        let raw = need(bytes, offset, 4)?;
        let d = u32::from_le_bytes(raw.try_into().unwrap()) as usize;
        if d == 0 {
            return Err(FormatError::ZeroExtent { offset }.into());
        }
        dims.push(d);
    }
    if ndim == 0 {
        return Err(Error::InvalidArgument("CTF1 tensor with zero dimensions".into()));
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("extents {dims:?} overflow")))?;
    let start = HEADER_FIXED + 4 * ndim;
    let expected = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(start))
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("extents {dims:?} overflow")))?;
    if bytes.len() < expected {
        return Err(FormatError::Truncated { offset: bytes.len(), expected, actual: bytes.len() }.into());
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingBytes { offset: expected, expected, actual: bytes.len() }.into());
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in bytes[start..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FormatError::NonFinite { offset: start + 4 * i }.into());
        }
        data.push(v);
    }
    FeatureTensor::new(dims, data)
}
