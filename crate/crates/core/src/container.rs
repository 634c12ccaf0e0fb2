//! Binary model container shared by both taggers.
//!
//! ```text
//! magic      8 bytes   "SEQTAGM\0"
//! version    u32 LE
//! header_len u64 LE
//! header     header_len bytes of UTF-8 JSON
//! n_values   u64 LE
//! values     n_values little-endian f64
//! checksum   32 bytes, SHA-256 of everything above
//! ```

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SEQTAGM\0";
pub const VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("model file version {found}, this build reads version {expected}")]
    Version { found: u32, expected: u32 },
    #[error("model file is truncated")]
    Truncated,
    #[error("model file checksum mismatch")]
    Checksum,
    #[error("model header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("model file holds a `{found}` model, expected `{expected}`")]
    Kind { expected: String, found: String },
    #[error("model file: {0}")]
    Inconsistent(String),
}

pub fn encode<H: Serialize>(header: &H, values: &[f64]) -> Result<Vec<u8>, ContainerError> {
    let header = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(8 + 4 + 8 + header.len() + 8 + values.len() * 8 + CHECKSUM_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(digest.as_slice());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(n).ok_or(ContainerError::Truncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(ContainerError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Validates magic, version and checksum; returns the header JSON and the values.
pub fn decode_raw(bytes: &[u8]) -> Result<(&[u8], Vec<f64>), ContainerError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN {
        return Err(ContainerError::Truncated);
    }
    let mut cur = Cursor { bytes, pos: MAGIC.len() };
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(ContainerError::Version { found: version, expected: VERSION });
    }
    let body_end = bytes.len() - CHECKSUM_LEN;
    if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
        // A short file also fails the checksum; tell the two apart by the declared lengths.
        let mut probe = Cursor { bytes: &bytes[..body_end], pos: cur.pos };
        let complete = probe
            .u64()
            .and_then(|h| probe.take(h as usize).map(|_| ()))
            .and_then(|_| probe.u64())
            .and_then(|n| probe.take((n as usize).saturating_mul(8)).map(|_| ()))
            .is_ok();
        return Err(if complete { ContainerError::Checksum } else { ContainerError::Truncated });
    }
    let mut cur = Cursor { bytes: &bytes[..body_end], pos: cur.pos };
    let header_len = cur.u64()? as usize;
    let header = cur.take(header_len)?;
    let n = cur.u64()? as usize;
    let raw = cur.take(n.checked_mul(8).ok_or(ContainerError::Truncated)?)?;
    if cur.pos != body_end {
        return Err(ContainerError::Inconsistent("trailing bytes after values".into()));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, values))
}

pub fn decode<H: DeserializeOwned>(bytes: &[u8]) -> Result<(H, Vec<f64>), ContainerError> {
    let (header, values) = decode_raw(bytes)?;
    Ok((serde_json::from_slice(header)?, values))
}

/// The `kind` field of the header, without decoding the rest.
pub fn peek_kind(bytes: &[u8]) -> Result<String, ContainerError> {
    let (header, _) = decode_raw(bytes)?;
    let value: serde_json::Value = serde_json::from_slice(header)?;
    value
        .get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_string)
        .ok_or_else(|| ContainerError::Inconsistent("header has no kind".into()))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
