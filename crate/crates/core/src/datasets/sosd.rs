//! SOSD-style key files: a little-endian `u64` count followed by that many
//! little-endian `u64` keys. Files written here may carry a 12-byte footer,
//! `LIP1` plus the payload seed, so payloads can be regenerated on load.

use std::fs;
use std::path::Path;

use crate::dataset::{SortedDataset, DEFAULT_PAYLOAD_SEED};
use crate::error::{Error, Result};

pub const SOSD_FOOTER_MAGIC: &[u8; 4] = b"LIP1";

const FOOTER_LEN: usize = 12;

pub fn write_sosd(d: &SortedDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (d.len() + 1) + FOOTER_LEN);
    out.extend_from_slice(&(d.len() as u64).to_le_bytes());
    for &k in d.keys() {
        out.extend_from_slice(&k.to_le_bytes());
    }
    if let Some(seed) = d.payload_seed() {
        out.extend_from_slice(SOSD_FOOTER_MAGIC);
        out.extend_from_slice(&seed.to_le_bytes());
    }
    out
}

/// Parses a key file. Without a seed footer, payloads are derived from
/// [`DEFAULT_PAYLOAD_SEED`] and the dataset records no seed, so writing it
/// back reproduces the input exactly.
pub fn read_sosd(bytes: &[u8]) -> Result<SortedDataset> {
    if bytes.len() < 8 {
        return Err(Error::Format(format!(
            "key file is {} bytes, too short for the 8-byte count",
            bytes.len()
        )));
    }
    let count = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let body = bytes.len() as u64 - 8;
    let key_bytes = count.checked_mul(8).filter(|&b| b <= body).ok_or_else(|| {
        Error::Format(format!(
            "key file declares {count} keys but holds only {body} bytes after the count"
        ))
    })? as usize;
    let rest = &bytes[8 + key_bytes..];
    let seed = match rest.len() {
        0 => None,
        FOOTER_LEN if &rest[..4] == SOSD_FOOTER_MAGIC => {
            Some(u64::from_le_bytes(rest[4..].try_into().unwrap()))
        }
        extra => {
            return Err(Error::Format(format!(
                "key file has {extra} unexpected bytes after {count} keys"
            )))
        }
    };
    let keys = bytes[8..8 + key_bytes]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut d = SortedDataset::from_keys(keys, seed.unwrap_or(DEFAULT_PAYLOAD_SEED))?;
    d.set_payload_seed(seed);
    Ok(d)
}

pub fn save_sosd(d: &SortedDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_sosd(d)).map_err(|e| Error::io(path, e))
}

pub fn load_sosd(path: impl AsRef<Path>) -> Result<SortedDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_sosd(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        Error::InvalidDataset(msg) => Error::InvalidDataset(format!("{}: {msg}", path.display())),
        other => other,
    })
}
