//! Series file formats: plain text (one value per line) and a binary
//! column format with an 8-byte magic, an 8-byte little-endian length, and
//! little-endian 64-bit floats. Readers sniff the magic to pick the format.

use crate::error::{GofError, Result};
use crate::spectral::TimeSeries;
use std::io::{Read, Write};
use std::path::Path;

pub const BINARY_MAGIC: &[u8; 8] = b"SPGF0001";

/// Read a series from either supported format.
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let bytes = std::fs::read(path).map_err(|e| {
        GofError::Parse(format!("cannot read {}: {e}", path.display()))
    })?;
    if bytes.len() >= 8 && &bytes[..8] == BINARY_MAGIC {
        decode_binary(&bytes)
    } else {
        parse_text(std::str::from_utf8(&bytes).map_err(|_| {
            GofError::Parse(format!("{} is neither text nor binary series data", path.display()))
        })?)
    }
}

pub fn parse_text(text: &str) -> Result<TimeSeries> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| {
            GofError::Parse(format!("line {}: '{trimmed}' is not a number", lineno + 1))
        })?;
        values.push(v);
    }
    TimeSeries::new(values)
}

pub fn decode_binary(bytes: &[u8]) -> Result<TimeSeries> {
    if bytes.len() < 16 || &bytes[..8] != BINARY_MAGIC {
        return Err(GofError::Parse("missing binary series magic".into()));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = 16 + 8 * len;
    if bytes.len() != expected {
        return Err(GofError::Parse(format!(
            "binary series declares {len} values but holds {} payload bytes",
            bytes.len().saturating_sub(16)
        )));
    }
    let values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    TimeSeries::new(values)
}

pub fn write_text<W: Write>(out: &mut W, x: &TimeSeries) -> Result<()> {
    for v in x.values() {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(out: &mut W, x: &TimeSeries) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(x.len() as u64).to_le_bytes())?;
    for v in x.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Convenience wrapper used by tests and the CLI.
pub fn read_series_from<R: Read>(mut r: R) -> Result<TimeSeries> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() >= 8 && &bytes[..8] == BINARY_MAGIC {
        decode_binary(&bytes)
    } else {
        parse_text(
            std::str::from_utf8(&bytes)
                .map_err(|_| GofError::Parse("input is neither text nor binary series data".into()))?,
        )
    }
}
