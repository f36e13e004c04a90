//! Ensemble tables as tidy CSV or a compact binary file.
//!
//! Binary layout, all little-endian: 4 magic bytes `KFFS`, `u32` version,
//! `u64` rows M, `u64` columns N, then M*N `f64` values row by row.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: [u8; 4] = *b"KFFS";
pub const BINARY_VERSION: u32 = 1;

/// Rows `sample_id,position,value`.
pub fn write_csv<W: Write>(values: &[Vec<f64>], positions: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "sample_id,position,value")?;
    for (m, row) in values.iter().enumerate() {
        if row.len() != positions.len() {
            return Err(Error::LengthMismatch { expected: positions.len(), got: row.len() });
        }
        for (p, v) in positions.iter().zip(row) {
            writeln!(out, "{m},{p},{v}")?;
        }
    }
    Ok(())
}

pub fn write_binary<W: Write>(values: &[Vec<f64>], mut out: W) -> Result<()> {
    let cols = values.first().map_or(0, Vec::len);
    out.write_all(&BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&(values.len() as u64).to_le_bytes())?;
    out.write_all(&(cols as u64).to_le_bytes())?;
    for row in values {
        if row.len() != cols {
            return Err(Error::LengthMismatch { expected: cols, got: row.len() });
        }
        for v in row {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Vec<Vec<f64>>> {
    let mut head = [0u8; 24];
    input.read_exact(&mut head)?;
    if head[..4] != BINARY_MAGIC {
        return Err(Error::Parse("bad magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(Error::Parse(format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
    let mut buf = [0u8; 8];
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for _ in 0..cols {
            input.read_exact(&mut buf)?;
            row.push(f64::from_le_bytes(buf));
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let t = vec![vec![1.0, -2.5, f64::MIN_POSITIVE], vec![0.0, 3.0, 1e300]];
        let mut buf = Vec::new();
        write_binary(&t, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 6 * 8);
        assert_eq!(read_binary(&buf[..]).unwrap(), t);
        buf[0] = b'X';
        assert!(read_binary(&buf[..]).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&[vec![1.0, 2.0]], &[0.0, 0.5], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sample_id,position,value\n0,0,1\n0,0.5,2\n");
    }
}
