//! Little-endian `f32` matrix files: `"FNWM"`, `u32` version, `u32` rows,
//! `u32` cols, then `rows * cols` values row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 4] = b"FNWM";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 16;

/// Appends one matrix blob to `out`.
pub fn encode_into(m: &Matrix, out: &mut Vec<u8>) {
    out.reserve(HEADER_BYTES + 4 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(m, &mut out);
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Decodes the blob at the start of `bytes`, returning it and the bytes consumed.
pub fn decode_prefix(bytes: &[u8]) -> Result<(Matrix, usize)> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Format(format!("FNWM header truncated: {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad FNWM magic".into()));
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported FNWM version {version}")));
    }
    let rows = read_u32(bytes, 8) as usize;
    let cols = read_u32(bytes, 12) as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format(format!("FNWM size overflow {rows}x{cols}")))?;
    let end = HEADER_BYTES + 4 * n;
    if bytes.len() < end {
        return Err(Error::Format(format!(
            "FNWM body truncated: {rows}x{cols} needs {end} bytes, have {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_BYTES..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    Ok((Matrix::from_vec(rows, cols, data)?, end))
}

/// Decodes a buffer holding exactly one blob.
pub fn decode(bytes: &[u8]) -> Result<Matrix> {
    let (m, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after FNWM matrix", bytes.len() - used)));
    }
    Ok(m)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let m = Matrix::from_vec(2, 3, vec![1.5, -0.0, f32::MIN_POSITIVE, 3.25e7, -1e-30, 0.1]).unwrap();
        let back = decode(&encode(&m)).unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&m), bits(&back));
        assert_eq!((back.rows(), back.cols()), (2, 3));
    }

    #[test]
    fn truncation_and_magic_are_rejected() {
        let bytes = encode(&Matrix::zeros(3, 4));
        for cut in [0, 3, 15, 16, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
        let mut v2 = bytes;
        v2[4] = 2;
        assert!(matches!(decode(&v2), Err(Error::Format(_))));
    }

    #[test]
    fn concatenated_blobs_decode_in_sequence() {
        let a = Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![3.0, 4.0]).unwrap();
        let mut buf = encode(&a);
        encode_into(&b, &mut buf);
        let (ra, used) = decode_prefix(&buf).unwrap();
        let (rb, _) = decode_prefix(&buf[used..]).unwrap();
        assert_eq!((ra, rb), (a, b));
    }
}
