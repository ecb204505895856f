//! Binary matrix files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! offset  size  field
//! 0       5     magic "QRXM1"
//! 5       1     kind: 0 = dense, 1 = coordinate
//! 6       1     symmetric flag: 0 or 1
//! 7       1     reserved, must be 0
//! 8       8     dimension N (u64)
//! 16      ...   payload
//! ```
//!
//! Dense payload: `N·N` f64 values in row-major order, or with the symmetric
//! flag only the upper triangle (`i ≤ j`), row by row, `N(N+1)/2` values.
//!
//! Coordinate payload: entry count (u64) followed by `(i: u64, j: u64,
//! value: f64)` triples. With the symmetric flag only `i ≤ j` is allowed and
//! the lower triangle is mirrored. Repeated coordinates are summed.

use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::operator::{HermitianOperator, COMPUTATIONAL_BASIS};

pub const MAGIC: &[u8; 5] = b"QRXM1";
pub const HEADER_LEN: usize = 16;

/// Largest dimension accepted on ingestion by default.
pub const DEFAULT_MAX_DIM: u64 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Dense,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixHeader {
    pub kind: MatrixKind,
    pub symmetric: bool,
    pub dim: u64,
}

impl MatrixHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..5].copy_from_slice(MAGIC);
        out[5] = match self.kind {
            MatrixKind::Dense => 0,
            MatrixKind::Coordinate => 1,
        };
        out[6] = self.symmetric as u8;
        out[8..16].copy_from_slice(&self.dim.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < HEADER_LEN {
            return Err(format!("file too short for a header ({} bytes)", bytes.len()));
        }
        if &bytes[..5] != MAGIC {
            return Err("bad magic, expected QRXM1".into());
        }
        let kind = match bytes[5] {
            0 => MatrixKind::Dense,
            1 => MatrixKind::Coordinate,
            k => return Err(format!("unknown matrix kind {k}")),
        };
        let symmetric = match bytes[6] {
            0 => false,
            1 => true,
            s => return Err(format!("invalid symmetric flag {s}")),
        };
        if bytes[7] != 0 {
            return Err("reserved header byte must be zero".into());
        }
        let dim = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        if dim == 0 {
            return Err("dimension must be positive".into());
        }
        Ok(Self { kind, symmetric, dim })
    }
}

/// Serializes a full matrix as a dense file.
pub fn encode_dense(op: &HermitianOperator, symmetric: bool) -> Vec<u8> {
    let n = op.dim();
    let header = MatrixHeader { kind: MatrixKind::Dense, symmetric, dim: n as u64 };
    let count = if symmetric { n * (n + 1) / 2 } else { n * n };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * count);
    out.extend_from_slice(&header.to_bytes());
    for i in 0..n {
        let start = if symmetric { i } else { 0 };
        for j in start..n {
            out.extend_from_slice(&op.get(i, j).to_le_bytes());
        }
    }
    out
}

/// Serializes coordinate entries. With `symmetric`, entries must satisfy
/// `i ≤ j`.
pub fn encode_coordinate(dim: usize, entries: &[(usize, usize, f64)], symmetric: bool) -> Result<Vec<u8>> {
    let header = MatrixHeader { kind: MatrixKind::Coordinate, symmetric, dim: dim as u64 };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 + 24 * entries.len());
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for &(i, j, x) in entries {
        if i >= dim || j >= dim {
            return Err(Error::IndexOutOfRange { index: i.max(j), dim });
        }
        if symmetric && i > j {
            return Err(Error::InvalidParameter(format!("entry ({i}, {j}) below the diagonal of a symmetric file")));
        }
        out.extend_from_slice(&(i as u64).to_le_bytes());
        out.extend_from_slice(&(j as u64).to_le_bytes());
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

/// Upper-triangle coordinate entries of an operator, skipping zeros.
pub fn upper_triangle_entries(op: &HermitianOperator) -> Vec<(usize, usize, f64)> {
    let n = op.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            let x = op.get(i, j);
            if x != 0.0 {
                out.push((i, j, x));
            }
        }
    }
    out
}

pub fn write_dense(path: &Path, op: &HermitianOperator, symmetric: bool) -> Result<()> {
    crate::io::output::write_atomic(path, &encode_dense(op, symmetric))
}

pub fn write_coordinate(path: &Path, dim: usize, entries: &[(usize, usize, f64)], symmetric: bool) -> Result<()> {
    crate::io::output::write_atomic(path, &encode_coordinate(dim, entries, symmetric)?)
}

/// Decoded file contents before symmetry enforcement.
#[derive(Debug, Clone)]
pub struct RawMatrix {
    pub header: MatrixHeader,
    pub matrix: Mat<f64>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take8(&mut self) -> std::result::Result<[u8; 8], String> {
        let end = self.pos + 8;
        if end > self.bytes.len() {
            return Err(format!("payload truncated at byte {}", self.pos));
        }
        let out = self.bytes[self.pos..end].try_into().expect("8 bytes");
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take8()?))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        let x = f64::from_le_bytes(self.take8()?);
        if !x.is_finite() {
            return Err(format!("non-finite entry at byte {}", self.pos - 8));
        }
        Ok(x)
    }
}

pub fn decode(bytes: &[u8], max_dim: u64) -> std::result::Result<RawMatrix, String> {
    let header = MatrixHeader::parse(bytes)?;
    if header.dim > max_dim {
        return Err(format!("dimension {} exceeds the limit {max_dim}", header.dim));
    }
    let n = header.dim as usize;
    let mut cur = Cursor { bytes, pos: HEADER_LEN };
    let mut m = Mat::<f64>::zeros(n, n);
    match header.kind {
        MatrixKind::Dense => {
            let count = if header.symmetric { n * (n + 1) / 2 } else { n * n };
            if bytes.len() != HEADER_LEN + 8 * count {
                return Err(format!(
                    "dense payload has {} bytes, expected {}",
                    bytes.len() - HEADER_LEN,
                    8 * count
                ));
            }
            for i in 0..n {
                let start = if header.symmetric { i } else { 0 };
                for j in start..n {
                    let x = cur.f64()?;
                    m[(i, j)] = x;
                    if header.symmetric {
                        m[(j, i)] = x;
                    }
                }
            }
        }
        MatrixKind::Coordinate => {
            let nnz = cur.u64()?;
            let expected = nnz.checked_mul(24).and_then(|b| b.checked_add(HEADER_LEN as u64 + 8));
            if expected != Some(bytes.len() as u64) {
                return Err(format!("coordinate payload length does not match {nnz} entries"));
            }
            for _ in 0..nnz {
                let i = cur.u64()?;
                let j = cur.u64()?;
                let x = cur.f64()?;
                if i >= header.dim || j >= header.dim {
                    return Err(format!("entry ({i}, {j}) outside dimension {}", header.dim));
                }
                let (i, j) = (i as usize, j as usize);
                if header.symmetric {
                    if i > j {
                        return Err(format!("entry ({i}, {j}) below the diagonal of a symmetric file"));
                    }
                    m[(i, j)] += x;
                    if i != j {
                        m[(j, i)] += x;
                    }
                } else {
                    m[(i, j)] += x;
                }
            }
        }
    }
    Ok(RawMatrix { header, matrix: m })
}

/// Reads a matrix file and returns an exactly symmetric operator in the
/// computational basis. Matrices whose relative asymmetry exceeds
/// `warn_asymmetry` are symmetrized with a warning.
pub fn ingest_matrix(path: &Path, warn_asymmetry: f64, max_dim: u64) -> Result<HermitianOperator> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let raw = decode(&bytes, max_dim).map_err(|msg| Error::ingest(path, msg))?;
    let n = raw.matrix.nrows();
    let mut asym = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(raw.matrix[(i, j)].abs());
            if i > j {
                asym = asym.max((raw.matrix[(i, j)] - raw.matrix[(j, i)]).abs());
            }
        }
    }
    if asym > warn_asymmetry * scale.max(f64::MIN_POSITIVE) {
        log::warn!(
            "{}: matrix asymmetry {asym:e} (max entry {scale:e}) exceeds tolerance; symmetrizing",
            path.display()
        );
    }
    HermitianOperator::symmetrized(raw.matrix, COMPUTATIONAL_BASIS)
}
