//! Self-describing binary container for trained models.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes   b"TOPICBN\0"
//! version  u32       container version (currently 1)
//! kind     u32 len + UTF-8   model kind, e.g. "lda"
//! header   u64 len + UTF-8   JSON header (config, vocabulary, shapes, ...)
//! count    u32       number of matrices
//! matrix*  u64 rows, u64 cols, rows*cols f64 (IEEE-754 bits)
//! ```
//!
//! Floats are stored as raw bits, so a write/read round trip is bit-exact.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

const MAGIC: &[u8; 8] = b"TOPICBN\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a model container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    Version(u32),
    #[error("expected a {expected:?} container, found {found:?}")]
    Kind { expected: String, found: String },
    #[error("malformed container: {0}")]
    Malformed(String),
}

/// Row-major matrix as stored in a container.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Matrix { rows, cols, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub header: serde_json::Value,
    pub matrices: Vec<Matrix>,
}

impl Container {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), ContainerError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.kind.len() as u32).to_le_bytes())?;
        w.write_all(self.kind.as_bytes())?;
        let header = serde_json::to_vec(&self.header).map_err(|e| ContainerError::Malformed(e.to_string()))?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.matrices.len() as u32).to_le_bytes())?;
        for m in &self.matrices {
            w.write_all(&(m.rows as u64).to_le_bytes())?;
            w.write_all(&(m.cols as u64).to_le_bytes())?;
            for v in &m.data {
                w.write_all(&v.to_bits().to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, ContainerError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(ContainerError::Version(version));
        }
        let kind_len = read_u32(&mut r)? as usize;
        let kind = String::from_utf8(read_bytes(&mut r, kind_len)?)
            .map_err(|_| ContainerError::Malformed("kind is not UTF-8".into()))?;
        let header_len = read_u64(&mut r)? as usize;
        let header = serde_json::from_slice(&read_bytes(&mut r, header_len)?)
            .map_err(|e| ContainerError::Malformed(format!("header: {e}")))?;
        let count = read_u32(&mut r)? as usize;
        let mut matrices = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = read_u64(&mut r)? as usize;
            let cols = read_u64(&mut r)? as usize;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| ContainerError::Malformed("matrix too large".into()))?;
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(f64::from_bits(read_u64(&mut r)?));
            }
            matrices.push(Matrix { rows, cols, data });
        }
        Ok(Container { kind, header, matrices })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ContainerError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ContainerError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    /// Loads and checks the model kind.
    pub fn load_kind(path: impl AsRef<Path>, expected: &str) -> Result<Self, ContainerError> {
        let c = Self::load(path)?;
        c.expect_kind(expected)?;
        Ok(c)
    }

    pub fn expect_kind(&self, expected: &str) -> Result<(), ContainerError> {
        if self.kind != expected {
            return Err(ContainerError::Kind {
                expected: expected.into(),
                found: self.kind.clone(),
            });
        }
        Ok(())
    }
}

fn read_bytes<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
