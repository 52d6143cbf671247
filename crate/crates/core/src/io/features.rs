use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Embedding,
    Histogram,
}

impl FeatureKind {
    pub fn magic(self) -> &'static [u8; 6] {
        match self {
            FeatureKind::Embedding => b"NTEMB1",
            FeatureKind::Histogram => b"NTHIS1",
        }
    }
}

/// Row-major `count × dim` table of little-endian `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    dim: usize,
    data: Vec<f32>,
}

impl FeatureTable {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("feature dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!("{} values is not a multiple of dimension {dim}", data.len())));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn parse_features(bytes: &[u8], kind: FeatureKind) -> Result<FeatureTable> {
    if bytes.len() < 14 || &bytes[..6] != kind.magic() {
        return Err(Error::Format(format!(
            "missing {} header",
            String::from_utf8_lossy(kind.magic())
        )));
    }
    let count = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let dim = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
    let body = &bytes[14..];
    let expected = count
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Format("feature header overflows".into()))?;
    if body.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "header declares {count}×{dim} floats ({expected} bytes) but body has {} bytes",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    FeatureTable::new(dim, data)
}

pub fn emit_features(table: &FeatureTable, kind: FeatureKind) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + table.data.len() * 4);
    out.extend_from_slice(kind.magic());
    out.extend_from_slice(&(table.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(table.dim as u32).to_le_bytes());
    for v in &table.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
