//! Image embedding matrix.
//!
//! Binary layout, little endian:
//!
//! ```text
//! magic   b"HSFM"
//! version u32 = 1
//! rows    u64
//! dim     u64
//! rows × dim f32, row major
//! ```
//!
//! Image ids live in a separate UTF-8 text file, one id per line, in row
//! order.

use std::fs;
use std::path::Path;

use super::ProposalError;

const MAGIC: &[u8; 4] = b"HSFM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    image_ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(image_ids: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self, ProposalError> {
        if data.len() != image_ids.len() * dim {
            return Err(ProposalError::Format(format!(
                "{} values for {} rows of dimension {dim}",
                data.len(),
                image_ids.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ProposalError::NonFiniteScore);
        }
        Ok(Self { image_ids, dim, data })
    }

    pub fn from_rows(image_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, ProposalError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(ProposalError::Format(format!("row {bad} has a different dimension")));
        }
        if rows.len() != image_ids.len() {
            return Err(ProposalError::Format(format!("{} rows for {} image ids", rows.len(), image_ids.len())));
        }
        Self::new(image_ids, dim, rows.concat())
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.image_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.len()).map(|i| self.row(i))
    }
}

pub fn encode_features(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + m.data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.len() as u64).to_le_bytes());
    out.extend_from_slice(&(m.dim as u64).to_le_bytes());
    for &v in &m.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8], image_ids: Vec<String>) -> Result<FeatureMatrix, ProposalError> {
    let bad = |what: &str| ProposalError::Format(format!("feature matrix: {what}"));
    if bytes.len() < 24 || &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    if u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) != VERSION {
        return Err(bad("unsupported version"));
    }
    let rows = u64_at(8) as usize;
    let dim = u64_at(16) as usize;
    let body = &bytes[24..];
    if body.len() != rows * dim * 4 {
        return Err(bad(&format!("{} payload bytes, expected {}", body.len(), rows * dim * 4)));
    }
    if image_ids.len() != rows {
        return Err(bad(&format!("{} image ids for {rows} rows", image_ids.len())));
    }
    let data = body.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes")))).collect();
    FeatureMatrix::new(image_ids, dim, data)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ProposalError + '_ {
    move |source| ProposalError::Io { path: path.display().to_string(), source }
}

pub fn read_feature_matrix(bin: impl AsRef<Path>, ids: impl AsRef<Path>) -> Result<FeatureMatrix, ProposalError> {
    let (bin, ids) = (bin.as_ref(), ids.as_ref());
    let bytes = fs::read(bin).map_err(io_err(bin))?;
    let text = fs::read_to_string(ids).map_err(io_err(ids))?;
    let image_ids = text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect();
    decode_features(&bytes, image_ids)
}

pub fn write_feature_matrix(
    m: &FeatureMatrix,
    bin: impl AsRef<Path>,
    ids: impl AsRef<Path>,
) -> Result<(), ProposalError> {
    let (bin, ids) = (bin.as_ref(), ids.as_ref());
    fs::write(bin, encode_features(m)).map_err(io_err(bin))?;
    let mut text = m.image_ids.join("\n");
    text.push('\n');
    fs::write(ids, text).map_err(io_err(ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_files() {
        let m =
            FeatureMatrix::from_rows(vec!["a".into(), "b".into()], vec![vec![1.0, -2.5, 0.125], vec![3.0, 4.0, 5.0]])
                .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (bin, ids) = (dir.path().join("f.bin"), dir.path().join("f.ids"));
        write_feature_matrix(&m, &bin, &ids).unwrap();
        assert_eq!(read_feature_matrix(&bin, &ids).unwrap(), m);
    }

    #[test]
    fn rejects_mismatches() {
        assert!(FeatureMatrix::from_rows(vec!["a".into()], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(FeatureMatrix::from_rows(vec!["a".into(), "b".into()], vec![vec![1.0], vec![2.0, 3.0]]).is_err());
        assert!(matches!(FeatureMatrix::new(vec!["a".into()], 1, vec![f64::NAN]), Err(ProposalError::NonFiniteScore)));
        let m = FeatureMatrix::from_rows(vec!["a".into()], vec![vec![1.0]]).unwrap();
        let bytes = encode_features(&m);
        assert!(decode_features(&bytes, vec![]).is_err());
        assert!(decode_features(&bytes[..bytes.len() - 2], vec!["a".into()]).is_err());
    }
}
