//! Model outputs: one score per predicate plus a "no relation" score for
//! every ordered subject-object pair of an image.
//!
//! On disk a prediction set is a JSON manifest next to one little-endian
//! binary tensor per image (layout in `docs/prediction-format.md`):
//!
//! ```text
//! magic  b"HSPR"   4 bytes
//! version u32      = 1
//! rows    u32
//! n       u32      predicate count
//! rows × { subject u32, object u32, n × f32 scores, f32 no_relation }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::MetricError;

const MAGIC: &[u8; 4] = b"HSPR";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub subject_idx: usize,
    pub object_idx: usize,
    pub scores: Vec<f64>,
    pub no_relation_score: f64,
}

impl PredictionRow {
    pub fn new(subject_idx: usize, object_idx: usize, scores: Vec<f64>, no_relation_score: f64) -> Self {
        Self { subject_idx, object_idx, scores, no_relation_score }
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.subject_idx, self.object_idx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    image_id: String,
    num_predicates: usize,
    rows: Vec<PredictionRow>,
    index: HashMap<(usize, usize), usize>,
}

impl PredictionMatrix {
    /// Checks that every row has `num_predicates` finite scores and that no
    /// pair appears twice.
    pub fn new(
        image_id: impl Into<String>,
        num_predicates: usize,
        rows: Vec<PredictionRow>,
    ) -> Result<Self, MetricError> {
        let image_id = image_id.into();
        let mut index = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.scores.len() != num_predicates {
                return Err(MetricError::ShapeMismatch(format!(
                    "image {image_id} row {i}: {} scores, expected {num_predicates}",
                    row.scores.len()
                )));
            }
            if row.scores.iter().any(|s| !s.is_finite()) || !row.no_relation_score.is_finite() {
                return Err(MetricError::NonFiniteScore);
            }
            if index.insert(row.pair(), i).is_some() {
                return Err(MetricError::InvalidPrediction(format!(
                    "image {image_id}: pair ({}, {}) predicted twice",
                    row.subject_idx, row.object_idx
                )));
            }
        }
        Ok(Self { image_id, num_predicates, rows, index })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn num_predicates(&self) -> usize {
        self.num_predicates
    }

    pub fn rows(&self) -> &[PredictionRow] {
        &self.rows
    }

    pub fn row(&self, subject_idx: usize, object_idx: usize) -> Option<&PredictionRow> {
        self.index.get(&(subject_idx, object_idx)).map(|&i| &self.rows[i])
    }

    /// Copy without the rows for which `drop` returns true.
    pub fn without_rows(&self, mut drop: impl FnMut(&PredictionRow) -> bool) -> Self {
        let rows: Vec<_> = self.rows.iter().filter(|r| !drop(r)).cloned().collect();
        Self::new(self.image_id.clone(), self.num_predicates, rows).expect("subset of a valid matrix")
    }
}

/// Prediction matrices keyed by image id.
pub type PredictionSet = BTreeMap<String, PredictionMatrix>;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    num_predicates: usize,
    images: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    image_id: String,
    file: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MetricError + '_ {
    move |source| MetricError::Io { path: path.display().to_string(), source }
}

pub fn encode_matrix(m: &PredictionMatrix) -> Vec<u8> {
    let n = m.num_predicates;
    let mut out = Vec::with_capacity(16 + m.rows.len() * (8 + 4 * (n + 1)));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows.len() as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for row in &m.rows {
        out.extend_from_slice(&(row.subject_idx as u32).to_le_bytes());
        out.extend_from_slice(&(row.object_idx as u32).to_le_bytes());
        for &s in &row.scores {
            out.extend_from_slice(&(s as f32).to_le_bytes());
        }
        out.extend_from_slice(&(row.no_relation_score as f32).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let bytes = self.buf.get(self.pos..self.pos + N)?;
        self.pos += N;
        Some(bytes.try_into().expect("slice has length N"))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn f32(&mut self) -> Option<f32> {
        self.take::<4>().map(f32::from_le_bytes)
    }
}

pub fn decode_matrix(image_id: &str, bytes: &[u8]) -> Result<PredictionMatrix, MetricError> {
    let bad = |what: &str| MetricError::Format(format!("image {image_id}: {what}"));
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take::<4>().as_ref() != Some(MAGIC) {
        return Err(bad("bad magic"));
    }
    if r.u32() != Some(VERSION) {
        return Err(bad("unsupported version"));
    }
    let rows = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
    let n = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
    let expected = 16 + rows * (8 + 4 * (n + 1));
    if bytes.len() != expected {
        return Err(bad(&format!("{} bytes, expected {expected}", bytes.len())));
    }
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        let s = r.u32().ok_or_else(|| bad("truncated row"))? as usize;
        let o = r.u32().ok_or_else(|| bad("truncated row"))? as usize;
        let scores =
            (0..n).map(|_| r.f32().map(f64::from)).collect::<Option<Vec<_>>>().ok_or_else(|| bad("truncated row"))?;
        let norel = r.f32().ok_or_else(|| bad("truncated row"))?;
        out.push(PredictionRow::new(s, o, scores, f64::from(norel)));
    }
    PredictionMatrix::new(image_id, n, out)
}

/// Reads a manifest and every tensor it lists. Tensor paths are relative to
/// the manifest's directory.
pub fn read_prediction_set(manifest_path: impl AsRef<Path>) -> Result<PredictionSet, MetricError> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read(manifest_path).map_err(io_err(manifest_path))?;
    let manifest: Manifest =
        serde_json::from_slice(&text).map_err(|e| MetricError::Format(format!("manifest: {e}")))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut set = PredictionSet::new();
    for entry in manifest.images {
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let m = decode_matrix(&entry.image_id, &bytes)?;
        if m.num_predicates != manifest.num_predicates {
            return Err(MetricError::ShapeMismatch(format!(
                "image {}: {} predicates, manifest says {}",
                entry.image_id, m.num_predicates, manifest.num_predicates
            )));
        }
        set.insert(entry.image_id, m);
    }
    Ok(set)
}

/// Writes `predictions.json` plus one `.bin` tensor per image into `dir` and
/// returns the manifest path. Scores are stored as f32.
pub fn write_prediction_set(dir: impl AsRef<Path>, set: &PredictionSet) -> Result<PathBuf, MetricError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let num_predicates = set.values().next().map_or(0, |m| m.num_predicates);
    let mut images = Vec::with_capacity(set.len());
    for (i, (image_id, m)) in set.iter().enumerate() {
        let file = format!("{i:06}.bin");
        let path = dir.join(&file);
        fs::write(&path, encode_matrix(m)).map_err(io_err(&path))?;
        images.push(ManifestEntry { image_id: image_id.clone(), file });
    }
    let manifest = Manifest { num_predicates, images };
    let path = dir.join("predictions.json");
    let text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix() -> PredictionMatrix {
        PredictionMatrix::new(
            "img",
            3,
            vec![
                PredictionRow::new(0, 1, vec![0.5, -1.25, 2.0], 0.75),
                PredictionRow::new(1, 0, vec![0.0, 1.0, 3.5], -2.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let m = matrix();
        assert_eq!(decode_matrix("img", &encode_matrix(&m)).unwrap(), m);
    }

    #[test]
    fn truncated_tensor_is_rejected() {
        let bytes = encode_matrix(&matrix());
        assert!(matches!(decode_matrix("img", &bytes[..bytes.len() - 1]), Err(MetricError::Format(_))));
        assert!(matches!(decode_matrix("img", b"nope"), Err(MetricError::Format(_))));
    }

    #[test]
    fn rejects_bad_rows() {
        let nan = PredictionRow::new(0, 1, vec![f64::NAN], 0.0);
        assert!(matches!(PredictionMatrix::new("x", 1, vec![nan]), Err(MetricError::NonFiniteScore)));
        let short = PredictionRow::new(0, 1, vec![1.0], 0.0);
        assert!(matches!(PredictionMatrix::new("x", 2, vec![short]), Err(MetricError::ShapeMismatch(_))));
        let a = PredictionRow::new(0, 1, vec![1.0], 0.0);
        assert!(matches!(PredictionMatrix::new("x", 1, vec![a.clone(), a]), Err(MetricError::InvalidPrediction(_))));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = PredictionSet::new();
        set.insert("img".into(), matrix());
        let path = write_prediction_set(dir.path(), &set).unwrap();
        assert_eq!(read_prediction_set(path).unwrap(), set);
    }
}
