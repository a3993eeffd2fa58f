use std::collections::BTreeMap;

use serde::Serialize;

use super::model::{Dataset, Polarity};
use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    Negative,
    Unannotated,
    Positive,
}

impl Label {
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Negative => -1,
            Label::Unannotated => 0,
            Label::Positive => 1,
        }
    }
}

impl From<Polarity> for Label {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Positive => Label::Positive,
            Polarity::Negative => Label::Negative,
        }
    }
}

/// Annotation state of one subject-object pair over all `n` predicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelVector(Vec<Label>);

impl LabelVector {
    pub fn unannotated(n: usize) -> Self {
        Self(vec![Label::Unannotated; n])
    }

    pub fn get(&self, predicate_id: usize) -> Label {
        self.0[predicate_id]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn to_i8(&self) -> Vec<i8> {
        self.0.iter().map(|l| l.as_i8()).collect()
    }

    pub fn is_all_unannotated(&self) -> bool {
        self.0.iter().all(|&l| l == Label::Unannotated)
    }

    /// Predicate ids annotated with the given label.
    pub fn with_label(&self, label: Label) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(move |(_, &l)| l == label).map(|(p, _)| p)
    }
}

/// Label vectors for every annotated subject-object pair of one image.
///
/// Pairs touching a faulty object are left out.
pub fn build_label_matrix(d: &Dataset, image_id: &str) -> Result<BTreeMap<(usize, usize), LabelVector>, DatasetError> {
    let img = d.image(image_id).ok_or_else(|| DatasetError::UnknownImage(image_id.to_string()))?;
    let n = d.categories.num_predicates();
    let mut out: BTreeMap<(usize, usize), LabelVector> = BTreeMap::new();
    for t in d.relations_of(image_id) {
        if img.is_faulty(t.subject_idx) || img.is_faulty(t.object_idx) || t.predicate_id >= n {
            continue;
        }
        out.entry(t.pair()).or_insert_with(|| LabelVector::unannotated(n)).0[t.predicate_id] = t.polarity.into();
    }
    Ok(out)
}
