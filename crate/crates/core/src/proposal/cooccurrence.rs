//! Subject-predicate and predicate-object counts from a training set, used
//! to drop triplets no training annotation supports (e.g. a table drinking).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;

/// Counts below this are treated as noise: one or zero samples.
pub const DEFAULT_THRESHOLD: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceStats {
    /// (subject category, predicate) -> count
    pub sp_counts: HashMap<(usize, usize), u64>,
    /// (predicate, object category) -> count
    pub po_counts: HashMap<(usize, usize), u64>,
    pub threshold: u64,
}

impl CooccurrenceStats {
    pub fn sp(&self, subject_cat: usize, predicate: usize) -> u64 {
        self.sp_counts.get(&(subject_cat, predicate)).copied().unwrap_or(0)
    }

    pub fn po(&self, predicate: usize, object_cat: usize) -> u64 {
        self.po_counts.get(&(predicate, object_cat)).copied().unwrap_or(0)
    }
}

/// Tallies positive triplets only; relations touching faulty objects are
/// skipped.
pub fn build_cooccurrence(train: &Dataset, threshold: u64) -> CooccurrenceStats {
    let mut sp_counts = HashMap::new();
    let mut po_counts = HashMap::new();
    for img in &train.images {
        for (s, o, p) in train.positives_of(&img.image_id) {
            let (Some(subj), Some(obj)) = (img.objects.get(s), img.objects.get(o)) else {
                continue;
            };
            if subj.is_faulty || obj.is_faulty {
                continue;
            }
            *sp_counts.entry((subj.category_id, p)).or_insert(0) += 1;
            *po_counts.entry((p, obj.category_id)).or_insert(0) += 1;
        }
    }
    CooccurrenceStats { sp_counts, po_counts, threshold }
}

/// A triplet is plausible when both its subject-predicate and its
/// predicate-object combination reach the threshold. The full triplet need
/// not have been seen.
pub fn is_plausible(stats: &CooccurrenceStats, subject_cat: usize, predicate: usize, object_cat: usize) -> bool {
    stats.sp(subject_cat, predicate) >= stats.threshold && stats.po(predicate, object_cat) >= stats.threshold
}

// JSON form: maps with tuple keys become sorted entry lists.
#[derive(Serialize, Deserialize)]
struct StatsFile {
    threshold: u64,
    subject_predicate: Vec<SpEntry>,
    predicate_object: Vec<PoEntry>,
}

#[derive(Serialize, Deserialize)]
struct SpEntry {
    subject: usize,
    predicate: usize,
    count: u64,
}

#[derive(Serialize, Deserialize)]
struct PoEntry {
    predicate: usize,
    object: usize,
    count: u64,
}

impl CooccurrenceStats {
    pub fn to_json(&self) -> String {
        let mut sp: Vec<_> = self
            .sp_counts
            .iter()
            .map(|(&(subject, predicate), &count)| SpEntry { subject, predicate, count })
            .collect();
        sp.sort_by_key(|e| (e.subject, e.predicate));
        let mut po: Vec<_> =
            self.po_counts.iter().map(|(&(predicate, object), &count)| PoEntry { predicate, object, count }).collect();
        po.sort_by_key(|e| (e.predicate, e.object));
        serde_json::to_string_pretty(&StatsFile {
            threshold: self.threshold,
            subject_predicate: sp,
            predicate_object: po,
        })
        .expect("stats serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: StatsFile = serde_json::from_str(text)?;
        Ok(Self {
            threshold: file.threshold,
            sp_counts: file.subject_predicate.into_iter().map(|e| ((e.subject, e.predicate), e.count)).collect(),
            po_counts: file.predicate_object.into_iter().map(|e| ((e.predicate, e.object), e.count)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CategoryTable, ImageRecord, RelationTriplet, SegmentedObject};

    const PERSON: usize = 0;
    const HORSE: usize = 1;
    const RIDING: usize = 0;

    fn train() -> Dataset {
        let mut d = Dataset::new(CategoryTable::new(
            vec!["person".into(), "horse".into()],
            vec![],
            vec!["riding".into(), "beside".into()],
        ));
        for i in 0..3 {
            let id = format!("i{i}");
            d.images.push(
                ImageRecord::new(&id, "x.jpg", 1, 1)
                    .with_objects(vec![SegmentedObject::new(1, PERSON), SegmentedObject::new(2, HORSE)]),
            );
            d.push_relation(&id, RelationTriplet::positive(0, 1, RIDING));
            d.push_relation(&id, RelationTriplet::negative(1, 0, RIDING));
        }
        d
    }

    #[test]
    fn counts_positive_triplets() {
        let stats = build_cooccurrence(&train(), DEFAULT_THRESHOLD);
        assert_eq!(stats.sp(PERSON, RIDING), 3);
        assert_eq!(stats.po(RIDING, HORSE), 3);
        // Negative (horse, riding, person) is not counted.
        assert_eq!(stats.sp(HORSE, RIDING), 0);
    }

    #[test]
    fn empty_dataset_has_no_counts() {
        let stats = build_cooccurrence(&Dataset::default(), 2);
        assert!(stats.sp_counts.is_empty() && stats.po_counts.is_empty());
        assert_eq!(stats.sp(0, 0), 0);
    }

    #[test]
    fn unseen_triplet_with_seen_halves_is_plausible() {
        let (dog, banana, table, water, eating, drinking) = (0, 1, 2, 3, 0, 1);
        let mut stats = build_cooccurrence(&Dataset::default(), DEFAULT_THRESHOLD);
        stats.sp_counts.insert((dog, eating), 5);
        stats.po_counts.insert((eating, banana), 4);
        stats.po_counts.insert((drinking, water), 9);
        assert!(is_plausible(&stats, dog, eating, banana));
        assert!(!is_plausible(&stats, table, drinking, water));
        stats.sp_counts.insert((table, drinking), 1);
        assert!(!is_plausible(&stats, table, drinking, water));
    }

    #[test]
    fn json_round_trip() {
        let stats = build_cooccurrence(&train(), 3);
        assert_eq!(CooccurrenceStats::from_json(&stats.to_json()).unwrap(), stats);
    }
}
