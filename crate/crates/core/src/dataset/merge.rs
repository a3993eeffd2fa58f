use std::collections::{HashMap, HashSet};

use serde_json::Value;

use super::model::{Dataset, Polarity};
use super::validate::validate_dataset;
use super::DatasetError;

/// Appends the images and relations of `addition` to `base`.
///
/// Images shared by both inputs must be identical. A triplet present in both
/// is kept once; with opposite polarities the merge fails.
pub fn merge_datasets(base: &Dataset, addition: &Dataset) -> Result<Dataset, DatasetError> {
    if !base.categories.same_classes(&addition.categories) {
        return Err(DatasetError::CategoryMismatch);
    }
    let mut out = base.clone();
    for (&id, name) in &addition.categories.display_names {
        out.categories.display_names.entry(id).or_insert_with(|| name.clone());
    }
    for (key, value) in &addition.extra {
        match (out.extra.get_mut(key), value) {
            (None, _) => {
                out.extra.insert(key.clone(), value.clone());
            }
            // e.g. `test_image_ids`: union, base order first.
            (Some(Value::Array(existing)), Value::Array(more)) => {
                for v in more {
                    if !existing.contains(v) {
                        existing.push(v.clone());
                    }
                }
            }
            (Some(_), _) => {}
        }
    }

    let positions: HashMap<String, usize> =
        out.images.iter().enumerate().map(|(i, img)| (img.image_id.clone(), i)).collect();
    for img in &addition.images {
        match positions.get(&img.image_id) {
            Some(&i) if out.images[i] == *img => {}
            Some(_) => {
                return Err(DatasetError::Conflict(format!("image {} differs between the merged files", img.image_id)))
            }
            None => out.images.push(img.clone()),
        }
    }

    for (image_id, list) in &addition.relations {
        let mut existing: HashMap<(usize, usize, usize), Polarity> =
            out.relations_of(image_id).iter().map(|t| (t.key(), t.polarity)).collect();
        let mut added = HashSet::new();
        for t in list {
            match existing.get(&t.key()) {
                Some(&p) if p == t.polarity => {}
                Some(_) => {
                    return Err(DatasetError::Conflict(format!(
                        "image {image_id} triplet [{}, {}, {}] is positive in one file and negative in the other",
                        t.subject_idx, t.object_idx, t.predicate_id
                    )))
                }
                None => {
                    if added.insert(t.key()) {
                        out.push_relation(image_id, *t);
                        existing.insert(t.key(), t.polarity);
                    }
                }
            }
        }
    }

    let report = validate_dataset(&out);
    if let Some(v) = report.violations.first() {
        return Err(DatasetError::Invalid(v.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::model::{CategoryTable, ImageRecord, RelationTriplet, SegmentedObject};

    fn cats() -> CategoryTable {
        CategoryTable::new(vec!["person".into(), "horse".into()], vec![], vec!["on".into(), "riding".into()])
    }

    fn with_images(ids: &[&str]) -> Dataset {
        let mut d = Dataset::new(cats());
        for id in ids {
            d.images.push(
                ImageRecord::new(*id, format!("{id}.jpg"), 4, 4)
                    .with_objects(vec![SegmentedObject::new(1, 0), SegmentedObject::new(2, 1)]),
            );
            d.push_relation(id, RelationTriplet::positive(0, 1, 1));
        }
        d
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let d = with_images(&["a", "b"]);
        assert_eq!(merge_datasets(&d, &Dataset::new(cats())).unwrap(), d);
    }

    #[test]
    fn disjoint_images_add_up() {
        let a = with_images(&["1", "2", "3"]);
        let b = with_images(&["4", "5", "6", "7"]);
        let m = merge_datasets(&a, &b).unwrap();
        assert_eq!(m.images.len(), 7);
        assert_eq!(m.num_relations(), a.num_relations() + b.num_relations());
    }

    #[test]
    fn opposite_polarity_conflicts() {
        let a = with_images(&["1"]);
        let mut b = with_images(&["1"]);
        b.relations.get_mut("1").unwrap()[0].polarity = Polarity::Negative;
        assert!(matches!(merge_datasets(&a, &b), Err(DatasetError::Conflict(_))));
    }

    #[test]
    fn differing_image_content_conflicts() {
        let a = with_images(&["1"]);
        let mut b = with_images(&["1"]);
        b.images[0].width = 9;
        assert!(matches!(merge_datasets(&a, &b), Err(DatasetError::Conflict(_))));
    }

    #[test]
    fn shared_triplets_collapse_and_new_ones_append() {
        let a = with_images(&["1"]);
        let mut b = with_images(&["1"]);
        b.push_relation("1", RelationTriplet::negative(1, 0, 0));
        let m = merge_datasets(&a, &b).unwrap();
        assert_eq!(m.relations_of("1").len(), 2);
    }

    #[test]
    fn category_mismatch_is_rejected() {
        let a = with_images(&["1"]);
        let mut b = Dataset::new(cats());
        b.categories.predicate_classes.reverse();
        assert!(matches!(merge_datasets(&a, &b), Err(DatasetError::CategoryMismatch)));
    }
}
