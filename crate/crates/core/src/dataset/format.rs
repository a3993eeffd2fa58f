//! Reading and writing the PSG-compatible annotation file.
//!
//! The base layout is the PSG one. Three additive fields carry what PSG
//! lacks, and base-schema readers skip them:
//!
//! * `data[].neg_relations`: `[subject, object, predicate]` triplets a human
//!   judged *not* to hold,
//! * `data[].segments_info[].faulty`: `true` when a mask was rejected,
//! * `data[].cluster_id` and top-level `predicate_display_names`.
//!
//! See `docs/annotation-format.md` for the frozen field list.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use super::model::{CategoryTable, Dataset, ImageRecord, Polarity, RelationTriplet, SegmentedObject};
use super::validate::validate_dataset;
use super::DatasetError;

#[derive(Debug, Serialize, Deserialize)]
struct FileDoc {
    thing_classes: Vec<String>,
    stuff_classes: Vec<String>,
    predicate_classes: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    predicate_display_names: BTreeMap<usize, String>,
    data: Vec<ImageDoc>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageDoc {
    #[serde(deserialize_with = "string_or_number")]
    image_id: String,
    file_name: String,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pan_seg_file_name: Option<String>,
    #[serde(default)]
    segments_info: Vec<SegmentDoc>,
    #[serde(default)]
    relations: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    neg_relations: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cluster_id: Option<usize>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentDoc {
    id: u64,
    category_id: usize,
    #[serde(default, skip_serializing_if = "is_false")]
    faulty: bool,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

// Some PSG derivatives write numeric image ids.
fn string_or_number<'de, D: Deserializer<'de>>(de: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        S(String),
        N(u64),
    }
    Ok(match Id::deserialize(de)? {
        Id::S(s) => s,
        Id::N(n) => n.to_string(),
    })
}

fn triplets(list: &[[usize; 3]], polarity: Polarity) -> impl Iterator<Item = RelationTriplet> + '_ {
    list.iter().map(move |&[s, o, p]| RelationTriplet { subject_idx: s, object_idx: o, predicate_id: p, polarity })
}

/// Parses an annotation file without checking dataset invariants.
pub fn parse_dataset_unchecked(bytes: &[u8]) -> Result<Dataset, DatasetError> {
    let doc: FileDoc = serde_json::from_slice(bytes).map_err(|e| DatasetError::Schema(e.to_string()))?;

    let mut categories = CategoryTable::new(doc.thing_classes, doc.stuff_classes, doc.predicate_classes);
    categories.display_names = doc.predicate_display_names;

    let mut images = Vec::with_capacity(doc.data.len());
    let mut relations = BTreeMap::new();
    for img in doc.data {
        let objects = img
            .segments_info
            .into_iter()
            .map(|s| SegmentedObject {
                segment_id: s.id,
                category_id: s.category_id,
                is_faulty: s.faulty,
                extra: s.extra,
            })
            .collect();
        let list: Vec<RelationTriplet> = triplets(&img.relations, Polarity::Positive)
            .chain(triplets(&img.neg_relations, Polarity::Negative))
            .collect();
        if !list.is_empty() {
            // Relations of a repeated image id are concatenated and reported
            // as duplicates by validation.
            relations.entry(img.image_id.clone()).or_insert_with(Vec::new).extend(list);
        }
        images.push(ImageRecord {
            image_id: img.image_id,
            file_name: img.file_name,
            width: img.width,
            height: img.height,
            pan_seg_file_name: img.pan_seg_file_name,
            objects,
            cluster_id: img.cluster_id,
            extra: img.extra,
        });
    }

    let mut d = Dataset { categories, images, relations, extra: doc.extra };
    d.normalize();
    Ok(d)
}

/// Parses an annotation file and checks every dataset invariant.
///
/// The first violation found decides the error: index problems become
/// [`DatasetError::Index`], repeated triplets [`DatasetError::Duplicate`],
/// anything else [`DatasetError::Schema`].
pub fn parse_dataset(bytes: &[u8]) -> Result<Dataset, DatasetError> {
    let d = parse_dataset_unchecked(bytes)?;
    let report = validate_dataset(&d);
    if let Some(v) = report.violations.first() {
        let msg = v.to_string();
        return Err(if v.kind.is_index_error() {
            DatasetError::Index(msg)
        } else if v.kind.is_duplicate_error() {
            DatasetError::Duplicate(msg)
        } else {
            DatasetError::Schema(msg)
        });
    }
    Ok(d)
}

fn to_doc(d: &Dataset) -> FileDoc {
    let data = d
        .images
        .iter()
        .map(|img| {
            let list = d.relations_of(&img.image_id);
            let pick = |pol: Polarity| {
                list.iter()
                    .filter(|t| t.polarity == pol)
                    .map(|t| [t.subject_idx, t.object_idx, t.predicate_id])
                    .collect::<Vec<_>>()
            };
            ImageDoc {
                image_id: img.image_id.clone(),
                file_name: img.file_name.clone(),
                width: img.width,
                height: img.height,
                pan_seg_file_name: img.pan_seg_file_name.clone(),
                segments_info: img
                    .objects
                    .iter()
                    .map(|o| SegmentDoc {
                        id: o.segment_id,
                        category_id: o.category_id,
                        faulty: o.is_faulty,
                        extra: o.extra.clone(),
                    })
                    .collect(),
                relations: pick(Polarity::Positive),
                neg_relations: pick(Polarity::Negative),
                cluster_id: img.cluster_id,
                extra: img.extra.clone(),
            }
        })
        .collect();
    FileDoc {
        thing_classes: d.categories.thing_classes.clone(),
        stuff_classes: d.categories.stuff_classes.clone(),
        predicate_classes: d.categories.predicate_classes.clone(),
        predicate_display_names: d.categories.display_names.clone(),
        data,
        extra: d.extra.clone(),
    }
}

/// Serializes a dataset as compact JSON.
pub fn export_dataset(d: &Dataset) -> Vec<u8> {
    serde_json::to_vec(&to_doc(d)).expect("annotation document always serializes")
}

pub fn export_dataset_pretty(d: &Dataset) -> Vec<u8> {
    serde_json::to_vec_pretty(&to_doc(d)).expect("annotation document always serializes")
}
