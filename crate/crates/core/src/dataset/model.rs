//! In-memory data model for panoptic scene graph annotation files.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Object and predicate vocabularies shared by every image of a dataset.
///
/// Object classes are stored as the concatenation of thing classes followed
/// by stuff classes, which is how panoptic category ids index them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoryTable {
    pub thing_classes: Vec<String>,
    pub stuff_classes: Vec<String>,
    pub predicate_classes: Vec<String>,
    /// Annotator-facing labels keyed by predicate id. Canonical names are
    /// always what gets stored; these are shown in the UI only.
    pub display_names: BTreeMap<usize, String>,
}

impl CategoryTable {
    pub fn new(thing_classes: Vec<String>, stuff_classes: Vec<String>, predicate_classes: Vec<String>) -> Self {
        Self { thing_classes, stuff_classes, predicate_classes, display_names: BTreeMap::new() }
    }

    pub fn num_object_classes(&self) -> usize {
        self.thing_classes.len() + self.stuff_classes.len()
    }

    pub fn num_predicates(&self) -> usize {
        self.predicate_classes.len()
    }

    /// Name of an object class by its panoptic category id.
    pub fn object_class(&self, category_id: usize) -> Option<&str> {
        if category_id < self.thing_classes.len() {
            Some(&self.thing_classes[category_id])
        } else {
            self.stuff_classes.get(category_id - self.thing_classes.len()).map(String::as_str)
        }
    }

    pub fn predicate_name(&self, predicate_id: usize) -> Option<&str> {
        self.predicate_classes.get(predicate_id).map(String::as_str)
    }

    /// Label shown to annotators: the display name when one is set, otherwise
    /// the canonical predicate name.
    pub fn display_name(&self, predicate_id: usize) -> Option<&str> {
        self.display_names.get(&predicate_id).map(String::as_str).or_else(|| self.predicate_name(predicate_id))
    }

    /// Resolves a predicate given either its canonical name, its display
    /// name, or a numeric id.
    pub fn resolve_predicate(&self, key: &str) -> Option<usize> {
        if let Some(idx) = self.predicate_classes.iter().position(|p| p == key) {
            return Some(idx);
        }
        if let Some((&idx, _)) = self.display_names.iter().find(|(_, name)| *name == key) {
            return Some(idx);
        }
        key.parse::<usize>().ok().filter(|&idx| idx < self.num_predicates())
    }

    /// True when both tables name the same classes in the same order.
    /// Display names are presentation only and are not compared.
    pub fn same_classes(&self, other: &CategoryTable) -> bool {
        self.thing_classes == other.thing_classes
            && self.stuff_classes == other.stuff_classes
            && self.predicate_classes == other.predicate_classes
    }
}

/// One panoptic segment of an image.
///
/// The mask itself is never decoded: `segment_id` identifies the segment
/// inside the image's panoptic PNG, and any RLE or polygon payload rides in
/// `extra` untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedObject {
    pub segment_id: u64,
    pub category_id: usize,
    pub is_faulty: bool,
    pub extra: Map<String, Value>,
}

impl SegmentedObject {
    pub fn new(segment_id: u64, category_id: usize) -> Self {
        Self { segment_id, category_id, is_faulty: false, extra: Map::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    /// Panoptic segmentation PNG this image's segment ids refer to.
    pub pan_seg_file_name: Option<String>,
    /// Object index `i` is `objects[i]`.
    pub objects: Vec<SegmentedObject>,
    pub cluster_id: Option<usize>,
    pub extra: Map<String, Value>,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, file_name: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            image_id: image_id.into(),
            file_name: file_name.into(),
            width,
            height,
            pan_seg_file_name: None,
            objects: Vec::new(),
            cluster_id: None,
            extra: Map::new(),
        }
    }

    pub fn with_objects(mut self, objects: Vec<SegmentedObject>) -> Self {
        self.objects = objects;
        self
    }

    pub fn is_faulty(&self, object_idx: usize) -> bool {
        self.objects.get(object_idx).is_some_and(|o| o.is_faulty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationTriplet {
    pub subject_idx: usize,
    pub object_idx: usize,
    pub predicate_id: usize,
    pub polarity: Polarity,
}

impl RelationTriplet {
    pub fn positive(subject_idx: usize, object_idx: usize, predicate_id: usize) -> Self {
        Self { subject_idx, object_idx, predicate_id, polarity: Polarity::Positive }
    }

    pub fn negative(subject_idx: usize, object_idx: usize, predicate_id: usize) -> Self {
        Self { subject_idx, object_idx, predicate_id, polarity: Polarity::Negative }
    }

    /// The (subject, object, predicate) key, ignoring polarity.
    pub fn key(&self) -> (usize, usize, usize) {
        (self.subject_idx, self.object_idx, self.predicate_id)
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.subject_idx, self.object_idx)
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }
}

/// A whole annotation file.
///
/// Relation lists are kept in canonical order: positives first, negatives
/// after, each in insertion order. Images without relations have no entry in
/// `relations`. [`Dataset::normalize`] restores that form after manual edits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub categories: CategoryTable,
    pub images: Vec<ImageRecord>,
    pub relations: BTreeMap<String, Vec<RelationTriplet>>,
    /// Top-level fields this crate does not interpret (e.g. `test_image_ids`).
    pub extra: Map<String, Value>,
}

impl Dataset {
    pub fn new(categories: CategoryTable) -> Self {
        Self { categories, ..Self::default() }
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|img| img.image_id == image_id)
    }

    pub fn image_mut(&mut self, image_id: &str) -> Option<&mut ImageRecord> {
        self.images.iter_mut().find(|img| img.image_id == image_id)
    }

    pub fn relations_of(&self, image_id: &str) -> &[RelationTriplet] {
        self.relations.get(image_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Positive triplets of one image as `(subject, object, predicate)`.
    pub fn positives_of(&self, image_id: &str) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.relations_of(image_id).iter().filter(|t| t.is_positive()).map(RelationTriplet::key)
    }

    pub fn num_relations(&self) -> usize {
        self.relations.values().map(Vec::len).sum()
    }

    pub fn num_polarity(&self, polarity: Polarity) -> usize {
        self.relations.values().flatten().filter(|t| t.polarity == polarity).count()
    }

    /// Appends a triplet, keeping the positives-before-negatives order.
    pub fn push_relation(&mut self, image_id: &str, triplet: RelationTriplet) {
        let list = self.relations.entry(image_id.to_string()).or_default();
        match triplet.polarity {
            Polarity::Negative => list.push(triplet),
            Polarity::Positive => {
                let at = list.iter().position(|t| !t.is_positive()).unwrap_or(list.len());
                list.insert(at, triplet);
            }
        }
    }

    /// Stable-partitions every relation list into positives then negatives
    /// and drops empty lists.
    pub fn normalize(&mut self) {
        self.relations.retain(|_, list| !list.is_empty());
        for list in self.relations.values_mut() {
            let (pos, neg): (Vec<RelationTriplet>, Vec<RelationTriplet>) = list.iter().partition(|t| t.is_positive());
            list.clear();
            list.extend(pos);
            list.extend(neg);
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// Every (image, subject, object, predicate) that carries any annotation.
    pub fn annotated_keys(&self) -> HashSet<(String, usize, usize, usize)> {
        self.relations
            .iter()
            .flat_map(|(id, list)| list.iter().map(move |t| (id.clone(), t.subject_idx, t.object_idx, t.predicate_id)))
            .collect()
    }

    /// Every (image, object index) flagged as faulty.
    pub fn faulty_objects(&self) -> HashSet<(String, usize)> {
        self.images
            .iter()
            .flat_map(|img| {
                img.objects
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.is_faulty)
                    .map(move |(idx, _)| (img.image_id.clone(), idx))
            })
            .collect()
    }
}
