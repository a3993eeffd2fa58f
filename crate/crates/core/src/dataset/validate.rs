use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::model::{Dataset, Polarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NoPredicates,
    DuplicateClassName,
    InvalidDisplayName,
    DuplicateImageId,
    InvalidDimensions,
    EmptyMaskRef,
    CategoryOutOfRange,
    UnknownImage,
    SelfRelation,
    ObjectOutOfRange,
    PredicateOutOfRange,
    DuplicateTriplet,
    PolarityConflict,
    FaultyObjectRelation,
}

impl ViolationKind {
    /// True for violations where a relation or object points at an index
    /// that does not exist.
    pub fn is_index_error(self) -> bool {
        matches!(
            self,
            Self::CategoryOutOfRange
                | Self::UnknownImage
                | Self::SelfRelation
                | Self::ObjectOutOfRange
                | Self::PredicateOutOfRange
                | Self::FaultyObjectRelation
        )
    }

    pub fn is_duplicate_error(self) -> bool {
        matches!(self, Self::DuplicateTriplet | Self::PolarityConflict)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub image_id: Option<String>,
    /// Where inside the image (or the category table) the problem sits.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.image_id {
            Some(id) => write!(f, "image {id} {}: {}", self.location, self.message),
            None => write!(f, "{}: {}", self.location, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(
        &mut self,
        kind: ViolationKind,
        image_id: Option<&str>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) {
        self.violations.push(Violation {
            kind,
            image_id: image_id.map(str::to_string),
            location: location.into(),
            message: message.into(),
        });
    }
}

fn check_unique(report: &mut ValidationReport, list: &[String], what: &str) {
    let mut seen = HashSet::new();
    for (idx, name) in list.iter().enumerate() {
        if !seen.insert(name.as_str()) {
            report.push(
                ViolationKind::DuplicateClassName,
                None,
                format!("{what}[{idx}]"),
                format!("duplicate class name {name:?}"),
            );
        }
    }
}

/// Checks every dataset invariant and lists each violation found.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let cats = &d.categories;
    let n = cats.num_predicates();
    let num_classes = cats.num_object_classes();

    if n == 0 {
        report.push(ViolationKind::NoPredicates, None, "predicate_classes", "at least one predicate class is required");
    }
    // Thing and stuff names share one id space.
    let object_classes: Vec<String> = cats.thing_classes.iter().chain(&cats.stuff_classes).cloned().collect();
    check_unique(&mut report, &object_classes, "object_classes");
    check_unique(&mut report, &cats.predicate_classes, "predicate_classes");
    for &key in cats.display_names.keys() {
        if key >= n {
            report.push(
                ViolationKind::InvalidDisplayName,
                None,
                format!("predicate_display_names[{key}]"),
                format!("display name for predicate {key} but only {n} predicates exist"),
            );
        }
    }

    let mut images = HashMap::new();
    for img in &d.images {
        let id = Some(img.image_id.as_str());
        if images.insert(img.image_id.as_str(), img).is_some() {
            report.push(ViolationKind::DuplicateImageId, id, "image", "image_id appears more than once");
        }
        if img.width == 0 || img.height == 0 {
            report.push(
                ViolationKind::InvalidDimensions,
                id,
                "size",
                format!("width and height must be positive, got {}x{}", img.width, img.height),
            );
        }
        if img.pan_seg_file_name.as_deref() == Some("") {
            report.push(ViolationKind::EmptyMaskRef, id, "pan_seg_file_name", "mask reference is empty");
        }
        for (idx, obj) in img.objects.iter().enumerate() {
            if obj.category_id >= num_classes {
                report.push(
                    ViolationKind::CategoryOutOfRange,
                    id,
                    format!("object {idx}"),
                    format!("category {} out of range ({num_classes} classes)", obj.category_id),
                );
            }
        }
    }

    for (image_id, list) in &d.relations {
        let id = Some(image_id.as_str());
        let Some(img) = images.get(image_id.as_str()) else {
            report.push(
                ViolationKind::UnknownImage,
                id,
                "relations",
                "relations reference an image that is not in the dataset",
            );
            continue;
        };
        let m = img.objects.len();
        let mut seen: HashMap<(usize, usize, usize), Polarity> = HashMap::new();
        for t in list {
            let loc = format!("relation [{}, {}, {}]", t.subject_idx, t.object_idx, t.predicate_id);
            if t.subject_idx == t.object_idx {
                report.push(ViolationKind::SelfRelation, id, &loc, "subject and object are the same object");
            }
            if t.subject_idx >= m || t.object_idx >= m {
                report.push(
                    ViolationKind::ObjectOutOfRange,
                    id,
                    &loc,
                    format!("object index out of range ({m} objects)"),
                );
            } else if img.is_faulty(t.subject_idx) || img.is_faulty(t.object_idx) {
                report.push(
                    ViolationKind::FaultyObjectRelation,
                    id,
                    &loc,
                    "relation references an object marked faulty",
                );
            }
            if t.predicate_id >= n {
                report.push(
                    ViolationKind::PredicateOutOfRange,
                    id,
                    &loc,
                    format!("predicate out of range ({n} predicates)"),
                );
            }
            match seen.get(&t.key()) {
                None => {
                    seen.insert(t.key(), t.polarity);
                }
                Some(&p) if p == t.polarity => {
                    report.push(ViolationKind::DuplicateTriplet, id, &loc, "triplet annotated twice");
                }
                Some(_) => {
                    report.push(
                        ViolationKind::PolarityConflict,
                        id,
                        &loc,
                        "triplet annotated both positive and negative",
                    );
                }
            }
        }
    }
    report
}
