use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::log::{decode_log, LogRecord};
use super::{AnnotationDecision, DecisionKind, ServiceError};
use crate::dataset::{CategoryTable, Dataset, ImageRecord, Polarity, RelationTriplet};
use crate::proposal::Proposal;

/// What an annotation campaign works on: the candidate images, their
/// category table, and the ranked proposal queue.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    categories: CategoryTable,
    images: Vec<ImageRecord>,
    queue: Vec<Proposal>,
    image_index: HashMap<String, usize>,
    proposal_index: HashMap<String, usize>,
    /// Queue positions per predicate, in queue order.
    by_predicate: BTreeMap<usize, Vec<usize>>,
}

impl CampaignSpec {
    /// Checks that every proposal points at an existing image, object pair
    /// and predicate. Repeated proposal ids keep their first occurrence.
    pub fn new(images: Dataset, queue: Vec<Proposal>) -> Result<Self, ServiceError> {
        let image_index: HashMap<String, usize> =
            images.images.iter().enumerate().map(|(i, img)| (img.image_id.clone(), i)).collect();
        let n = images.categories.num_predicates();
        let mut kept = Vec::with_capacity(queue.len());
        let mut proposal_index = HashMap::new();
        for p in queue {
            let Some(&img) = image_index.get(&p.image_id) else {
                return Err(ServiceError::InvalidCampaign(format!(
                    "proposal {} refers to unknown image {}",
                    p.proposal_id, p.image_id
                )));
            };
            let m = images.images[img].objects.len();
            if p.subject_idx >= m || p.object_idx >= m || p.subject_idx == p.object_idx || p.predicate_id >= n {
                return Err(ServiceError::InvalidCampaign(format!(
                    "proposal {} has an invalid subject, object or predicate",
                    p.proposal_id
                )));
            }
            if proposal_index.contains_key(&p.proposal_id) {
                continue;
            }
            proposal_index.insert(p.proposal_id.clone(), kept.len());
            kept.push(p);
        }
        let mut by_predicate: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, p) in kept.iter().enumerate() {
            by_predicate.entry(p.predicate_id).or_default().push(i);
        }
        Ok(Self {
            categories: images.categories,
            images: images.images,
            queue: kept,
            image_index,
            proposal_index,
            by_predicate,
        })
    }

    pub fn categories(&self) -> &CategoryTable {
        &self.categories
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.image_index.get(image_id).map(|&i| &self.images[i])
    }

    pub fn queue(&self) -> &[Proposal] {
        &self.queue
    }

    pub fn proposal(&self, proposal_id: &str) -> Option<&Proposal> {
        self.proposal_index.get(proposal_id).map(|&i| &self.queue[i])
    }

    pub(crate) fn positions_for(&self, predicate: usize) -> &[usize] {
        self.by_predicate.get(&predicate).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn predicates(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_predicate.keys().copied()
    }
}

/// Two terminal decisions that disagree. The first one wins on export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub proposal_id: String,
    pub kept: DecisionKind,
    pub kept_by: String,
    pub rejected: DecisionKind,
    pub rejected_by: String,
}

/// A triplet-level clash found while expanding decisions on export, e.g. a
/// positive on a pair that someone else declared to have no relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletConflict {
    pub image_id: String,
    pub subject_idx: usize,
    pub object_idx: usize,
    pub predicate_id: usize,
    pub kept: Polarity,
    pub rejected: Polarity,
}

/// Everything derived from the log. Rebuilt exactly by replaying the log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldedState {
    pub records_applied: usize,
    /// First terminal decision per proposal, in log order.
    pub terminal: Vec<AnnotationDecision>,
    pub decided: BTreeMap<String, usize>,
    /// (proposal, annotator) pairs with a terminal decision.
    pub decided_by: BTreeSet<(String, String)>,
    /// (proposal, annotator) pairs the annotator skipped.
    pub skipped_by: BTreeSet<(String, String)>,
    pub skips: usize,
    pub faulty: BTreeSet<(String, usize)>,
    pub no_relation_pairs: BTreeSet<(String, usize, usize)>,
    pub conflicts: Vec<Conflict>,
}

/// Campaign state: a pure fold of the decision log over a [`CampaignSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignState {
    spec: CampaignSpec,
    folded: FoldedState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateStats {
    pub predicate_id: usize,
    pub predicate: String,
    pub display_name: String,
    pub queued: usize,
    /// Proposals still to be served (excludes decided and withdrawn ones).
    pub remaining: usize,
    pub positives: usize,
    pub negatives: usize,
    pub no_relation: usize,
    pub faulty: usize,
    /// Positives over all terminal decisions for the predicate.
    pub positive_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub predicates: Vec<PredicateStats>,
    pub decisions: usize,
    pub skips: usize,
    pub faulty_objects: usize,
    pub conflicts: usize,
}

/// Dataset export of a campaign plus its side products.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignExport {
    /// Positive and negative triplets with faulty flags; PSG-compatible.
    pub dataset: Dataset,
    /// Positives only, for retraining the proposal model.
    pub retrain: Dataset,
    pub conflicts: Vec<Conflict>,
    pub triplet_conflicts: Vec<TripletConflict>,
}

impl CampaignState {
    pub fn new(spec: CampaignSpec) -> Self {
        Self { spec, folded: FoldedState::default() }
    }

    pub fn from_parts(spec: CampaignSpec, folded: FoldedState) -> Self {
        Self { spec, folded }
    }

    pub fn spec(&self) -> &CampaignSpec {
        &self.spec
    }

    pub fn folded(&self) -> &FoldedState {
        &self.folded
    }

    /// Replays every record of a log on top of a fresh state.
    pub fn replay(spec: CampaignSpec, records: &[LogRecord]) -> Result<Self, ServiceError> {
        let mut state = Self::new(spec);
        for r in records {
            state.apply(r)?;
        }
        Ok(state)
    }

    /// Rebuilds the state from raw log bytes. A torn final record is dropped.
    pub fn recover(spec: CampaignSpec, log_bytes: &[u8]) -> Result<Self, ServiceError> {
        let decoded = decode_log(log_bytes)?;
        Self::replay(spec, &decoded.records).map_err(|e| match e {
            ServiceError::CorruptLog(_) => e,
            other => ServiceError::CorruptLog(other.to_string()),
        })
    }

    /// Checks that a record can be applied without changing anything.
    pub fn check(&self, record: &LogRecord) -> Result<(), ServiceError> {
        match record {
            LogRecord::Decision(d) => {
                self.spec
                    .proposal(&d.proposal_id)
                    .ok_or_else(|| ServiceError::UnknownProposal(d.proposal_id.clone()))?;
                if d.decision.is_terminal()
                    && self.folded.decided_by.contains(&(d.proposal_id.clone(), d.annotator_id.clone()))
                {
                    return Err(ServiceError::DuplicateDecision(d.proposal_id.clone()));
                }
                Ok(())
            }
            LogRecord::FaultyObject { image_id, object_idx, .. } => {
                let img = self.spec.image(image_id).ok_or_else(|| ServiceError::UnknownImage(image_id.clone()))?;
                if *object_idx >= img.objects.len() {
                    return Err(ServiceError::BadRequest(format!("image {image_id} has no object {object_idx}")));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&mut self, record: &LogRecord) -> Result<(), ServiceError> {
        self.check(record)?;
        let f = &mut self.folded;
        match record {
            LogRecord::Decision(d) => {
                let p = self.spec.proposal(&d.proposal_id).expect("checked");
                let key = (d.proposal_id.clone(), d.annotator_id.clone());
                match d.decision {
                    DecisionKind::Skip => {
                        f.skips += 1;
                        f.skipped_by.insert(key);
                    }
                    kind => {
                        f.decided_by.insert(key);
                        match f.decided.get(&d.proposal_id) {
                            Some(&first) => {
                                let kept = &f.terminal[first];
                                if kept.decision != kind {
                                    f.conflicts.push(Conflict {
                                        proposal_id: d.proposal_id.clone(),
                                        kept: kept.decision,
                                        kept_by: kept.annotator_id.clone(),
                                        rejected: kind,
                                        rejected_by: d.annotator_id.clone(),
                                    });
                                }
                            }
                            None => {
                                f.decided.insert(d.proposal_id.clone(), f.terminal.len());
                                f.terminal.push(d.clone());
                                match kind {
                                    DecisionKind::NoRelation => {
                                        f.no_relation_pairs.insert((p.image_id.clone(), p.subject_idx, p.object_idx));
                                    }
                                    DecisionKind::FaultySubject => {
                                        f.faulty.insert((p.image_id.clone(), p.subject_idx));
                                    }
                                    DecisionKind::FaultyObject => {
                                        f.faulty.insert((p.image_id.clone(), p.object_idx));
                                    }
                                    _ => {}
                                }
                            }
                        }
                    }
                }
            }
            LogRecord::FaultyObject { image_id, object_idx, .. } => {
                f.faulty.insert((image_id.clone(), *object_idx));
            }
        }
        f.records_applied += 1;
        Ok(())
    }

    pub fn is_decided(&self, proposal_id: &str) -> bool {
        self.folded.decided.contains_key(proposal_id)
    }

    pub fn has_decided(&self, proposal_id: &str, annotator_id: &str) -> bool {
        self.folded.decided_by.contains(&(proposal_id.to_string(), annotator_id.to_string()))
    }

    pub fn has_skipped(&self, proposal_id: &str, annotator_id: &str) -> bool {
        self.folded.skipped_by.contains(&(proposal_id.to_string(), annotator_id.to_string()))
    }

    pub fn is_faulty(&self, image_id: &str, object_idx: usize) -> bool {
        self.folded.faulty.contains(&(image_id.to_string(), object_idx))
    }

    /// Withdrawn: touches a faulty object, or its pair was declared to have
    /// no relation through another proposal.
    pub fn is_withdrawn(&self, p: &Proposal) -> bool {
        self.is_faulty(&p.image_id, p.subject_idx)
            || self.is_faulty(&p.image_id, p.object_idx)
            || (!self.is_decided(&p.proposal_id)
                && self.folded.no_relation_pairs.contains(&(p.image_id.clone(), p.subject_idx, p.object_idx)))
    }

    /// Neither decided nor withdrawn.
    pub fn is_open(&self, p: &Proposal) -> bool {
        !self.is_decided(&p.proposal_id) && !self.is_withdrawn(p)
    }

    pub fn stats(&self) -> CampaignStats {
        let cats = self.spec.categories();
        let mut predicates = Vec::new();
        for predicate in self.spec.predicates() {
            let positions = self.spec.positions_for(predicate);
            let mut s = PredicateStats {
                predicate_id: predicate,
                predicate: cats.predicate_name(predicate).unwrap_or_default().to_string(),
                display_name: cats.display_name(predicate).unwrap_or_default().to_string(),
                queued: positions.len(),
                remaining: 0,
                positives: 0,
                negatives: 0,
                no_relation: 0,
                faulty: 0,
                positive_ratio: None,
            };
            for &i in positions {
                let p = &self.spec.queue()[i];
                match self.folded.decided.get(&p.proposal_id).map(|&t| self.folded.terminal[t].decision) {
                    Some(DecisionKind::Positive) => s.positives += 1,
                    Some(DecisionKind::Negative) => s.negatives += 1,
                    Some(DecisionKind::NoRelation) => s.no_relation += 1,
                    Some(DecisionKind::FaultySubject | DecisionKind::FaultyObject) => s.faulty += 1,
                    Some(DecisionKind::Skip) => unreachable!("skips are not terminal"),
                    None if !self.is_withdrawn(p) => s.remaining += 1,
                    None => {}
                }
            }
            let terminal = s.positives + s.negatives + s.no_relation + s.faulty;
            s.positive_ratio = (terminal > 0).then(|| s.positives as f64 / terminal as f64);
            predicates.push(s);
        }
        CampaignStats {
            predicates,
            decisions: self.folded.terminal.len(),
            skips: self.folded.skips,
            faulty_objects: self.folded.faulty.len(),
            conflicts: self.folded.conflicts.len(),
        }
    }

    /// Turns terminal decisions into a dataset.
    ///
    /// Decisions are expanded in log order and the first annotation of a
    /// triplet wins: a positive becomes a positive triplet, a negative a
    /// negative one, and "no relation" a negative for every predicate of the
    /// pair. Triplets touching faulty objects are dropped. Images appear when
    /// they carry a relation or a faulty flag.
    pub fn export(&self) -> CampaignExport {
        let n = self.spec.categories().num_predicates();
        let mut keys: HashMap<(String, usize, usize, usize), Polarity> = HashMap::new();
        let mut ordered: Vec<(String, RelationTriplet)> = Vec::new();
        let mut triplet_conflicts = Vec::new();

        let mut add = |image_id: &str, s: usize, o: usize, pred: usize, pol: Polarity| {
            let key = (image_id.to_string(), s, o, pred);
            match keys.get(&key) {
                Some(&kept) if kept != pol => triplet_conflicts.push(TripletConflict {
                    image_id: image_id.to_string(),
                    subject_idx: s,
                    object_idx: o,
                    predicate_id: pred,
                    kept,
                    rejected: pol,
                }),
                Some(_) => {}
                None => {
                    keys.insert(key, pol);
                    ordered.push((
                        image_id.to_string(),
                        RelationTriplet { subject_idx: s, object_idx: o, predicate_id: pred, polarity: pol },
                    ));
                }
            }
        };

        for d in &self.folded.terminal {
            let p = self.spec.proposal(&d.proposal_id).expect("decisions reference known proposals");
            let (id, s, o) = (p.image_id.as_str(), p.subject_idx, p.object_idx);
            match d.decision {
                DecisionKind::Positive => add(id, s, o, p.predicate_id, Polarity::Positive),
                DecisionKind::Negative => add(id, s, o, p.predicate_id, Polarity::Negative),
                DecisionKind::NoRelation => {
                    for pred in 0..n {
                        add(id, s, o, pred, Polarity::Negative);
                    }
                }
                _ => {}
            }
        }

        let mut dataset = Dataset::new(self.spec.categories().clone());
        let mut retrain = Dataset::new(self.spec.categories().clone());
        for (image_id, t) in ordered {
            if self.is_faulty(&image_id, t.subject_idx) || self.is_faulty(&image_id, t.object_idx) {
                continue;
            }
            if t.is_positive() {
                retrain.push_relation(&image_id, t);
            }
            dataset.push_relation(&image_id, t);
        }
        for img in self.spec.images() {
            let flagged = self.folded.faulty.iter().any(|(id, _)| *id == img.image_id);
            let mut record = img.clone();
            for (idx, obj) in record.objects.iter_mut().enumerate() {
                obj.is_faulty |= self.is_faulty(&img.image_id, idx);
            }
            if dataset.relations.contains_key(&img.image_id) || flagged {
                dataset.images.push(record.clone());
            }
            if retrain.relations.contains_key(&img.image_id) {
                retrain.images.push(record);
            }
        }
        CampaignExport { dataset, retrain, conflicts: self.folded.conflicts.clone(), triplet_conflicts }
    }
}
