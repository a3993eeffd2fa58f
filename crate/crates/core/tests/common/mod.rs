//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::Mutex;

use haystack::dataset::{write_dataset, CategoryTable, Dataset, ImageRecord, RelationTriplet, SegmentedObject};
use haystack::metrics::{EvalEntry, PredicateEvalSet, PredictionMatrix, PredictionRow, PredictionSet};
use haystack::proposal::{FeatureMatrix, Proposal};
use haystack::service::{Campaign, CampaignPaths, CampaignSpec, DecisionKind, ServiceError};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// A reader that knows only the base panoptic scene graph schema and
/// ignores everything else.
pub mod base_schema {
    use serde::Deserialize;

    #[derive(Debug, Deserialize)]
    pub struct File {
        pub thing_classes: Vec<String>,
        pub stuff_classes: Vec<String>,
        pub predicate_classes: Vec<String>,
        pub data: Vec<Image>,
    }

    #[derive(Debug, Deserialize)]
    pub struct Image {
        pub image_id: serde_json::Value,
        pub file_name: String,
        pub width: u32,
        pub height: u32,
        pub pan_seg_file_name: Option<String>,
        pub segments_info: Vec<Segment>,
        pub relations: Vec<[usize; 3]>,
    }

    #[derive(Debug, Deserialize)]
    pub struct Segment {
        pub id: u64,
        pub category_id: usize,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `(is_positive, confidence, rank)` entries with at most `max_len`
/// items and ranks below `n`. Confidences come from a small grid so ties
/// occur.
pub fn random_entries(rng: &mut ChaCha8Rng, n: usize, max_len: usize) -> Vec<(bool, f64, usize)> {
    let len = rng.random_range(1..=max_len);
    (0..len)
        .map(|_| {
            let conf = f64::from(rng.random_range(-20i32..=20)) / 8.0;
            (rng.random_bool(0.5), conf, rng.random_range(0..n))
        })
        .collect()
}

pub fn eval_set(entries: &[(bool, f64, usize)]) -> PredicateEvalSet {
    PredicateEvalSet::new(
        entries
            .iter()
            .map(|&(pos, c, r)| if pos { EvalEntry::positive(c, r) } else { EvalEntry::negative(c, r) })
            .collect(),
    )
    .expect("finite confidences")
}

/// Materializes `T_k` and `P` as index sets and averages the ratio.
fn displacement(entries: &[(bool, f64, usize)], n: usize, over_top: bool) -> f64 {
    let positives: BTreeSet<usize> = (0..entries.len()).filter(|&i| entries[i].0).collect();
    let mut total = 0.0;
    for k in 1..n {
        let top: BTreeSet<usize> = (0..entries.len()).filter(|&i| entries[i].2 < k).collect();
        let hit = top.intersection(&positives).count() as f64;
        let denom = if over_top { top.len() } else { positives.len() };
        total += if denom == 0 { 1.0 } else { hit / denom as f64 };
    }
    1.0 - total / (n - 1) as f64
}

pub fn brute_force_pdo(entries: &[(bool, f64, usize)], n: usize) -> f64 {
    displacement(entries, n, true)
}

pub fn brute_force_pdd(entries: &[(bool, f64, usize)], n: usize) -> f64 {
    displacement(entries, n, false)
}

/// Fraction of (positive, negative) pairs won by the positive, ties 0.5.
pub fn brute_force_auc(entries: &[(bool, f64, usize)]) -> f64 {
    let pos: Vec<f64> = entries.iter().filter(|e| e.0).map(|e| e.1).collect();
    let neg: Vec<f64> = entries.iter().filter(|e| !e.0).map(|e| e.1).collect();
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            wins += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Rand index corrected for chance, from the contingency table.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let pairs = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| pairs(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| pairs(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| pairs(v)).sum();
    let expected = sum_a * sum_b / pairs(a.len() as u64);
    let max = (sum_a + sum_b) / 2.0;
    (index - expected) / (max - expected)
}

/// Three well separated blobs in `dim >= 3` dimensions, with true labels.
pub fn blobs(per_blob: usize, dim: usize, seed: u64) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = rng(seed);
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for b in 0..3 {
        for i in 0..per_blob {
            ids.push(format!("b{b}_{i}"));
            rows.push((0..dim).map(|d| if d == b { 20.0 } else { 0.0 } + rng.random_range(-0.5..0.5)).collect());
            truth.push(b);
        }
    }
    (FeatureMatrix::from_rows(ids, rows).unwrap(), truth)
}

pub fn categories(objects: usize, predicates: usize) -> CategoryTable {
    let things = objects.div_ceil(2);
    CategoryTable::new(
        (0..things).map(|i| format!("thing{i}")).collect(),
        (things..objects).map(|i| format!("stuff{i}")).collect(),
        (0..predicates).map(|i| format!("pred{i}")).collect(),
    )
}

/// A valid dataset with random images, objects, faulty flags and triplets
/// of both polarities.
pub fn random_dataset(seed: u64, id_prefix: &str) -> Dataset {
    let mut rng = rng(seed);
    let mut cats = categories(rng.random_range(1..6), rng.random_range(2..7));
    if rng.random_bool(0.5) {
        cats.display_names.insert(0, "first predicate".into());
    }
    random_dataset_in(&mut rng, cats, id_prefix)
}

/// Like [`random_dataset`] with a given category table.
pub fn random_dataset_in(rng: &mut ChaCha8Rng, cats: CategoryTable, id_prefix: &str) -> Dataset {
    let n_cats = cats.num_object_classes();
    let n_preds = cats.num_predicates();
    let mut d = Dataset::new(cats);
    if rng.random_bool(0.5) {
        d.extra.insert("test_image_ids".into(), json!([format!("{id_prefix}0")]));
    }
    for i in 0..rng.random_range(0..6) {
        let id = format!("{id_prefix}{i}");
        let m = rng.random_range(0..6);
        let mut objects: Vec<SegmentedObject> =
            (0..m).map(|s| SegmentedObject::new(s as u64 + 1, rng.random_range(0..n_cats))).collect();
        for o in &mut objects {
            o.is_faulty = rng.random_bool(0.15);
            if rng.random_bool(0.3) {
                o.extra.insert("area".into(), json!(rng.random_range(1..10_000)));
            }
        }
        let mut img = ImageRecord::new(&id, format!("{id}.jpg"), rng.random_range(1..2000), rng.random_range(1..2000))
            .with_objects(objects);
        if rng.random_bool(0.5) {
            img.pan_seg_file_name = Some(format!("{id}.png"));
        }
        if rng.random_bool(0.5) {
            img.cluster_id = Some(rng.random_range(0..50));
        }
        let mut seen = BTreeSet::new();
        for _ in 0..rng.random_range(0..12) {
            if m < 2 {
                break;
            }
            let (s, o, p) = (rng.random_range(0..m), rng.random_range(0..m), rng.random_range(0..n_preds));
            if s == o || img.is_faulty(s) || img.is_faulty(o) || !seen.insert((s, o, p)) {
                continue;
            }
            let t = if rng.random_bool(0.6) {
                RelationTriplet::positive(s, o, p)
            } else {
                RelationTriplet::negative(s, o, p)
            };
            d.push_relation(&id, t);
        }
        d.images.push(img);
    }
    d
}

/// Random scores for every ordered pair of every image.
pub fn random_predictions(d: &Dataset, seed: u64) -> PredictionSet {
    let mut rng = rng(seed);
    let n = d.categories.num_predicates();
    let mut set = PredictionSet::new();
    for img in &d.images {
        let m = img.objects.len();
        let mut rows = Vec::new();
        for s in 0..m {
            for o in 0..m {
                if s != o {
                    let scores = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                    rows.push(PredictionRow::new(s, o, scores, rng.random_range(-3.0..3.0)));
                }
            }
        }
        set.insert(img.image_id.clone(), PredictionMatrix::new(img.image_id.clone(), n, rows).expect("valid"));
    }
    set
}

/// A campaign of images with three objects each and one proposal per
/// (image, pair, predicate) until `proposals` are queued.
pub fn campaign_spec(proposals: usize, predicates: usize) -> CampaignSpec {
    let (d, queue) = campaign_parts(proposals, predicates);
    CampaignSpec::new(d, queue).expect("consistent")
}

/// Writes a campaign directory for [`haystack::service::Campaign::open`].
pub fn write_campaign(root: &Path, images: &Dataset, queue: &[Proposal]) {
    let paths = CampaignPaths::new(root);
    write_dataset(paths.dataset(), images).expect("writable");
    std::fs::write(paths.proposals(), serde_json::to_vec(queue).expect("serializable")).expect("writable");
}

pub fn campaign_parts(proposals: usize, predicates: usize) -> (Dataset, Vec<Proposal>) {
    let mut d = Dataset::new(categories(3, predicates));
    let pairs = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)];
    let per_image = pairs.len() * predicates;
    let images = proposals.div_ceil(per_image);
    let mut queue = Vec::new();
    for i in 0..images {
        let id = format!("img{i:04}");
        d.images.push(ImageRecord::new(&id, format!("{id}.jpg"), 64, 64).with_objects(vec![
            SegmentedObject::new(1, 0),
            SegmentedObject::new(2, 1),
            SegmentedObject::new(3, 2),
        ]));
        for &(s, o) in &pairs {
            for p in 0..predicates {
                if queue.len() < proposals {
                    queue.push(Proposal {
                        proposal_id: Proposal::make_id(&id, s, o, p),
                        image_id: id.clone(),
                        subject_idx: s,
                        object_idx: o,
                        predicate_id: p,
                        ranking_score: 1.0 / (1 + queue.len()) as f64,
                        cluster_id: Some(i % 5),
                    });
                }
            }
        }
    }
    (d, queue)
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SimulationOutcome {
    /// Proposals handed out, counting repeats after a skip.
    pub served: usize,
    /// Times a proposal was handed out while another thread held it.
    pub double_leases: usize,
    /// Times an already decided proposal was handed out again.
    pub reserved_decided: usize,
    pub terminal: usize,
    pub withdrawn: usize,
}

/// Runs `threads` annotators (`annotator0`, ...) against one campaign until
/// each has decided or skipped everything still open. Each thread tracks what it holds in a
/// shared table; a proposal arriving while it is in the table means the
/// campaign leased it twice.
pub fn simulate_annotators(campaign: &Campaign, threads: usize, seed: u64) -> SimulationOutcome {
    let predicates: Vec<usize> = campaign.with_spec(|s| s.predicates().collect());
    let held: Mutex<HashMap<String, usize>> = Mutex::new(HashMap::new());
    let decided: Mutex<HashSet<String>> = Mutex::new(HashSet::new());
    let totals = Mutex::new(SimulationOutcome::default());
    std::thread::scope(|scope| {
        for t in 0..threads {
            let (held, decided, totals, predicates) = (&held, &decided, &totals, &predicates);
            scope.spawn(move || {
                let mut rng = rng(seed.wrapping_add(t as u64));
                let session = campaign.open_session(&format!("annotator{t}")).expect("session").session_id;
                let mut local = SimulationOutcome::default();
                loop {
                    let mut progressed = false;
                    let mut order = predicates.clone();
                    order.shuffle(&mut rng);
                    for &p in &order {
                        let Some(leased) = campaign.next_proposal(&session, p).expect("live session") else {
                            continue;
                        };
                        progressed = true;
                        local.served += 1;
                        let id = leased.proposal.proposal_id;
                        if held.lock().unwrap().insert(id.clone(), t).is_some() {
                            local.double_leases += 1;
                        }
                        if decided.lock().unwrap().contains(&id) {
                            local.reserved_decided += 1;
                        }
                        let kind = match rng.random_range(0..10) {
                            0..3 => DecisionKind::Positive,
                            3..7 => DecisionKind::Negative,
                            7..9 => DecisionKind::Skip,
                            _ => DecisionKind::NoRelation,
                        };
                        // Released before submitting: the campaign still holds
                        // the lease until the decision is committed.
                        held.lock().unwrap().remove(&id);
                        match campaign.submit_decision(&session, &id, kind) {
                            Ok(_) if kind.is_terminal() => {
                                decided.lock().unwrap().insert(id);
                                local.terminal += 1;
                            }
                            Ok(_) => {}
                            Err(ServiceError::Withdrawn(_)) => local.withdrawn += 1,
                            Err(e) => panic!("annotator {t}: {e}"),
                        }
                    }
                    if !progressed {
                        // Others may still hold leases they will skip; stop
                        // once everything open is something this annotator
                        // skipped.
                        let state = campaign.state();
                        let me = format!("annotator{t}");
                        let open = state.spec().queue().iter().filter(|p| state.is_open(p));
                        if open.clone().all(|p| state.has_skipped(&p.proposal_id, &me)) {
                            break;
                        }
                        std::thread::sleep(std::time::Duration::from_millis(1));
                    }
                }
                campaign.close_session(&session).expect("live session");
                let mut all = totals.lock().unwrap();
                all.served += local.served;
                all.double_leases += local.double_leases;
                all.reserved_decided += local.reserved_decided;
                all.terminal += local.terminal;
                all.withdrawn += local.withdrawn;
            });
        }
    });
    totals.into_inner().unwrap()
}

/// Submits `decisions` terminal decisions from one annotator, cycling
/// through the predicates. Decisions are drawn from `seed`.
pub fn decide_sequentially(campaign: &Campaign, decisions: usize, seed: u64) -> usize {
    let mut rng = rng(seed);
    let predicates: Vec<usize> = campaign.with_spec(|s| s.predicates().collect());
    let session = campaign.open_session("solo").expect("session").session_id;
    let mut done = 0;
    let mut idle = 0;
    for p in predicates.iter().cycle() {
        if done == decisions || idle > predicates.len() {
            break;
        }
        let Some(leased) = campaign.next_proposal(&session, *p).expect("live session") else {
            idle += 1;
            continue;
        };
        idle = 0;
        let kind = match rng.random_range(0..10) {
            0..4 => DecisionKind::Positive,
            4..9 => DecisionKind::Negative,
            _ => DecisionKind::NoRelation,
        };
        campaign.submit_decision(&session, &leased.proposal.proposal_id, kind).expect("leased");
        done += 1;
    }
    done
}
