//! Builds the annotation queue for a rare predicate: implausible triplets are
//! filtered by training co-occurrence, candidates are ranked by their score
//! against "no relation", and clusters take turns.
//!
//! ```text
//! cargo run --example proposal_queue
//! ```

use haystack::dataset::{CategoryTable, Dataset, ImageRecord, RelationTriplet, SegmentedObject};
use haystack::metrics::{PredictionMatrix, PredictionRow, PredictionSet};
use haystack::proposal::{
    build_cooccurrence, build_proposal_queue, proposal_score, Exclusions, Proposal, QueueConfig, DEFAULT_THRESHOLD,
};

const PERSON: usize = 0;
const DOG: usize = 1;
const BANANA: usize = 2;
const TABLE: usize = 3;
const EATING: usize = 1;

fn categories() -> CategoryTable {
    CategoryTable::new(
        vec!["person".into(), "dog".into(), "banana".into(), "table".into()],
        vec![],
        vec!["on".into(), "eating".into(), "drinking".into()],
    )
}

/// Dogs and people are each seen eating a banana twice; tables only ever
/// appear under "on".
fn training_set() -> Dataset {
    let mut d = Dataset::new(categories());
    for (i, (s, o)) in [(DOG, BANANA), (DOG, BANANA), (PERSON, BANANA), (PERSON, BANANA), (DOG, TABLE), (PERSON, TABLE)]
        .into_iter()
        .enumerate()
    {
        let id = format!("train{i}");
        d.images.push(
            ImageRecord::new(&id, format!("{id}.jpg"), 64, 64)
                .with_objects(vec![SegmentedObject::new(1, s), SegmentedObject::new(2, o)]),
        );
        let p = if o == BANANA { EATING } else { 0 };
        d.push_relation(&id, RelationTriplet::positive(0, 1, p));
    }
    d
}

fn candidate_images() -> Dataset {
    let mut d = Dataset::new(categories());
    for i in 0..6 {
        let id = format!("cand{i}");
        let mut img = ImageRecord::new(&id, format!("{id}.jpg"), 64, 64).with_objects(vec![
            SegmentedObject::new(1, if i % 2 == 0 { DOG } else { PERSON }),
            SegmentedObject::new(2, BANANA),
            SegmentedObject::new(3, TABLE),
        ]);
        img.cluster_id = Some(i % 3);
        d.images.push(img);
    }
    // An earlier campaign already has the answer for one candidate.
    d.push_relation("cand4", RelationTriplet::negative(0, 1, EATING));
    d
}

fn predictions(images: &Dataset) -> PredictionSet {
    images
        .images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let boost = i as f64 * 0.3;
            let rows = vec![
                PredictionRow::new(0, 1, vec![0.2, 1.0 + boost, -1.0], 0.5),
                PredictionRow::new(0, 2, vec![1.5, 2.0, 0.0], 0.1),
                PredictionRow::new(1, 2, vec![2.5, -0.5, -2.0], 0.0),
            ];
            let m = PredictionMatrix::new(img.image_id.clone(), 3, rows).expect("valid rows");
            (img.image_id.clone(), m)
        })
        .collect()
}

pub fn run_example() -> Vec<Proposal> {
    let stats = build_cooccurrence(&training_set(), DEFAULT_THRESHOLD);
    let images = candidate_images();
    let preds = predictions(&images);
    build_proposal_queue(
        &images,
        &preds,
        EATING,
        &stats,
        None,
        &Exclusions::default(),
        &QueueConfig { per_cluster_quota: 2, seed: 5, ..QueueConfig::default() },
    )
    .expect("finite scores")
}

#[allow(dead_code)]
fn main() {
    let score = proposal_score(&[0.2, 1.0, -1.0], 0.5, EATING).expect("finite");
    println!("score of 'eating' against no relation: exp(1.0 - 0.5) = {score:.6}");
    println!("\nqueue for 'eating' (subject 0 eats object 1; tables are filtered out):");
    for p in run_example() {
        println!(
            "  {:<14} cluster {:?}  score {:.4}",
            p.proposal_id,
            p.cluster_id.expect("images carry clusters"),
            p.ranking_score
        );
    }
}
