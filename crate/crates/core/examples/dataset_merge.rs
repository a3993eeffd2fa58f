//! Reads a PSG-style training file and a file of rare-predicate annotations
//! with explicit negatives, merges them and validates the result.
//!
//! ```text
//! cargo run --example dataset_merge
//! ```

use haystack::dataset::{export_dataset_pretty, merge_datasets, parse_dataset, validate_dataset, Dataset, Polarity};

const PSG_TRAIN: &str = include_str!("../tests/fixtures/psg_train.json");
const HAYSTACK_RARE: &str = include_str!("../tests/fixtures/haystack_rare.json");

pub struct MergeOutcome {
    pub base: Dataset,
    pub addition: Dataset,
    pub merged: Dataset,
}

pub fn run_example() -> MergeOutcome {
    let base = parse_dataset(PSG_TRAIN.as_bytes()).expect("fixture is valid");
    let addition = parse_dataset(HAYSTACK_RARE.as_bytes()).expect("fixture is valid");
    let merged = merge_datasets(&base, &addition).expect("same categories, disjoint images");
    assert!(validate_dataset(&merged).is_valid());
    MergeOutcome { base, addition, merged }
}

#[allow(dead_code)]
fn main() {
    let MergeOutcome { base, addition, merged } = run_example();
    for (name, d) in [("base", &base), ("addition", &addition), ("merged", &merged)] {
        println!(
            "{name:>8}: {} images, {} positive, {} negative",
            d.images.len(),
            d.num_polarity(Polarity::Positive),
            d.num_polarity(Polarity::Negative)
        );
    }
    let rare = merged.categories.resolve_predicate("engaged in activity using").expect("display name");
    println!("display name 'engaged in activity using' is stored as '{}'", merged.categories.predicate_classes[rare]);
    let text = String::from_utf8(export_dataset_pretty(&merged)).expect("utf-8");
    println!("\nfirst lines of the merged file:");
    for line in text.lines().take(12) {
        println!("  {line}");
    }
}
