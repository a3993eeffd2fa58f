//! Runs a small annotation campaign from a directory: two annotators take
//! leased proposals, decide, and flag a faulty mask. The process then
//! "crashes" and the campaign is recovered from its decision log.
//!
//! ```text
//! cargo run --example annotation_campaign
//! ```

use std::path::Path;
use std::sync::Arc;

use haystack::dataset::{write_dataset, CategoryTable, Dataset, ImageRecord, SegmentedObject};
use haystack::proposal::Proposal;
use haystack::service::{Campaign, CampaignExport, CampaignPaths, DecisionKind, SystemClock, DEFAULT_LEASE_TTL_MS};

fn write_campaign(root: &Path) {
    let paths = CampaignPaths::new(root);
    let mut cats = CategoryTable::new(
        vec!["person".into(), "bike".into(), "ball".into()],
        vec!["road".into()],
        vec!["on".into(), "riding".into(), "playing".into()],
    );
    cats.display_names.insert(2, "engaged in activity using".into());
    let mut images = Dataset::new(cats);
    let mut queue = Vec::new();
    for i in 0..4 {
        let id = format!("img{i}");
        let mut img = ImageRecord::new(&id, format!("{id}.jpg"), 320, 240).with_objects(vec![
            SegmentedObject::new(10, 0),
            SegmentedObject::new(20, 1),
            SegmentedObject::new(30, 2),
            SegmentedObject::new(40, 3),
        ]);
        img.pan_seg_file_name = Some(format!("{id}.png"));
        images.images.push(img);
        for (s, o, p) in [(0, 1, 1), (0, 2, 2), (1, 3, 0)] {
            queue.push(Proposal {
                proposal_id: Proposal::make_id(&id, s, o, p),
                image_id: id.clone(),
                subject_idx: s,
                object_idx: o,
                predicate_id: p,
                ranking_score: 10.0 - i as f64,
                cluster_id: Some(i % 2),
            });
        }
    }
    // Best first within each predicate.
    queue.sort_by(|a, b| a.predicate_id.cmp(&b.predicate_id).then(b.ranking_score.total_cmp(&a.ranking_score)));
    write_dataset(paths.dataset(), &images).expect("writable");
    std::fs::write(paths.proposals(), serde_json::to_vec_pretty(&queue).expect("serializable")).expect("writable");
}

pub struct CampaignRun {
    pub before_crash: CampaignExport,
    pub after_recovery: CampaignExport,
}

pub fn run_example() -> CampaignRun {
    let dir = tempfile::tempdir().expect("temp dir");
    write_campaign(dir.path());
    let open = || Campaign::open(dir.path(), Arc::new(SystemClock), DEFAULT_LEASE_TTL_MS).expect("campaign opens");

    let campaign = open();
    let ada = campaign.open_session("ada").expect("session");
    let bo = campaign.open_session("bo").expect("session");
    let riding = 1;

    // Both ask for "riding" at once and get different proposals.
    let a = campaign.next_proposal(&ada.session_id, riding).expect("session").expect("queue not empty");
    let b = campaign.next_proposal(&bo.session_id, riding).expect("session").expect("queue not empty");
    assert_ne!(a.proposal.proposal_id, b.proposal.proposal_id);
    campaign.submit_decision(&ada.session_id, &a.proposal.proposal_id, DecisionKind::Positive).expect("leased");
    campaign.submit_decision(&bo.session_id, &b.proposal.proposal_id, DecisionKind::NoRelation).expect("leased");

    // Ada is unsure about the next one; Bo gets it instead.
    let c = campaign.next_proposal(&ada.session_id, riding).expect("session").expect("queue not empty");
    campaign.submit_decision(&ada.session_id, &c.proposal.proposal_id, DecisionKind::Skip).expect("leased");
    let d = campaign.next_proposal(&bo.session_id, riding).expect("session").expect("queue not empty");
    assert_eq!(c.proposal.proposal_id, d.proposal.proposal_id);
    campaign.submit_decision(&bo.session_id, &d.proposal.proposal_id, DecisionKind::Negative).expect("leased");

    // A broken object mask: the object is flagged and its proposals withdrawn.
    let playing = campaign.next_proposal(&ada.session_id, 2).expect("session").expect("queue not empty");
    campaign
        .submit_decision(&ada.session_id, &playing.proposal.proposal_id, DecisionKind::FaultyObject)
        .expect("leased");

    let before_crash = campaign.export();
    drop(campaign);
    let after_recovery = open().export();
    CampaignRun { before_crash, after_recovery }
}

#[allow(dead_code)]
fn main() {
    let run = run_example();
    let d = &run.after_recovery.dataset;
    println!("exported {} images:", d.images.len());
    for (image, list) in &d.relations {
        for t in list {
            println!(
                "  {image}: ({}, {}) {:<8} {:?}",
                t.subject_idx, t.object_idx, d.categories.predicate_classes[t.predicate_id], t.polarity
            );
        }
    }
    for img in &d.images {
        for (idx, o) in img.objects.iter().enumerate() {
            if o.is_faulty {
                println!("  {}: object {idx} flagged faulty", img.image_id);
            }
        }
    }
    println!("retraining export: {} positive triplets", run.after_recovery.retrain.num_relations());
    println!("recovered export identical: {}", run.before_crash.dataset == run.after_recovery.dataset);
}
