//! One PASS/FAIL line per acceptance criterion. Runs without the test
//! harness so the lines are always printed.

mod common;

#[path = "../examples/recall_head_bias.rs"]
mod recall_head_bias;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use haystack::dataset::{export_dataset, merge_datasets, parse_dataset, validate_dataset, Polarity};
use haystack::metrics::{evaluate, mean_row, pdd, pdo, predicate_auc, EvaluateOptions, MetricError};
use haystack::proposal::{
    build_cooccurrence, build_proposal_queue, kmeans, proposal_score, Exclusions, FeatureMatrix, KMeansConfig,
    QueueConfig,
};
use haystack::service::{Campaign, CampaignPaths, CampaignState, SystemClock, DEFAULT_LEASE_TTL_MS};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Transform = (&'static str, fn(f64) -> f64);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(101);
    let mut pdd_checked = 0;
    for _ in 0..300 {
        let n = rng.random_range(2..=8);
        let entries = common::random_entries(&mut rng, n, 50);
        let set = common::eval_set(&entries);
        let got = pdo(&set, n).map_err(|e| e.to_string())?;
        let want = common::brute_force_pdo(&entries, n);
        ensure((got - want).abs() <= 1e-12, || format!("PDO {got} vs {want} on {entries:?}"))?;
        match pdd(&set, n) {
            Ok(got) => {
                let want = common::brute_force_pdd(&entries, n);
                ensure((got - want).abs() <= 1e-12, || format!("PDD {got} vs {want} on {entries:?}"))?;
                pdd_checked += 1;
            }
            Err(MetricError::InsufficientSupport { positives: 0, .. }) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    within(start, Duration::from_secs(5))?;
    Ok(format!("300 PDO / {pdd_checked} PDD sets exact in {:.2?}", start.elapsed()))
}

fn auc_oracle() -> Outcome {
    let mut rng = common::rng(102);
    let mut checked = 0;
    while checked < 300 {
        let entries = common::random_entries(&mut rng, 8, 50);
        let Ok(got) = predicate_auc(&common::eval_set(&entries)) else {
            continue;
        };
        let want = common::brute_force_auc(&entries);
        ensure((got - want).abs() <= 1e-12, || format!("{got} vs {want} on {entries:?}"))?;
        checked += 1;
    }
    Ok(format!("{checked} sets exact"))
}

fn auc_invariance() -> Outcome {
    let mut rng = common::rng(103);
    let transforms: [Transform; 2] = [("2x+3", |x| 2.0 * x + 3.0), ("exp", f64::exp)];
    for _ in 0..300 {
        let mut entries = common::random_entries(&mut rng, 8, 50);
        entries.push((true, rng.random_range(-3.0..3.0), 0));
        entries.push((false, rng.random_range(-3.0..3.0), 0));
        let base = predicate_auc(&common::eval_set(&entries)).map_err(|e| e.to_string())?;
        for (name, f) in transforms {
            let moved: Vec<_> = entries.iter().map(|&(l, c, r)| (l, f(c), r)).collect();
            let got = predicate_auc(&common::eval_set(&moved)).map_err(|e| e.to_string())?;
            ensure(got.to_bits() == base.to_bits(), || format!("{name}: {got} vs {base}"))?;
        }
    }
    Ok("300 sets bit-identical under 2x+3 and exp".into())
}

fn degenerate_cases() -> Outcome {
    let set = |e: &[(bool, f64, usize)]| common::eval_set(e);
    let value = |r: Result<f64, MetricError>| r.map_err(|e| e.to_string());
    let lone = [(true, 0.3, 4)];
    let (o, d) = (value(pdo(&set(&lone), 5))?, value(pdd(&set(&lone), 5))?);
    ensure(o == 0.0 && d == 1.0, || format!("lone positive at n-1: PDO {o}, PDD {d}"))?;
    // Positives top-ranked, negatives ranked last.
    let ideal = [(true, 0.9, 0), (true, 0.7, 0), (false, 0.2, 3), (false, 0.1, 3)];
    let (o, d) = (value(pdo(&set(&ideal), 4))?, value(pdd(&set(&ideal), 4))?);
    ensure(o == 0.0 && d == 0.0, || format!("ideal ranking: PDO {o}, PDD {d}"))?;
    let worked = [(true, 0.9, 0), (false, 0.8, 0), (true, 0.1, 2)];
    let (o, d) = (value(pdo(&set(&worked), 3))?, value(pdd(&set(&worked), 3))?);
    ensure(o == 0.5 && d == 0.5, || format!("worked n=3 example: PDO {o}, PDD {d}"))?;
    Ok("lone positive, ideal ranking and worked example exact".into())
}

fn head_bias() -> Outcome {
    let start = Instant::now();
    let r = recall_head_bias::run_example();
    let expected_mr = 3.0 / r.classes_with_gt as f64;
    ensure((r.head_share - 0.52).abs() <= 1e-9, || format!("head share {}", r.head_share))?;
    ensure((r.recall - 0.52).abs() <= 0.01, || format!("R@inf {}", r.recall))?;
    ensure((r.mean_recall.mean - expected_mr).abs() <= 0.01, || {
        format!("mR@inf {} vs {expected_mr}", r.mean_recall.mean)
    })?;
    within(start, Duration::from_secs(5))?;
    Ok(format!(
        "R@inf {:.4}, mR@inf {:.4} = 3/{} in {:.2?}",
        r.recall,
        r.mean_recall.mean,
        r.classes_with_gt,
        start.elapsed()
    ))
}

fn report_integrity() -> Outcome {
    let mut rows_seen = 0;
    let mut excluded_seen = 0;
    for seed in 0..200 {
        let d = common::random_dataset(seed, "img");
        let preds = common::random_predictions(&d, seed ^ 0x5a);
        let report = evaluate(&d, &preds, &EvaluateOptions::default()).map_err(|e| e.to_string())?;
        let mut support: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for t in d.relations.values().flatten() {
            let s = support.entry(t.predicate_id).or_default();
            match t.polarity {
                Polarity::Positive => s.0 += 1,
                Polarity::Negative => s.1 += 1,
            }
        }
        for p in 0..d.categories.num_predicates() {
            let (pos, neg) = support.get(&p).copied().unwrap_or_default();
            let has_row = report.rows.iter().any(|r| r.predicate_id == p);
            let is_excluded = report.excluded.iter().any(|s| s.predicate_id == p);
            ensure(has_row == (pos > 0 && neg > 0) && has_row != is_excluded, || {
                format!("seed {seed}, predicate {p}: {pos} pos, {neg} neg, row {has_row}, excluded {is_excluded}")
            })?;
        }
        rows_seen += report.rows.len();
        excluded_seen += report.excluded.len();
        match &report.mean_row {
            None => ensure(report.rows.is_empty(), || format!("seed {seed}: rows without a mean row"))?,
            Some(m) => {
                let k = report.rows.len() as f64;
                let col = |f: fn(&haystack::metrics::PredicateRow) -> f64| report.rows.iter().map(f).sum::<f64>() / k;
                let diffs = [m.p_auc - col(|r| r.p_auc), m.pdd - col(|r| r.pdd), m.pdo - col(|r| r.pdo)];
                ensure(diffs.iter().all(|d| d.abs() <= 1e-12), || format!("seed {seed}: mean row off by {diffs:?}"))?;
                for (i, v) in m.recall_at_k.iter().enumerate() {
                    let c = report.rows.iter().map(|r| r.recall_at_k[i]).sum::<f64>() / k;
                    ensure((v - c).abs() <= 1e-12, || format!("seed {seed}: mean R@k off by {}", v - c))?;
                }
                ensure(mean_row(&report.rows).as_ref() == Some(m), || format!("seed {seed}: mean row mismatch"))?;
            }
        }
    }
    Ok(format!("200 reports, {rows_seen} rows, {excluded_seen} exclusions"))
}

fn format_round_trip() -> Outcome {
    let psg = parse_dataset(include_bytes!("fixtures/psg_train.json")).map_err(|e| e.to_string())?;
    let rare = parse_dataset(include_bytes!("fixtures/haystack_rare.json")).map_err(|e| e.to_string())?;
    for d in [&psg, &rare] {
        let again = parse_dataset(&export_dataset(d)).map_err(|e| e.to_string())?;
        ensure(&again == d, || "parse(export(d)) != d on a fixture".into())?;
    }
    let merged = merge_datasets(&psg, &rare).map_err(|e| e.to_string())?;
    for polarity in [Polarity::Positive, Polarity::Negative] {
        let (a, b, m) = (psg.num_polarity(polarity), rare.num_polarity(polarity), merged.num_polarity(polarity));
        ensure(m == a + b, || format!("{polarity:?}: {a} + {b} != {m}"))?;
    }
    let report = validate_dataset(&merged);
    ensure(report.is_valid(), || format!("merged file invalid: {:?}", report.violations))?;
    let mut exports = vec![export_dataset(&psg), export_dataset(&rare), export_dataset(&merged)];
    for seed in 0..100 {
        exports.push(export_dataset(&common::random_dataset(seed, "r")));
    }
    for bytes in &exports {
        serde_json::from_slice::<common::base_schema::File>(bytes).map_err(|e| format!("base reader: {e}"))?;
    }
    Ok(format!("fixtures round-trip, merge additive and valid, {} exports read by base reader", exports.len()))
}

fn proposal_scoring() -> Outcome {
    let mut rng = common::rng(104);
    for _ in 0..1000 {
        let n = rng.random_range(1..60);
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let norel = rng.random_range(-10.0..10.0);
        let p = rng.random_range(0..n);
        let got = proposal_score(&logits, norel, p).map_err(|e| e.to_string())?;
        let want = (logits[p] - norel).exp();
        ensure((got - want).abs() <= 1e-9 * want.max(1.0), || format!("{got} vs {want}"))?;
    }
    let mut emitted = 0;
    for seed in 0..150 {
        let mut rng = common::rng(seed);
        let cats = common::categories(rng.random_range(2..5), rng.random_range(2..5));
        let mut train = common::random_dataset_in(&mut rng, cats.clone(), "t");
        for i in 0..4 {
            let part = common::random_dataset_in(&mut rng, cats.clone(), &format!("t{i}_"));
            train = merge_datasets(&train, &part).map_err(|e| e.to_string())?;
        }
        let images = common::random_dataset_in(&mut rng, cats, "c");
        let preds = common::random_predictions(&images, seed);
        let stats = build_cooccurrence(&train, 1 + seed % 2);
        let config = QueueConfig { per_cluster_quota: 3, seed, ..QueueConfig::default() };
        for p in 0..images.categories.num_predicates() {
            let queue = build_proposal_queue(&images, &preds, p, &stats, None, &Exclusions::default(), &config)
                .map_err(|e| e.to_string())?;
            let mut last: BTreeMap<Option<usize>, f64> = BTreeMap::new();
            for prop in &queue {
                let img = images.image(&prop.image_id).ok_or("unknown image")?;
                let (s, o) = (&img.objects[prop.subject_idx], &img.objects[prop.object_idx]);
                ensure(!s.is_faulty && !o.is_faulty, || format!("{} touches a faulty object", prop.proposal_id))?;
                ensure(
                    stats.sp(s.category_id, p) >= stats.threshold && stats.po(p, o.category_id) >= stats.threshold,
                    || format!("{} fails the co-occurrence threshold", prop.proposal_id),
                )?;
                let prev = last.insert(prop.cluster_id, prop.ranking_score).unwrap_or(f64::INFINITY);
                ensure(prop.ranking_score <= prev, || format!("{} out of score order", prop.proposal_id))?;
                emitted += 1;
            }
        }
    }
    ensure(emitted > 0, || "no proposals emitted".into())?;
    Ok(format!("1000 scores within 1e-9; {emitted} queued proposals ordered and filtered"))
}

fn kmeans_quality() -> Outcome {
    let (m, truth) = common::blobs(60, 8, 11);
    for seed in [0, 1, 7, 42] {
        let model = kmeans(&m, &KMeansConfig { k: 3, seed, ..KMeansConfig::default() }).map_err(|e| e.to_string())?;
        let found: Vec<usize> = m.image_ids().iter().map(|id| model.cluster_of(id).unwrap_or(usize::MAX)).collect();
        let ari = common::adjusted_rand_index(&truth, &found);
        ensure(ari == 1.0, || format!("seed {seed}: ARI {ari}"))?;
    }
    let mut rng = common::rng(105);
    let mut steps = 0;
    for run in 0..50 {
        let n = rng.random_range(20..300);
        let dim = rng.random_range(1..8);
        let ids = (0..n).map(|i| format!("i{i}")).collect();
        let rows = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let m = FeatureMatrix::from_rows(ids, rows).map_err(|e| e.to_string())?;
        let config = KMeansConfig { k: rng.random_range(1..12), seed: run, ..KMeansConfig::default() };
        let model = kmeans(&m, &config).map_err(|e| e.to_string())?;
        for w in model.sse_history.windows(2) {
            ensure(w[1] <= w[0], || format!("run {run}: SSE rose from {} to {}", w[0], w[1]))?;
        }
        steps += model.sse_history.len();
    }
    Ok(format!("ARI 1.0 for 4 seeds; SSE non-increasing over 50 runs ({steps} steps)"))
}

fn service() -> Outcome {
    let start = Instant::now();
    let in_memory = Campaign::in_memory(common::campaign_spec(500, 4), Arc::new(SystemClock), DEFAULT_LEASE_TTL_MS);
    let outcome = common::simulate_annotators(&in_memory, 8, 1);
    ensure(outcome.double_leases == 0 && outcome.reserved_decided == 0, || format!("{outcome:?}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (images, queue) = common::campaign_parts(500, 4);
    common::write_campaign(dir.path(), &images, &queue);
    let open = || Campaign::open(dir.path(), Arc::new(SystemClock), DEFAULT_LEASE_TTL_MS).map_err(|e| e.to_string());
    let c = open()?;
    common::decide_sequentially(&c, 120, 2);
    let mid = c.export();
    drop(c);
    let c = open()?;
    ensure(c.export() == mid, || "export differs after recovery mid-campaign".into())?;
    let persisted = common::simulate_annotators(&c, 8, 3);
    ensure(persisted.double_leases == 0 && persisted.reserved_decided == 0, || format!("{persisted:?}"))?;
    let end = c.export();
    drop(c);
    ensure(open()?.export() == end, || "export differs after recovery at the end".into())?;
    let paths = CampaignPaths::new(dir.path());
    let log = std::fs::read(paths.log()).map_err(|e| e.to_string())?;
    let spec = Campaign::load_spec(&paths).map_err(|e| e.to_string())?;
    let replayed = CampaignState::recover(spec, &log).map_err(|e| e.to_string())?;
    ensure(replayed.export() == end, || "log replay differs from live export".into())?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "{} + {} proposals served to 8 annotators, no double lease; recovered exports identical in {:.2?}",
        outcome.served,
        persisted.served,
        start.elapsed()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric oracle equivalence", metric_oracle),
        ("P-AUC equals Mann-Whitney count", auc_oracle),
        ("P-AUC invariance", auc_invariance),
        ("degenerate cases", degenerate_cases),
        ("head-class R@k mechanism", head_bias),
        ("report integrity", report_integrity),
        ("format round-trip and merge", format_round_trip),
        ("proposal scoring", proposal_scoring),
        ("k-means", kmeans_quality),
        ("service leases and recovery", service),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL  {name}: panicked");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
