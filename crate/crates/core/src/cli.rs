//! The `haystack` command line. Every subcommand is a thin adapter over the
//! library; output is byte-identical to calling the library directly.
//!
//! Exit codes: 0 on success, 1 on bad data, 2 on bad usage. Failures print a
//! single `error: <category>: <message>` line on stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{merge_datasets, read_dataset, validate_dataset, write_dataset, Dataset, DatasetError, Polarity};
use crate::metrics::{read_prediction_set, EvaluateOptions, MetricError, MetricReport, MissingRowPolicy};
use crate::proposal::{
    build_cooccurrence, build_proposal_queue, kmeans, read_feature_matrix, CampaignConfig, ClusterModel, Exclusions,
    KMeansConfig, ProposalError, QueueConfig, DEFAULT_CLUSTERS,
};
use crate::service::{Campaign, ServiceError, SystemClock};

/// Seed used when none is given, so repeated runs agree.
pub const DEFAULT_SEED: u64 = 0x4859_5354;

pub const CAMPAIGN_DIR_ENV: &str = "HAYSTACK_CAMPAIGN_DIR";

#[derive(Debug, Parser)]
#[command(name = "haystack", version, about = "Rare-predicate evaluation and annotation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Structured,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an annotation file against the format invariants.
    Validate { input: PathBuf },
    /// Merge an annotation file into a base file with the same categories.
    Merge {
        base: PathBuf,
        addition: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a campaign's annotations, or re-export an annotation file.
    Export(ExportArgs),
    /// Cluster image embeddings with k-means.
    Cluster(ClusterArgs),
    /// Relation counts of an annotation file, or progress of a campaign.
    Stats(StatsArgs),
    /// Build the ranked proposal queue for one or more predicates.
    Rank(RankArgs),
    /// Evaluate predictions against positive and negative annotations.
    Evaluate(EvaluateArgs),
    /// Serve an annotation campaign over HTTP.
    Serve(ServeArgs),
    /// Render a structured evaluation report.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Annotation file to re-export in canonical form.
    #[arg(conflicts_with = "campaign_dir", required_unless_present = "campaign_dir")]
    input: Option<PathBuf>,
    #[arg(long, env = CAMPAIGN_DIR_ENV)]
    campaign_dir: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    /// Keep positives only, for retraining the proposal model.
    #[arg(long)]
    retrain: bool,
    /// Also write the conflict report of a campaign here.
    #[arg(long, requires = "campaign_dir")]
    conflicts: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// Embedding matrix (binary).
    #[arg(long)]
    features: PathBuf,
    /// Image ids, one per line, in row order.
    #[arg(long)]
    ids: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CLUSTERS)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    /// Clusters to exclude from proposals, e.g. `3,17`.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<usize>,
    /// Campaign TOML; its `excluded_clusters` are added to `--exclude`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(conflicts_with = "campaign_dir", required_unless_present = "campaign_dir")]
    input: Option<PathBuf>,
    #[arg(long, env = CAMPAIGN_DIR_ENV)]
    campaign_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Candidate images with their segments.
    #[arg(long)]
    images: PathBuf,
    /// Prediction manifest for the candidate images.
    #[arg(long)]
    preds: PathBuf,
    /// Training annotations for the co-occurrence filter.
    #[arg(long)]
    train: PathBuf,
    /// Predicate name, display name or id. Repeat for several.
    #[arg(long, required = true)]
    predicate: Vec<String>,
    /// Cluster model written by `cluster`.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Already annotated files whose triplets and faulty objects are skipped.
    #[arg(long)]
    exclude: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config file.
    #[arg(long)]
    threshold: Option<u64>,
    /// Overrides the config file.
    #[arg(long)]
    quota: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    preds: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [20, 50, 100])]
    k: Vec<usize>,
    #[arg(long)]
    no_graph_constraint: bool,
    /// Score annotated pairs without a prediction row as minus infinity
    /// instead of failing.
    #[arg(long)]
    lenient: bool,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = CAMPAIGN_DIR_ENV)]
    campaign_dir: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Lease duration in seconds.
    #[arg(long, default_value_t = 600)]
    lease_ttl: u64,
    /// Static files for the annotation UI.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

/// A failure with a stable category name.
#[derive(Debug)]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
}

impl CliError {
    fn new(category: &'static str, message: impl Into<String>) -> Self {
        Self { category, message: message.into() }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let category = match &e {
            DatasetError::Schema(_) => "schema",
            DatasetError::Index(_) => "index",
            DatasetError::Duplicate(_) => "duplicate",
            DatasetError::CategoryMismatch => "category_mismatch",
            DatasetError::Conflict(_) => "conflict",
            DatasetError::Invalid(_) => "invalid",
            DatasetError::UnknownImage(_) => "unknown_image",
            DatasetError::Io { .. } => "io",
        };
        Self::new(category, e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        let category = match &e {
            MetricError::Io { .. } => "io",
            MetricError::Format(_) | MetricError::ShapeMismatch(_) | MetricError::InvalidPrediction(_) => "format",
            MetricError::MissingPrediction { .. } => "missing_prediction",
            _ => "metric",
        };
        Self::new(category, e.to_string())
    }
}

impl From<ProposalError> for CliError {
    fn from(e: ProposalError) -> Self {
        let category = match &e {
            ProposalError::Io { .. } => "io",
            ProposalError::Format(_) => "format",
            ProposalError::InvalidConfig(_) => "config",
            _ => "proposal",
        };
        Self::new(category, e.to_string())
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::new("path", format!("{}: no such file", path.display())))
    }
}

fn require_dir(path: &Path) -> CliResult {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::new("path", format!("{}: no such directory", path.display())))
    }
}

fn require_output(path: &Path) -> CliResult {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(CliError::new("path", format!("{}: output directory does not exist", path.display())))
        }
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

/// Runs the command line with `argv` (program name first), writing normal
/// output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {}", e.category, e.message.replace('\n', " "));
            if e.category == "usage" {
                2
            } else {
                1
            }
        }
    }
}

/// [`run_with`] on the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn dispatch(command: Command, out: &mut dyn Write) -> CliResult {
    let io = |e: std::io::Error| CliError::new("io", e.to_string());
    match command {
        Command::Validate { input } => {
            require_file(&input)?;
            let d = crate::dataset::parse_dataset_unchecked(read_text(&input)?.as_bytes())?;
            let report = validate_dataset(&d);
            if !report.is_valid() {
                for v in &report.violations {
                    writeln!(out, "{v}").map_err(io)?;
                }
                return Err(CliError::new("invalid", format!("{}: {} violations", input.display(), report.len())));
            }
            writeln!(
                out,
                "ok: {} images, {} relations ({} positive, {} negative)",
                d.images.len(),
                d.num_relations(),
                d.num_polarity(Polarity::Positive),
                d.num_polarity(Polarity::Negative)
            )
            .map_err(io)?;
        }
        Command::Merge { base, addition, output } => {
            require_file(&base)?;
            require_file(&addition)?;
            require_output(&output)?;
            let merged = merge_datasets(&read_dataset(&base)?, &read_dataset(&addition)?)?;
            write_dataset(&output, &merged)?;
            writeln!(
                out,
                "merged: {} images, {} relations -> {}",
                merged.images.len(),
                merged.num_relations(),
                output.display()
            )
            .map_err(io)?;
        }
        Command::Export(args) => export(args, out)?,
        Command::Cluster(args) => cluster(args, out)?,
        Command::Stats(args) => stats(args, out)?,
        Command::Rank(args) => rank(args, out)?,
        Command::Evaluate(args) => evaluate(args, out)?,
        Command::Serve(args) => serve(args)?,
        Command::Report { input, format } => {
            require_file(&input)?;
            let report = MetricReport::from_json(&read_text(&input)?)?;
            let text = match format {
                Format::Table => report.to_table(),
                Format::Structured => report.to_json() + "\n",
            };
            out.write_all(text.as_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

fn positives_only(d: &Dataset) -> Dataset {
    let mut kept = d.clone();
    for list in kept.relations.values_mut() {
        list.retain(|t| t.is_positive());
    }
    kept.normalized()
}

fn export(args: ExportArgs, out: &mut dyn Write) -> CliResult {
    require_output(&args.output)?;
    if let Some(c) = &args.conflicts {
        require_output(c)?;
    }
    let dataset = match (&args.input, &args.campaign_dir) {
        (Some(input), _) => {
            require_file(input)?;
            let d = read_dataset(input)?;
            if args.retrain {
                positives_only(&d)
            } else {
                d
            }
        }
        (None, Some(dir)) => {
            require_dir(dir)?;
            let campaign = Campaign::open(dir, Arc::new(SystemClock), crate::service::DEFAULT_LEASE_TTL_MS)?;
            let e = campaign.export();
            if let Some(path) = &args.conflicts {
                let body = serde_json::json!({ "decisions": e.conflicts, "triplets": e.triplet_conflicts });
                write_text(path, &serde_json::to_string_pretty(&body).expect("serializes"))?;
            }
            if args.retrain {
                e.retrain
            } else {
                e.dataset
            }
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    write_dataset(&args.output, &dataset)?;
    writeln!(
        out,
        "exported: {} images, {} relations -> {}",
        dataset.images.len(),
        dataset.num_relations(),
        args.output.display()
    )
    .map_err(|e| CliError::new("io", e.to_string()))
}

fn cluster(args: ClusterArgs, out: &mut dyn Write) -> CliResult {
    require_file(&args.features)?;
    require_file(&args.ids)?;
    if let Some(c) = &args.config {
        require_file(c)?;
    }
    require_output(&args.output)?;
    let features = read_feature_matrix(&args.features, &args.ids)?;
    let mut excluded = args.exclude.clone();
    if let Some(c) = &args.config {
        excluded.extend(CampaignConfig::read(c)?.excluded_clusters);
    }
    let mut model = kmeans(
        &features,
        &KMeansConfig { k: args.k, seed: args.seed, max_iters: args.max_iters, ..KMeansConfig::default() },
    )?;
    model.set_excluded(excluded)?;
    write_text(&args.output, &serde_json::to_string(&model).expect("model serializes"))?;
    writeln!(
        out,
        "clustered {} images into {} clusters ({} excluded), {} iterations, SSE {:.6}",
        features.len(),
        model.k(),
        model.excluded_clusters.len(),
        model.sse_history.len() - 1,
        model.sse_history.last().copied().unwrap_or(0.0)
    )
    .map_err(|e| CliError::new("io", e.to_string()))
}

fn stats(args: StatsArgs, out: &mut dyn Write) -> CliResult {
    let io = |e: std::io::Error| CliError::new("io", e.to_string());
    if let Some(input) = &args.input {
        require_file(input)?;
        let d = read_dataset(input)?;
        let n = d.categories.num_predicates();
        let mut counts = vec![(0usize, 0usize); n];
        for t in d.relations.values().flatten() {
            let c = &mut counts[t.predicate_id];
            if t.is_positive() {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
        match args.format {
            Format::Structured => {
                let rows: Vec<_> = counts
                    .iter()
                    .enumerate()
                    .map(|(p, (pos, neg))| {
                        serde_json::json!({
                            "predicate_id": p,
                            "predicate": d.categories.predicate_classes[p],
                            "positives": pos,
                            "negatives": neg,
                        })
                    })
                    .collect();
                let body = serde_json::json!({
                    "images": d.images.len(),
                    "relations": d.num_relations(),
                    "predicates": rows,
                });
                writeln!(out, "{}", serde_json::to_string_pretty(&body).expect("serializes")).map_err(io)?;
            }
            Format::Table => {
                writeln!(out, "images: {}  relations: {}", d.images.len(), d.num_relations()).map_err(io)?;
                let width = d.categories.predicate_classes.iter().map(String::len).max().unwrap_or(0).max(9);
                writeln!(out, "{:<width$}  {:>8}  {:>8}", "Predicate", "#pos", "#neg").map_err(io)?;
                for (p, (pos, neg)) in counts.iter().enumerate() {
                    writeln!(out, "{:<width$}  {pos:>8}  {neg:>8}", d.categories.predicate_classes[p]).map_err(io)?;
                }
            }
        }
        return Ok(());
    }
    let dir = args.campaign_dir.as_ref().expect("clap requires one of them");
    require_dir(dir)?;
    let campaign = Campaign::open(dir, Arc::new(SystemClock), crate::service::DEFAULT_LEASE_TTL_MS)?;
    let s = campaign.stats();
    match args.format {
        Format::Structured => {
            writeln!(out, "{}", serde_json::to_string_pretty(&s).expect("serializes")).map_err(io)?;
        }
        Format::Table => {
            writeln!(
                out,
                "decisions: {}  skips: {}  faulty objects: {}  conflicts: {}",
                s.decisions, s.skips, s.faulty_objects, s.conflicts
            )
            .map_err(io)?;
            let width = s.predicates.iter().map(|p| p.predicate.len()).max().unwrap_or(0).max(9);
            writeln!(
                out,
                "{:<width$}  {:>7}  {:>9}  {:>5}  {:>5}  {:>6}  {:>6}  {:>6}",
                "Predicate", "queued", "remaining", "pos", "neg", "norel", "faulty", "ratio"
            )
            .map_err(io)?;
            for p in &s.predicates {
                let ratio = p.positive_ratio.map_or_else(|| "n/a".into(), |r| format!("{r:.2}"));
                writeln!(
                    out,
                    "{:<width$}  {:>7}  {:>9}  {:>5}  {:>5}  {:>6}  {:>6}  {ratio:>6}",
                    p.predicate, p.queued, p.remaining, p.positives, p.negatives, p.no_relation, p.faulty
                )
                .map_err(io)?;
            }
        }
    }
    Ok(())
}

fn rank(args: RankArgs, out: &mut dyn Write) -> CliResult {
    for p in [&args.images, &args.preds, &args.train]
        .into_iter()
        .chain(&args.exclude)
        .chain(args.clusters.as_ref())
        .chain(args.config.as_ref())
    {
        require_file(p)?;
    }
    require_output(&args.output)?;
    let config = match &args.config {
        Some(c) => CampaignConfig::read(c)?,
        None => CampaignConfig::default(),
    };
    let images = read_dataset(&args.images)?;
    let train = read_dataset(&args.train)?;
    let preds = read_prediction_set(&args.preds)?;
    let stats = build_cooccurrence(&train, args.threshold.unwrap_or(config.threshold));
    let mut clusters: Option<ClusterModel> = match &args.clusters {
        Some(path) => Some(
            serde_json::from_str(&read_text(path)?)
                .map_err(|e| CliError::new("format", format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    if let Some(model) = clusters.as_mut() {
        let excluded: Vec<usize> =
            model.excluded_clusters.iter().copied().chain(config.excluded_clusters.clone()).collect();
        model.set_excluded(excluded)?;
    }
    let mut exclusions = Exclusions::default();
    for path in &args.exclude {
        exclusions.extend(Exclusions::from_dataset(&read_dataset(path)?));
    }
    let queue_config = QueueConfig {
        per_cluster_quota: args.quota.unwrap_or(config.per_cluster_quota),
        seed: args.seed,
        ..QueueConfig::default()
    };
    let mut queue = Vec::new();
    for name in &args.predicate {
        let predicate = images
            .categories
            .resolve_predicate(name)
            .ok_or_else(|| CliError::new("usage", format!("unknown predicate {name}")))?;
        let part =
            build_proposal_queue(&images, &preds, predicate, &stats, clusters.as_ref(), &exclusions, &queue_config)?;
        writeln!(out, "{}: {} proposals", images.categories.predicate_classes[predicate], part.len())
            .map_err(|e| CliError::new("io", e.to_string()))?;
        queue.extend(part);
    }
    write_text(&args.output, &serde_json::to_string_pretty(&queue).expect("serializes"))
}

fn evaluate(args: EvaluateArgs, out: &mut dyn Write) -> CliResult {
    require_file(&args.preds)?;
    require_file(&args.gt)?;
    if let Some(o) = &args.output {
        require_output(o)?;
    }
    let dataset = read_dataset(&args.gt)?;
    let preds = read_prediction_set(&args.preds)?;
    let options = EvaluateOptions {
        ks: args.k,
        graph_constraint: !args.no_graph_constraint,
        missing_rows: if args.lenient { MissingRowPolicy::Lenient } else { MissingRowPolicy::Strict },
    };
    let report = crate::metrics::evaluate(&dataset, &preds, &options)?;
    let text = match args.format {
        Format::Table => report.to_table(),
        Format::Structured => report.to_json() + "\n",
    };
    match &args.output {
        Some(path) => write_text(path, &text),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::new("io", e.to_string())),
    }
}

fn serve(args: ServeArgs) -> CliResult {
    require_dir(&args.campaign_dir)?;
    if let Some(ui) = &args.ui_dir {
        require_dir(ui)?;
    }
    let campaign = Campaign::open(&args.campaign_dir, Arc::new(SystemClock), args.lease_ttl.saturating_mul(1000))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e.to_string()))?;
    let addr = std::net::SocketAddr::new(args.host, args.port);
    runtime
        .block_on(crate::service::http::serve(Arc::new(campaign), addr, args.ui_dir))
        .map_err(|e| CliError::new("io", e.to_string()))
}
