use std::collections::HashMap;
use std::fmt::Debug;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::log::{decode_log, LogRecord, LogWriter};
use super::state::{CampaignExport, CampaignSpec, CampaignState, CampaignStats, FoldedState};
use super::{AnnotationDecision, DecisionKind, ServiceError};
use crate::dataset::read_dataset;
use crate::proposal::Proposal;

pub const DEFAULT_LEASE_TTL_MS: u64 = 10 * 60 * 1000;

/// Records between automatic snapshots of a campaign directory.
const SNAPSHOT_EVERY: usize = 500;

pub trait Clock: Send + Sync + Debug {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        Self(AtomicU64::new(start_ms))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// Layout of a campaign directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignPaths {
    pub root: PathBuf,
}

impl CampaignPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// Images with their segments, in the annotation file format.
    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.json")
    }

    /// The proposal queue as a JSON array, best first.
    pub fn proposals(&self) -> PathBuf {
        self.root.join("proposals.json")
    }

    pub fn log(&self) -> PathBuf {
        self.root.join("decisions.log")
    }

    pub fn snapshot(&self) -> PathBuf {
        self.root.join("snapshot.json")
    }

    pub fn images(&self) -> PathBuf {
        self.root.join("images")
    }

    pub fn masks(&self) -> PathBuf {
        self.root.join("masks")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub annotator_id: String,
}

/// A proposal handed to a session, with what a client needs to display it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeasedProposal {
    #[serde(flatten)]
    pub proposal: Proposal,
    pub predicate: String,
    pub display_name: String,
    pub image_url: String,
    pub mask_url: Option<String>,
    pub width: u32,
    pub height: u32,
    pub subject_segment_id: u64,
    pub object_segment_id: u64,
    pub subject_category: String,
    pub object_category: String,
    pub lease_expires_ms: u64,
    /// Open proposals left for this predicate, this one included.
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub proposal_id: String,
    pub decision: DecisionKind,
    /// Records in the log after this one was appended.
    pub log_records: usize,
}

#[derive(Debug, Clone)]
struct Session {
    annotator_id: String,
}

#[derive(Debug, Clone)]
struct Lease {
    session_id: String,
    expires_ms: u64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    /// Bytes of the log folded into `state`.
    log_offset: u64,
    state: FoldedState,
}

struct Inner {
    state: CampaignState,
    sessions: HashMap<String, Session>,
    leases: HashMap<String, Lease>,
    writer: Option<LogWriter>,
    since_snapshot: usize,
}

/// A running campaign: folded state plus sessions and leases.
///
/// Every mutation takes the one lock, checks the request against the state,
/// appends to the log and applies the record before releasing it.
pub struct Campaign {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
    lease_ttl_ms: u64,
    paths: Option<CampaignPaths>,
}

impl Debug for Campaign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Campaign")
            .field("lease_ttl_ms", &self.lease_ttl_ms)
            .field("paths", &self.paths)
            .finish_non_exhaustive()
    }
}

fn new_session_id() -> String {
    let mut rng = rand::rng();
    format!("{:016x}{:016x}", rng.random::<u64>(), rng.random::<u64>())
}

fn read_snapshot(path: &Path) -> Option<Snapshot> {
    let text = fs::read_to_string(path).ok()?;
    match serde_json::from_str(&text) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("ignoring unreadable snapshot {}: {e}", path.display());
            None
        }
    }
}

impl Campaign {
    /// A campaign without persistence; decisions live only in memory.
    pub fn in_memory(spec: CampaignSpec, clock: Arc<dyn Clock>, lease_ttl_ms: u64) -> Self {
        Self::from_state(CampaignState::new(spec), None, None, clock, lease_ttl_ms)
    }

    fn from_state(
        state: CampaignState,
        writer: Option<LogWriter>,
        paths: Option<CampaignPaths>,
        clock: Arc<dyn Clock>,
        lease_ttl_ms: u64,
    ) -> Self {
        Self {
            inner: Mutex::new(Inner {
                state,
                sessions: HashMap::new(),
                leases: HashMap::new(),
                writer,
                since_snapshot: 0,
            }),
            clock,
            lease_ttl_ms,
            paths,
        }
    }

    /// Loads the spec from a campaign directory.
    pub fn load_spec(paths: &CampaignPaths) -> Result<CampaignSpec, ServiceError> {
        let images = read_dataset(paths.dataset()).map_err(|e| ServiceError::InvalidCampaign(e.to_string()))?;
        let proposals_path = paths.proposals();
        let text = fs::read_to_string(&proposals_path).map_err(|e| ServiceError::io(&proposals_path, e))?;
        let queue: Vec<Proposal> = serde_json::from_str(&text)
            .map_err(|e| ServiceError::InvalidCampaign(format!("{}: {e}", proposals_path.display())))?;
        CampaignSpec::new(images, queue)
    }

    /// Opens a campaign directory, recovering state from the snapshot and
    /// the decision log. A torn final log record is dropped.
    pub fn open(root: impl Into<PathBuf>, clock: Arc<dyn Clock>, lease_ttl_ms: u64) -> Result<Self, ServiceError> {
        let paths = CampaignPaths::new(root);
        let spec = Self::load_spec(&paths)?;
        let log_path = paths.log();
        let bytes = match fs::read(&log_path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(ServiceError::io(&log_path, e)),
        };

        let snapshot = read_snapshot(&paths.snapshot()).filter(|s| {
            let at = s.log_offset as usize;
            at <= bytes.len() && (at == 0 || bytes[at - 1] == b'\n')
        });
        let (state, valid_len) = match snapshot {
            Some(snap) => {
                let at = snap.log_offset as usize;
                let tail = decode_log(&bytes[at..])?;
                let mut state = CampaignState::from_parts(spec, snap.state);
                for r in &tail.records {
                    state.apply(r).map_err(|e| ServiceError::CorruptLog(e.to_string()))?;
                }
                (state, at + tail.valid_len)
            }
            None => {
                let decoded = decode_log(&bytes)?;
                let state = CampaignState::replay(spec, &decoded.records)
                    .map_err(|e| ServiceError::CorruptLog(e.to_string()))?;
                (state, decoded.valid_len)
            }
        };
        let writer = LogWriter::open(&log_path, valid_len as u64, true)?;
        log::info!("campaign {}: {} log records recovered", paths.root.display(), state.folded().records_applied);
        Ok(Self::from_state(state, Some(writer), Some(paths), clock, lease_ttl_ms))
    }

    pub fn paths(&self) -> Option<&CampaignPaths> {
        self.paths.as_ref()
    }

    pub fn lease_ttl_ms(&self) -> u64 {
        self.lease_ttl_ms
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // A panic while holding the lock leaves the state as it was before
        // the failed mutation, since records are applied only after a
        // successful append.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn open_session(&self, annotator_id: &str) -> Result<SessionInfo, ServiceError> {
        if annotator_id.trim().is_empty() {
            return Err(ServiceError::BadRequest("annotator_id must not be empty".into()));
        }
        let session_id = new_session_id();
        self.lock().sessions.insert(session_id.clone(), Session { annotator_id: annotator_id.to_string() });
        Ok(SessionInfo { session_id, annotator_id: annotator_id.to_string() })
    }

    /// Ends a session and releases its leases.
    pub fn close_session(&self, session_id: &str) -> Result<(), ServiceError> {
        let mut inner = self.lock();
        inner.sessions.remove(session_id).ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))?;
        inner.leases.retain(|_, l| l.session_id != session_id);
        Ok(())
    }

    /// Leases the best open proposal for `predicate` to the session.
    ///
    /// A proposal the session already holds comes first, with its lease
    /// renewed. Otherwise the first proposal in queue order that is
    /// undecided, not withdrawn, not skipped or decided by this annotator,
    /// and not held by a live lease. `None` when nothing is left.
    pub fn next_proposal(&self, session_id: &str, predicate: usize) -> Result<Option<LeasedProposal>, ServiceError> {
        let now = self.clock.now_ms();
        let mut inner = self.lock();
        let annotator = inner
            .sessions
            .get(session_id)
            .ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))?
            .annotator_id
            .clone();
        let inner = &mut *inner;
        let state = &inner.state;
        let spec = state.spec();
        let mut remaining = 0;
        let mut held = None;
        let mut free = None;
        for &pos in spec.positions_for(predicate) {
            let p = &spec.queue()[pos];
            if !state.is_open(p) {
                continue;
            }
            remaining += 1;
            if state.has_decided(&p.proposal_id, &annotator) || state.has_skipped(&p.proposal_id, &annotator) {
                continue;
            }
            match inner.leases.get(&p.proposal_id) {
                Some(l) if l.session_id == session_id && l.expires_ms > now => {
                    held.get_or_insert(pos);
                }
                Some(l) if l.expires_ms > now => {}
                _ => {
                    free.get_or_insert(pos);
                }
            }
        }
        let Some(pos) = held.or(free) else {
            return Ok(None);
        };
        let p = spec.queue()[pos].clone();
        let expires_ms = now.saturating_add(self.lease_ttl_ms);
        inner.leases.insert(p.proposal_id.clone(), Lease { session_id: session_id.to_string(), expires_ms });
        Ok(Some(describe(spec, p, expires_ms, remaining)))
    }

    /// Records a decision on a proposal leased to the session.
    pub fn submit_decision(
        &self,
        session_id: &str,
        proposal_id: &str,
        decision: DecisionKind,
    ) -> Result<Acknowledgment, ServiceError> {
        let now = self.clock.now_ms();
        let mut inner = self.lock();
        let annotator_id = inner
            .sessions
            .get(session_id)
            .ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))?
            .annotator_id
            .clone();
        let proposal = inner
            .state
            .spec()
            .proposal(proposal_id)
            .ok_or_else(|| ServiceError::UnknownProposal(proposal_id.to_string()))?;
        if inner.state.has_decided(proposal_id, &annotator_id) {
            return Err(ServiceError::DuplicateDecision(proposal_id.to_string()));
        }
        let withdrawn = inner.state.is_withdrawn(proposal);
        let leased = inner.leases.get(proposal_id).is_some_and(|l| l.session_id == session_id && l.expires_ms > now);
        if !leased {
            return Err(ServiceError::LeaseExpired(proposal_id.to_string()));
        }
        if withdrawn {
            inner.leases.remove(proposal_id);
            return Err(ServiceError::Withdrawn(proposal_id.to_string()));
        }
        let record = LogRecord::Decision(AnnotationDecision {
            proposal_id: proposal_id.to_string(),
            decision,
            annotator_id,
            timestamp_ms: now,
        });
        self.commit(&mut inner, &record)?;
        inner.leases.remove(proposal_id);
        Ok(Acknowledgment {
            proposal_id: proposal_id.to_string(),
            decision,
            log_records: inner.state.folded().records_applied,
        })
    }

    /// Flags an object as faulty outside of any proposal.
    pub fn mark_faulty(&self, session_id: &str, image_id: &str, object_idx: usize) -> Result<(), ServiceError> {
        let now = self.clock.now_ms();
        let mut inner = self.lock();
        let annotator_id = inner
            .sessions
            .get(session_id)
            .ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))?
            .annotator_id
            .clone();
        let record =
            LogRecord::FaultyObject { image_id: image_id.to_string(), object_idx, annotator_id, timestamp_ms: now };
        self.commit(&mut inner, &record)
    }

    fn commit(&self, inner: &mut Inner, record: &LogRecord) -> Result<(), ServiceError> {
        inner.state.check(record)?;
        if let Some(w) = inner.writer.as_mut() {
            w.append(record)?;
        }
        inner.state.apply(record)?;
        inner.since_snapshot += 1;
        if inner.since_snapshot >= SNAPSHOT_EVERY {
            if let Err(e) = self.write_snapshot(inner) {
                log::warn!("snapshot failed: {e}");
            }
        }
        Ok(())
    }

    fn write_snapshot(&self, inner: &mut Inner) -> Result<(), ServiceError> {
        let (Some(paths), Some(writer)) = (&self.paths, &inner.writer) else {
            return Ok(());
        };
        let snap = Snapshot { log_offset: writer.len(), state: inner.state.folded().clone() };
        let path = paths.snapshot();
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_vec(&snap).expect("snapshot serializes");
        fs::write(&tmp, body).map_err(|e| ServiceError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| ServiceError::io(&path, e))?;
        inner.since_snapshot = 0;
        Ok(())
    }

    /// Writes a snapshot now. A no-op for in-memory campaigns.
    pub fn snapshot(&self) -> Result<(), ServiceError> {
        let mut inner = self.lock();
        self.write_snapshot(&mut inner)
    }

    pub fn stats(&self) -> CampaignStats {
        self.lock().state.stats()
    }

    pub fn export(&self) -> CampaignExport {
        self.lock().state.export()
    }

    /// A copy of the folded state.
    pub fn state(&self) -> CampaignState {
        self.lock().state.clone()
    }

    /// Live leases as (proposal id, session id), sorted.
    pub fn active_leases(&self) -> Vec<(String, String)> {
        let now = self.clock.now_ms();
        let mut out: Vec<_> = self
            .lock()
            .leases
            .iter()
            .filter(|(_, l)| l.expires_ms > now)
            .map(|(p, l)| (p.clone(), l.session_id.clone()))
            .collect();
        out.sort();
        out
    }

    /// Runs `f` on the spec under the lock.
    pub fn with_spec<T>(&self, f: impl FnOnce(&CampaignSpec) -> T) -> T {
        f(self.lock().state.spec())
    }
}

fn describe(spec: &CampaignSpec, proposal: Proposal, lease_expires_ms: u64, remaining: usize) -> LeasedProposal {
    let cats = spec.categories();
    let img = spec.image(&proposal.image_id).expect("spec checks proposal images");
    let subject = &img.objects[proposal.subject_idx];
    let object = &img.objects[proposal.object_idx];
    let category = |c: usize| cats.object_class(c).unwrap_or_default().to_string();
    LeasedProposal {
        predicate: cats.predicate_name(proposal.predicate_id).unwrap_or_default().to_string(),
        display_name: cats.display_name(proposal.predicate_id).unwrap_or_default().to_string(),
        image_url: format!("/images/{}", img.file_name),
        mask_url: img.pan_seg_file_name.as_ref().map(|m| format!("/masks/{m}")),
        width: img.width,
        height: img.height,
        subject_segment_id: subject.segment_id,
        object_segment_id: object.segment_id,
        subject_category: category(subject.category_id),
        object_category: category(object.category_id),
        lease_expires_ms,
        remaining,
        proposal,
    }
}
