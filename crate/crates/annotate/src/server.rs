//! HTTP+JSON annotation service. Field names are documented in
//! `docs/annotate-api.md`.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::info;
use serde::{Deserialize, Serialize};

use relmine_core::discovery::{candidates_from_rows, read_candidates, CANDIDATE_HEADER};
use relmine_core::eval::{load_labeled, write_labeled, ColumnMap, Labeled};
use relmine_core::path::FilterConfig;
use relmine_core::teg::TegStore;
use relmine_core::Candidate;

use crate::aggregate::{aggregate, AggregateConfig, Aggregation};
use crate::error::{Error, Result};
use crate::queue::{premise_key, LockState, Queue};
use crate::record::{AnnotationRecord, Label, RecordLog};
use crate::stats::{stats_report, StatsReport};
use crate::verbalize::{verbalize, CandidateText, Lexicon, Verbalization};

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct WorkerProfile {
    pub prior_jobs: u32,
    pub acceptance_rate: f64,
    pub passed_test: bool,
}

/// Which workers may receive batches. With `open`, anyone may.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Qualification {
    pub open: bool,
    pub min_prior_jobs: u32,
    pub min_acceptance_rate: f64,
    pub require_test: bool,
    pub workers: BTreeMap<String, WorkerProfile>,
}

impl Default for Qualification {
    fn default() -> Self {
        Qualification {
            open: false,
            min_prior_jobs: 0,
            min_acceptance_rate: 0.0,
            require_test: true,
            workers: BTreeMap::new(),
        }
    }
}

impl Qualification {
    pub fn open() -> Self {
        Qualification {
            open: true,
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn admits(&self, worker: &str) -> bool {
        if self.open {
            return true;
        }
        self.workers.get(worker).is_some_and(|p| {
            p.prior_jobs >= self.min_prior_jobs
                && p.acceptance_rate >= self.min_acceptance_rate
                && (p.passed_test || !self.require_test)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub aggregate: AggregateConfig,
    /// Seconds before an unsubmitted batch returns to the queue.
    pub lock_timeout: u64,
    pub qualification: Qualification,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            aggregate: AggregateConfig::default(),
            lock_timeout: 1800,
            qualification: Qualification::open(),
        }
    }
}

/// Seconds since the Unix epoch; replaceable in tests.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

/// Loads candidates from a discovery candidate TSV (ids are row numbers
/// from 1) or from a labeled TSV with the default column names.
pub fn load_candidates(path: &Path, cfg: &FilterConfig) -> Result<Vec<Candidate>> {
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty() && !l.starts_with('#')).unwrap_or("");
    if first == CANDIDATE_HEADER || first.starts_with("premise_path\t") {
        Ok(candidates_from_rows(read_candidates(text.as_bytes())?, cfg)?)
    } else {
        Ok(load_labeled(path, &ColumnMap::default(), cfg)?.into_iter().map(|l| l.cand).collect())
    }
}

struct Mutable {
    queue: Queue,
    log: RecordLog,
}

struct Shared {
    cands: Vec<Candidate>,
    texts: Vec<CandidateText>,
    index: HashMap<String, usize>,
    cfg: ServiceConfig,
    clock: Clock,
    state: Mutex<Mutable>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(
        cands: Vec<Candidate>,
        lexicon: &Lexicon,
        store: Option<&TegStore>,
        log: RecordLog,
        cfg: ServiceConfig,
        clock: Clock,
    ) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, c) in cands.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate candidate id `{}`", c.id)));
            }
        }
        let texts = cands.iter().map(|c| verbalize(c, lexicon, store)).collect();
        let queue = Queue::new(&cands, cfg.lock_timeout);
        Ok(AppState(Arc::new(Shared {
            cands,
            texts,
            index,
            cfg,
            clock,
            state: Mutex::new(Mutable { queue, log }),
        })))
    }

    fn records_snapshot(&self) -> Vec<AnnotationRecord> {
        self.0.state.lock().expect("state lock").log.records().to_vec()
    }

    /// Aggregates a copy of the records, so submissions are never blocked
    /// by aggregation.
    pub fn aggregation(&self) -> Aggregation {
        let records = self.records_snapshot();
        aggregate(&records, self.0.cands.iter().map(|c| c.id.as_str()), &self.0.cfg.aggregate)
    }

    /// Gold-labeled candidates in input order, ready for the eval loader.
    pub fn gold_items(&self, agg: &Aggregation) -> Vec<Labeled> {
        self.0
            .cands
            .iter()
            .filter_map(|c| {
                agg.gold.get(&c.id).map(|g| Labeled {
                    cand: c.clone(),
                    gold: g.label,
                    disagreements: g.disagreements,
                })
            })
            .collect()
    }

    pub fn export_tsv(&self) -> Result<String> {
        let mut buf = Vec::new();
        write_labeled(&mut buf, &self.gold_items(&self.aggregation()))?;
        Ok(String::from_utf8(buf).expect("utf-8 export"))
    }
}

#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Deserialize)]
pub struct BatchQuery {
    pub worker: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub cand: String,
    pub sentence: String,
    pub question: String,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiseView {
    pub sentence: String,
    pub placeholder_a: String,
    pub placeholder_b: String,
    pub examples_a: Vec<String>,
    pub examples_b: Vec<String>,
    pub fallback: bool,
}

impl From<&Verbalization> for PremiseView {
    fn from(v: &Verbalization) -> Self {
        PremiseView {
            sentence: v.sentence.clone(),
            placeholder_a: v.placeholders.0.clone(),
            placeholder_b: v.placeholders.1.clone(),
            examples_a: v.examples.0.clone(),
            examples_b: v.examples.1.clone(),
            fallback: v.fallback,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResponse {
    pub worker: String,
    /// Absent when nothing is left for this worker.
    pub batch: Option<u64>,
    pub expires: Option<u64>,
    pub premise: Option<PremiseView>,
    pub hypotheses: Vec<Hypothesis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub cand: String,
    /// May be omitted when the premise is flagged.
    #[serde(default)]
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub worker: String,
    #[serde(default)]
    pub batch: Option<u64>,
    #[serde(default)]
    pub premise_flagged: bool,
    pub answers: Vec<Answer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub candidates: usize,
    pub gold: usize,
    pub needs_more: usize,
    pub flagged: usize,
    pub records: usize,
    pub workers: usize,
    pub excluded_workers: Vec<String>,
    pub active_locks: usize,
    pub rounds: usize,
}

fn require_qualified(s: &Shared, worker: &str) -> ApiResult<()> {
    if worker.is_empty() {
        return Err(ApiError(StatusCode::BAD_REQUEST, "missing worker".into()));
    }
    if !s.cfg.qualification.admits(worker) {
        return Err(ApiError(StatusCode::FORBIDDEN, format!("worker `{worker}` is not qualified")));
    }
    Ok(())
}

async fn get_batch(State(app): State<AppState>, Query(q): Query<BatchQuery>) -> ApiResult<Json<BatchResponse>> {
    let worker = q.worker.unwrap_or_default();
    let s = &app.0;
    require_qualified(s, &worker)?;
    let agg = app.aggregation();
    let now = (s.clock)();
    let mut st = s.state.lock().expect("state lock");
    let Mutable { queue, log } = &mut *st;
    let batch = queue.assign(
        &worker,
        now,
        |i| agg.needs_more.contains(&s.cands[i].id),
        |i| log.contains(&worker, &s.cands[i].id),
    );
    drop(st);
    let resp = match batch {
        None => BatchResponse {
            worker,
            batch: None,
            expires: None,
            premise: None,
            hypotheses: Vec::new(),
        },
        Some(b) => {
            info!("batch {} for {worker}: premise {}, {} hypotheses", b.id, b.premise, b.cands.len());
            BatchResponse {
                worker,
                batch: Some(b.id),
                expires: Some(b.expires),
                premise: Some(PremiseView::from(&s.texts[b.cands[0]].premise)),
                hypotheses: b
                    .cands
                    .iter()
                    .map(|&i| Hypothesis {
                        cand: s.cands[i].id.clone(),
                        sentence: s.texts[i].hypothesis.sentence.clone(),
                        question: s.texts[i].question.clone(),
                        fallback: s.texts[i].hypothesis.fallback,
                    })
                    .collect(),
            }
        }
    };
    Ok(Json(resp))
}

async fn post_submit(State(app): State<AppState>, Json(req): Json<SubmitRequest>) -> ApiResult<Json<SubmitResponse>> {
    let s = &app.0;
    require_qualified(s, &req.worker)?;
    if req.answers.is_empty() {
        return Err(ApiError(StatusCode::BAD_REQUEST, "no answers".into()));
    }
    let now = (s.clock)();
    let mut ixs = Vec::with_capacity(req.answers.len());
    for a in &req.answers {
        let i = *s
            .index
            .get(&a.cand)
            .ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, format!("unknown candidate `{}`", a.cand)))?;
        if a.label.is_none() && !req.premise_flagged {
            return Err(ApiError(StatusCode::BAD_REQUEST, format!("candidate `{}` has no label", a.cand)));
        }
        ixs.push(i);
    }
    let mut st = s.state.lock().expect("state lock");
    let premise = premise_key(&s.cands[ixs[0]]);
    for (&i, a) in ixs.iter().zip(&req.answers) {
        if premise_key(&s.cands[i]) != premise {
            return Err(ApiError(StatusCode::BAD_REQUEST, "answers span several premises".into()));
        }
        if st.log.contains(&req.worker, &a.cand) {
            return Err(ApiError(StatusCode::CONFLICT, format!("candidate `{}` already labeled by this worker", a.cand)));
        }
        match st.queue.lock_state(i, &req.worker, now) {
            LockState::Held => {}
            LockState::Expired => {
                return Err(ApiError(StatusCode::CONFLICT, format!("lock on candidate `{}` expired", a.cand)))
            }
            LockState::Missing => {
                return Err(ApiError(StatusCode::CONFLICT, format!("candidate `{}` is not locked by this worker", a.cand)))
            }
        }
        if let (Some(b), Some(l)) = (req.batch, st.queue.lock(i)) {
            if l.batch != b {
                return Err(ApiError(StatusCode::CONFLICT, format!("candidate `{}` belongs to batch {}", a.cand, l.batch)));
            }
        }
    }
    let records: Vec<AnnotationRecord> = req
        .answers
        .iter()
        .map(|a| AnnotationRecord {
            worker: req.worker.clone(),
            cand: a.cand.clone(),
            label: a.label.unwrap_or(Label::Incomprehensible),
            premise_flagged: req.premise_flagged,
            time: now,
        })
        .collect();
    let n = records.len();
    st.log
        .append(records)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    for &i in &ixs {
        st.queue.release(i);
    }
    Ok(Json(SubmitResponse { accepted: n }))
}

async fn get_progress(State(app): State<AppState>) -> Json<Progress> {
    let agg = app.aggregation();
    let s = &app.0;
    let now = (s.clock)();
    let (records, active_locks) = {
        let st = s.state.lock().expect("state lock");
        (st.log.len(), st.queue.active_locks(now))
    };
    Json(Progress {
        candidates: s.cands.len(),
        gold: agg.gold.len(),
        needs_more: agg.needs_more.len(),
        flagged: agg.flagged.len(),
        records,
        workers: agg.workers.len(),
        excluded_workers: agg.excluded_workers.iter().cloned().collect(),
        active_locks,
        rounds: agg.rounds,
    })
}

async fn get_export(State(app): State<AppState>) -> ApiResult<Response> {
    let body = app
        .export_tsv()
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")], body).into_response())
}

async fn get_stats(State(app): State<AppState>) -> Json<StatsReport> {
    Json(stats_report(&app.aggregation()))
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/batch", get(get_batch))
        .route("/submit", post(post_submit))
        .route("/progress", get(get_progress))
        .route("/export.tsv", get(get_export))
        .route("/stats", get(get_stats))
        .with_state(app)
}

pub async fn serve(addr: SocketAddr, app: AppState) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("annotation service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app)).await?;
    Ok(())
}
