//! HTTP service holding interactive acquisition sessions over one loaded
//! bundle.
//!
//! Sessions live in memory. Each sits behind its own mutex, so requests on
//! one session are serialized while different sessions proceed in parallel
//! over the shared read-only bundle. Feature values arrive in raw units and
//! are normalized here with the bundle's normalization.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use fact_core::acquire::{score_features, AcquisitionSession};
use fact_core::model::ModelBundle;
use fact_core::FactError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{info, warn};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_SUGGESTIONS: usize = 10;
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(3600);

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// JSON error body `{error: {code, message}}` with its status.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation_error", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn session_missing(id: &str) -> Self {
        Self::not_found(format!("session {id} does not exist"))
    }
}

impl From<FactError> for ApiError {
    fn from(e: FactError) -> Self {
        match e {
            FactError::AlreadyKnown(_) => Self::conflict(e.to_string()),
            FactError::Io { .. } | FactError::Checkpoint(_) => Self::internal(e.to_string()),
            other => Self::validation(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": {"code": self.code, "message": self.message},
        });
        (self.status, Json(body)).into_response()
    }
}

/// Serializes `body` and stamps it with the schema version.
fn reply<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let mut value = serde_json::to_value(body).unwrap_or_else(|e| json!({"error": e.to_string()}));
    if let Value::Object(map) = &mut value {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    (status, Json(value)).into_response()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub predicted_class: usize,
    pub class_name: String,
    pub top_probability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub score: f64,
    pub numerator: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Suggestion {
    pub candidates: Vec<Candidate>,
    /// Set when every feature is already known.
    pub none_remaining: bool,
}

/// A raw value that fell outside the range seen in training and was clamped.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClampWarning {
    pub feature: String,
    pub raw: f64,
    pub normalized: f64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HistoryView {
    pub step: usize,
    pub id: String,
    pub values: Vec<f64>,
    pub normalized_values: Vec<f64>,
    pub cost: f64,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionView {
    pub id: String,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    pub model_fingerprint: String,
    pub step: usize,
    pub total_cost: f64,
    /// Units known initially, with their raw values.
    pub initial: BTreeMap<String, Vec<f64>>,
    /// All currently known units, initial ones included.
    pub known: Vec<String>,
    pub history: Vec<HistoryView>,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionSummary {
    pub id: String,
    pub step: usize,
    pub total_cost: f64,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
}

/// One live session.
#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub id: String,
    pub session: AcquisitionSession,
    pub initial_raw: BTreeMap<String, Vec<f64>>,
    /// Raw values per history entry, aligned with the session history.
    pub raw_history: Vec<Vec<f64>>,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    last_access: Instant,
}

/// Initial value of a unit: a bare number for a single feature or a list for
/// a group.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum UnitValues {
    One(f64),
    Many(Vec<f64>),
}

impl UnitValues {
    fn into_vec(self) -> Vec<f64> {
        match self {
            UnitValues::One(v) => vec![v],
            UnitValues::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default)]
    pub values: BTreeMap<String, UnitValues>,
}

/// `{id, value}` for a single feature or `{group, values}` for a group.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRequest {
    pub id: Option<String>,
    pub value: Option<f64>,
    pub group: Option<String>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Create {
        session: String,
        at_ms: u64,
        values: BTreeMap<String, Vec<f64>>,
    },
    Acquire {
        session: String,
        at_ms: u64,
        unit: String,
        values: Vec<f64>,
    },
    Delete {
        session: String,
        at_ms: u64,
    },
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub idle_timeout: Duration,
    pub event_log: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            event_log: None,
        }
    }
}

struct Inner {
    bundle: ModelBundle,
    fingerprint: String,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionRecord>>>>,
    event_log: Option<Mutex<File>>,
    idle_timeout: Duration,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// State over `bundle`. With an event log configured, sessions recorded
    /// in an existing log are restored first and new events are appended.
    pub fn new(bundle: ModelBundle, config: ServiceConfig) -> Result<Self, CliError> {
        let fingerprint = bundle.fingerprint();
        let mut state = Self {
            inner: Arc::new(Inner {
                bundle,
                fingerprint,
                sessions: RwLock::new(HashMap::new()),
                event_log: None,
                idle_timeout: config.idle_timeout,
            }),
        };
        if let Some(path) = &config.event_log {
            if path.exists() {
                let restored = state.replay_log(path)?;
                info!(restored, "restored sessions from {}", path.display());
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Arc::get_mut(&mut state.inner)
                .expect("state not yet shared")
                .event_log = Some(Mutex::new(file));
        }
        Ok(state)
    }

    pub fn bundle(&self) -> &ModelBundle {
        &self.inner.bundle
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().unwrap_or_else(|p| p.into_inner()).len()
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<SessionRecord>>, ApiError> {
        self.inner
            .sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::session_missing(id))
    }

    fn log(&self, event: &Event) {
        let Some(file) = &self.inner.event_log else {
            return;
        };
        let line = serde_json::to_string(event).expect("events serialize");
        let mut f = lock(file);
        if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
            warn!("event log write failed: {e}");
        }
    }

    fn prediction(&self, s: &AcquisitionSession) -> Prediction {
        let class = s.predicted_class();
        Prediction {
            probabilities: s.prediction().to_vec(),
            predicted_class: class,
            class_name: self.inner.bundle.manifest.class_names.get(class).cloned().unwrap_or_default(),
            top_probability: s.top_probability(),
        }
    }

    fn view(&self, r: &SessionRecord) -> SessionView {
        let units = self.inner.bundle.units();
        let name = |u: usize| units.get(u).map(|x| x.name.clone()).unwrap_or_default();
        SessionView {
            id: r.id.clone(),
            created_at_ms: r.created_at_ms,
            updated_at_ms: r.updated_at_ms,
            model_fingerprint: self.inner.fingerprint.clone(),
            step: r.session.step(),
            total_cost: r.session.total_cost(),
            initial: r.initial_raw.clone(),
            known: units
                .iter()
                .filter(|u| r.session.is_unit_known(u))
                .map(|u| u.name.clone())
                .collect(),
            history: r
                .session
                .history()
                .iter()
                .zip(&r.raw_history)
                .map(|(h, raw)| HistoryView {
                    step: h.step,
                    id: name(h.unit),
                    values: raw.clone(),
                    normalized_values: h.values.clone(),
                    cost: h.cost,
                    score: h.score,
                })
                .collect(),
            prediction: self.prediction(&r.session),
        }
    }

    fn suggestion(&self, s: &AcquisitionSession) -> Result<Suggestion, ApiError> {
        let mut scores = match score_features(&self.inner.bundle, s) {
            Ok(scores) => scores,
            Err(FactError::NoUnknownFeatures) => {
                return Ok(Suggestion {
                    candidates: Vec::new(),
                    none_remaining: true,
                })
            }
            Err(e) => return Err(ApiError::internal(e.to_string())),
        };
        scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.unit.cmp(&b.unit)));
        let units = self.inner.bundle.units();
        Ok(Suggestion {
            candidates: scores
                .iter()
                .take(MAX_SUGGESTIONS)
                .map(|s| Candidate {
                    id: units.get(s.unit).map(|u| u.name.clone()).unwrap_or_default(),
                    score: s.score,
                    numerator: s.numerator,
                    cost: s.cost,
                })
                .collect(),
            none_remaining: false,
        })
    }

    /// Normalizes raw values for a unit's members, collecting clamp warnings.
    fn normalize(&self, unit: usize, raw: &[f64], warnings: &mut Vec<ClampWarning>) -> Result<Vec<f64>, ApiError> {
        let bundle = &self.inner.bundle;
        let u = bundle.units().get(unit).ok_or_else(|| ApiError::internal("unit id out of range"))?;
        if raw.len() != u.members.len() {
            return Err(ApiError::validation(format!(
                "{} expects {} value(s), got {}",
                u.name,
                u.members.len(),
                raw.len()
            )));
        }
        let mut out = Vec::with_capacity(raw.len());
        for (&m, &v) in u.members.iter().zip(raw) {
            let feature = bundle.manifest.feature_names.get(m).cloned().unwrap_or_else(|| format!("f{m}"));
            if !v.is_finite() {
                return Err(ApiError::validation(format!("value for {feature} is not finite")));
            }
            let (normalized, clamped) = bundle.normalization().apply_value(m, v);
            if clamped {
                warnings.push(ClampWarning {
                    message: format!(
                        "{feature}={v} lies outside the training range [{}, {}] and was clamped",
                        bundle.normalization().min[m],
                        bundle.normalization().max[m]
                    ),
                    feature,
                    raw: v,
                    normalized,
                });
            }
            out.push(normalized);
        }
        Ok(out)
    }

    fn unit_id(&self, name: &str) -> Result<usize, ApiError> {
        let bundle = &self.inner.bundle;
        if let Some(u) = bundle.units().find(name) {
            return Ok(u);
        }
        match bundle.manifest.feature_names.iter().position(|f| f == name) {
            Some(j) => {
                let unit = bundle.units().unit_of_feature(j);
                let group = bundle.units().get(unit).map(|u| u.name.as_str()).unwrap_or_default();
                Err(ApiError::validation(format!(
                    "feature {name} belongs to group {group}; provide the whole group"
                )))
            }
            None => Err(ApiError::validation(format!("unknown feature or group {name:?}"))),
        }
    }

    fn build_record(
        &self,
        id: String,
        values: BTreeMap<String, Vec<f64>>,
        at_ms: u64,
    ) -> Result<(SessionRecord, Vec<ClampWarning>), ApiError> {
        let mut warnings = Vec::new();
        let mut initial = Vec::with_capacity(values.len());
        for (name, raw) in &values {
            let unit = self.unit_id(name)?;
            initial.push((unit, self.normalize(unit, raw, &mut warnings)?));
        }
        let session = AcquisitionSession::with_known_units(&self.inner.bundle, &initial)?;
        let record = SessionRecord {
            id,
            session,
            initial_raw: values,
            raw_history: Vec::new(),
            created_at_ms: at_ms,
            updated_at_ms: at_ms,
            last_access: Instant::now(),
        };
        Ok((record, warnings))
    }

    /// Creates a session with the given units known up front.
    pub fn create(&self, request: CreateRequest) -> Result<(SessionView, Vec<ClampWarning>), ApiError> {
        let values: BTreeMap<String, Vec<f64>> =
            request.values.into_iter().map(|(k, v)| (k, v.into_vec())).collect();
        let id = uuid::Uuid::new_v4().simple().to_string();
        let at_ms = now_ms();
        let (record, warnings) = self.build_record(id.clone(), values.clone(), at_ms)?;
        let view = self.view(&record);
        let mut sessions = self.inner.sessions.write().unwrap_or_else(|p| p.into_inner());
        sessions.insert(id.clone(), Arc::new(Mutex::new(record)));
        self.log(&Event::Create {
            session: id,
            at_ms,
            values,
        });
        Ok((view, warnings))
    }

    pub fn state(&self, id: &str) -> Result<SessionView, ApiError> {
        let entry = self.get(id)?;
        let mut r = lock(&entry);
        r.last_access = Instant::now();
        Ok(self.view(&r))
    }

    pub fn suggest(&self, id: &str) -> Result<(Suggestion, Prediction), ApiError> {
        let entry = self.get(id)?;
        let mut r = lock(&entry);
        r.last_access = Instant::now();
        Ok((self.suggestion(&r.session)?, self.prediction(&r.session)))
    }

    /// Reveals one unit and advances the session by one step.
    pub fn acquire(&self, id: &str, request: FeatureRequest) -> Result<AcquireOutcome, ApiError> {
        let (name, raw) = match request {
            FeatureRequest {
                id: Some(name),
                value: Some(v),
                group: None,
                values: None,
            } => (name, vec![v]),
            FeatureRequest {
                id: None,
                value: None,
                group: Some(name),
                values: Some(vs),
            } => (name, vs),
            _ => {
                return Err(ApiError::validation(
                    "body must be {\"id\", \"value\"} or {\"group\", \"values\"}",
                ))
            }
        };
        let entry = self.get(id)?;
        let mut r = lock(&entry);
        let unit = self.unit_id(&name)?;
        let bundle = &self.inner.bundle;
        if r.session.is_unit_known(bundle.units().get(unit).expect("resolved unit")) {
            return Err(ApiError::conflict(format!("{name} is already known in session {id}")));
        }
        let mut warnings = Vec::new();
        let normalized = self.normalize(unit, &raw, &mut warnings)?;
        let score = score_features(bundle, &r.session)
            .ok()
            .and_then(|scores| scores.into_iter().find(|s| s.unit == unit))
            .map(|s| s.score);
        r.session.acquire(bundle, unit, &normalized, score)?;
        r.raw_history.push(raw.clone());
        let at_ms = now_ms();
        r.updated_at_ms = at_ms;
        r.last_access = Instant::now();
        self.log(&Event::Acquire {
            session: id.to_string(),
            at_ms,
            unit: name.clone(),
            values: raw,
        });
        let cost = bundle.units().get(unit).map_or(0.0, |u| u.cost);
        Ok(AcquireOutcome {
            session: id.to_string(),
            acquired: name,
            step: r.session.step(),
            cost,
            total_cost: r.session.total_cost(),
            prediction: self.prediction(&r.session),
            suggestion: self.suggestion(&r.session)?,
            warnings,
        })
    }

    /// Removes a session; returns whether it existed.
    pub fn delete(&self, id: &str) -> bool {
        let removed = self
            .inner
            .sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .remove(id)
            .is_some();
        if removed {
            self.log(&Event::Delete {
                session: id.to_string(),
                at_ms: now_ms(),
            });
        }
        removed
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        let entries: Vec<_> = self
            .inner
            .sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .values()
            .cloned()
            .collect();
        let mut out: Vec<SessionSummary> = entries
            .iter()
            .map(|e| {
                let r = lock(e);
                SessionSummary {
                    id: r.id.clone(),
                    step: r.session.step(),
                    total_cost: r.session.total_cost(),
                    created_at_ms: r.created_at_ms,
                    updated_at_ms: r.updated_at_ms,
                }
            })
            .collect();
        out.sort_by(|a, b| a.created_at_ms.cmp(&b.created_at_ms).then_with(|| a.id.cmp(&b.id)));
        out
    }

    /// Drops sessions untouched for longer than `idle`; returns how many.
    /// Sessions busy with a request are skipped.
    pub fn evict_idle(&self, idle: Duration) -> usize {
        let mut sessions = self.inner.sessions.write().unwrap_or_else(|p| p.into_inner());
        let stale: Vec<String> = sessions
            .iter()
            .filter(|(_, e)| e.try_lock().is_ok_and(|r| r.last_access.elapsed() > idle))
            .map(|(id, _)| id.clone())
            .collect();
        for id in &stale {
            sessions.remove(id);
        }
        drop(sessions);
        for id in &stale {
            self.log(&Event::Delete {
                session: id.clone(),
                at_ms: now_ms(),
            });
        }
        stale.len()
    }

    /// Rebuilds sessions from an event log. Replaying the recorded raw
    /// values through the same bundle reproduces predictions and costs.
    fn replay_log(&self, path: &Path) -> Result<usize, CliError> {
        let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut sessions = HashMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: Event = serde_json::from_str(&line)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
            let bad = |e: ApiError| CliError::Config(format!("{}:{}: {}", path.display(), n + 1, e.message));
            match event {
                Event::Create { session, at_ms, values } => {
                    let (record, _) = self.build_record(session.clone(), values, at_ms).map_err(bad)?;
                    sessions.insert(session, record);
                }
                Event::Acquire {
                    session,
                    at_ms,
                    unit,
                    values,
                } => {
                    let id = self.unit_id(&unit).map_err(bad)?;
                    let normalized = self.normalize(id, &values, &mut Vec::new()).map_err(bad)?;
                    let r = sessions
                        .get_mut(&session)
                        .ok_or_else(|| bad(ApiError::session_missing(&session)))?;
                    let score = score_features(&self.inner.bundle, &r.session)
                        .ok()
                        .and_then(|s| s.into_iter().find(|s| s.unit == id))
                        .map(|s| s.score);
                    r.session
                        .acquire(&self.inner.bundle, id, &normalized, score)
                        .map_err(|e| bad(e.into()))?;
                    r.raw_history.push(values);
                    r.updated_at_ms = at_ms;
                }
                Event::Delete { session, .. } => {
                    sessions.remove(&session);
                }
            }
        }
        let count = sessions.len();
        let mut live = self.inner.sessions.write().unwrap_or_else(|p| p.into_inner());
        for (id, record) in sessions {
            live.insert(id, Arc::new(Mutex::new(record)));
        }
        Ok(count)
    }

    fn model_info(&self) -> Value {
        let b = &self.inner.bundle;
        let m = &b.manifest;
        json!({
            "fingerprint": self.inner.fingerprint,
            "dataset_fingerprint": m.dataset_fingerprint,
            "architecture": m.architecture,
            "corruption": m.corruption,
            "classes": m.class_names,
            "features": m.feature_names.iter().enumerate().map(|(j, name)| json!({
                "name": name,
                "min": m.normalization.min[j],
                "max": m.normalization.max[j],
            })).collect::<Vec<_>>(),
            "units": b.units().iter().map(|u| json!({
                "id": u.name,
                "members": u.members.iter().map(|&j| m.feature_names[j].clone()).collect::<Vec<_>>(),
                "cost": u.cost,
            })).collect::<Vec<_>>(),
            "total_cost": b.units().total_cost(),
            "normalization_computed_on": m.normalization.computed_on,
            "max_suggestions": MAX_SUGGESTIONS,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AcquireOutcome {
    pub session: String,
    pub acquired: String,
    pub step: usize,
    pub cost: f64,
    pub total_cost: f64,
    pub prediction: Prediction,
    pub suggestion: Suggestion,
    pub warnings: Vec<ClampWarning>,
}

/// Runs CPU-bound session work off the async workers.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("malformed request body: {e}")))
}

async fn health(State(state): State<AppState>) -> Response {
    reply(
        StatusCode::OK,
        &json!({"status": "ok", "sessions": state.session_count(), "model_fingerprint": state.inner.fingerprint}),
    )
}

async fn model(State(state): State<AppState>) -> Response {
    reply(StatusCode::OK, &state.model_info())
}

async fn list_sessions(State(state): State<AppState>) -> Response {
    let sessions = state.list();
    reply(StatusCode::OK, &json!({"count": sessions.len(), "sessions": sessions}))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: CreateRequest = parse_body(&body)?;
    let (view, warnings) = blocking(move || state.create(request)).await?;
    let mut value = serde_json::to_value(view).map_err(|e| ApiError::internal(e.to_string()))?;
    value["warnings"] = json!(warnings);
    Ok(reply(StatusCode::CREATED, &value))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    Ok(reply(StatusCode::OK, &state.state(&id)?))
}

async fn get_suggestion(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let (suggestion, prediction) = blocking(move || state.suggest(&id)).await?;
    let mut value = serde_json::to_value(suggestion).map_err(|e| ApiError::internal(e.to_string()))?;
    value["prediction"] = json!(prediction);
    Ok(reply(StatusCode::OK, &value))
}

async fn post_feature(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let request: FeatureRequest = parse_body(&body)?;
    let outcome = blocking(move || state.acquire(&id, request)).await?;
    Ok(reply(StatusCode::OK, &outcome))
}

async fn delete_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    let deleted = state.delete(&id);
    reply(StatusCode::OK, &json!({"id": id, "deleted": deleted}))
}

async fn no_route() -> ApiError {
    ApiError::not_found("no such endpoint")
}

async fn wrong_method() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/model", get(model))
        .route("/v1/sessions", get(list_sessions).post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/suggestion", get(get_suggestion))
        .route("/v1/sessions/{id}/features", axum::routing::post(post_feature))
        .fallback(no_route)
        .method_not_allowed_fallback(wrong_method)
        .with_state(state)
}

/// Periodically evicts idle sessions for as long as the runtime lives.
pub fn spawn_evictor(state: AppState) -> tokio::task::JoinHandle<()> {
    let idle = state.inner.idle_timeout;
    let period = (idle / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let evicted = state.evict_idle(idle);
            if evicted > 0 {
                info!(evicted, "evicted idle sessions");
            }
        }
    })
}

/// Serves until interrupted.
pub async fn serve(state: AppState, addr: SocketAddr) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::Io(format!("cannot bind {addr}: {e}")))?;
    info!("listening on http://{}", listener.local_addr()?);
    spawn_evictor(state.clone());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Io(e.to_string()))
}
