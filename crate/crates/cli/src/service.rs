//! Session-scoped HTTP API for the wizard. Handlers are thin: each one parses the request,
//! calls the same library function the command line uses and returns its canonical JSON.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use hyperscen_core::pipeline::{materialize_all, optimize_scenario, what_if, OptimizeOptions, PipelineError};
use hyperscen_core::profiling::{generate_synthetic_trace, ingest_trace, summarize_profile, ProfileVector, SynthSpec};
use hyperscen_core::scenario::{emit_launch_script, read_scenario, to_canonical_json};
use hyperscen_core::types::is_valid_vm_id;
use hyperscen_core::{
    default_quanta, parse_board_config, AllocError, AllocationVector, HardwareCapacity, SearchResult, VmDefinition,
    WorkloadClass,
};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::cors::{AllowOrigin, CorsLayer};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub board: Option<HardwareCapacity>,
    pub vm_specs: Vec<VmDefinition>,
    /// Uploaded profiles by vm_id.
    pub profiles: BTreeMap<String, ProfileVector>,
    pub last_result: Option<SearchResult>,
    /// Canonical JSON of the latest scenario.
    pub scenario: Option<String>,
}

type Shared = Arc<Mutex<SessionState>>;

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Shared>>,
    state_dir: Option<PathBuf>,
}

impl AppState {
    /// Restores every snapshot found in `dir` and keeps persisting there.
    pub fn with_state_dir(dir: PathBuf) -> std::io::Result<AppState> {
        std::fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let text = std::fs::read_to_string(&path)?;
                let s: SessionState = serde_json::from_str(&text)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
                sessions.insert(s.session_id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(AppState {
            sessions: RwLock::new(sessions),
            state_dir: Some(dir),
        })
    }

    fn session(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
    }

    fn persist(&self, s: &SessionState) -> Result<(), ApiError> {
        let Some(dir) = &self.state_dir else {
            return Ok(());
        };
        let text = serde_json::to_string_pretty(s).map_err(ApiError::internal)?;
        let tmp = dir.join(format!("{}.json.tmp", s.session_id));
        std::fs::write(&tmp, text).map_err(ApiError::internal)?;
        std::fs::rename(&tmp, dir.join(format!("{}.json", s.session_id))).map_err(ApiError::internal)
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad(message: impl ToString) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message.to_string())
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, message)
    }

    fn internal(e: impl ToString) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::NoVms | PipelineError::MissingProfile(_) => ApiError::conflict(e.to_string()),
            PipelineError::Alloc(AllocError::Misaligned { .. }) => ApiError::internal(e),
            _ => ApiError::bad(e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.message }).to_string();
        (self.status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

fn json_response(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn canonical<T: Serialize>(v: &T) -> Result<Response, ApiError> {
    to_canonical_json(v).map(json_response).map_err(ApiError::internal)
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &str) -> Result<T, ApiError> {
    serde_json::from_str(body).map_err(|e| ApiError::bad(format!("invalid JSON body: {e}")))
}

fn require_board(s: &SessionState) -> Result<HardwareCapacity, ApiError> {
    s.board.ok_or_else(|| ApiError::conflict("upload a board first"))
}

/// Origins of a wizard served from this machine.
fn local_origin(origin: &HeaderValue) -> bool {
    let Ok(o) = origin.to_str() else {
        return false;
    };
    let rest = o.strip_prefix("http://").or_else(|| o.strip_prefix("https://")).unwrap_or("");
    let host = rest.rsplit_once(':').map_or(rest, |(h, port)| {
        if port.chars().all(|c| c.is_ascii_digit()) {
            h
        } else {
            rest
        }
    });
    matches!(host, "localhost" | "127.0.0.1" | "[::1]")
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|o, _| local_origin(o)))
        .allow_methods(tower_http::cors::Any)
        .allow_headers(tower_http::cors::Any);
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/board", put(put_board))
        .route("/sessions/{id}/vms", put(put_vms))
        .route("/sessions/{id}/profiles/{vm_id}", post(post_profile))
        .route("/sessions/{id}/optimize", post(post_optimize))
        .route("/sessions/{id}/whatif", post(post_whatif))
        .route("/sessions/{id}/scenario", get(get_scenario))
        .route("/sessions/{id}/launch-script", get(get_launch_script))
        .layer(cors)
        .with_state(Arc::new(state))
}

type App = State<Arc<AppState>>;

async fn create_session(State(app): App) -> Result<Response, ApiError> {
    let id = uuid::Uuid::new_v4().to_string();
    let s = SessionState {
        session_id: id.clone(),
        ..SessionState::default()
    };
    app.persist(&s)?;
    app.sessions
        .write()
        .expect("session map poisoned")
        .insert(id.clone(), Arc::new(Mutex::new(s)));
    let body = serde_json::json!({ "session_id": id }).to_string();
    Ok((StatusCode::CREATED, [(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn put_board(State(app): App, Path(id): Path<String>, body: String) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let cap = parse_board_config(&body).map_err(ApiError::bad)?;
    let mut s = session.lock().await;
    s.board = Some(cap);
    app.persist(&s)?;
    canonical(&cap)
}

async fn put_vms(State(app): App, Path(id): Path<String>, body: String) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let defs: Vec<VmDefinition> = parse_json(&body)?;
    if defs.is_empty() {
        return Err(ApiError::bad("at least one VM is required"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for d in &defs {
        if !is_valid_vm_id(&d.vm_id) {
            return Err(ApiError::bad(format!("invalid vm_id `{}`", d.vm_id)));
        }
        if !seen.insert(d.vm_id.as_str()) {
            return Err(ApiError::bad(format!("duplicate vm_id `{}`", d.vm_id)));
        }
        if d.workload_class.is_none() {
            return Err(ApiError::bad(format!("VM `{}` needs a workload_class", d.vm_id)));
        }
    }
    let mut s = session.lock().await;
    // catch spec errors early where everything needed is already there
    if let Some(cap) = s.board {
        let q = default_quanta(&cap);
        for d in &defs {
            if let Some(p) = s.profiles.get(&d.vm_id).or(d.profile.as_ref()) {
                hyperscen_core::materialize(d, p, &cap, &q).map_err(ApiError::bad)?;
            }
        }
    }
    s.vm_specs = defs;
    app.persist(&s)?;
    canonical(&s.vm_specs)
}

#[derive(Debug, Default, Deserialize)]
struct ProfileQuery {
    /// Allocation the trace ran under, `c_p,c_e,mem_mib,gpu_slices`.
    profiled_on: Option<String>,
    /// Generate a synthetic trace of this class instead of reading the body.
    synthetic: Option<WorkloadClass>,
    size: Option<f64>,
    seed: Option<u64>,
}

fn parse_allocation(s: &str) -> Result<AllocationVector, ApiError> {
    let parts: Vec<u64> = s
        .split(',')
        .map(|p| p.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|_| ApiError::bad("profiled_on must be four non-negative integers"))?;
    let arr: [u64; 4] = parts
        .try_into()
        .map_err(|_| ApiError::bad("profiled_on must be four non-negative integers"))?;
    Ok(AllocationVector::from_array(arr))
}

async fn post_profile(
    State(app): App,
    Path((id, vm_id)): Path<(String, String)>,
    Query(q): Query<ProfileQuery>,
    body: String,
) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    if !is_valid_vm_id(&vm_id) {
        return Err(ApiError::bad(format!("invalid vm_id `{vm_id}`")));
    }
    let trace = match q.synthetic {
        Some(class) => {
            let size = q.size.unwrap_or(1.0);
            if !(size.is_finite() && size > 0.0) {
                return Err(ApiError::bad("size must be positive"));
            }
            generate_synthetic_trace(&SynthSpec::new(class, size, q.seed.unwrap_or(0)))
        }
        None => ingest_trace(&body).map_err(ApiError::bad)?,
    };
    let mut s = session.lock().await;
    if !s.vm_specs.iter().any(|d| d.vm_id == vm_id) {
        return Err(ApiError::bad(format!("no VM `{vm_id}` in this session")));
    }
    let cap = require_board(&s)?;
    let on = match &q.profiled_on {
        Some(t) => parse_allocation(t)?,
        None => cap.as_allocation(),
    };
    let profile = summarize_profile(&trace, &on, &default_quanta(&cap)).map_err(ApiError::bad)?;
    let out = canonical(&profile)?;
    s.profiles.insert(vm_id, profile);
    app.persist(&s)?;
    Ok(out)
}

async fn post_optimize(State(app): App, Path(id): Path<String>, body: String) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let opts: OptimizeOptions = if body.trim().is_empty() {
        OptimizeOptions::default()
    } else {
        parse_json(&body)?
    };
    let mut s = session.clone().lock_owned().await;
    let cap = require_board(&s)?;
    // search is CPU bound; the session stays locked until it finishes
    let (s, text) = tokio::task::spawn_blocking(move || {
        let specs = materialize_all(&s.vm_specs, &s.profiles, &cap)?;
        let (result, _, text) = optimize_scenario(&specs, &cap, &opts)?;
        s.last_result = Some(result);
        s.scenario = Some(text.clone());
        Ok::<_, ApiError>((s, text))
    })
    .await
    .map_err(ApiError::internal)??;
    app.persist(&s)?;
    Ok(json_response(text))
}

async fn post_whatif(State(app): App, Path(id): Path<String>, body: String) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let allocations: Vec<AllocationVector> = parse_json(&body)?;
    let s = session.lock().await;
    let cap = require_board(&s)?;
    let specs = materialize_all(&s.vm_specs, &s.profiles, &cap)?;
    canonical(&what_if(&specs, &cap, &allocations)?)
}

fn latest_scenario(s: &SessionState) -> Result<String, ApiError> {
    s.scenario.clone().ok_or_else(|| ApiError::conflict("no scenario yet; optimize first"))
}

async fn get_scenario(State(app): App, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(json_response(latest_scenario(&s)?))
}

async fn get_launch_script(State(app): App, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    let doc = read_scenario(&latest_scenario(&s)?).map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "text/x-shellscript")], emit_launch_script(&doc)).into_response())
}
