//! HTTP front of the IR/CR protocol. Each session sits behind its own lock so
//! requests for one participant are handled strictly in order.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sonocl::session::{parameter_from_code, stimulus_code, ResponseInput, Session, SessionConfig, SessionError, TlxInput};
use sonocl::stimulus::{blur_image, encode_pgm, encode_wav, starfield, synthesize, DEFAULT_SAMPLE_RATE, STIMULUS_DURATION_S};
use sonocl::Parameter;

use crate::commands::IMAGE_SIZE;
use crate::config::Config;
use crate::ServeArgs;

/// Millisecond time source. Tests drive a manual one.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock(Instant);

impl SystemClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

#[derive(Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
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

#[derive(Debug, Clone)]
pub struct StimulusSettings {
    pub sample_rate: u32,
    pub image_size: usize,
    pub seed: u64,
}

impl Default for StimulusSettings {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            image_size: IMAGE_SIZE,
            seed: 0,
        }
    }
}

/// Encoded stimulus files keyed by URL tail, e.g. `type2/7.wav`.
type StimulusFiles = HashMap<String, Bytes>;

fn render_stimuli(s: &StimulusSettings) -> sonocl::Result<StimulusFiles> {
    let mut files = HashMap::new();
    for p in Parameter::ALL {
        let code = stimulus_code(p);
        let base = p.has_image().then(|| starfield(s.image_size, s.image_size, s.seed));
        for level in 1..=10u8 {
            if let Some(audio) = synthesize(p, level, s.sample_rate, STIMULUS_DURATION_S, s.seed)? {
                files.insert(format!("{code}/{level}.wav"), Bytes::from(encode_wav(&audio)));
            }
            if let Some(img) = &base {
                files.insert(format!("{code}/{level}.pgm"), Bytes::from(encode_pgm(&blur_image(img, level)?)));
            }
        }
    }
    Ok(files)
}

pub struct AppState {
    clock: Arc<dyn Clock>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    settings: StimulusSettings,
    stimuli: OnceLock<StimulusFiles>,
}

impl AppState {
    pub fn new(clock: Arc<dyn Clock>, settings: StimulusSettings) -> Arc<Self> {
        Arc::new(Self {
            clock,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            settings,
            stimuli: OnceLock::new(),
        })
    }

    fn stimuli(&self) -> Result<&StimulusFiles, ApiError> {
        if let Some(f) = self.stimuli.get() {
            return Ok(f);
        }
        let files = render_stimuli(&self.settings).map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(self.stimuli.get_or_init(|| files))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn internal(message: String) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Conflict(_) => StatusCode::CONFLICT,
            SessionError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

// Any body that does not parse into the expected shape is a 422, whatever
// the content type header says.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/next", get(next_trial))
        .route("/api/session/{id}/response", post(post_response))
        .route("/api/session/{id}/tlx", post(post_tlx))
        .route("/api/session/{id}/export", get(export))
        .route("/stimuli/{code}/{file}", get(stimulus))
        .with_state(state)
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let config: SessionConfig = parse_body(&body)?;
    let session = Session::new(config, app.clock.now_ms())?;
    app.stimuli()?;
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::SeqCst));
    let body = serde_json::json!({
        "id": id,
        "participant": session.config.participant,
        "kind": session.config.kind,
        "practice": session.config.practice,
    });
    app.sessions
        .lock()
        .expect("session table lock")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn next_trial(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let mut s = session.lock().expect("session lock");
    let next = s.next(app.clock.now_ms())?;
    Ok(Json(next).into_response())
}

async fn post_response(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let input: ResponseInput = parse_body(&body)?;
    let mut s = session.lock().expect("session lock");
    let log = s.respond(&input, app.clock.now_ms())?;
    Ok(Json(serde_json::json!({
        "trial_id": log.trial_id,
        "recorded": true,
        "timed_out": log.timed_out,
    }))
    .into_response())
}

async fn post_tlx(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let input: TlxInput = parse_body(&body)?;
    let mut s = session.lock().expect("session lock");
    let rating = s.submit_tlx(&input)?;
    Ok(Json(serde_json::json!({
        "sub_session": rating.sub_session,
        "recorded": true,
    }))
    .into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let bundle = session.lock().expect("session lock").export()?;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(bundle).into_response()),
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv")], bundle.markers_csv).into_response()),
        Some(other) => Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("unknown export format {other:?}"),
        )),
    }
}

async fn stimulus(
    State(app): State<Arc<AppState>>,
    Path((code, file)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let missing = || ApiError::new(StatusCode::NOT_FOUND, format!("no stimulus {code}/{file}"));
    if parameter_from_code(&code).is_none() {
        return Err(missing());
    }
    let bytes = app.stimuli()?.get(&format!("{code}/{file}")).cloned().ok_or_else(missing)?;
    let mime = if file.ends_with(".wav") {
        "audio/wav"
    } else {
        "image/x-portable-graymap"
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

pub fn serve_blocking(args: ServeArgs, config: &Config) -> anyhow::Result<()> {
    let settings = StimulusSettings {
        sample_rate: args.sample_rate.or(config.sample_rate).unwrap_or(DEFAULT_SAMPLE_RATE),
        image_size: config.image_size.unwrap_or(IMAGE_SIZE),
        seed: args.seed.or(config.seed).unwrap_or(0),
    };
    let state = AppState::new(Arc::new(SystemClock::new()), settings);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.addr).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}
