//! HTTP service for interactive preference elicitation.
//!
//! Sessions live in memory. Each owns a trajectory pool, a shuffled queue of
//! ordered pairs, the labels received so far and the models trained on them.
//! Requests on one session are serialized by its mutex.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nalgebra::{DMatrix, DVector};
use prefmpc_core::dataset::{generate_pool, LabeledPair, PreferenceDataset, TrajectoryPool};
use prefmpc_core::learner::{pref_prob, TrainedModel};
use prefmpc_core::rng::{self, domain};
use prefmpc_core::{LinearSystem, Preference};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::experiment::{
    init_sampler, initial_state, mpc_spec, random_weight, train_surrogate, ExperimentConfig, Scenario,
};
use crate::formats::{matrix_rows, status_name, DatasetBundle, DatasetFile, TrajectoryDoc};
use crate::simulation::{simulate, SimulationDoc};

pub const ORACLE_MODEL: &str = "oracle";
pub const RANDOM_MODEL: &str = "random";

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        use prefmpc_core::Error as Core;
        let status = match &e {
            Error::Config(_) | Error::Format(_) | Error::Parse { .. } | Error::UnsupportedVersion { .. } => {
                StatusCode::BAD_REQUEST
            }
            Error::Core(
                Core::InvalidArgument(_)
                | Core::DimensionMismatch { .. }
                | Core::NotPositiveDefinite(_)
                | Core::InsufficientPairs { .. }
                | Core::Generation(_),
            ) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<prefmpc_core::Error> for ApiError {
    fn from(e: prefmpc_core::Error) -> Self {
        Error::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct StoredModel {
    model: TrainedModel,
    train_size: usize,
    holdout_size: usize,
}

pub struct Session {
    id: u64,
    config: ExperimentConfig,
    system: LinearSystem,
    pool: Arc<TrajectoryPool>,
    /// Every ordered pair, in the order they are offered.
    queue: Vec<(usize, usize)>,
    /// Pairs `0..=cursor` have been offered.
    cursor: usize,
    /// Pair id -> position in `labels`.
    labeled: HashMap<usize, usize>,
    labels: Vec<LabeledPair>,
    models: BTreeMap<u64, StoredModel>,
    next_model: u64,
    random_draws: usize,
    default_x0_draws: usize,
}

impl Session {
    fn new(id: u64, config: ExperimentConfig) -> crate::Result<Self> {
        config.validate_setup()?;
        let system = config.system()?;
        let pool = Arc::new(generate_pool(&system, &config.gen_config())?);
        let n = pool.len();
        let mut queue: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        let mut r = rng::stream(config.seed, domain::SESSION, 0);
        for k in (1..queue.len()).rev() {
            let pick = r.random_range(0..=k);
            queue.swap(k, pick);
        }
        Ok(Self {
            id,
            config,
            system,
            pool,
            queue,
            cursor: 0,
            labeled: HashMap::new(),
            labels: Vec::new(),
            models: BTreeMap::new(),
            next_model: 1,
            random_draws: 0,
            default_x0_draws: 0,
        })
    }

    fn pending(&self) -> Option<usize> {
        (self.cursor < self.queue.len()).then_some(self.cursor)
    }

    fn dataset(&self) -> crate::Result<PreferenceDataset> {
        Ok(PreferenceDataset::new(self.pool.clone(), self.labels.clone())?)
    }

    /// The labels as a dataset file, loadable by the command-line tools.
    pub fn snapshot(&self) -> crate::Result<DatasetFile> {
        Ok(DatasetFile::from_bundle(&DatasetBundle {
            system: self.system.clone(),
            config: self.config.gen_config(),
            oracle: None,
            dataset: self.dataset()?,
        }))
    }

    fn model(&self, id: &str) -> Result<&StoredModel, ApiError> {
        id.parse::<u64>()
            .ok()
            .and_then(|k| self.models.get(&k))
            .ok_or_else(|| ApiError::not_found(format!("unknown model {id:?}")))
    }

    fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id,
            scenario: self.config.scenario,
            seed: self.config.seed,
            pool_size: self.pool.len(),
            horizon: self.pool.horizon(),
            pairs_total: self.queue.len(),
            labels: self.labels.len(),
            pending_pair: self.pending(),
            exhausted: self.pending().is_none(),
            models: self
                .models
                .iter()
                .map(|(k, m)| ModelSummary {
                    model_id: k.to_string(),
                    train_acc: m.model.train_accuracy,
                    holdout_acc: m.model.test_accuracy,
                    train_size: m.train_size,
                    holdout_size: m.holdout_size,
                })
                .collect(),
        }
    }
}

pub struct AppState {
    sessions: RwLock<HashMap<u64, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    default_seed: u64,
    /// Configuration overrides applied to every new session before its own.
    defaults: Value,
}

impl AppState {
    pub fn new(default_seed: u64, defaults: Value) -> Self {
        Self {
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            default_seed,
            defaults,
        }
    }

    fn session(&self, id: u64) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session table poisoned"))?
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))
    }
}

fn with_session<T>(
    state: &AppState,
    id: u64,
    f: impl FnOnce(&mut Session) -> Result<T, ApiError>,
) -> Result<T, ApiError> {
    let session = state.session(id)?;
    let mut guard = session
        .lock()
        .map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session poisoned"))?;
    f(&mut guard)
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("request body: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    /// Overrides of the scenario defaults, as in the CLI configuration file.
    pub config: Option<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: u64,
    pub pool_size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub train_acc: f64,
    pub holdout_acc: Option<f64>,
    pub train_size: usize,
    pub holdout_size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: u64,
    pub scenario: Scenario,
    pub seed: u64,
    pub pool_size: usize,
    pub horizon: usize,
    pub pairs_total: usize,
    pub labels: usize,
    pub pending_pair: Option<usize>,
    pub exhausted: bool,
    pub models: Vec<ModelSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextPair {
    Pending {
        pair_id: usize,
        i: usize,
        j: usize,
        a: TrajectoryDoc,
        b: TrajectoryDoc,
    },
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    First,
    Second,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submit {
    pub pair_id: usize,
    pub choice: Choice,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Submitted {
    pub labels: usize,
    pub remaining: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRequest {
    /// Fields of the training settings to change for this run.
    pub overrides: Option<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResponse {
    pub model_id: String,
    pub train_acc: f64,
    pub holdout_acc: Option<f64>,
    pub train_size: usize,
    pub holdout_size: usize,
    pub theta: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub final_loss: f64,
    pub restart_index: usize,
    pub lbfgs_status: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    /// A trained model id, `oracle` or `random`.
    pub model_id: String,
    /// Defaults to the next seeded draw of the session.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub model_id: String,
    #[serde(flatten)]
    pub simulation: SimulationDoc,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbRequest {
    pub model_id: String,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProbResponse {
    /// Probability that trajectory `i` is preferred over `j`.
    pub p: f64,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Created> {
    let req: CreateSession = parse_body(&body)?;
    let mut overrides = state.defaults.clone();
    if let Some(c) = &req.config {
        if !c.is_object() {
            return Err(ApiError::bad_request("config must be an object"));
        }
        merge_into(&mut overrides, c);
    }
    let scenario = match req.scenario {
        Some(s) => s,
        None => match overrides.get("scenario") {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| ApiError::bad_request(format!("scenario: {e}")))?,
            None => Scenario::Quadratic,
        },
    };
    if let Value::Object(map) = &mut overrides {
        map.remove("scenario");
        if let Some(seed) = req.seed {
            map.insert("seed".into(), seed.into());
        }
    }
    let config = ExperimentConfig::with_overrides(scenario, state.default_seed, &overrides)?;
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let session = Session::new(id, config)?;
    let pool_size = session.pool.len();
    state
        .sessions
        .write()
        .map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session table poisoned"))?
        .insert(id, Arc::new(Mutex::new(session)));
    Ok(Json(Created { id, pool_size }))
}

fn merge_into(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_into(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<SessionSummary> {
    with_session(&state, id, |s| Ok(Json(s.summary())))
}

async fn next_pair(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<NextPair> {
    with_session(&state, id, |s| {
        Ok(Json(match s.pending() {
            None => NextPair::Exhausted,
            Some(pair_id) => {
                let (i, j) = s.queue[pair_id];
                let t = s.pool.trajectories();
                NextPair::Pending {
                    pair_id,
                    i,
                    j,
                    a: (&t[i]).into(),
                    b: (&t[j]).into(),
                }
            }
        }))
    })
}

async fn submit_preference(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Bytes,
) -> ApiResult<Submitted> {
    let req: Submit = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("request body: {e}")))?;
    with_session(&state, id, |s| {
        if s.labeled.contains_key(&req.pair_id) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("pair {} is already labeled", req.pair_id),
            ));
        }
        if s.pending() != Some(req.pair_id) {
            return Err(ApiError::not_found(format!("pair {} has not been offered", req.pair_id)));
        }
        let (i, j) = s.queue[req.pair_id];
        s.labeled.insert(req.pair_id, s.labels.len());
        s.labels.push(LabeledPair {
            i,
            j,
            p: Preference::first_if(req.choice == Choice::First),
        });
        s.cursor += 1;
        Ok(Json(Submitted {
            labels: s.labels.len(),
            remaining: s.queue.len() - s.labels.len(),
        }))
    })
}

async fn train(State(state): State<Arc<AppState>>, Path(id): Path<u64>, body: Bytes) -> ApiResult<TrainResponse> {
    let req: TrainRequest = parse_body(&body)?;
    with_session(&state, id, |s| {
        let mut cfg = s.config.clone();
        if let Some(o) = &req.overrides {
            let mut train = serde_json::to_value(cfg.train).map_err(|e| ApiError::bad_request(e.to_string()))?;
            merge_into(&mut train, o);
            cfg.train =
                serde_json::from_value(train).map_err(|e| ApiError::bad_request(format!("overrides: {e}")))?;
        }
        cfg.train_config().validate()?;
        let dataset = s.dataset()?;
        let n = dataset.len();
        let sampler = init_sampler(&cfg, s.system.nx(), s.system.nu());
        let model = train_surrogate(&dataset, None, &cfg.train_config(), &sampler)?;
        let holdout_size = (n / 5).max(1);
        let model_id = s.next_model;
        s.next_model += 1;
        let (q, r) = model.theta.matrices();
        let response = TrainResponse {
            model_id: model_id.to_string(),
            train_acc: model.train_accuracy,
            holdout_acc: model.test_accuracy,
            train_size: n - holdout_size,
            holdout_size,
            theta: model.theta.as_slice().to_vec(),
            q: matrix_rows(&q),
            r: matrix_rows(&r),
            final_loss: model.final_loss,
            restart_index: model.restart_index,
            lbfgs_status: status_name(model.lbfgs_status).into(),
        };
        s.models.insert(
            model_id,
            StoredModel {
                model,
                train_size: n - holdout_size,
                holdout_size,
            },
        );
        Ok(Json(response))
    })
}

async fn simulate_route(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Bytes,
) -> ApiResult<SimulateResponse> {
    let req: SimulateRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("request body: {e}")))?;
    with_session(&state, id, |s| {
        let (nx, nu) = (s.system.nx(), s.system.nu());
        let x0 = match &req.x0 {
            Some(v) => {
                if v.len() != nx {
                    return Err(ApiError::bad_request(format!("x0 needs {nx} entries, got {}", v.len())));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(ApiError::bad_request("x0 must be finite"));
                }
                DVector::from_column_slice(v)
            }
            None => {
                s.default_x0_draws += 1;
                initial_state(&s.config, nx, s.default_x0_draws - 1)
            }
        };
        let (q, r): (DMatrix<f64>, DMatrix<f64>) = match req.model_id.as_str() {
            ORACLE_MODEL => s.config.oracle_weights(),
            RANDOM_MODEL => {
                s.random_draws += 1;
                random_weight(&s.config, nx, nu, s.random_draws - 1)?
            }
            other => s.model(other)?.model.theta.matrices(),
        };
        let spec = mpc_spec(&s.config, &s.system, q, r)?;
        let simulation = simulate(&spec, &x0, s.config.t_sim, s.config.eps, Some(&s.config.oracle_weights()))?;
        Ok(Json(SimulateResponse {
            model_id: req.model_id.clone(),
            simulation,
        }))
    })
}

async fn prob(State(state): State<Arc<AppState>>, Path(id): Path<u64>, body: Bytes) -> ApiResult<ProbResponse> {
    let req: ProbRequest = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("request body: {e}")))?;
    with_session(&state, id, |s| {
        let model = s.model(&req.model_id)?;
        let t = s.pool.trajectories();
        let (a, b) = match (t.get(req.i), t.get(req.j)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(ApiError::bad_request(format!("pair ({}, {}) is outside the pool", req.i, req.j))),
        };
        Ok(Json(ProbResponse {
            p: pref_prob(a, b, &model.model.theta)?,
        }))
    })
}

async fn snapshot(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<DatasetFile> {
    with_session(&state, id, |s| Ok(Json(s.snapshot()?)))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/pairs/next", get(next_pair))
        .route("/sessions/{id}/preferences", post(submit_preference))
        .route("/sessions/{id}/train", post(train))
        .route("/sessions/{id}/simulate", post(simulate_route))
        .route("/sessions/{id}/prob", post(prob))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .with_state(state)
}

pub async fn serve(host: &str, port: u16, default_seed: u64, defaults: Value) -> crate::Result<()> {
    let addr = format!("{host}:{port}");
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| Error::io(addr.clone(), e))?;
    eprintln!("listening on http://{addr}");
    let app = router(Arc::new(AppState::new(default_seed, defaults)));
    axum::serve(listener, app).await.map_err(|e| Error::io(addr, e))
}
