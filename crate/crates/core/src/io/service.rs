//! JSON-over-HTTP service. Field-by-field schema in `docs/http-api.md`.
//!
//! The registry holds the models loaded at startup plus any variants created
//! through `POST /api/intervene`. Variant ids are derived from the model
//! content, so replaying the same requests against a fresh service yields
//! the same ids and responses.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::folk::FolkTheory;
use crate::graph::{posterior, Assignment, CptDef, EdgeDef, Network, NodeDef};
use crate::intervention::{sweep_interventions, Intervention, InterventionReport, SimSettings};
use crate::io::serialize_model;
use crate::sim::{model_hash, simulate_population, SuspicionStats, WorldModel};

/// Upper bound on episodes per request.
pub const MAX_EPISODES: u64 = 5_000_000;

#[derive(Debug, Default)]
pub struct Registry {
    models: RwLock<BTreeMap<String, Network>>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    pub fn insert(&self, name: &str, network: Network) {
        self.models.write().expect("registry lock").insert(name.to_string(), network);
    }

    pub fn get(&self, name: &str) -> Option<Network> {
        self.models.read().expect("registry lock").get(name).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.models.read().expect("registry lock").keys().cloned().collect()
    }
}

pub type AppState = Arc<Registry>;

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelDocument {
    pub name: String,
    pub model_name: String,
    pub sha256: String,
    pub nodes: Vec<NodeDef>,
    pub edges: Vec<EdgeDef>,
    pub cpts: Vec<CptDef>,
    pub topo_order: Vec<String>,
    pub text: String,
}

impl ModelDocument {
    pub fn new(name: &str, net: &Network) -> ModelDocument {
        let spec = net.spec().canonical();
        ModelDocument {
            name: name.to_string(),
            model_name: spec.name.clone(),
            sha256: model_hash(&spec),
            text: serialize_model(&spec),
            topo_order: net.topo_ids().into_iter().map(String::from).collect(),
            nodes: spec.nodes,
            edges: spec.edges,
            cpts: spec.cpts,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct InferRequest {
    pub model: String,
    #[serde(default)]
    pub evidence: Assignment,
    pub query: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InferResponse {
    pub model: String,
    pub query: String,
    pub states: Vec<String>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Deserialize)]
pub struct InterveneRequest {
    pub model: String,
    pub interventions: Vec<Intervention>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InterveneResponse {
    pub variant: String,
    pub base: String,
    pub sha256: String,
}

fn default_threshold() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
pub struct SimulateRequest {
    pub world: String,
    pub folk: String,
    pub n: u64,
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

#[derive(Debug, Deserialize)]
pub struct SweepRequest {
    pub world: String,
    pub folk: String,
    pub interventions: Vec<Intervention>,
    pub n: u64,
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> ApiError {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
    }
}

fn lookup(reg: &Registry, name: &str) -> Result<Network, ApiError> {
    reg.get(name).ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no model named `{name}`")))
}

fn check_n(n: u64) -> Result<(), ApiError> {
    if n > MAX_EPISODES {
        Err(ApiError(StatusCode::BAD_REQUEST, format!("n must be at most {MAX_EPISODES}")))
    } else {
        Ok(())
    }
}

async fn health(State(reg): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "models": reg.names() }))
}

async fn list_models(State(reg): State<AppState>) -> Json<Vec<String>> {
    Json(reg.names())
}

async fn get_model(State(reg): State<AppState>, Path(name): Path<String>) -> Result<Json<ModelDocument>, ApiError> {
    let net = lookup(&reg, &name)?;
    Ok(Json(ModelDocument::new(&name, &net)))
}

async fn infer(State(reg): State<AppState>, Json(req): Json<InferRequest>) -> Result<Json<InferResponse>, ApiError> {
    let net = lookup(&reg, &req.model)?;
    let d = posterior(&net, &req.evidence, &req.query).map_err(Error::from)?;
    Ok(Json(InferResponse { model: req.model, query: d.node, states: d.states, probs: d.probs }))
}

async fn intervene(
    State(reg): State<AppState>,
    Json(req): Json<InterveneRequest>,
) -> Result<Json<InterveneResponse>, ApiError> {
    let mut net = lookup(&reg, &req.model)?;
    for iv in &req.interventions {
        net = iv.apply_checked(&net)?;
    }
    let sha = model_hash(net.spec());
    let base = req.model.split('@').next().unwrap_or(&req.model).to_string();
    let variant = format!("{base}@{}", &sha[..16]);
    // The variant is fully built before it becomes visible.
    reg.insert(&variant, net);
    Ok(Json(InterveneResponse { variant, base, sha256: sha }))
}

fn models_for(reg: &Registry, world: &str, folk: &str) -> Result<(WorldModel, FolkTheory), ApiError> {
    let w = WorldModel::from_network(lookup(reg, world)?)?;
    let f = FolkTheory::from_network(lookup(reg, folk)?)?;
    Ok((w, f))
}

async fn simulate(
    State(reg): State<AppState>,
    Json(req): Json<SimulateRequest>,
) -> Result<Json<SuspicionStats>, ApiError> {
    check_n(req.n)?;
    let (w, f) = models_for(&reg, &req.world, &req.folk)?;
    let stats = tokio::task::spawn_blocking(move || simulate_population(&w, &f, req.n, req.threshold, req.seed))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(stats))
}

async fn sweep(
    State(reg): State<AppState>,
    Json(req): Json<SweepRequest>,
) -> Result<Json<Vec<InterventionReport>>, ApiError> {
    check_n(req.n)?;
    let (w, f) = models_for(&reg, &req.world, &req.folk)?;
    let settings = SimSettings { n: req.n, seed: req.seed, threshold: req.threshold };
    let reports = tokio::task::spawn_blocking(move || sweep_interventions(&w, &f, &req.interventions, settings))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(reports))
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/models", get(list_models))
        .route("/api/model/{name}", get(get_model))
        .route("/api/infer", post(infer))
        .route("/api/intervene", post(intervene))
        .route("/api/simulate", post(simulate))
        .route("/api/sweep", post(sweep))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Binds and serves until interrupted.
pub async fn serve(state: AppState, addr: std::net::SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
