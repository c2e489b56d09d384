//! On-disk workspace: uploaded graphs with their view configs, match
//! sessions as replayable logs, and the shared configuration.
//!
//! Layout under the root directory:
//!
//! ```text
//! config.json
//! graphs/<id>/edges.csv
//! graphs/<id>/nodes.csv      (optional)
//! graphs/<id>/view.json
//! sessions/<id>.json
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tmatch_core::analytics::AnalyticsError;
use tmatch_core::graph::LoadWarning;
use tmatch_core::matcher::{
    derive_seed_signature, find_seeds, rank_candidates, AutoOptions, CandidatePair, RankedCandidate,
    RunReport, SeedMatch, SessionLog, SessionSummary,
};
use tmatch_core::similarity::{mapping_score, SimilarityError};
use tmatch_core::{
    load_graph, Actor, ChannelRegistry, Decision, GraphError, GraphView, MatchError, MatchSession, NodeId,
    SimilarityConfig, TemporalMultigraph, Verdict, ViewConfig, ViewStats,
};

/// Default upload cap: 2 GiB of CSV per graph.
pub const DEFAULT_MAX_UPLOAD_BYTES: u64 = 2 << 30;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("{kind} '{id}' not found")]
    NotFound { kind: &'static str, id: String },
    #[error("invalid id '{0}': use 1-64 characters from [A-Za-z0-9_.-], not starting with '.'")]
    InvalidId(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error("upload of {size} bytes exceeds the {limit}-byte limit")]
    TooLarge { size: u64, limit: u64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl WorkspaceError {
    /// Stable machine-readable code, shared by the CLI and HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            WorkspaceError::NotFound { .. } => "not_found",
            WorkspaceError::InvalidId(_) => "invalid_id",
            WorkspaceError::Conflict(_) => "conflict",
            WorkspaceError::Invalid(_) => "invalid_request",
            WorkspaceError::TooLarge { .. } => "payload_too_large",
            WorkspaceError::Graph(GraphError::UnknownNode(_)) => "not_found",
            WorkspaceError::Graph(_) => "invalid_graph",
            WorkspaceError::Match(MatchError::Graph(GraphError::UnknownNode(_))) => "not_found",
            WorkspaceError::Match(MatchError::UnknownPair { .. }) => "not_found",
            WorkspaceError::Match(_) => "match_error",
            WorkspaceError::Analytics(AnalyticsError::Graph(GraphError::UnknownNode(_))) => "not_found",
            WorkspaceError::Analytics(AnalyticsError::Graph(GraphError::UnknownChannel { .. })) => {
                "invalid_request"
            }
            WorkspaceError::Analytics(_) => "invalid_request",
            WorkspaceError::Similarity(_) => "invalid_request",
            WorkspaceError::Io { .. } | WorkspaceError::Json { .. } => "storage_error",
        }
    }
}

pub type Result<T, E = WorkspaceError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Json {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().expect("workspace paths have a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| WorkspaceError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(json_err(path))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(json_err(path))
}

pub fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && !id.starts_with('.')
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(WorkspaceError::InvalidId(id.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceConfig {
    pub similarity: SimilarityConfig,
    /// Channel codes accepted in edge files, in registry order.
    pub channels: Vec<String>,
    pub max_upload_bytes: u64,
    pub auto: AutoOptions,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        WorkspaceConfig {
            similarity: SimilarityConfig::default(),
            channels: ChannelRegistry::default().codes(),
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            auto: AutoOptions::default(),
        }
    }
}

/// A loaded graph and its current view.
#[derive(Debug, Clone)]
pub struct GraphEntry {
    pub id: String,
    pub graph: Arc<TemporalMultigraph>,
    pub view: GraphView,
    pub warnings: Vec<LoadWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphInfo {
    pub id: String,
    pub nodes: usize,
    pub edges: usize,
    pub view: ViewConfig,
    pub stats: ViewStats,
    pub warnings: Vec<LoadWarning>,
}

impl GraphEntry {
    pub fn info(&self) -> GraphInfo {
        GraphInfo {
            id: self.id.clone(),
            nodes: self.graph.node_count(),
            edges: self.graph.edge_count(),
            view: self.view.config().clone(),
            stats: self.view.stats(),
            warnings: self.warnings.clone(),
        }
    }
}

/// The persisted form of a session: enough to replay it from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub template: String,
    pub target: String,
    /// Views as they were when the session was opened.
    pub template_view: ViewConfig,
    pub target_view: ViewConfig,
    #[serde(flatten)]
    pub log: SessionLog,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionState {
    pub template: String,
    pub target: String,
    #[serde(flatten)]
    pub summary: SessionSummary,
    pub coverage: f64,
    /// `mapping_score` of the current mapping; `None` below two matched nodes.
    pub mapping_score: Option<f64>,
}

#[derive(Debug)]
struct SessionSlot {
    template: String,
    target: String,
    template_view: ViewConfig,
    target_view: ViewConfig,
    session: MatchSession,
}

impl SessionSlot {
    fn record(&self) -> SessionRecord {
        SessionRecord {
            id: self.session.id().to_string(),
            template: self.template.clone(),
            target: self.target.clone(),
            template_view: self.template_view.clone(),
            target_view: self.target_view.clone(),
            log: self.session.export(),
        }
    }

    fn state(&self) -> SessionState {
        let s = &self.session;
        SessionState {
            template: self.template.clone(),
            target: self.target.clone(),
            summary: s.summary(),
            coverage: s.coverage(),
            mapping_score: mapping_score(s.template(), s.target(), s.mapping(), s.config()).ok(),
        }
    }
}

/// How a new session picks its seed.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedChoice {
    Explicit(BTreeMap<NodeId, NodeId>),
    /// The best placement of the template's seed signature.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareEntry {
    pub graph: String,
    #[serde(flatten)]
    pub ranked: RankedCandidate,
}

/// Shared workspace state. Graph and session maps are guarded separately;
/// each session has its own lock so writes to one never block another.
#[derive(Debug)]
pub struct Workspace {
    root: PathBuf,
    config: WorkspaceConfig,
    registry: ChannelRegistry,
    graphs: RwLock<BTreeMap<String, Arc<GraphEntry>>>,
    sessions: RwLock<BTreeMap<String, Arc<RwLock<SessionSlot>>>>,
}

impl Workspace {
    /// Opens (creating if needed) the workspace at `root`, loading every
    /// graph and replaying every session found there.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for dir in [root.join("graphs"), root.join("sessions")] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let config_path = root.join("config.json");
        let config: WorkspaceConfig = if config_path.exists() {
            read_json(&config_path)?
        } else {
            let config = WorkspaceConfig::default();
            write_json(&config_path, &config)?;
            config
        };
        config.similarity.validate()?;
        let registry = ChannelRegistry::new(&config.channels)?;
        let ws = Workspace {
            root,
            config,
            registry,
            graphs: RwLock::new(BTreeMap::new()),
            sessions: RwLock::new(BTreeMap::new()),
        };
        ws.load_all()?;
        Ok(ws)
    }

    fn load_all(&self) -> Result<()> {
        let graphs_dir = self.root.join("graphs");
        let mut ids: Vec<String> = Vec::new();
        for entry in fs::read_dir(&graphs_dir).map_err(io_err(&graphs_dir))? {
            let entry = entry.map_err(io_err(&graphs_dir))?;
            if entry.path().join("edges.csv").is_file() {
                if let Some(name) = entry.file_name().to_str() {
                    if validate_id(name).is_ok() {
                        ids.push(name.to_string());
                    }
                }
            }
        }
        ids.sort();
        let mut graphs = BTreeMap::new();
        for id in ids {
            let dir = graphs_dir.join(&id);
            let edges = fs::read(dir.join("edges.csv")).map_err(io_err(&dir))?;
            let nodes_path = dir.join("nodes.csv");
            let nodes = if nodes_path.is_file() {
                Some(fs::read(&nodes_path).map_err(io_err(&nodes_path))?)
            } else {
                None
            };
            let view_path = dir.join("view.json");
            let view = if view_path.is_file() {
                read_json(&view_path)?
            } else {
                ViewConfig::all()
            };
            let entry = self.parse_graph(&id, &edges, nodes.as_deref(), view)?;
            graphs.insert(id, Arc::new(entry));
        }
        *self.graphs.write().expect("graph lock") = graphs;

        let sessions_dir = self.root.join("sessions");
        let mut files: Vec<PathBuf> = fs::read_dir(&sessions_dir)
            .map_err(io_err(&sessions_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for path in files {
            let record: SessionRecord = read_json(&path)?;
            self.install_session(record, false)?;
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &WorkspaceConfig {
        &self.config
    }

    pub fn registry(&self) -> &ChannelRegistry {
        &self.registry
    }

    fn parse_graph(
        &self,
        id: &str,
        edges: &[u8],
        nodes: Option<&[u8]>,
        view: ViewConfig,
    ) -> Result<GraphEntry> {
        let loaded = load_graph(edges, nodes, &self.registry)?;
        let graph = Arc::new(loaded.graph);
        let view = graph.view(view)?;
        Ok(GraphEntry {
            id: id.to_string(),
            graph,
            view,
            warnings: loaded.warnings,
        })
    }

    fn graph_dir(&self, id: &str) -> PathBuf {
        self.root.join("graphs").join(id)
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    fn sessions_using(&self, graph: &str) -> Vec<String> {
        self.sessions
            .read()
            .expect("session lock")
            .iter()
            .filter(|(_, slot)| {
                let slot = slot.read().expect("session slot lock");
                slot.template == graph || slot.target == graph
            })
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Parses and stores a graph under `id`, replacing any previous graph of
    /// that id. A replaced graph keeps its view config. Graphs referenced by
    /// sessions cannot be replaced.
    pub fn load_graph(&self, id: &str, edges: &[u8], nodes: Option<&[u8]>) -> Result<GraphInfo> {
        validate_id(id)?;
        let size = (edges.len() + nodes.map_or(0, <[u8]>::len)) as u64;
        if size > self.config.max_upload_bytes {
            return Err(WorkspaceError::TooLarge {
                size,
                limit: self.config.max_upload_bytes,
            });
        }
        let users = self.sessions_using(id);
        if !users.is_empty() {
            return Err(WorkspaceError::Conflict(format!(
                "graph '{id}' is used by sessions {users:?}; remove them first"
            )));
        }
        let view = self
            .graphs
            .read()
            .expect("graph lock")
            .get(id)
            .map(|g| g.view.config().clone())
            .unwrap_or_default();
        let entry = self.parse_graph(id, edges, nodes, view)?;

        let dir = self.graph_dir(id);
        write_atomic(&dir.join("edges.csv"), edges)?;
        let nodes_path = dir.join("nodes.csv");
        match nodes {
            Some(bytes) => write_atomic(&nodes_path, bytes)?,
            None if nodes_path.exists() => fs::remove_file(&nodes_path).map_err(io_err(&nodes_path))?,
            None => {}
        }
        write_json(&dir.join("view.json"), entry.view.config())?;

        let info = entry.info();
        self.graphs
            .write()
            .expect("graph lock")
            .insert(id.to_string(), Arc::new(entry));
        Ok(info)
    }

    pub fn remove_graph(&self, id: &str) -> Result<()> {
        self.graph(id)?;
        let users = self.sessions_using(id);
        if !users.is_empty() {
            return Err(WorkspaceError::Conflict(format!(
                "graph '{id}' is used by sessions {users:?}; remove them first"
            )));
        }
        let dir = self.graph_dir(id);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        self.graphs.write().expect("graph lock").remove(id);
        Ok(())
    }

    pub fn graph(&self, id: &str) -> Result<Arc<GraphEntry>> {
        self.graphs
            .read()
            .expect("graph lock")
            .get(id)
            .cloned()
            .ok_or_else(|| WorkspaceError::NotFound {
                kind: "graph",
                id: id.to_string(),
            })
    }

    pub fn list_graphs(&self) -> Vec<GraphInfo> {
        self.graphs
            .read()
            .expect("graph lock")
            .values()
            .map(|g| g.info())
            .collect()
    }

    /// Replaces a graph's view config. Open sessions keep the views they
    /// were created with.
    pub fn set_view(&self, id: &str, config: ViewConfig) -> Result<GraphInfo> {
        let current = self.graph(id)?;
        let view = current.graph.view(config)?;
        write_json(&self.graph_dir(id).join("view.json"), view.config())?;
        let entry = GraphEntry {
            view,
            ..(*current).clone()
        };
        let info = entry.info();
        self.graphs
            .write()
            .expect("graph lock")
            .insert(id.to_string(), Arc::new(entry));
        Ok(info)
    }

    /// Seed placements of `template`'s signature in `target`.
    pub fn seeds(&self, template: &str, target: &str, limit: usize) -> Result<Vec<SeedMatch>> {
        let t = self.graph(template)?;
        let x = self.graph(target)?;
        let sig = derive_seed_signature(&t.view)?;
        Ok(find_seeds(&x.view, &sig, &self.config.similarity, limit.max(1)))
    }

    fn session_slot(&self, id: &str) -> Result<Arc<RwLock<SessionSlot>>> {
        self.sessions
            .read()
            .expect("session lock")
            .get(id)
            .cloned()
            .ok_or_else(|| WorkspaceError::NotFound {
                kind: "session",
                id: id.to_string(),
            })
    }

    fn fresh_session_id(&self) -> String {
        let sessions = self.sessions.read().expect("session lock");
        (1..)
            .map(|n| format!("session-{n}"))
            .find(|id| !sessions.contains_key(id) && !self.session_path(id).exists())
            .expect("unbounded id space")
    }

    /// Opens a session between two stored graphs, seen through their
    /// current views. `config` defaults to the workspace similarity config.
    pub fn create_session(
        &self,
        id: Option<&str>,
        template: &str,
        target: &str,
        seed: SeedChoice,
        config: Option<SimilarityConfig>,
    ) -> Result<SessionState> {
        let id = match id {
            Some(id) => {
                validate_id(id)?;
                id.to_string()
            }
            None => self.fresh_session_id(),
        };
        let t = self.graph(template)?;
        let x = self.graph(target)?;
        let cfg = config.unwrap_or(self.config.similarity);
        cfg.validate()?;
        let seed = match seed {
            SeedChoice::Explicit(seed) => seed,
            SeedChoice::Auto => {
                let sig = derive_seed_signature(&t.view)?;
                find_seeds(&x.view, &sig, &cfg, 1)
                    .into_iter()
                    .next()
                    .ok_or_else(|| {
                        WorkspaceError::Invalid(format!(
                            "no placement of the template's seed signature exists in '{target}'"
                        ))
                    })?
                    .mapping()
            }
        };
        let session = MatchSession::new(id.clone(), t.view.clone(), x.view.clone(), seed, cfg)?;
        let slot = SessionSlot {
            template: template.to_string(),
            target: target.to_string(),
            template_view: t.view.config().clone(),
            target_view: x.view.config().clone(),
            session,
        };
        let mut sessions = self.sessions.write().expect("session lock");
        if sessions.contains_key(&id) {
            return Err(WorkspaceError::Conflict(format!("session '{id}' already exists")));
        }
        write_json(&self.session_path(&id), &slot.record())?;
        let state = slot.state();
        sessions.insert(id, Arc::new(RwLock::new(slot)));
        Ok(state)
    }

    /// Rebuilds a session from its record by replaying the log. With
    /// `persist`, the record is also written to the workspace.
    fn install_session(&self, record: SessionRecord, persist: bool) -> Result<SessionState> {
        validate_id(&record.id)?;
        let t = self.graph(&record.template)?;
        let x = self.graph(&record.target)?;
        let tv = t.graph.view(record.template_view.clone())?;
        let xv = x.graph.view(record.target_view.clone())?;
        let session = MatchSession::replay(record.id.clone(), tv, xv, &record.log)?;
        let slot = SessionSlot {
            template: record.template,
            target: record.target,
            template_view: record.template_view,
            target_view: record.target_view,
            session,
        };
        let id = record.id;
        let mut sessions = self.sessions.write().expect("session lock");
        if sessions.contains_key(&id) {
            return Err(WorkspaceError::Conflict(format!("session '{id}' already exists")));
        }
        if persist {
            write_json(&self.session_path(&id), &slot.record())?;
        }
        let state = slot.state();
        sessions.insert(id, Arc::new(RwLock::new(slot)));
        Ok(state)
    }

    /// Imports an exported session, optionally under a new id.
    pub fn import_session(&self, mut record: SessionRecord, id: Option<&str>) -> Result<SessionState> {
        if let Some(id) = id {
            record.id = id.to_string();
        }
        self.install_session(record, true)
    }

    pub fn export_session(&self, id: &str) -> Result<SessionRecord> {
        let slot = self.session_slot(id)?;
        let slot = slot.read().expect("session slot lock");
        Ok(slot.record())
    }

    pub fn remove_session(&self, id: &str) -> Result<()> {
        let mut sessions = self.sessions.write().expect("session lock");
        if sessions.remove(id).is_none() {
            return Err(WorkspaceError::NotFound {
                kind: "session",
                id: id.to_string(),
            });
        }
        let path = self.session_path(id);
        if path.exists() {
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
        Ok(())
    }

    pub fn list_sessions(&self) -> Vec<SessionState> {
        let slots: Vec<_> = self
            .sessions
            .read()
            .expect("session lock")
            .values()
            .cloned()
            .collect();
        slots
            .iter()
            .map(|s| s.read().expect("session slot lock").state())
            .collect()
    }

    pub fn session(&self, id: &str) -> Result<SessionState> {
        let slot = self.session_slot(id)?;
        let state = slot.read().expect("session slot lock").state();
        Ok(state)
    }

    pub fn candidates(&self, id: &str, k: usize) -> Result<Vec<CandidatePair>> {
        let slot = self.session_slot(id)?;
        let proposals = slot.read().expect("session slot lock").session.propose(k);
        Ok(proposals)
    }

    pub fn decide(
        &self,
        id: &str,
        template: NodeId,
        target: NodeId,
        verdict: Verdict,
        actor: Actor,
    ) -> Result<(Decision, SessionState)> {
        let slot = self.session_slot(id)?;
        let mut slot = slot.write().expect("session slot lock");
        let decision = slot.session.decide(template, target, verdict, actor)?.clone();
        write_json(&self.session_path(id), &slot.record())?;
        Ok((decision, slot.state()))
    }

    pub fn run_auto(&self, id: &str, max_iterations: usize) -> Result<(RunReport, SessionState)> {
        if max_iterations == 0 {
            return Err(WorkspaceError::Invalid("max_iterations must be positive".into()));
        }
        let slot = self.session_slot(id)?;
        let mut slot = slot.write().expect("session slot lock");
        let report = slot.session.run_auto(max_iterations);
        write_json(&self.session_path(id), &slot.record())?;
        Ok((report, slot.state()))
    }

    /// Ranks stored graphs against a stored template.
    pub fn compare(&self, template: &str, candidates: &[String]) -> Result<Vec<CompareEntry>> {
        if candidates.is_empty() {
            return Err(WorkspaceError::Invalid(
                "at least one candidate is required".into(),
            ));
        }
        let t = self.graph(template)?;
        let views = candidates
            .iter()
            .map(|c| self.graph(c).map(|g| g.view.clone()))
            .collect::<Result<Vec<_>>>()?;
        derive_seed_signature(&t.view)?;
        let ranked = rank_candidates(&t.view, &views, &self.config.similarity, self.config.auto);
        Ok(ranked
            .into_iter()
            .map(|r| CompareEntry {
                graph: candidates[r.index].clone(),
                ranked: r,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EDGES: &str = "source,etype,target,time,weight,source_location,target_location\n\
        1,email,2,100,1,,\n1,email,2,200,1,,\n2,phone,3,150,1,,\n1,sell,4,300,2,A,B\n3,buy,4,400,5,B,A\n";
    const NODES: &str = "node,kind,label\n1,person,\n2,person,\n3,person,\n4,item,\n";

    #[test]
    fn ids_are_checked() {
        for good in ["a", "graph-1", "x_y.z"] {
            assert!(validate_id(good).is_ok(), "{good}");
        }
        for bad in ["", ".hidden", "a/b", "..", "sp ace", &"x".repeat(65)] {
            assert!(validate_id(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn graphs_and_views_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        let info = ws
            .load_graph("g", EDGES.as_bytes(), Some(NODES.as_bytes()))
            .unwrap();
        assert_eq!((info.nodes, info.edges), (4, 5));
        ws.set_view("g", ViewConfig::all().with_channels(&["email"]))
            .unwrap();
        drop(ws);

        let ws = Workspace::open(dir.path()).unwrap();
        let g = ws.graph("g").unwrap();
        assert_eq!(g.view.visible_edge_count(), 2);
        assert!(dir.path().join("graphs/g/nodes.csv").is_file());
        assert!(dir.path().join("config.json").is_file());
    }

    #[test]
    fn reupload_keeps_stats_and_view() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        ws.load_graph("g", EDGES.as_bytes(), Some(NODES.as_bytes()))
            .unwrap();
        let first = ws
            .set_view("g", ViewConfig::all().with_range(0.0, 250.0))
            .unwrap();
        let second = ws
            .load_graph("g", EDGES.as_bytes(), Some(NODES.as_bytes()))
            .unwrap();
        assert_eq!(first.stats, second.stats);
    }

    #[test]
    fn graphs_in_use_cannot_be_removed() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        ws.load_graph("t", EDGES.as_bytes(), Some(NODES.as_bytes()))
            .unwrap();
        ws.load_graph("x", EDGES.as_bytes(), Some(NODES.as_bytes()))
            .unwrap();
        ws.create_session(Some("s"), "t", "x", SeedChoice::Auto, None)
            .unwrap();
        assert!(matches!(ws.remove_graph("x"), Err(WorkspaceError::Conflict(_))));
        assert!(matches!(
            ws.load_graph("t", EDGES.as_bytes(), None),
            Err(WorkspaceError::Conflict(_))
        ));
        ws.remove_session("s").unwrap();
        ws.remove_graph("x").unwrap();
        assert!(!dir.path().join("graphs/x").exists());
    }

    #[test]
    fn sessions_replay_after_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        ws.load_graph("t", EDGES.as_bytes(), Some(NODES.as_bytes()))
            .unwrap();
        ws.load_graph("x", EDGES.as_bytes(), Some(NODES.as_bytes()))
            .unwrap();
        let seed = BTreeMap::from([(NodeId(1), NodeId(1))]);
        ws.create_session(Some("s"), "t", "x", SeedChoice::Explicit(seed), None)
            .unwrap();
        ws.decide("s", NodeId(3), NodeId(2), Verdict::Reject, Actor::User)
            .unwrap();
        ws.run_auto("s", 100).unwrap();
        let before = serde_json::to_vec(&ws.session("s").unwrap()).unwrap();
        drop(ws);

        let ws = Workspace::open(dir.path()).unwrap();
        let after = serde_json::to_vec(&ws.session("s").unwrap()).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn upload_cap_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let config = WorkspaceConfig {
            max_upload_bytes: 10,
            ..WorkspaceConfig::default()
        };
        write_json(&dir.path().join("config.json"), &config).unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        let err = ws.load_graph("g", EDGES.as_bytes(), None).unwrap_err();
        assert_eq!(err.code(), "payload_too_large");
    }

    #[test]
    fn bad_csv_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        let err = ws.load_graph("g", b"wrong,header\n", None).unwrap_err();
        assert_eq!(err.code(), "invalid_graph");
        assert!(!dir.path().join("graphs/g").exists());
        assert!(ws.list_graphs().is_empty());
    }
}
