//! Typed temporal multigraphs and the machinery for comparing them.
//!
//! * [`graph`] loads and indexes channel-typed, timestamped multigraphs and
//!   exposes filtered [`GraphView`]s.
//! * [`analytics`] computes the data behind the organization and personnel
//!   charts (histograms, scatter, spatial counts, structure projection,
//!   per-person bars and heatmaps).
//! * [`similarity`] scores pairs of edge bundles.
//! * [`matcher`] finds seeds in a target graph and grows a mapping from them,
//!   either interactively through a [`MatchSession`] or unattended.
//! * [`generate`] builds synthetic graphs with planted ground truth.

pub mod analytics;
pub mod generate;
pub mod graph;
pub mod matcher;
pub mod similarity;

pub use graph::{
    load_graph, BundleEdge, Channel, ChannelRegistry, Direction, Edge, EdgeBundle, GraphBuilder, GraphError,
    GraphView, Loaded, NodeId, NodeKind, TemporalMultigraph, TimeRange, ViewConfig, ViewStats,
};
pub use matcher::{
    Actor, CandidatePair, Decision, MatchError, MatchSession, RunStatus, SeedSignature, Verdict,
};
pub use similarity::{BundleProfile, SimilarityConfig, SimilarityScore};
