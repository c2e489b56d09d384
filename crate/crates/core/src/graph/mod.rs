//! Immutable, indexed storage for typed temporal multigraphs.
//!
//! Nodes carry a [`NodeKind`]; edges carry a channel, a timestamp, a weight
//! and optional country codes for both endpoints. Parallel edges are kept
//! as-is. After [`GraphBuilder::build`] the graph holds three indexes:
//!
//! * a CSR adjacency over dense node positions, each slice sorted by
//!   `(neighbor, time, edge)` so that the edges between one pair form a
//!   contiguous run,
//! * per-channel edge lists sorted by time,
//! * a global time-sorted edge order.

mod load;
mod view;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use load::{load_graph, write_edges_csv, write_nodes_csv, LoadWarning, Loaded, EDGE_HEADER, NODE_HEADER};
pub use view::{
    BundleEdge, Direction, EdgeBundle, GraphView, Neighbor, TimeExtent, TimeRange, ViewConfig, ViewStats,
};

/// Channels a registry can hold; visibility is tracked as a 64-bit mask.
pub const MAX_CHANNELS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edges CSV must start with the header `{expected}`, found `{found}`")]
    MissingHeader { expected: String, found: String },
    #[error("unknown channel `{code}`{}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    UnknownChannel { code: String, line: Option<usize> },
    #[error("bad value in column `{column}` on line {line}: {message}")]
    BadField {
        line: usize,
        column: String,
        message: String,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid time range: start {start} must be below end {end}")]
    InvalidRange { start: f64, end: f64 },
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("channel registry is full ({MAX_CHANNELS} channels)")]
    TooManyChannels,
    #[error("invalid channel code `{0}`")]
    InvalidChannelCode(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for GraphError {
    fn from(err: csv::Error) -> Self {
        GraphError::Csv(err.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for NodeId {
    fn from(value: u64) -> Self {
        NodeId(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum NodeKind {
    Person,
    Document,
    Demographic,
    Country,
    Item,
    #[default]
    Unknown,
}

impl NodeKind {
    pub const ALL: [NodeKind; 6] = [
        NodeKind::Person,
        NodeKind::Document,
        NodeKind::Demographic,
        NodeKind::Country,
        NodeKind::Item,
        NodeKind::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Person => "person",
            NodeKind::Document => "document",
            NodeKind::Demographic => "demographic",
            NodeKind::Country => "country",
            NodeKind::Item => "item",
            NodeKind::Unknown => "unknown",
        }
    }

    /// Case-insensitive parse of a kind name.
    pub fn parse(text: &str) -> Option<NodeKind> {
        let text = text.trim();
        NodeKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(text))
    }

    /// Mapping compatibility: equal kinds, or either side unknown.
    pub fn compatible(self, other: NodeKind) -> bool {
        self == other || self == NodeKind::Unknown || other == NodeKind::Unknown
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A channel code such as `email` or `procurement`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Channel(Arc<str>);

impl Channel {
    pub fn new(code: &str) -> Self {
        Channel(Arc::from(code))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = String::deserialize(deserializer)?;
        Ok(Channel::new(&code))
    }
}

/// Position of a channel inside its registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelId(pub u8);

/// The set of channel codes edges may use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelRegistry {
    channels: Vec<Channel>,
}

impl Default for ChannelRegistry {
    fn default() -> Self {
        Self::new(&[
            "author",
            "sell",
            "buy",
            "financial",
            "phone",
            "email",
            "procurement",
        ])
        .expect("default registry is valid")
    }
}

impl ChannelRegistry {
    pub fn new<S: AsRef<str>>(codes: &[S]) -> Result<Self, GraphError> {
        let mut registry = ChannelRegistry { channels: Vec::new() };
        for code in codes {
            registry.register(code.as_ref())?;
        }
        Ok(registry)
    }

    /// Adds `code` if missing and returns its id.
    pub fn register(&mut self, code: &str) -> Result<ChannelId, GraphError> {
        if let Some(id) = self.id(code) {
            return Ok(id);
        }
        let valid = !code.is_empty()
            && code
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-');
        if !valid {
            return Err(GraphError::InvalidChannelCode(code.to_string()));
        }
        if self.channels.len() >= MAX_CHANNELS {
            return Err(GraphError::TooManyChannels);
        }
        self.channels.push(Channel::new(code));
        Ok(ChannelId((self.channels.len() - 1) as u8))
    }

    pub fn id(&self, code: &str) -> Option<ChannelId> {
        self.channels
            .iter()
            .position(|c| c.as_str() == code)
            .map(|i| ChannelId(i as u8))
    }

    pub fn channel(&self, id: ChannelId) -> &Channel {
        &self.channels[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ChannelId, &Channel)> {
        self.channels
            .iter()
            .enumerate()
            .map(|(i, c)| (ChannelId(i as u8), c))
    }

    pub fn codes(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.to_string()).collect()
    }

    pub(crate) fn full_mask(&self) -> u64 {
        if self.channels.len() == MAX_CHANNELS {
            u64::MAX
        } else {
            (1u64 << self.channels.len()) - 1
        }
    }
}

/// Index into the graph's interned location table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocationId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub channel: ChannelId,
    pub time: f64,
    pub weight: f64,
    pub source_location: Option<LocationId>,
    pub target_location: Option<LocationId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AdjEntry {
    pub neighbor: u32,
    pub edge: u32,
}

/// Immutable temporal multigraph with adjacency, channel and time indexes.
#[derive(Debug)]
pub struct TemporalMultigraph {
    registry: ChannelRegistry,
    /// Sorted by id; a node's dense position is its index here.
    nodes: Vec<NodeRecord>,
    edges: Vec<Edge>,
    /// Dense `(source, target)` positions, parallel to `edges`.
    endpoints: Vec<(u32, u32)>,
    locations: Vec<String>,
    adj_offsets: Vec<usize>,
    adj: Vec<AdjEntry>,
    by_channel: Vec<Vec<u32>>,
    by_time: Vec<u32>,
}

impl TemporalMultigraph {
    pub fn registry(&self) -> &ChannelRegistry {
        &self.registry
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> &Edge {
        &self.edges[index]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index_of(id).is_some()
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.index_of(id).map(|i| &self.nodes[i as usize])
    }

    pub fn kind(&self, id: NodeId) -> Option<NodeKind> {
        self.node(id).map(|n| n.kind)
    }

    pub fn location(&self, id: LocationId) -> &str {
        &self.locations[id.0 as usize]
    }

    pub fn channel(&self, id: ChannelId) -> &Channel {
        self.registry.channel(id)
    }

    pub(crate) fn index_of(&self, id: NodeId) -> Option<u32> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| i as u32)
    }

    pub(crate) fn id_at(&self, index: u32) -> NodeId {
        self.nodes[index as usize].id
    }

    pub(crate) fn kind_at(&self, index: u32) -> NodeKind {
        self.nodes[index as usize].kind
    }

    pub(crate) fn endpoints(&self, edge: u32) -> (u32, u32) {
        self.endpoints[edge as usize]
    }

    pub(crate) fn adjacency(&self, index: u32) -> &[AdjEntry] {
        let i = index as usize;
        &self.adj[self.adj_offsets[i]..self.adj_offsets[i + 1]]
    }

    pub(crate) fn channel_edges(&self, channel: ChannelId) -> &[u32] {
        &self.by_channel[channel.0 as usize]
    }

    pub(crate) fn time_order(&self) -> &[u32] {
        &self.by_time
    }

    /// Total number of adjacency entries; each edge contributes one entry
    /// per distinct endpoint.
    pub fn adjacency_len(&self) -> usize {
        self.adj.len()
    }
}

/// Accumulates nodes and edges, then freezes them into a [`TemporalMultigraph`].
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    registry: ChannelRegistry,
    nodes: HashMap<NodeId, (NodeKind, Option<String>)>,
    edges: Vec<Edge>,
    locations: Vec<String>,
    location_index: HashMap<String, LocationId>,
}

impl GraphBuilder {
    pub fn new(registry: ChannelRegistry) -> Self {
        GraphBuilder {
            registry,
            ..Default::default()
        }
    }

    pub fn registry(&self) -> &ChannelRegistry {
        &self.registry
    }

    /// Declares a node. A later declaration of the same id replaces the earlier one.
    pub fn add_node(&mut self, id: NodeId, kind: NodeKind, label: Option<String>) -> &mut Self {
        self.nodes.insert(id, (kind, label));
        self
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn add_edge(
        &mut self,
        source: NodeId,
        target: NodeId,
        channel: &str,
        time: f64,
        weight: f64,
    ) -> Result<&mut Self, GraphError> {
        self.add_located_edge(source, target, channel, time, weight, None, None)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add_located_edge(
        &mut self,
        source: NodeId,
        target: NodeId,
        channel: &str,
        time: f64,
        weight: f64,
        source_location: Option<&str>,
        target_location: Option<&str>,
    ) -> Result<&mut Self, GraphError> {
        let channel = self
            .registry
            .id(channel)
            .ok_or_else(|| GraphError::UnknownChannel {
                code: channel.to_string(),
                line: None,
            })?;
        if !time.is_finite() || time < 0.0 {
            return Err(GraphError::InvalidEdge(format!(
                "time must be finite and non-negative, got {time}"
            )));
        }
        if !weight.is_finite() {
            return Err(GraphError::InvalidEdge(format!(
                "weight must be finite, got {weight}"
            )));
        }
        let source_location = source_location.map(|l| self.intern_location(l));
        let target_location = target_location.map(|l| self.intern_location(l));
        self.edges.push(Edge {
            source,
            target,
            channel,
            time,
            weight,
            source_location,
            target_location,
        });
        Ok(self)
    }

    fn intern_location(&mut self, code: &str) -> LocationId {
        if let Some(id) = self.location_index.get(code) {
            return *id;
        }
        let id = LocationId(self.locations.len() as u32);
        self.locations.push(code.to_string());
        self.location_index.insert(code.to_string(), id);
        id
    }

    pub fn build(self) -> TemporalMultigraph {
        let GraphBuilder {
            registry,
            mut nodes,
            edges,
            locations,
            ..
        } = self;

        for edge in &edges {
            nodes.entry(edge.source).or_insert((NodeKind::Unknown, None));
            nodes.entry(edge.target).or_insert((NodeKind::Unknown, None));
        }
        let mut nodes: Vec<NodeRecord> = nodes
            .into_iter()
            .map(|(id, (kind, label))| NodeRecord { id, kind, label })
            .collect();
        nodes.sort_unstable_by_key(|n| n.id);
        let position: HashMap<NodeId, u32> =
            nodes.iter().enumerate().map(|(i, n)| (n.id, i as u32)).collect();

        let endpoints: Vec<(u32, u32)> = edges
            .iter()
            .map(|e| (position[&e.source], position[&e.target]))
            .collect();

        // CSR adjacency via counting sort.
        let mut degree = vec![0usize; nodes.len() + 1];
        for &(s, t) in &endpoints {
            degree[s as usize + 1] += 1;
            if s != t {
                degree[t as usize + 1] += 1;
            }
        }
        for i in 1..degree.len() {
            degree[i] += degree[i - 1];
        }
        let adj_offsets = degree.clone();
        let mut fill = degree;
        let mut adj = vec![AdjEntry { neighbor: 0, edge: 0 }; *adj_offsets.last().unwrap_or(&0)];
        for (e, &(s, t)) in endpoints.iter().enumerate() {
            adj[fill[s as usize]] = AdjEntry {
                neighbor: t,
                edge: e as u32,
            };
            fill[s as usize] += 1;
            if s != t {
                adj[fill[t as usize]] = AdjEntry {
                    neighbor: s,
                    edge: e as u32,
                };
                fill[t as usize] += 1;
            }
        }
        for i in 0..nodes.len() {
            adj[adj_offsets[i]..adj_offsets[i + 1]].sort_unstable_by(|a, b| {
                a.neighbor
                    .cmp(&b.neighbor)
                    .then(
                        edges[a.edge as usize]
                            .time
                            .total_cmp(&edges[b.edge as usize].time),
                    )
                    .then(a.edge.cmp(&b.edge))
            });
        }

        let mut by_time: Vec<u32> = (0..edges.len() as u32).collect();
        by_time.sort_by(|&a, &b| edges[a as usize].time.total_cmp(&edges[b as usize].time));
        let mut by_channel = vec![Vec::new(); registry.len()];
        for &e in &by_time {
            by_channel[edges[e as usize].channel.0 as usize].push(e);
        }

        TemporalMultigraph {
            registry,
            nodes,
            edges,
            endpoints,
            locations,
            adj_offsets,
            adj,
            by_channel,
            by_time,
        }
    }
}

/// Per-channel edge counts over the whole graph, keyed by channel code.
pub fn channel_histogram(graph: &TemporalMultigraph) -> BTreeMap<String, usize> {
    graph
        .registry()
        .iter()
        .map(|(id, c)| (c.to_string(), graph.channel_edges(id).len()))
        .collect()
}
