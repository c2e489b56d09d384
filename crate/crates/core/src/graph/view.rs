//! Filtered read access to a graph: channel toggles, time range and offset.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AdjEntry, Channel, ChannelId, Edge, GraphError, NodeId, TemporalMultigraph};

/// Half-open interval `[start, end)` of effective time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: f64,
    pub end: f64,
}

impl TimeRange {
    pub fn new(start: f64, end: f64) -> Self {
        TimeRange { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Which edges a [`GraphView`] exposes.
///
/// `channels: None` enables every registered channel; `range: None` is
/// unbounded. The offset is added to raw edge times before filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ViewConfig {
    #[serde(default)]
    pub channels: Option<BTreeSet<String>>,
    #[serde(default)]
    pub range: Option<TimeRange>,
    #[serde(default)]
    pub offset: f64,
}

impl ViewConfig {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn with_channels<S: AsRef<str>>(mut self, channels: &[S]) -> Self {
        self.channels = Some(channels.iter().map(|c| c.as_ref().to_string()).collect());
        self
    }

    pub fn with_range(mut self, start: f64, end: f64) -> Self {
        self.range = Some(TimeRange::new(start, end));
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleEdge {
    /// Index into the graph's edge sequence.
    pub edge: usize,
    pub direction: Direction,
    pub channel: Channel,
    /// Effective time (raw time plus the view offset).
    pub time: f64,
    pub weight: f64,
}

/// All visible edges between one node pair, oriented relative to `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeBundle {
    pub anchor: (NodeId, NodeId),
    pub edges: Vec<BundleEdge>,
}

impl EdgeBundle {
    pub fn empty(a: NodeId, b: NodeId) -> Self {
        EdgeBundle {
            anchor: (a, b),
            edges: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Neighbor {
    pub node: NodeId,
    pub channels: BTreeSet<Channel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeExtent {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewStats {
    pub node_count: usize,
    pub edge_count: usize,
    /// Visible edge count for every enabled channel, zeros included.
    pub per_channel: BTreeMap<String, usize>,
    pub extent: Option<TimeExtent>,
}

/// A graph seen through a [`ViewConfig`]. Cheap to clone.
#[derive(Debug, Clone)]
pub struct GraphView {
    graph: Arc<TemporalMultigraph>,
    config: ViewConfig,
    mask: u64,
}

impl GraphView {
    pub fn new(graph: Arc<TemporalMultigraph>, config: ViewConfig) -> Result<Self, GraphError> {
        if let Some(range) = config.range {
            if !(range.start.is_finite() && range.end.is_finite()) || range.start >= range.end {
                return Err(GraphError::InvalidRange {
                    start: range.start,
                    end: range.end,
                });
            }
        }
        if !config.offset.is_finite() {
            return Err(GraphError::InvalidEdge(format!(
                "time offset must be finite, got {}",
                config.offset
            )));
        }
        let registry = graph.registry();
        let mask = match &config.channels {
            None => registry.full_mask(),
            Some(codes) => {
                let mut mask = 0u64;
                for code in codes {
                    let id = registry.id(code).ok_or_else(|| GraphError::UnknownChannel {
                        code: code.clone(),
                        line: None,
                    })?;
                    mask |= 1 << id.0;
                }
                mask
            }
        };
        Ok(GraphView { graph, config, mask })
    }

    /// Every channel, unbounded range, zero offset.
    pub fn full(graph: Arc<TemporalMultigraph>) -> Self {
        Self::new(graph, ViewConfig::all()).expect("identity view is valid")
    }

    pub fn graph(&self) -> &TemporalMultigraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<TemporalMultigraph> {
        &self.graph
    }

    pub fn config(&self) -> &ViewConfig {
        &self.config
    }

    pub fn offset(&self) -> f64 {
        self.config.offset
    }

    pub fn channel_enabled(&self, channel: ChannelId) -> bool {
        self.mask & (1 << channel.0) != 0
    }

    /// Enabled channels in registry order.
    pub fn enabled_channels(&self) -> impl Iterator<Item = (ChannelId, &Channel)> {
        self.graph
            .registry()
            .iter()
            .filter(|(id, _)| self.channel_enabled(*id))
    }

    pub fn effective_time(&self, edge: &Edge) -> f64 {
        edge.time + self.config.offset
    }

    pub fn is_visible(&self, edge: &Edge) -> bool {
        self.channel_enabled(edge.channel)
            && self
                .config
                .range
                .is_none_or(|r| r.contains(self.effective_time(edge)))
    }

    pub(crate) fn is_visible_index(&self, edge: u32) -> bool {
        self.is_visible(self.graph.edge(edge as usize))
    }

    /// Visible edge indexes in ascending effective-time order.
    pub fn visible_edges(&self) -> impl Iterator<Item = usize> + '_ {
        let order = self.graph.time_order();
        let edges = self.graph.edges();
        let delta = self.config.offset;
        let (lo, hi) = match self.config.range {
            // raw + delta is monotone in raw, so both cuts are exact
            Some(r) => (
                order.partition_point(|&e| edges[e as usize].time + delta < r.start),
                order.partition_point(|&e| edges[e as usize].time + delta < r.end),
            ),
            None => (0, order.len()),
        };
        order[lo..hi]
            .iter()
            .copied()
            .filter(move |&e| self.channel_enabled(edges[e as usize].channel))
            .map(|e| e as usize)
    }

    /// Visible edges of a single channel, in time order.
    pub(crate) fn visible_channel_edges(&self, channel: ChannelId) -> impl Iterator<Item = u32> + '_ {
        let list: &[u32] = if self.channel_enabled(channel) {
            self.graph.channel_edges(channel)
        } else {
            &[]
        };
        list.iter().copied().filter(move |&e| self.is_visible_index(e))
    }

    pub(crate) fn index(&self, node: NodeId) -> Result<u32, GraphError> {
        self.graph.index_of(node).ok_or(GraphError::UnknownNode(node))
    }

    /// Visible adjacency entries of a dense node position.
    pub(crate) fn incident(&self, index: u32) -> impl Iterator<Item = &AdjEntry> + '_ {
        self.graph
            .adjacency(index)
            .iter()
            .filter(move |entry| self.is_visible_index(entry.edge))
    }

    /// Distinct visible neighbor positions, ascending.
    pub(crate) fn neighbor_indices(&self, index: u32) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::new();
        for entry in self.incident(index) {
            if out.last() != Some(&entry.neighbor) {
                out.push(entry.neighbor);
            }
        }
        out
    }

    /// Neighbors joined to `node` by at least one visible edge, with the
    /// visible channels between them. Sorted by neighbor id.
    pub fn adjacent(&self, node: NodeId) -> Result<Vec<Neighbor>, GraphError> {
        let index = self.index(node)?;
        let mut out: Vec<Neighbor> = Vec::new();
        let mut current = u32::MAX;
        for entry in self.incident(index) {
            let channel = self
                .graph
                .channel(self.graph.edge(entry.edge as usize).channel)
                .clone();
            if entry.neighbor != current {
                current = entry.neighbor;
                out.push(Neighbor {
                    node: self.graph.id_at(entry.neighbor),
                    channels: BTreeSet::new(),
                });
            }
            out.last_mut().expect("pushed above").channels.insert(channel);
        }
        Ok(out)
    }

    pub fn edge_bundle(&self, a: NodeId, b: NodeId) -> Result<EdgeBundle, GraphError> {
        let ia = self.index(a)?;
        let ib = self.index(b)?;
        Ok(self.bundle_by_index(ia, ib))
    }

    pub(crate) fn bundle_by_index(&self, ia: u32, ib: u32) -> EdgeBundle {
        let a = self.graph.id_at(ia);
        let b = self.graph.id_at(ib);
        let adj = self.graph.adjacency(ia);
        let lo = adj.partition_point(|e| e.neighbor < ib);
        let hi = lo + adj[lo..].partition_point(|e| e.neighbor == ib);
        let edges = adj[lo..hi]
            .iter()
            .filter(|entry| self.is_visible_index(entry.edge))
            .map(|entry| {
                let edge = self.graph.edge(entry.edge as usize);
                let (source, _) = self.graph.endpoints(entry.edge);
                BundleEdge {
                    edge: entry.edge as usize,
                    direction: if source == ia {
                        super::Direction::Forward
                    } else {
                        super::Direction::Backward
                    },
                    channel: self.graph.channel(edge.channel).clone(),
                    time: self.effective_time(edge),
                    weight: edge.weight,
                }
            })
            .collect();
        EdgeBundle {
            anchor: (a, b),
            edges,
        }
    }

    pub(crate) fn has_visible_edge(&self, ia: u32, ib: u32) -> bool {
        let adj = self.graph.adjacency(ia);
        let lo = adj.partition_point(|e| e.neighbor < ib);
        adj[lo..]
            .iter()
            .take_while(|e| e.neighbor == ib)
            .any(|e| self.is_visible_index(e.edge))
    }

    pub fn visible_edge_count(&self) -> usize {
        self.visible_edges().count()
    }

    /// Min and max effective time over visible edges.
    pub fn extent(&self) -> Option<TimeExtent> {
        let mut extent: Option<TimeExtent> = None;
        for e in self.visible_edges() {
            let t = self.effective_time(self.graph.edge(e));
            extent = Some(match extent {
                None => TimeExtent { start: t, end: t },
                Some(x) => TimeExtent {
                    start: x.start.min(t),
                    end: x.end.max(t),
                },
            });
        }
        extent
    }

    pub fn stats(&self) -> ViewStats {
        let mut counts = vec![0usize; self.graph.registry().len()];
        let mut total = 0;
        for e in self.visible_edges() {
            counts[self.graph.edge(e).channel.0 as usize] += 1;
            total += 1;
        }
        let per_channel = self
            .enabled_channels()
            .map(|(id, c)| (c.to_string(), counts[id.0 as usize]))
            .collect();
        ViewStats {
            node_count: self.graph.node_count(),
            edge_count: total,
            per_channel,
            extent: self.extent(),
        }
    }
}

impl TemporalMultigraph {
    /// Wraps the graph in a validated view.
    pub fn view(self: &Arc<Self>, config: ViewConfig) -> Result<GraphView, GraphError> {
        GraphView::new(Arc::clone(self), config)
    }
}
