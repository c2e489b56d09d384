//! Data behind the organization and personnel charts.
//!
//! One edge is one activity. Edges between two persons count for both of
//! them in the scatter, bar and heatmap outputs.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{Channel, GraphError, GraphView, NodeId, NodeKind, TimeExtent};

/// Number of bins the default width aims for.
pub const DEFAULT_BIN_COUNT: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("bin width must be positive and finite, got {0}")]
    NonPositiveBinWidth(f64),
    #[error("node {0} is not a person")]
    NotAPerson(NodeId),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// `extent / 50`, never below one second.
pub fn default_bin_width(extent: Option<TimeExtent>) -> f64 {
    extent
        .map(|x| (x.end - x.start) / DEFAULT_BIN_COUNT)
        .unwrap_or(1.0)
        .max(1.0)
}

fn resolve_width(width: Option<f64>, extent: Option<TimeExtent>) -> Result<f64, AnalyticsError> {
    match width {
        Some(w) if w > 0.0 && w.is_finite() => Ok(w),
        Some(w) => Err(AnalyticsError::NonPositiveBinWidth(w)),
        None => Ok(default_bin_width(extent)),
    }
}

/// Bin `k` covers `[origin + k*w, origin + (k+1)*w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinAxis {
    pub origin: f64,
    pub bin_width: f64,
    pub bins: usize,
}

impl BinAxis {
    fn bin_of(origin: f64, width: f64, t: f64) -> i64 {
        ((t - origin) / width).floor() as i64
    }

    /// Smallest run of grid bins (grid anchored at `origin`) covering `extent`.
    fn covering(origin: f64, width: f64, extent: Option<TimeExtent>) -> BinAxis {
        match extent {
            None => BinAxis {
                origin,
                bin_width: width,
                bins: 0,
            },
            Some(x) => {
                let first = Self::bin_of(origin, width, x.start);
                let last = Self::bin_of(origin, width, x.end);
                BinAxis {
                    origin: origin + first as f64 * width,
                    bin_width: width,
                    bins: (last - first + 1) as usize,
                }
            }
        }
    }

    pub fn bin_start(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.bin_width
    }

    /// Bin holding `t`, if it falls inside the axis.
    pub fn index(&self, t: f64) -> Option<usize> {
        let k = Self::bin_of(self.origin, self.bin_width, t);
        (k >= 0 && (k as usize) < self.bins).then_some(k as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub origin: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_start(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.bin_width
    }

    /// Counts re-laid onto `bins` bins starting at `start`, which must sit on
    /// this histogram's grid.
    pub fn aligned(&self, start: f64, bins: usize) -> Vec<u64> {
        let shift = ((self.origin - start) / self.bin_width).round() as i64;
        (0..bins as i64)
            .map(|k| {
                let j = k - shift;
                if j >= 0 && (j as usize) < self.counts.len() {
                    self.counts[j as usize]
                } else {
                    0
                }
            })
            .collect()
    }
}

/// Activity counts per bin over the view's visible edges.
///
/// The returned histogram starts at the grid bin holding the earliest
/// visible edge and ends at the bin holding the latest; with `bin_width:
/// None` the width defaults to [`default_bin_width`].
pub fn activity_histogram(
    view: &GraphView,
    bin_width: Option<f64>,
    origin: f64,
) -> Result<Histogram, AnalyticsError> {
    let extent = view.extent();
    let width = resolve_width(bin_width, extent)?;
    let axis = BinAxis::covering(origin, width, extent);
    let mut counts = vec![0u64; axis.bins];
    for e in view.visible_edges() {
        let t = view.effective_time(view.graph().edge(e));
        if let Some(k) = axis.index(t) {
            counts[k] += 1;
        }
    }
    Ok(Histogram {
        origin: axis.origin,
        bin_width: width,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub person: NodeId,
    pub time: f64,
    pub channel: Channel,
    pub edge: usize,
}

/// One point per (visible edge, person endpoint), sorted by person, time, edge.
pub fn person_scatter(view: &GraphView) -> Vec<ScatterPoint> {
    let graph = view.graph();
    let mut points = Vec::new();
    for e in view.visible_edges() {
        let edge = graph.edge(e);
        let time = view.effective_time(edge);
        for endpoint in [edge.source, edge.target] {
            if graph.kind(endpoint) == Some(NodeKind::Person) {
                points.push(ScatterPoint {
                    person: endpoint,
                    time,
                    channel: graph.channel(edge.channel).clone(),
                    edge: e,
                });
            }
        }
    }
    points.sort_by(|a, b| {
        a.person
            .cmp(&b.person)
            .then(a.time.total_cmp(&b.time))
            .then(a.edge.cmp(&b.edge))
    });
    points
}

/// Activity count per country code; each located endpoint of a visible edge adds one.
pub fn spatial_distribution(view: &GraphView) -> BTreeMap<String, u64> {
    let graph = view.graph();
    let mut counts = BTreeMap::new();
    for e in view.visible_edges() {
        let edge = graph.edge(e);
        for loc in [edge.source_location, edge.target_location].into_iter().flatten() {
            *counts.entry(graph.location(loc).to_string()).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct StructureLink {
    pub a: NodeId,
    pub b: NodeId,
    pub weight: u64,
}

/// Person-to-person projection of a view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructureGraph {
    pub persons: BTreeSet<NodeId>,
    /// Sorted by `(a, b)` with `a < b`.
    pub links: Vec<StructureLink>,
}

impl StructureGraph {
    pub fn weight(&self, p: NodeId, q: NodeId) -> u64 {
        let (a, b) = if p <= q { (p, q) } else { (q, p) };
        self.links
            .binary_search_by(|l| (l.a, l.b).cmp(&(a, b)))
            .map(|i| self.links[i].weight)
            .unwrap_or(0)
    }
}

/// Links persons by direct visible edges plus distinct shared non-person neighbors.
pub fn structure_projection(view: &GraphView) -> StructureGraph {
    let graph = view.graph();
    let persons: BTreeSet<NodeId> = graph
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::Person)
        .map(|n| n.id)
        .collect();
    let mut weights: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();

    for e in view.visible_edges() {
        let edge = graph.edge(e);
        if edge.source != edge.target && persons.contains(&edge.source) && persons.contains(&edge.target) {
            let key = (edge.source.min(edge.target), edge.source.max(edge.target));
            *weights.entry(key).or_insert(0) += 1;
        }
    }

    for (index, node) in graph.nodes().iter().enumerate() {
        if node.kind == NodeKind::Person {
            continue;
        }
        let members: Vec<NodeId> = view
            .neighbor_indices(index as u32)
            .into_iter()
            .filter(|&n| graph.kind_at(n) == NodeKind::Person)
            .map(|n| graph.id_at(n))
            .collect();
        for (i, &p) in members.iter().enumerate() {
            for &q in &members[i + 1..] {
                *weights.entry((p, q)).or_insert(0) += 1;
            }
        }
    }

    StructureGraph {
        persons,
        links: weights
            .into_iter()
            .map(|((a, b), weight)| StructureLink { a, b, weight })
            .collect(),
    }
}

fn require_person(view: &GraphView, person: NodeId) -> Result<u32, AnalyticsError> {
    let index = view.index(person)?;
    if view.graph().kind_at(index) != NodeKind::Person {
        return Err(AnalyticsError::NotAPerson(person));
    }
    Ok(index)
}

/// Visible incident edges of a person, per channel (channels with no edges omitted).
pub fn person_channel_counts(
    view: &GraphView,
    person: NodeId,
) -> Result<BTreeMap<String, u64>, AnalyticsError> {
    let index = require_person(view, person)?;
    let graph = view.graph();
    let mut counts = BTreeMap::new();
    for entry in view.incident(index) {
        let channel = graph.edge(entry.edge as usize).channel;
        *counts.entry(graph.channel(channel).to_string()).or_insert(0) += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapRow {
    /// Position of this row's view in the caller's input.
    pub source: usize,
    pub person: NodeId,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapMatrix {
    pub channel: String,
    pub axis: BinAxis,
    pub rows: Vec<HeatmapRow>,
}

/// Heatmap of one channel for persons of a single view.
pub fn heatmap(
    view: &GraphView,
    persons: &[NodeId],
    channel: &str,
    bin_width: Option<f64>,
    origin: f64,
) -> Result<HeatmapMatrix, AnalyticsError> {
    let entries: Vec<(&GraphView, NodeId)> = persons.iter().map(|&p| (view, p)).collect();
    heatmap_impl(&[view], &entries, channel, bin_width, origin)
}

/// Heatmap of one channel for persons drawn from several views.
///
/// The bin axis spans every visible edge of `channel` across the given views,
/// so rows from different graphs share bins.
pub fn heatmap_across(
    entries: &[(&GraphView, NodeId)],
    channel: &str,
    bin_width: Option<f64>,
    origin: f64,
) -> Result<HeatmapMatrix, AnalyticsError> {
    let views: Vec<&GraphView> = entries.iter().map(|(v, _)| *v).collect();
    heatmap_impl(&views, entries, channel, bin_width, origin)
}

fn heatmap_impl(
    views: &[&GraphView],
    entries: &[(&GraphView, NodeId)],
    channel: &str,
    bin_width: Option<f64>,
    origin: f64,
) -> Result<HeatmapMatrix, AnalyticsError> {
    let mut extent: Option<TimeExtent> = None;
    for view in views {
        let id = view
            .graph()
            .registry()
            .id(channel)
            .ok_or_else(|| GraphError::UnknownChannel {
                code: channel.to_string(),
                line: None,
            })?;
        for e in view.visible_channel_edges(id) {
            let t = view.effective_time(view.graph().edge(e as usize));
            extent = Some(match extent {
                None => TimeExtent { start: t, end: t },
                Some(x) => TimeExtent {
                    start: x.start.min(t),
                    end: x.end.max(t),
                },
            });
        }
    }
    let width = resolve_width(bin_width, extent)?;
    let axis = BinAxis::covering(origin, width, extent);

    let mut rows = Vec::with_capacity(entries.len());
    for (source, (view, person)) in entries.iter().enumerate() {
        let index = require_person(view, *person)?;
        let graph = view.graph();
        let mut counts = vec![0u64; axis.bins];
        for entry in view.incident(index) {
            let edge = graph.edge(entry.edge as usize);
            if graph.channel(edge.channel).as_str() != channel {
                continue;
            }
            if let Some(k) = axis.index(view.effective_time(edge)) {
                counts[k] += 1;
            }
        }
        rows.push(HeatmapRow {
            source,
            person: *person,
            counts,
        });
    }
    Ok(HeatmapMatrix {
        channel: channel.to_string(),
        axis,
        rows,
    })
}
