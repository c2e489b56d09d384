#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use tmatch_core::{ChannelRegistry, GraphBuilder, NodeId, NodeKind, TemporalMultigraph};

pub const CHANNELS: [&str; 7] = [
    "author",
    "sell",
    "buy",
    "financial",
    "phone",
    "email",
    "procurement",
];
pub const COUNTRIES: [&str; 4] = ["AR", "DE", "KE", "NZ"];

#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub source: usize,
    pub target: usize,
    pub channel: usize,
    pub time: u32,
    pub weight: u8,
    pub source_location: Option<usize>,
    pub target_location: Option<usize>,
}

/// A small random multigraph, described by value so failures shrink.
#[derive(Debug, Clone)]
pub struct GraphSpec {
    pub kinds: Vec<NodeKind>,
    pub edges: Vec<EdgeSpec>,
}

pub fn id(i: usize) -> NodeId {
    NodeId(10 + 7 * i as u64)
}

impl GraphSpec {
    pub fn build(&self) -> Arc<TemporalMultigraph> {
        self.build_shifted(0.0)
    }

    /// Same graph with every raw time increased by `shift`.
    pub fn build_shifted(&self, shift: f64) -> Arc<TemporalMultigraph> {
        let mut b = GraphBuilder::new(ChannelRegistry::default());
        for (i, k) in self.kinds.iter().enumerate() {
            b.add_node(id(i), *k, None);
        }
        for e in &self.edges {
            b.add_located_edge(
                id(e.source),
                id(e.target),
                CHANNELS[e.channel],
                e.time as f64 + shift,
                e.weight as f64,
                e.source_location.map(|l| COUNTRIES[l]),
                e.target_location.map(|l| COUNTRIES[l]),
            )
            .unwrap();
        }
        Arc::new(b.build())
    }
}

pub fn kind() -> impl Strategy<Value = NodeKind> {
    prop_oneof![
        4 => Just(NodeKind::Person),
        1 => Just(NodeKind::Item),
        1 => Just(NodeKind::Document),
        1 => Just(NodeKind::Unknown),
    ]
}

/// Graphs with `min_nodes..=max_nodes` nodes and up to `max_edges` edges,
/// self-loops allowed, times in `0..1000`.
pub fn graph(min_nodes: usize, max_nodes: usize, max_edges: usize) -> impl Strategy<Value = GraphSpec> {
    prop::collection::vec(kind(), min_nodes..=max_nodes).prop_flat_map(move |kinds| {
        let n = kinds.len();
        let edge = (
            0..n,
            0..n,
            0..CHANNELS.len(),
            0u32..1000,
            1u8..6,
            prop::option::of(0..COUNTRIES.len()),
            prop::option::of(0..COUNTRIES.len()),
        )
            .prop_map(|(source, target, channel, time, weight, sl, tl)| EdgeSpec {
                source,
                target,
                channel,
                time,
                weight,
                source_location: sl,
                target_location: tl,
            });
        prop::collection::vec(edge, 0..=max_edges).prop_map(move |edges| GraphSpec {
            kinds: kinds.clone(),
            edges,
        })
    })
}

/// A subset of channel codes, as a bitmask over [`CHANNELS`].
pub fn channel_mask() -> impl Strategy<Value = u8> {
    0u8..(1 << CHANNELS.len())
}

pub fn channels_of(mask: u8) -> Vec<&'static str> {
    CHANNELS
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, c)| *c)
        .collect()
}

/// 1,000 cases, no regression files.
pub fn cases() -> ProptestConfig {
    ProptestConfig {
        cases: 1000,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}
