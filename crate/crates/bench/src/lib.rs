//! Deterministic workloads shared by the benchmarks.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tmatch_core::generate::{plant, random_connected, random_graph, GraphParams, Noise};
use tmatch_core::{GraphView, NodeId};

/// A template, a 1,000-node target holding an exact copy of it, and the
/// copy's ground truth.
pub struct MatchWorkload {
    pub template: GraphView,
    pub target: GraphView,
    pub truth: Vec<(NodeId, NodeId)>,
}

pub fn match_workload(seed: u64) -> MatchWorkload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = random_connected(&mut rng, &GraphParams::template());
    let background = random_graph(&mut rng, &GraphParams::background());
    let planted = plant(&mut rng, &template, &background, Noise::exact());
    MatchWorkload {
        template: GraphView::full(Arc::new(template.build())),
        target: GraphView::full(Arc::new(planted.graph.build())),
        truth: planted.truth.into_iter().collect(),
    }
}

/// Edge and node CSV text for a random graph of the given size.
pub fn csv_workload(seed: u64, nodes: usize, edges: usize) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = GraphParams {
        nodes,
        edges,
        ..GraphParams::background()
    };
    random_graph(&mut rng, &params).to_csv()
}
