//! Synthetic graphs with planted ground truth.
//!
//! Used by the test suites, the benches and the CLI demo fixtures. All
//! generators are driven by a caller-supplied RNG so runs are reproducible.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{ChannelRegistry, GraphBuilder, NodeId, NodeKind, TemporalMultigraph};

pub const DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub channel: String,
    pub time: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyntheticGraph {
    pub nodes: Vec<(NodeId, NodeKind)>,
    pub edges: Vec<SyntheticEdge>,
}

impl SyntheticGraph {
    /// Registry holding the default channels plus any extra code in use.
    pub fn registry(&self) -> ChannelRegistry {
        let mut registry = ChannelRegistry::default();
        for e in &self.edges {
            registry
                .register(&e.channel)
                .expect("generated channel codes are valid");
        }
        registry
    }

    pub fn build(&self) -> TemporalMultigraph {
        let mut b = GraphBuilder::new(self.registry());
        for &(id, kind) in &self.nodes {
            b.add_node(id, kind, None);
        }
        for e in &self.edges {
            b.add_edge(e.source, e.target, &e.channel, e.time, e.weight)
                .expect("generated edges are valid");
        }
        b.build()
    }

    /// `(edges.csv, nodes.csv)` in the ingestion format.
    pub fn to_csv(&self) -> (String, String) {
        let mut edges = String::from("source,etype,target,time,weight,source_location,target_location\n");
        for e in &self.edges {
            let _ = writeln!(
                edges,
                "{},{},{},{},{},,",
                e.source, e.channel, e.target, e.time, e.weight
            );
        }
        let mut nodes = String::from("node,kind,label\n");
        for (id, kind) in &self.nodes {
            let _ = writeln!(nodes, "{id},{kind},");
        }
        (edges, nodes)
    }

    pub fn kind(&self, id: NodeId) -> Option<NodeKind> {
        self.nodes.iter().find(|(n, _)| *n == id).map(|(_, k)| *k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphParams {
    pub nodes: usize,
    pub edges: usize,
    /// Channel codes with sampling weights.
    pub channels: Vec<(String, f64)>,
    pub kinds: Vec<(NodeKind, f64)>,
    /// Raw times are drawn uniformly from `[start, end)` and floored to seconds.
    pub time_span: (f64, f64),
    /// Probability that an edge beyond the spanning tree reuses an existing pair.
    pub parallel_bias: f64,
    pub first_id: u64,
}

impl GraphParams {
    /// 30 nodes, 120 edges over four channels, one year of activity.
    pub fn template() -> Self {
        GraphParams {
            nodes: 30,
            edges: 120,
            channels: vec![
                ("email".into(), 0.4),
                ("phone".into(), 0.3),
                ("sell".into(), 0.2),
                ("procurement".into(), 0.1),
            ],
            kinds: vec![
                (NodeKind::Person, 0.6),
                (NodeKind::Item, 0.2),
                (NodeKind::Document, 0.2),
            ],
            time_span: (0.0, 365.0 * DAY),
            parallel_bias: 0.5,
            first_id: 0,
        }
    }

    /// 1,000 nodes, 20,000 edges with the template's channel and kind mix.
    pub fn background() -> Self {
        GraphParams {
            nodes: 1_000,
            edges: 20_000,
            parallel_bias: 0.0,
            ..Self::template()
        }
    }
}

fn pick<'a, T, R: Rng>(rng: &mut R, table: &'a [(T, f64)]) -> &'a T {
    let total: f64 = table.iter().map(|(_, w)| w).sum();
    let mut x = rng.random::<f64>() * total;
    for (item, w) in table {
        if x < *w {
            return item;
        }
        x -= w;
    }
    &table.last().expect("non-empty table").0
}

fn random_edge<R: Rng>(rng: &mut R, p: &GraphParams, a: NodeId, b: NodeId) -> SyntheticEdge {
    let (source, target) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
    SyntheticEdge {
        source,
        target,
        channel: pick(rng, &p.channels).clone(),
        time: rng.random_range(p.time_span.0..p.time_span.1).floor(),
        weight: rng.random_range(1..=5) as f64,
    }
}

fn random_nodes<R: Rng>(rng: &mut R, p: &GraphParams) -> Vec<(NodeId, NodeKind)> {
    (0..p.nodes as u64)
        .map(|i| (NodeId(p.first_id + i), *pick(rng, &p.kinds)))
        .collect()
}

/// Connected graph: a random spanning tree, then extra edges that either
/// reuse an existing pair (with `parallel_bias`) or join a fresh random pair.
pub fn random_connected<R: Rng>(rng: &mut R, p: &GraphParams) -> SyntheticGraph {
    assert!(p.nodes >= 2, "a connected graph needs at least two nodes");
    assert!(p.edges + 1 >= p.nodes, "too few edges to connect every node");
    let nodes = random_nodes(rng, p);
    let mut order: Vec<NodeId> = nodes.iter().map(|(n, _)| *n).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(NodeId, NodeId)> = Vec::new();
    let mut edges = Vec::with_capacity(p.edges);
    for i in 1..order.len() {
        let parent = order[rng.random_range(0..i)];
        pairs.push((parent, order[i]));
        edges.push(random_edge(rng, p, parent, order[i]));
    }
    while edges.len() < p.edges {
        let (a, b) = if rng.random_bool(p.parallel_bias) {
            pairs[rng.random_range(0..pairs.len())]
        } else {
            let a = order[rng.random_range(0..order.len())];
            let b = order[rng.random_range(0..order.len())];
            if a == b {
                continue;
            }
            pairs.push((a, b));
            (a, b)
        };
        edges.push(random_edge(rng, p, a, b));
    }
    SyntheticGraph { nodes, edges }
}

/// Uniform random multigraph without self-loops; not necessarily connected.
pub fn random_graph<R: Rng>(rng: &mut R, p: &GraphParams) -> SyntheticGraph {
    let nodes = random_nodes(rng, p);
    let mut edges = Vec::with_capacity(p.edges);
    while edges.len() < p.edges && p.nodes >= 2 {
        let a = rng.random_range(0..p.nodes as u64);
        let b = rng.random_range(0..p.nodes as u64);
        if a == b {
            continue;
        }
        edges.push(random_edge(
            rng,
            p,
            NodeId(p.first_id + a),
            NodeId(p.first_id + b),
        ));
    }
    SyntheticGraph { nodes, edges }
}

/// Perturbations applied to a copy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Noise {
    /// Fraction of edges removed (rounded to the nearest edge).
    pub delete_fraction: f64,
    /// Each time moves by a uniform offset in `[-jitter, jitter]`, clamped at 0.
    pub jitter: f64,
    /// Permute the channel labels among the copy's edges.
    pub shuffle_channels: bool,
}

impl Noise {
    pub fn exact() -> Self {
        Noise::default()
    }

    /// Delete `fraction` of edges and jitter times by up to one bin.
    pub fn noisy(fraction: f64, bin_width: f64) -> Self {
        Noise {
            delete_fraction: fraction,
            jitter: bin_width,
            shuffle_channels: false,
        }
    }

    pub fn shuffled() -> Self {
        Noise {
            shuffle_channels: true,
            ..Noise::default()
        }
    }
}

/// A generated graph together with the template-to-graph ground truth.
#[derive(Debug, Clone)]
pub struct Planted {
    pub graph: SyntheticGraph,
    pub truth: BTreeMap<NodeId, NodeId>,
}

fn perturb<R: Rng>(rng: &mut R, edges: &mut Vec<SyntheticEdge>, noise: Noise) {
    let delete = (edges.len() as f64 * noise.delete_fraction).round() as usize;
    if delete > 0 {
        let mut idx: Vec<usize> = (0..edges.len()).collect();
        idx.shuffle(rng);
        let mut drop = vec![false; edges.len()];
        for &i in &idx[..delete.min(edges.len())] {
            drop[i] = true;
        }
        let mut i = 0;
        edges.retain(|_| {
            i += 1;
            !drop[i - 1]
        });
    }
    if noise.jitter > 0.0 {
        for e in edges.iter_mut() {
            e.time = (e.time + rng.random_range(-noise.jitter..=noise.jitter))
                .max(0.0)
                .floor();
        }
    }
    if noise.shuffle_channels {
        let mut channels: Vec<String> = edges.iter().map(|e| e.channel.clone()).collect();
        channels.shuffle(rng);
        for (e, c) in edges.iter_mut().zip(channels) {
            e.channel = c;
        }
    }
}

fn relabel(graph: &SyntheticGraph, map: &HashMap<NodeId, NodeId>) -> SyntheticGraph {
    SyntheticGraph {
        nodes: graph.nodes.iter().map(|(n, k)| (map[n], *k)).collect(),
        edges: graph
            .edges
            .iter()
            .map(|e| SyntheticEdge {
                source: map[&e.source],
                target: map[&e.target],
                ..e.clone()
            })
            .collect(),
    }
}

/// A perturbed copy of `template` on freshly shuffled ids
/// `first_id..first_id + n`.
pub fn noisy_copy<R: Rng>(rng: &mut R, template: &SyntheticGraph, noise: Noise, first_id: u64) -> Planted {
    let mut ids: Vec<u64> = (first_id..first_id + template.nodes.len() as u64).collect();
    ids.shuffle(rng);
    let map: HashMap<NodeId, NodeId> = template
        .nodes
        .iter()
        .zip(ids)
        .map(|((n, _), id)| (*n, NodeId(id)))
        .collect();
    let mut graph = relabel(template, &map);
    perturb(rng, &mut graph.edges, noise);
    Planted {
        truth: map.into_iter().collect(),
        graph,
    }
}

/// Embeds a perturbed copy of `template` into `background` with no edges
/// between the two, then shuffles all ids over `0..n_total`.
pub fn plant<R: Rng>(
    rng: &mut R,
    template: &SyntheticGraph,
    background: &SyntheticGraph,
    noise: Noise,
) -> Planted {
    let total = (template.nodes.len() + background.nodes.len()) as u64;
    let mut ids: Vec<u64> = (0..total).collect();
    ids.shuffle(rng);
    let mut ids = ids.into_iter().map(NodeId);

    let copy_map: HashMap<NodeId, NodeId> = template
        .nodes
        .iter()
        .map(|(n, _)| (*n, ids.next().expect("enough ids")))
        .collect();
    let bg_map: HashMap<NodeId, NodeId> = background
        .nodes
        .iter()
        .map(|(n, _)| (*n, ids.next().expect("enough ids")))
        .collect();

    let mut copy = relabel(template, &copy_map);
    perturb(rng, &mut copy.edges, noise);
    let bg = relabel(background, &bg_map);

    let mut graph = SyntheticGraph {
        nodes: bg.nodes,
        edges: bg.edges,
    };
    graph.nodes.extend(copy.nodes);
    graph.edges.extend(copy.edges);
    graph.edges.shuffle(rng);
    Planted {
        truth: copy_map.into_iter().collect(),
        graph,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::graph::GraphView;

    #[test]
    fn template_is_connected_with_requested_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_connected(&mut rng, &GraphParams::template());
        assert_eq!(t.nodes.len(), 30);
        assert_eq!(t.edges.len(), 120);
        let g = Arc::new(t.build());
        let view = GraphView::full(g.clone());
        let mut seen = BTreeSet::from([0u32]);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            for m in view.neighbor_indices(n) {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        assert_eq!(seen.len(), 30);
    }

    #[test]
    fn planted_copy_is_exact_and_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_connected(&mut rng, &GraphParams::template());
        let bg = random_graph(
            &mut rng,
            &GraphParams {
                nodes: 100,
                edges: 400,
                ..GraphParams::background()
            },
        );
        let planted = plant(&mut rng, &t, &bg, Noise::exact());
        assert_eq!(planted.graph.nodes.len(), 130);
        assert_eq!(planted.graph.edges.len(), 520);
        let image: BTreeSet<NodeId> = planted.truth.values().copied().collect();
        let copy_edges = planted
            .graph
            .edges
            .iter()
            .filter(|e| image.contains(&e.source) || image.contains(&e.target))
            .count();
        assert_eq!(copy_edges, 120);
        assert!(planted
            .graph
            .edges
            .iter()
            .all(|e| image.contains(&e.source) == image.contains(&e.target)));
    }

    #[test]
    fn noise_deletes_and_jitters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_connected(&mut rng, &GraphParams::template());
        let copy = noisy_copy(&mut rng, &t, Noise::noisy(0.2, DAY), 1000);
        assert_eq!(copy.graph.edges.len(), 96);
        let shuffled = noisy_copy(&mut rng, &t, Noise::shuffled(), 1000);
        let count = |g: &SyntheticGraph, c: &str| g.edges.iter().filter(|e| e.channel == c).count();
        assert_eq!(count(&shuffled.graph, "email"), count(&t, "email"));
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_connected(&mut rng, &GraphParams::template());
        let (edges, nodes) = t.to_csv();
        let loaded =
            crate::graph::load_graph(edges.as_bytes(), Some(nodes.as_bytes()), &t.registry()).unwrap();
        assert_eq!(loaded.graph.edge_count(), 120);
        assert_eq!(loaded.graph.nodes(), t.build().nodes());
    }
}
