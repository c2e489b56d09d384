//! Seed signatures: a rare motif of the template and its occurrences in a target.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{rank_with_ties, MatchError};
use crate::graph::{Channel, GraphView, NodeId, NodeKind};
use crate::similarity::{profile_of, profile_similarity, BundleProfile, SimilarityConfig};

/// Most non-person nodes added next to the rare pair.
const MAX_EXTRA_NODES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequiredBundle {
    /// Positions into [`SeedSignature::nodes`], `i < j`; the profile is
    /// oriented from `nodes[i]` to `nodes[j]`.
    pub i: usize,
    pub j: usize,
    pub profile: BundleProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSignature {
    /// The rarest visible channel of the template.
    pub channel: Channel,
    /// The rare pair (ascending ids) followed by up to two shared non-person neighbors.
    pub nodes: Vec<NodeId>,
    pub kinds: Vec<NodeKind>,
    pub required: Vec<RequiredBundle>,
}

/// A placement of the signature in a target graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedMatch {
    /// `(signature node, target node)` in signature order.
    pub assignment: Vec<(NodeId, NodeId)>,
    pub score: f64,
}

impl SeedMatch {
    pub fn mapping(&self) -> BTreeMap<NodeId, NodeId> {
        self.assignment.iter().copied().collect()
    }
}

/// Picks the template's rarest channel, the smallest node pair joined by it,
/// and the non-person nodes adjacent to both.
pub fn derive_seed_signature(template: &GraphView) -> Result<SeedSignature, MatchError> {
    derive_seed_signatures(template, 1).map(|mut sigs| sigs.swap_remove(0))
}

/// Up to `limit` signatures in preference order: every pair of the rarest
/// channel by ascending ids, then the pairs of the next rarest channel, and
/// so on. The first entry is [`derive_seed_signature`].
/// A channel's visible edge count and the unordered node pairs it joins.
type ChannelPairs<'a> = (usize, &'a Channel, BTreeSet<(NodeId, NodeId)>);

pub fn derive_seed_signatures(template: &GraphView, limit: usize) -> Result<Vec<SeedSignature>, MatchError> {
    let graph = template.graph();
    let mut channels: Vec<ChannelPairs> = Vec::new();
    for (id, channel) in template.enabled_channels() {
        let mut count = 0;
        let mut pairs = BTreeSet::new();
        for e in template.visible_channel_edges(id) {
            let (s, t) = graph.endpoints(e);
            if s == t {
                continue;
            }
            count += 1;
            let (x, y) = (graph.id_at(s), graph.id_at(t));
            pairs.insert((x.min(y), x.max(y)));
        }
        if count > 0 {
            channels.push((count, channel, pairs));
        }
    }
    if channels.is_empty() {
        return Err(MatchError::NoVisibleEdges);
    }
    channels.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.as_str().cmp(b.1.as_str())));

    let mut out = Vec::new();
    for (_, channel, pairs) in channels {
        for (a, b) in pairs {
            if out.len() >= limit.max(1) {
                return Ok(out);
            }
            out.push(signature_at(template, channel, a, b)?);
        }
    }
    Ok(out)
}

fn signature_at(
    template: &GraphView,
    channel: &Channel,
    a: NodeId,
    b: NodeId,
) -> Result<SeedSignature, MatchError> {
    let graph = template.graph();
    let ia = template.index(a)?;
    let ib = template.index(b)?;
    let na: BTreeSet<u32> = template.neighbor_indices(ia).into_iter().collect();
    let extras: Vec<NodeId> = template
        .neighbor_indices(ib)
        .into_iter()
        .filter(|n| na.contains(n) && *n != ia && *n != ib)
        .filter(|&n| graph.kind_at(n) != NodeKind::Person)
        .map(|n| graph.id_at(n))
        .take(MAX_EXTRA_NODES)
        .collect();

    let mut nodes = vec![a, b];
    nodes.extend(extras);
    let kinds = nodes.iter().map(|&n| graph.kind(n).unwrap_or_default()).collect();
    let mut required = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let bundle = template.edge_bundle(nodes[i], nodes[j])?;
            if !bundle.is_empty() {
                required.push(RequiredBundle {
                    i,
                    j,
                    profile: profile_of(&bundle),
                });
            }
        }
    }
    Ok(SeedSignature {
        channel: channel.clone(),
        nodes,
        kinds,
        required,
    })
}

/// Ranked placements of `sig` in `target`.
///
/// Candidate pairs come from the target's visible edges on the signature
/// channel; extra nodes are drawn from the common neighbors of already
/// placed nodes. Each complete, kind-compatible placement with non-empty
/// bundles on every required pair is scored by the mean similarity over
/// required pairs. Ties (within `tie_epsilon`) go to the smaller target
/// tuple.
pub fn find_seeds(
    target: &GraphView,
    sig: &SeedSignature,
    cfg: &SimilarityConfig,
    limit: usize,
) -> Vec<SeedMatch> {
    let graph = target.graph();
    let Some(channel) = graph.registry().id(sig.channel.as_str()) else {
        return Vec::new();
    };
    if sig.nodes.len() < 2 || limit == 0 {
        return Vec::new();
    }
    let pairs: BTreeSet<(u32, u32)> = target
        .visible_channel_edges(channel)
        .filter_map(|e| {
            let (s, t) = graph.endpoints(e);
            (s != t).then_some((s.min(t), s.max(t)))
        })
        .collect();

    let mut placements: Vec<Vec<u32>> = Vec::new();
    for &(u, v) in &pairs {
        for (x0, x1) in [(u, v), (v, u)] {
            if !sig.kinds[0].compatible(graph.kind_at(x0)) || !sig.kinds[1].compatible(graph.kind_at(x1)) {
                continue;
            }
            extend(target, sig, &mut vec![x0, x1], &mut placements);
        }
    }

    let scored: Vec<(f64, Vec<NodeId>, ())> = placements
        .into_iter()
        .map(|placement| {
            let total: f64 = sig
                .required
                .iter()
                .map(|req| {
                    let bundle = target.bundle_by_index(placement[req.i], placement[req.j]);
                    profile_similarity(&req.profile, &profile_of(&bundle), cfg).total
                })
                .sum();
            let score = if sig.required.is_empty() {
                0.0
            } else {
                total / sig.required.len() as f64
            };
            let ids = placement.iter().map(|&i| graph.id_at(i)).collect();
            (score, ids, ())
        })
        .collect();

    rank_with_ties(scored, cfg.tie_epsilon)
        .into_iter()
        .take(limit)
        .map(|(score, ids, ())| SeedMatch {
            assignment: sig.nodes.iter().copied().zip(ids).collect(),
            score,
        })
        .collect()
}

/// Depth-first completion of a partial placement.
fn extend(target: &GraphView, sig: &SeedSignature, placed: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    let k = placed.len();
    if k == sig.nodes.len() {
        let complete = sig
            .required
            .iter()
            .all(|r| target.has_visible_edge(placed[r.i], placed[r.j]));
        if complete {
            out.push(placed.clone());
        }
        return;
    }
    let graph = target.graph();
    // nodes already placed that the next one must touch
    let linked: Vec<u32> = sig
        .required
        .iter()
        .filter(|r| r.j == k)
        .map(|r| placed[r.i])
        .collect();
    let candidates: Vec<u32> = match linked.split_first() {
        Some((first, rest)) => target
            .neighbor_indices(*first)
            .into_iter()
            .filter(|&n| rest.iter().all(|&r| target.has_visible_edge(r, n)))
            .collect(),
        // unreachable for derived signatures: extras always touch the pair
        None => (0..graph.node_count() as u32).collect(),
    };
    for n in candidates {
        if placed.contains(&n) || !sig.kinds[k].compatible(graph.kind_at(n)) {
            continue;
        }
        placed.push(n);
        extend(target, sig, placed, out);
        placed.pop();
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::{ChannelRegistry, GraphBuilder, TemporalMultigraph, ViewConfig};

    fn fixture() -> Arc<TemporalMultigraph> {
        let mut b = GraphBuilder::new(ChannelRegistry::default());
        for id in 1..=3 {
            b.add_node(NodeId(id), NodeKind::Person, None);
        }
        b.add_node(NodeId(4), NodeKind::Item, None);
        b.add_edge(NodeId(1), NodeId(2), "email", 100.0, 1.0).unwrap();
        b.add_edge(NodeId(1), NodeId(2), "email", 200.0, 1.0).unwrap();
        b.add_edge(NodeId(2), NodeId(3), "phone", 150.0, 1.0).unwrap();
        b.add_edge(NodeId(1), NodeId(4), "sell", 300.0, 2.0).unwrap();
        b.add_edge(NodeId(3), NodeId(4), "buy", 400.0, 5.0).unwrap();
        Arc::new(b.build())
    }

    /// Two persons joined by procurement, sharing an item, plus chatter.
    fn procurement_motif(b: &mut GraphBuilder, base: u64, time: f64) {
        let n = |i: u64| NodeId(base + i);
        b.add_node(n(1), NodeKind::Person, None);
        b.add_node(n(2), NodeKind::Person, None);
        b.add_node(n(3), NodeKind::Item, None);
        b.add_node(n(4), NodeKind::Person, None);
        b.add_edge(n(1), n(2), "procurement", time, 1.0).unwrap();
        b.add_edge(n(1), n(3), "buy", time + 10.0, 1.0).unwrap();
        b.add_edge(n(2), n(3), "sell", time + 20.0, 1.0).unwrap();
        b.add_edge(n(1), n(4), "email", time + 30.0, 1.0).unwrap();
        b.add_edge(n(2), n(4), "email", time + 40.0, 1.0).unwrap();
        b.add_edge(n(4), n(1), "email", time + 50.0, 1.0).unwrap();
        b.add_edge(n(4), n(3), "buy", time + 60.0, 1.0).unwrap();
        b.add_edge(n(3), n(4), "sell", time + 70.0, 1.0).unwrap();
    }

    #[test]
    fn fixture_signature_uses_lexicographic_tie_break() {
        let sig = derive_seed_signature(&GraphView::full(fixture())).unwrap();
        assert_eq!(sig.channel.as_str(), "buy");
        assert_eq!(sig.nodes, vec![NodeId(3), NodeId(4)]);
        assert_eq!(sig.required.len(), 1);
        assert_eq!(sig.required[0].profile.size(), 1);
    }

    #[test]
    fn procurement_signature_includes_shared_item() {
        let mut b = GraphBuilder::new(ChannelRegistry::default());
        procurement_motif(&mut b, 0, 1000.0);
        let sig = derive_seed_signature(&GraphView::full(Arc::new(b.build()))).unwrap();
        assert_eq!(sig.channel.as_str(), "procurement");
        assert_eq!(sig.nodes, vec![NodeId(1), NodeId(2), NodeId(3)]);
        assert_eq!(
            sig.kinds,
            vec![NodeKind::Person, NodeKind::Person, NodeKind::Item]
        );
        assert_eq!(sig.required.len(), 3);
    }

    #[test]
    fn single_edge_template() {
        let mut b = GraphBuilder::new(ChannelRegistry::default());
        b.add_edge(NodeId(8), NodeId(5), "phone", 1.0, 1.0).unwrap();
        let sig = derive_seed_signature(&GraphView::full(Arc::new(b.build()))).unwrap();
        assert_eq!(sig.nodes, vec![NodeId(5), NodeId(8)]);
        assert_eq!(sig.required.len(), 1);
    }

    #[test]
    fn no_visible_edges_is_an_error() {
        let g = fixture();
        let view = g.view(ViewConfig::all().with_channels(&["author"])).unwrap();
        assert_eq!(derive_seed_signature(&view), Err(MatchError::NoVisibleEdges));
    }

    #[test]
    fn finds_planted_motifs_in_id_order() {
        let mut t = GraphBuilder::new(ChannelRegistry::default());
        procurement_motif(&mut t, 0, 1000.0);
        let template = GraphView::full(Arc::new(t.build()));
        let sig = derive_seed_signature(&template).unwrap();

        let mut b = GraphBuilder::new(ChannelRegistry::default());
        procurement_motif(&mut b, 500, 1000.0);
        procurement_motif(&mut b, 100, 1000.0);
        // a decoy procurement pair without the shared item
        b.add_node(NodeId(900), NodeKind::Person, None);
        b.add_node(NodeId(901), NodeKind::Person, None);
        b.add_edge(NodeId(900), NodeId(901), "procurement", 1000.0, 1.0)
            .unwrap();
        let target = GraphView::full(Arc::new(b.build()));
        let seeds = find_seeds(&target, &sig, &SimilarityConfig::default(), 10);
        // both orientations of both motifs; flipped ones lose on direction
        assert_eq!(seeds.len(), 4);
        assert!(seeds[2].score < 1.0);
        assert_eq!(
            seeds[0].assignment,
            vec![
                (NodeId(1), NodeId(101)),
                (NodeId(2), NodeId(102)),
                (NodeId(3), NodeId(103))
            ]
        );
        assert_eq!(seeds[0].score, 1.0);
        assert_eq!(seeds[1].assignment[0], (NodeId(1), NodeId(501)));
        assert_eq!(seeds[1].score, 1.0);

        let off = target
            .graph_arc()
            .view(ViewConfig::all().with_channels(&["buy", "sell", "email"]))
            .unwrap();
        assert!(find_seeds(&off, &sig, &SimilarityConfig::default(), 10).is_empty());
        assert_eq!(
            find_seeds(&target, &sig, &SimilarityConfig::default(), 1).len(),
            1
        );
    }
}
