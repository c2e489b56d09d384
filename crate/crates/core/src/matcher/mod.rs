//! Seed-and-expand matching of a template graph inside a target graph.
//!
//! The flow is: derive a small rare motif from the template
//! ([`derive_seed_signature`]), locate it in the target ([`find_seeds`]),
//! open a [`MatchSession`] on the best seed and grow the mapping one
//! frontier node at a time, either by explicit decisions or with
//! [`MatchSession::run_auto`]. [`rank_candidates`] runs the whole pipeline
//! against several candidate graphs.

mod rank;
mod seed;
mod session;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId};
use crate::similarity::SimilarityError;

pub use rank::{auto_match, rank_candidates, AutoMatch, AutoOptions, RankedCandidate};
pub use seed::{
    derive_seed_signature, derive_seed_signatures, find_seeds, RequiredBundle, SeedMatch, SeedSignature,
};
pub use session::{
    CandidatePair, Evidence, MatchSession, RunReport, SessionLog, SessionSummary, Snippet, SnippetEdge,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("template has no visible edges")]
    NoVisibleEdges,
    #[error("seed mapping is empty")]
    EmptySeed,
    #[error("kind mismatch: template {template} cannot map to target {target}")]
    KindMismatch { template: NodeId, target: NodeId },
    #[error("mapping is not injective: target {0} used twice")]
    NotInjective(NodeId),
    #[error("template node {0} is already matched")]
    AlreadyMatched(NodeId),
    #[error("target node {0} is already the image of another template node")]
    TargetTaken(NodeId),
    #[error("unknown pair ({template}, {target})")]
    UnknownPair { template: NodeId, target: NodeId },
    #[error("pair ({template}, {target}) was rejected; only a user may accept it")]
    RejectedPair { template: NodeId, target: NodeId },
    #[error("decision log does not replay: {0}")]
    InvalidLog(String),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    User,
    Auto,
}

/// One entry of a session's append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub template: NodeId,
    pub target: NodeId,
    pub verdict: Verdict,
    pub actor: Actor,
    /// Wall-clock milliseconds since the Unix epoch.
    pub at: u64,
    /// Candidate score when decided; `None` for seed entries.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Every template node is matched.
    Complete,
    /// Unmatched template nodes remain but no candidate survives.
    Exhausted,
    /// The iteration budget ran out first.
    IterationCap,
    /// No seed could be placed (ranking only).
    NoSeed,
}

/// Sorts by score descending; scores within `eps` of the head of their run
/// are ordered by `key` ascending instead.
pub(crate) fn rank_with_ties<K: Ord, T>(mut items: Vec<(f64, K, T)>, eps: f64) -> Vec<(f64, K, T)> {
    items.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let mut out = Vec::with_capacity(items.len());
    let mut group: Vec<(f64, K, T)> = Vec::new();
    for item in items {
        if let Some(head) = group.first() {
            if head.0 - item.0 > eps {
                group.sort_by(|a, b| a.1.cmp(&b.1));
                out.append(&mut group);
            }
        }
        group.push(item);
    }
    group.sort_by(|a, b| a.1.cmp(&b.1));
    out.append(&mut group);
    out
}

pub(crate) fn now_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_fall_back_to_keys() {
        let ranked = rank_with_ties(
            vec![(0.5, 3, 'a'), (0.9, 2, 'b'), (0.9 - 1e-12, 1, 'c'), (0.5, 0, 'd')],
            1e-9,
        );
        let order: Vec<char> = ranked.into_iter().map(|x| x.2).collect();
        assert_eq!(order, vec!['c', 'b', 'd', 'a']);
    }
}
