//! Iterative matching state: matched set, frontier, mapping and decision log.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{now_millis, rank_with_ties, Actor, Decision, MatchError, RunStatus, Verdict};
use crate::graph::{Channel, EdgeBundle, GraphView, NodeId};
use crate::similarity::{profile_of, profile_similarity, BundleProfile, SimilarityConfig, SimilarityScore};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnippetEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub channel: Channel,
    pub time: f64,
    pub weight: f64,
}

/// A node set and the visible edges among it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snippet {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<SnippetEdge>,
}

/// Side-by-side context for reviewing a candidate: the matched template
/// nodes plus the frontier node, and their images plus the candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub template: Snippet,
    pub target: Snippet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidatePair {
    pub frontier: NodeId,
    /// Smallest matched neighbor of `frontier`.
    pub anchor: NodeId,
    /// Every matched neighbor of `frontier`; the score averages over them.
    pub anchors: Vec<NodeId>,
    pub candidate: NodeId,
    pub score: SimilarityScore,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub iterations: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// What is needed to rebuild a session: its seed, config and full log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub seed: Vec<(NodeId, NodeId)>,
    pub config: SimilarityConfig,
    pub log: Vec<Decision>,
}

/// Deterministic snapshot of a session's matching state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub template_nodes: usize,
    pub matched: Vec<(NodeId, NodeId)>,
    pub unmatched: Vec<NodeId>,
    pub rejected: Vec<(NodeId, NodeId)>,
    pub decisions: usize,
}

/// Per-anchor similarity for a `(anchor, frontier, candidate)` triple.
type ScoreCache = HashMap<(NodeId, NodeId, NodeId), SimilarityScore>;

struct Scored {
    frontier: NodeId,
    candidate: NodeId,
    anchors: Vec<NodeId>,
    score: SimilarityScore,
}

#[derive(Debug, Clone)]
pub struct MatchSession {
    id: String,
    template: GraphView,
    target: GraphView,
    cfg: SimilarityConfig,
    seed: BTreeMap<NodeId, NodeId>,
    mapping: BTreeMap<NodeId, NodeId>,
    image: BTreeMap<NodeId, NodeId>,
    unmatched: BTreeSet<NodeId>,
    rejected: BTreeSet<(NodeId, NodeId)>,
    log: Vec<Decision>,
}

impl MatchSession {
    /// Opens a session on `seed`: its keys form the matched set, every other
    /// template node starts unmatched, and each seed pair is logged as a
    /// user accept.
    pub fn new(
        id: impl Into<String>,
        template: GraphView,
        target: GraphView,
        seed: BTreeMap<NodeId, NodeId>,
        cfg: SimilarityConfig,
    ) -> Result<Self, MatchError> {
        cfg.validate()?;
        if seed.is_empty() {
            return Err(MatchError::EmptySeed);
        }
        let mut image = BTreeMap::new();
        for (&t, &x) in &seed {
            let tk = template
                .graph()
                .kind(t)
                .ok_or(crate::graph::GraphError::UnknownNode(t))?;
            let xk = target
                .graph()
                .kind(x)
                .ok_or(crate::graph::GraphError::UnknownNode(x))?;
            if !tk.compatible(xk) {
                return Err(MatchError::KindMismatch {
                    template: t,
                    target: x,
                });
            }
            if image.insert(x, t).is_some() {
                return Err(MatchError::NotInjective(x));
            }
        }
        let unmatched = template
            .graph()
            .node_ids()
            .filter(|n| !seed.contains_key(n))
            .collect();
        let at = now_millis();
        let log = seed
            .iter()
            .map(|(&t, &x)| Decision {
                template: t,
                target: x,
                verdict: Verdict::Accept,
                actor: Actor::User,
                at,
                score: None,
            })
            .collect();
        Ok(MatchSession {
            id: id.into(),
            template,
            target,
            cfg,
            mapping: seed.clone(),
            seed,
            image,
            unmatched,
            rejected: BTreeSet::new(),
            log,
        })
    }

    /// Rebuilds a session by replaying an exported log from its seed.
    pub fn replay(
        id: impl Into<String>,
        template: GraphView,
        target: GraphView,
        saved: &SessionLog,
    ) -> Result<Self, MatchError> {
        let seed: BTreeMap<NodeId, NodeId> = saved.seed.iter().copied().collect();
        if seed.len() != saved.seed.len() {
            return Err(MatchError::InvalidLog("duplicate seed keys".into()));
        }
        let mut session = MatchSession::new(id, template, target, seed, saved.config)?;
        let n = session.seed.len();
        if saved.log.len() < n {
            return Err(MatchError::InvalidLog("log shorter than seed".into()));
        }
        for (slot, entry) in session.log.iter_mut().zip(&saved.log[..n]) {
            if (entry.template, entry.target, entry.verdict) != (slot.template, slot.target, slot.verdict) {
                return Err(MatchError::InvalidLog("log does not start with the seed".into()));
            }
            *slot = entry.clone();
        }
        for entry in &saved.log[n..] {
            session
                .apply(entry.clone())
                .map_err(|e| MatchError::InvalidLog(format!("{e}")))?;
        }
        Ok(session)
    }

    pub fn export(&self) -> SessionLog {
        SessionLog {
            seed: self.seed.iter().map(|(&t, &x)| (t, x)).collect(),
            config: self.cfg,
            log: self.log.clone(),
        }
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            template_nodes: self.template.graph().node_count(),
            matched: self.mapping.iter().map(|(&t, &x)| (t, x)).collect(),
            unmatched: self.unmatched.iter().copied().collect(),
            rejected: self.rejected.iter().copied().collect(),
            decisions: self.log.len(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn template(&self) -> &GraphView {
        &self.template
    }

    pub fn target(&self) -> &GraphView {
        &self.target
    }

    pub fn config(&self) -> &SimilarityConfig {
        &self.cfg
    }

    pub fn seed(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.seed
    }

    /// The mapping `M`; its keys are the matched set `S`.
    pub fn mapping(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.mapping
    }

    pub fn matched(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.mapping.keys().copied()
    }

    /// The unmatched set `T`.
    pub fn unmatched(&self) -> &BTreeSet<NodeId> {
        &self.unmatched
    }

    pub fn rejected(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.rejected
    }

    pub fn log(&self) -> &[Decision] {
        &self.log
    }

    /// Fraction of template nodes that are matched.
    pub fn coverage(&self) -> f64 {
        let n = self.template.graph().node_count();
        if n == 0 {
            0.0
        } else {
            self.mapping.len() as f64 / n as f64
        }
    }

    fn template_bundle(&self, anchor: NodeId, frontier: NodeId) -> EdgeBundle {
        self.template
            .edge_bundle(anchor, frontier)
            .expect("session nodes exist in the template")
    }

    /// Matched neighbors of a template node, ascending.
    fn anchors_of(&self, node: NodeId) -> Vec<NodeId> {
        let Ok(index) = self.template.index(node) else {
            return Vec::new();
        };
        self.template
            .neighbor_indices(index)
            .into_iter()
            .map(|n| self.template.graph().id_at(n))
            .filter(|n| self.mapping.contains_key(n))
            .collect()
    }

    fn pair_allowed(&self, frontier: NodeId, candidate: NodeId) -> bool {
        !self.image.contains_key(&candidate)
            && !self.rejected.contains(&(frontier, candidate))
            && match (
                self.template.graph().kind(frontier),
                self.target.graph().kind(candidate),
            ) {
                (Some(a), Some(b)) => a.compatible(b),
                _ => false,
            }
    }

    fn score_candidates(&self, mut cache: Option<&mut ScoreCache>) -> Vec<Scored> {
        let mut out = Vec::new();
        for &frontier in &self.unmatched {
            let anchors = self.anchors_of(frontier);
            if anchors.is_empty() {
                continue;
            }
            let profiles: Vec<(NodeId, NodeId, BundleProfile)> = anchors
                .iter()
                .map(|&a| {
                    (
                        a,
                        self.mapping[&a],
                        profile_of(&self.template_bundle(a, frontier)),
                    )
                })
                .collect();

            let mut candidates = BTreeSet::new();
            for (_, image, _) in &profiles {
                let index = self
                    .target
                    .index(*image)
                    .expect("mapped nodes exist in the target");
                for n in self.target.neighbor_indices(index) {
                    let id = self.target.graph().id_at(n);
                    if self.pair_allowed(frontier, id) {
                        candidates.insert(id);
                    }
                }
            }

            for candidate in candidates {
                let per_anchor: Vec<SimilarityScore> = profiles
                    .iter()
                    .map(|(anchor, image, profile)| {
                        let key = (*anchor, frontier, candidate);
                        if let Some(hit) = cache.as_ref().and_then(|c| c.get(&key)) {
                            return *hit;
                        }
                        let bundle = self
                            .target
                            .edge_bundle(*image, candidate)
                            .expect("candidate exists in the target");
                        let score = profile_similarity(profile, &profile_of(&bundle), &self.cfg);
                        if let Some(c) = cache.as_deref_mut() {
                            c.insert(key, score);
                        }
                        score
                    })
                    .collect();
                out.push(Scored {
                    frontier,
                    candidate,
                    anchors: anchors.clone(),
                    score: SimilarityScore::mean(&per_anchor),
                });
            }
        }
        out
    }

    fn ranked(&self, cache: Option<&mut ScoreCache>) -> Vec<Scored> {
        let items = self
            .score_candidates(cache)
            .into_iter()
            .map(|s| (s.score.total, (s.frontier, s.candidate), s))
            .collect();
        rank_with_ties(items, self.cfg.tie_epsilon)
            .into_iter()
            .map(|(_, _, s)| s)
            .collect()
    }

    fn snippet(view: &GraphView, nodes: Vec<NodeId>) -> Snippet {
        let graph = view.graph();
        let positions: BTreeSet<u32> = nodes.iter().filter_map(|&n| graph.index_of(n)).collect();
        let mut edges: Vec<(usize, SnippetEdge)> = Vec::new();
        for &p in &positions {
            for entry in view.incident(p) {
                let (source, _) = graph.endpoints(entry.edge);
                if source != p || !positions.contains(&entry.neighbor) {
                    continue;
                }
                let edge = graph.edge(entry.edge as usize);
                edges.push((
                    entry.edge as usize,
                    SnippetEdge {
                        source: edge.source,
                        target: edge.target,
                        channel: graph.channel(edge.channel).clone(),
                        time: view.effective_time(edge),
                        weight: edge.weight,
                    },
                ));
            }
        }
        edges.sort_by(|a, b| a.1.time.total_cmp(&b.1.time).then(a.0.cmp(&b.0)));
        Snippet {
            nodes,
            edges: edges.into_iter().map(|(_, e)| e).collect(),
        }
    }

    fn evidence(&self, frontier: NodeId, candidate: NodeId) -> Evidence {
        let mut template_nodes: Vec<NodeId> = self.mapping.keys().copied().collect();
        template_nodes.push(frontier);
        let mut target_nodes: Vec<NodeId> = self.mapping.values().copied().collect();
        target_nodes.push(candidate);
        Evidence {
            template: Self::snippet(&self.template, template_nodes),
            target: Self::snippet(&self.target, target_nodes),
        }
    }

    /// The `k` best candidate pairs across the whole frontier.
    ///
    /// Ordered by total score descending; scores within `tie_epsilon` fall
    /// back to the smaller template id, then the smaller target id.
    pub fn propose(&self, k: usize) -> Vec<CandidatePair> {
        self.ranked(None)
            .into_iter()
            .take(k)
            .map(|s| CandidatePair {
                frontier: s.frontier,
                anchor: s.anchors[0],
                evidence: self.evidence(s.frontier, s.candidate),
                anchors: s.anchors,
                candidate: s.candidate,
                score: s.score,
            })
            .collect()
    }

    fn top(&self, cache: &mut ScoreCache) -> Option<Scored> {
        let mut all = self.score_candidates(Some(cache));
        let best = all
            .iter()
            .map(|s| s.score.total)
            .fold(f64::NEG_INFINITY, f64::max);
        let eps = self.cfg.tie_epsilon;
        all.retain(|s| s.score.total >= best - eps);
        all.into_iter().min_by_key(|s| (s.frontier, s.candidate))
    }

    /// Current mean per-anchor score of a pair (0 without anchors).
    pub fn pair_score(&self, frontier: NodeId, candidate: NodeId) -> Result<SimilarityScore, MatchError> {
        self.check_known(frontier, candidate)?;
        let per_anchor: Vec<SimilarityScore> = self
            .anchors_of(frontier)
            .into_iter()
            .map(|a| {
                let t = profile_of(&self.template_bundle(a, frontier));
                let x = self
                    .target
                    .edge_bundle(self.mapping[&a], candidate)
                    .expect("nodes exist");
                profile_similarity(&t, &profile_of(&x), &self.cfg)
            })
            .collect();
        Ok(SimilarityScore::mean(&per_anchor))
    }

    fn check_known(&self, template: NodeId, target: NodeId) -> Result<(), MatchError> {
        if self.template.graph().contains(template) && self.target.graph().contains(target) {
            Ok(())
        } else {
            Err(MatchError::UnknownPair { template, target })
        }
    }

    /// Records a verdict on `(template, target)`.
    ///
    /// Accepting moves the template node from the unmatched set into the
    /// mapping. Rejecting excludes the pair from future proposals; a user
    /// may still accept a rejected pair explicitly.
    pub fn decide(
        &mut self,
        template: NodeId,
        target: NodeId,
        verdict: Verdict,
        actor: Actor,
    ) -> Result<&Decision, MatchError> {
        self.check_known(template, target)?;
        let score = self.pair_score(template, target)?.total;
        self.apply(Decision {
            template,
            target,
            verdict,
            actor,
            at: now_millis(),
            score: Some(score),
        })?;
        Ok(self.log.last().expect("just appended"))
    }

    fn apply(&mut self, decision: Decision) -> Result<(), MatchError> {
        let (t, x) = (decision.template, decision.target);
        self.check_known(t, x)?;
        match decision.verdict {
            Verdict::Accept => {
                if !self.unmatched.contains(&t) {
                    return Err(MatchError::AlreadyMatched(t));
                }
                if self.image.contains_key(&x) {
                    return Err(MatchError::TargetTaken(x));
                }
                let tk = self.template.graph().kind(t).unwrap_or_default();
                let xk = self.target.graph().kind(x).unwrap_or_default();
                if !tk.compatible(xk) {
                    return Err(MatchError::KindMismatch {
                        template: t,
                        target: x,
                    });
                }
                if self.rejected.contains(&(t, x)) {
                    if decision.actor == Actor::Auto {
                        return Err(MatchError::RejectedPair {
                            template: t,
                            target: x,
                        });
                    }
                    self.rejected.remove(&(t, x));
                }
                self.unmatched.remove(&t);
                self.mapping.insert(t, x);
                self.image.insert(x, t);
            }
            Verdict::Reject => {
                if self.mapping.get(&t) == Some(&x) {
                    return Err(MatchError::AlreadyMatched(t));
                }
                self.rejected.insert((t, x));
            }
        }
        self.log.push(decision);
        Ok(())
    }

    /// Unattended loop: take the single best pair, accept it when its score
    /// reaches the threshold, reject it otherwise, and repeat until the
    /// frontier is empty, no candidate survives, or the budget is spent.
    pub fn run_auto(&mut self, max_iterations: usize) -> RunReport {
        let mut cache = ScoreCache::new();
        let mut report = RunReport {
            status: RunStatus::IterationCap,
            iterations: 0,
            accepted: 0,
            rejected: 0,
        };
        loop {
            if self.unmatched.is_empty() {
                report.status = RunStatus::Complete;
                return report;
            }
            if report.iterations >= max_iterations {
                report.status = RunStatus::IterationCap;
                return report;
            }
            let Some(best) = self.top(&mut cache) else {
                report.status = RunStatus::Exhausted;
                return report;
            };
            report.iterations += 1;
            let verdict = if best.score.total >= self.cfg.accept_threshold {
                report.accepted += 1;
                Verdict::Accept
            } else {
                report.rejected += 1;
                Verdict::Reject
            };
            self.apply(Decision {
                template: best.frontier,
                target: best.candidate,
                verdict,
                actor: Actor::Auto,
                at: now_millis(),
                score: Some(best.score.total),
            })
            .expect("proposals satisfy the decision preconditions");
        }
    }
}
