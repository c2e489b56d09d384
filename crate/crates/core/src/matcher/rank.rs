//! The unattended pipeline and whole-candidate ranking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{derive_seed_signatures, find_seeds, MatchError, MatchSession, RunStatus, SeedMatch};
use crate::graph::{GraphView, NodeId};
use crate::similarity::{mapping_score, SimilarityConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoOptions {
    /// Alternative signatures tried, in preference order.
    pub signature_trials: usize,
    /// Placements tried per signature, best first; the run with the highest final score wins.
    pub seed_trials: usize,
    pub max_iterations: usize,
}

impl Default for AutoOptions {
    fn default() -> Self {
        AutoOptions {
            signature_trials: 8,
            seed_trials: 3,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AutoMatch {
    pub seed: Option<SeedMatch>,
    pub session: Option<MatchSession>,
    pub status: RunStatus,
    /// `mapping_score * coverage`; zero without a seed.
    pub score: f64,
}

impl AutoMatch {
    pub fn mapping(&self) -> BTreeMap<NodeId, NodeId> {
        self.session
            .as_ref()
            .map(|s| s.mapping().clone())
            .unwrap_or_default()
    }
}

/// `mapping_score` scaled by the fraction of template nodes matched.
pub fn final_score(session: &MatchSession) -> f64 {
    match mapping_score(
        session.template(),
        session.target(),
        session.mapping(),
        session.config(),
    ) {
        Ok(score) => score * session.coverage(),
        Err(_) => 0.0,
    }
}

/// Derives the template's seed signatures, places each in `target`, and runs
/// the automatic policy from the best `seed_trials` placements of each of
/// the first `signature_trials` signatures. The run with the highest final
/// score is kept (earlier runs win ties); a perfect score stops the search.
pub fn auto_match(
    id: &str,
    template: &GraphView,
    target: &GraphView,
    cfg: &SimilarityConfig,
    opts: AutoOptions,
) -> Result<AutoMatch, MatchError> {
    cfg.validate()?;
    let sigs = derive_seed_signatures(template, opts.signature_trials.max(1))?;
    let mut best = AutoMatch {
        seed: None,
        session: None,
        status: RunStatus::NoSeed,
        score: 0.0,
    };
    let seeds = sigs
        .iter()
        .flat_map(|sig| find_seeds(target, sig, cfg, opts.seed_trials.max(1)));
    for seed in seeds {
        let mut session = MatchSession::new(id, template.clone(), target.clone(), seed.mapping(), *cfg)?;
        let report = session.run_auto(opts.max_iterations);
        let score = final_score(&session);
        if best.session.is_none() || score > best.score + cfg.tie_epsilon {
            let perfect = score >= 1.0 - cfg.tie_epsilon;
            best = AutoMatch {
                seed: Some(seed),
                session: Some(session),
                status: report.status,
                score,
            };
            if perfect {
                break;
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCandidate {
    pub index: usize,
    pub score: f64,
    pub mapping: Vec<(NodeId, NodeId)>,
    pub status: RunStatus,
}

/// Runs [`auto_match`] on every candidate and orders them by final score
/// (descending, ties by input position).
pub fn rank_candidates(
    template: &GraphView,
    candidates: &[GraphView],
    cfg: &SimilarityConfig,
    opts: AutoOptions,
) -> Vec<RankedCandidate> {
    let mut ranked: Vec<RankedCandidate> = candidates
        .iter()
        .enumerate()
        .map(|(index, candidate)| {
            match auto_match(&format!("candidate-{index}"), template, candidate, cfg, opts) {
                Ok(m) => RankedCandidate {
                    index,
                    score: m.score,
                    mapping: m.mapping().into_iter().collect(),
                    status: m.status,
                },
                Err(_) => RankedCandidate {
                    index,
                    score: 0.0,
                    mapping: Vec::new(),
                    status: RunStatus::NoSeed,
                },
            }
        })
        .collect();
    let eps = cfg.tie_epsilon;
    let items = ranked.drain(..).map(|r| (r.score, r.index, r)).collect();
    super::rank_with_ties(items, eps)
        .into_iter()
        .map(|(_, _, r)| r)
        .collect()
}
