//! Edge-bundle similarity and whole-mapping scores.
//!
//! A bundle is summarized by its `(channel, direction)` key counts and its
//! sorted effective times. Two bundles are compared on three bounded,
//! symmetric components:
//!
//! * presence: Jaccard index of the key sets,
//! * count: generalized Jaccard (sum of minima over sum of maxima) of the
//!   per-key counts,
//! * temporal: best cosine between binned time histograms over a grid of
//!   offsets applied to the second bundle.
//!
//! The total is the convex combination given by [`SimilarityConfig`].

use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Channel, Direction, EdgeBundle, GraphError, GraphView, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("invalid similarity config: {0}")]
    InvalidConfig(String),
    #[error("mapping must cover at least two template nodes")]
    EmptyMapping,
    #[error("mapping is not injective: target {0} used twice")]
    NotInjective(NodeId),
    #[error("kind mismatch: template {template} cannot map to target {target}")]
    KindMismatch { template: NodeId, target: NodeId },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    pub w_presence: f64,
    pub w_count: f64,
    pub w_temporal: f64,
    /// Seconds per temporal bin.
    pub bin_width: f64,
    /// Largest offset tried when aligning time histograms.
    pub offset_range: f64,
    /// Offset grid step; `None` means `bin_width`.
    pub offset_step: Option<f64>,
    pub accept_threshold: f64,
    pub tie_epsilon: f64,
    /// Fold forward and backward keys together.
    pub ignore_direction: bool,
    /// Average the count component with the generalized Jaccard of per-key
    /// absolute weight sums.
    pub use_weights: bool,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            w_presence: 0.3,
            w_count: 0.3,
            w_temporal: 0.4,
            bin_width: 86_400.0,
            offset_range: 0.0,
            offset_step: None,
            accept_threshold: 0.6,
            tie_epsilon: 1e-9,
            ignore_direction: false,
            use_weights: false,
        }
    }
}

impl SimilarityConfig {
    pub fn offset_step(&self) -> f64 {
        self.offset_step.unwrap_or(self.bin_width)
    }

    pub fn validate(&self) -> Result<(), SimilarityError> {
        let bad = |msg: String| Err(SimilarityError::InvalidConfig(msg));
        let weights = [self.w_presence, self.w_count, self.w_temporal];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad(format!("weights must be non-negative, got {weights:?}"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return bad(format!("weights must sum to 1, got {sum}"));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return bad(format!("bin_width must be positive, got {}", self.bin_width));
        }
        if !(self.offset_range >= 0.0 && self.offset_range.is_finite()) {
            return bad(format!(
                "offset_range must be non-negative, got {}",
                self.offset_range
            ));
        }
        let step = self.offset_step();
        if !(step > 0.0 && step.is_finite()) {
            return bad(format!("offset_step must be positive, got {step}"));
        }
        if !(0.0..=1.0).contains(&self.accept_threshold) {
            return bad(format!(
                "accept_threshold must lie in [0, 1], got {}",
                self.accept_threshold
            ));
        }
        if !(self.tie_epsilon >= 0.0 && self.tie_epsilon.is_finite()) {
            return bad(format!(
                "tie_epsilon must be non-negative, got {}",
                self.tie_epsilon
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub total: f64,
    pub presence: f64,
    pub count: f64,
    pub temporal: f64,
}

impl SimilarityScore {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Component-wise mean; `total` stays the weighted sum of the means.
    pub fn mean(scores: &[SimilarityScore]) -> SimilarityScore {
        if scores.is_empty() {
            return Self::zero();
        }
        let n = scores.len() as f64;
        let sum = |f: fn(&SimilarityScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
        SimilarityScore {
            total: sum(|s| s.total),
            presence: sum(|s| s.presence),
            count: sum(|s| s.count),
            temporal: sum(|s| s.temporal),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KeyStat {
    pub count: u64,
    pub weight_sum: f64,
}

pub type ProfileKey = (Channel, Direction);

/// Summary of one bundle: per-key counts and weights plus sorted times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BundleProfile {
    pub per_key: BTreeMap<ProfileKey, KeyStat>,
    pub times: Vec<f64>,
}

impl BundleProfile {
    pub fn size(&self) -> u64 {
        self.per_key.values().map(|k| k.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Same profile with every key's direction folded onto `Forward`.
    pub fn undirected(&self) -> BundleProfile {
        let mut per_key: BTreeMap<ProfileKey, KeyStat> = BTreeMap::new();
        for ((channel, _), stat) in &self.per_key {
            let slot = per_key.entry((channel.clone(), Direction::Forward)).or_default();
            slot.count += stat.count;
            slot.weight_sum += stat.weight_sum;
        }
        BundleProfile {
            per_key,
            times: self.times.clone(),
        }
    }
}

impl Serialize for BundleProfile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Key<'a> {
            channel: &'a Channel,
            direction: Direction,
            count: u64,
            weight_sum: f64,
        }
        #[derive(Serialize)]
        struct Wire<'a> {
            keys: Keys<'a>,
            times: &'a [f64],
        }
        struct Keys<'a>(&'a BTreeMap<ProfileKey, KeyStat>);
        impl Serialize for Keys<'_> {
            fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
                for ((channel, direction), stat) in self.0 {
                    seq.serialize_element(&Key {
                        channel,
                        direction: *direction,
                        count: stat.count,
                        weight_sum: stat.weight_sum,
                    })?;
                }
                seq.end()
            }
        }
        Wire {
            keys: Keys(&self.per_key),
            times: &self.times,
        }
        .serialize(serializer)
    }
}

pub fn profile_of(bundle: &EdgeBundle) -> BundleProfile {
    let mut per_key: BTreeMap<ProfileKey, KeyStat> = BTreeMap::new();
    let mut times = Vec::with_capacity(bundle.edges.len());
    for edge in &bundle.edges {
        let slot = per_key.entry((edge.channel.clone(), edge.direction)).or_default();
        slot.count += 1;
        slot.weight_sum += edge.weight;
        times.push(edge.time);
    }
    times.sort_by(f64::total_cmp);
    BundleProfile { per_key, times }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        1.0
    } else {
        (num / den).clamp(0.0, 1.0)
    }
}

/// Sparse histogram: `(bin, count)` runs in ascending bin order.
fn binned(times: &[f64], shift: f64, origin: f64, width: f64) -> Vec<(i64, u64)> {
    let mut out: Vec<(i64, u64)> = Vec::new();
    for &t in times {
        let bin = ((t + shift - origin) / width).floor() as i64;
        match out.last_mut() {
            Some((b, c)) if *b == bin => *c += 1,
            _ => out.push((bin, 1)),
        }
    }
    out
}

fn cosine(a: &[(i64, u64)], b: &[(i64, u64)]) -> f64 {
    let norm = |h: &[(i64, u64)]| h.iter().map(|(_, c)| c * c).sum::<u64>();
    let (na, nb) = (norm(a), norm(b));
    if na == 0 || nb == 0 {
        return 0.0;
    }
    let (mut i, mut j, mut dot) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    // na * nb is exact in f64 for realistic bundle sizes, so identical
    // histograms give exactly 1
    (dot as f64 / ((na as f64) * (nb as f64)).sqrt()).clamp(0.0, 1.0)
}

/// Cosine between the binned histograms of `a` and `b + shift`, binned on a
/// grid anchored at the smallest of all (shifted) times.
fn shifted_cosine(a: &[f64], b: &[f64], shift: f64, width: f64) -> f64 {
    let origin = a[0].min(b[0] + shift);
    cosine(&binned(a, 0.0, origin, width), &binned(b, shift, origin, width))
}

/// Symmetric mean nearest-neighbor distance between `a` and `b + shift`.
fn alignment_residual(a: &[f64], b: &[f64], shift: f64) -> f64 {
    let shifted: Vec<f64> = b.iter().map(|t| t + shift).collect();
    let nearest = |xs: &[f64], t: f64| {
        let i = xs.partition_point(|&x| x < t);
        let mut best = f64::INFINITY;
        if i < xs.len() {
            best = best.min((xs[i] - t).abs());
        }
        if i > 0 {
            best = best.min((xs[i - 1] - t).abs());
        }
        best
    };
    let one = a.iter().map(|&t| nearest(&shifted, t)).sum::<f64>() / a.len() as f64;
    let two = shifted.iter().map(|&t| nearest(a, t)).sum::<f64>() / shifted.len() as f64;
    one + two
}

/// The offset grid `k * step` for `|k * step| <= offset_range`, ascending.
pub fn offset_grid(cfg: &SimilarityConfig) -> Vec<f64> {
    let step = cfg.offset_step();
    let n = (cfg.offset_range / step + 1e-9).floor() as i64;
    (-n..=n).map(|k| k as f64 * step).collect()
}

/// Offset for the second time set that maximizes the binned cosine.
///
/// Ties (within `tie_epsilon`) go to the offset whose shifted times sit
/// closest to the first set, then to the smallest `|offset|`, then to the
/// smallest offset. Both sets empty gives `(0, 1)`; exactly one empty gives
/// `(0, 0)`.
pub fn best_offset(times1: &[f64], times2: &[f64], cfg: &SimilarityConfig) -> (f64, f64) {
    match (times1.is_empty(), times2.is_empty()) {
        (true, true) => return (0.0, 1.0),
        (true, false) | (false, true) => return (0.0, 0.0),
        _ => {}
    }
    let grid = offset_grid(cfg);
    let scored: Vec<(f64, f64)> = grid
        .iter()
        .map(|&d| (d, shifted_cosine(times1, times2, d, cfg.bin_width)))
        .collect();
    let top = scored.iter().map(|(_, c)| *c).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<(f64, f64)> = scored
        .into_iter()
        .filter(|(_, c)| *c >= top - cfg.tie_epsilon)
        .collect();
    if tied.len() == 1 {
        return tied[0];
    }
    tied.into_iter()
        .map(|(d, c)| (alignment_residual(times1, times2, d), d, c))
        .min_by(|x, y| {
            x.0.total_cmp(&y.0)
                .then(x.1.abs().total_cmp(&y.1.abs()))
                .then(x.1.total_cmp(&y.1))
        })
        .map(|(_, d, c)| (d, c))
        .expect("grid is never empty")
}

/// Similarity of two profiles under `cfg`.
pub fn profile_similarity(p1: &BundleProfile, p2: &BundleProfile, cfg: &SimilarityConfig) -> SimilarityScore {
    let folded;
    let (p1, p2) = if cfg.ignore_direction {
        folded = (p1.undirected(), p2.undirected());
        (&folded.0, &folded.1)
    } else {
        (p1, p2)
    };

    let keys: BTreeSet<&ProfileKey> = p1.per_key.keys().chain(p2.per_key.keys()).collect();
    let shared = keys
        .iter()
        .filter(|k| p1.per_key.contains_key(**k) && p2.per_key.contains_key(**k))
        .count();
    let presence = ratio(shared as f64, keys.len() as f64);

    let (mut min_c, mut max_c, mut min_w, mut max_w) = (0u64, 0u64, 0.0f64, 0.0f64);
    for key in &keys {
        let a = p1.per_key.get(*key).copied().unwrap_or_default();
        let b = p2.per_key.get(*key).copied().unwrap_or_default();
        min_c += a.count.min(b.count);
        max_c += a.count.max(b.count);
        min_w += a.weight_sum.abs().min(b.weight_sum.abs());
        max_w += a.weight_sum.abs().max(b.weight_sum.abs());
    }
    let mut count = ratio(min_c as f64, max_c as f64);
    if cfg.use_weights {
        count = 0.5 * (count + ratio(min_w, max_w));
    }

    let (_, temporal) = best_offset(&p1.times, &p2.times, cfg);
    let total = (cfg.w_presence * presence + cfg.w_count * count + cfg.w_temporal * temporal).clamp(0.0, 1.0);
    SimilarityScore {
        total,
        presence,
        count,
        temporal,
    }
}

pub fn bundle_similarity(b1: &EdgeBundle, b2: &EdgeBundle, cfg: &SimilarityConfig) -> SimilarityScore {
    profile_similarity(&profile_of(b1), &profile_of(b2), cfg)
}

/// Checks a template-to-target node map: both ends exist, kinds are
/// compatible, and no target is used twice.
pub fn validate_mapping(
    template: &GraphView,
    target: &GraphView,
    mapping: &BTreeMap<NodeId, NodeId>,
) -> Result<(), SimilarityError> {
    let mut used = BTreeSet::new();
    for (&t, &x) in mapping {
        let tk = template.graph().kind(t).ok_or(GraphError::UnknownNode(t))?;
        let xk = target.graph().kind(x).ok_or(GraphError::UnknownNode(x))?;
        if !tk.compatible(xk) {
            return Err(SimilarityError::KindMismatch {
                template: t,
                target: x,
            });
        }
        if !used.insert(x) {
            return Err(SimilarityError::NotInjective(x));
        }
    }
    Ok(())
}

/// Mean bundle similarity over unordered template pairs inside the mapping's
/// domain whose template bundle is non-empty. Zero when no such pair exists.
pub fn mapping_score(
    template: &GraphView,
    target: &GraphView,
    mapping: &BTreeMap<NodeId, NodeId>,
    cfg: &SimilarityConfig,
) -> Result<f64, SimilarityError> {
    if mapping.len() < 2 {
        return Err(SimilarityError::EmptyMapping);
    }
    validate_mapping(template, target, mapping)?;
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (&a, &ma) in mapping {
        let ia = template.index(a)?;
        for ib in template.neighbor_indices(ia) {
            let b = template.graph().id_at(ib);
            if b <= a {
                continue;
            }
            let Some(&mb) = mapping.get(&b) else {
                continue;
            };
            let t_bundle = template.bundle_by_index(ia, ib);
            let x_bundle = target.edge_bundle(ma, mb)?;
            sum += bundle_similarity(&t_bundle, &x_bundle, cfg).total;
            pairs += 1;
        }
    }
    Ok(if pairs == 0 { 0.0 } else { sum / pairs as f64 })
}
