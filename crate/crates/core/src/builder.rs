//! Constraint-filtered enumeration of edges and hyperedges.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{edge_affinity_with, hyperedge_affinity, self_loop_affinity, Channels, HistogramLayout, MotionContext};
use crate::error::{Error, Result};
use crate::model::{default_arities, AffinityVector, Detection, Hypergraph, Tracklet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub max_degree: usize,
    /// Pixels per frame. `None` estimates it from the detections being linked.
    pub max_velocity: Option<f64>,
    pub max_frame_gap: u32,
    pub knn_k: usize,
    pub max_hyperedges_per_node: usize,
    pub histogram: HistogramLayout,
    /// Tuples whose affinity components are all at or below this are dropped.
    pub prune_eps: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            max_degree: 4,
            max_velocity: None,
            max_frame_gap: 7,
            knn_k: 8,
            max_hyperedges_per_node: 64,
            histogram: HistogramLayout::default(),
            prune_eps: 1e-6,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_degree < 2 {
            return Err(Error::Config(format!("max_degree must be >= 2, got {}", self.max_degree)));
        }
        if self.max_frame_gap < 1 || self.knn_k < 1 || self.max_hyperedges_per_node < 1 {
            return Err(Error::Config("max_frame_gap, knn_k and max_hyperedges_per_node must be >= 1".into()));
        }
        if let Some(v) = self.max_velocity {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("max_velocity must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Copy with every cap lifted, for exhaustive comparisons.
    pub fn uncapped(&self) -> Self {
        Self {
            knn_k: usize::MAX,
            max_hyperedges_per_node: usize::MAX,
            ..self.clone()
        }
    }

    fn velocity(&self) -> f64 {
        self.max_velocity.unwrap_or(f64::INFINITY)
    }
}

/// Orders two non-overlapping tracklets by time; `None` when they overlap.
fn temporal_order<'a>(a: &'a Tracklet, b: &'a Tracklet) -> Option<(&'a Tracklet, &'a Tracklet)> {
    if a.end_frame() < b.start_frame() {
        Some((a, b))
    } else if b.end_frame() < a.start_frame() {
        Some((b, a))
    } else {
        None
    }
}

/// Whether two tracklets may belong to one object: disjoint in time, close
/// enough in time, and reachable at the maximal velocity.
pub fn admissible_pair(a: &Tracklet, b: &Tracklet, cfg: &BuildConfig) -> bool {
    let Some((earlier, later)) = temporal_order(a, b) else {
        return false;
    };
    let gap = later.start_frame() - earlier.end_frame();
    if gap > cfg.max_frame_gap {
        return false;
    }
    earlier.last().center_distance(later.first()) <= cfg.velocity() * gap as f64
}

/// 2× the 95th percentile of nearest-neighbor displacement between
/// consecutive frames, floored at one pixel per frame.
pub fn estimate_max_velocity(detections: &[Detection]) -> f64 {
    let mut frames: std::collections::BTreeMap<u32, Vec<&Detection>> = std::collections::BTreeMap::new();
    for d in detections {
        frames.entry(d.frame).or_default().push(d);
    }
    let mut steps = Vec::new();
    for (f, dets) in &frames {
        let Some(prev) = f.checked_sub(1).and_then(|p| frames.get(&p)) else {
            continue;
        };
        // Only mutual nearest neighbours count as matches, so a dropout does
        // not pair a detection with some other object's previous position.
        let nearest = |d: &Detection, pool: &[&Detection]| {
            pool.iter()
                .enumerate()
                .map(|(i, p)| (p.center_distance(d), i))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        };
        for (i, d) in dets.iter().enumerate() {
            let Some((dist, j)) = nearest(d, prev) else { continue };
            if nearest(prev[j], dets).map(|(_, back)| back) == Some(i) && dist.is_finite() {
                steps.push(dist);
            }
        }
    }
    if steps.is_empty() {
        return 1.0;
    }
    steps.sort_by(f64::total_cmp);
    let idx = ((steps.len() as f64 * 0.95).ceil() as usize).clamp(1, steps.len()) - 1;
    (2.0 * steps[idx]).max(1.0)
}

/// Successor lists: for each node, the later admissible nodes ordered by
/// (frame, center distance, id), truncated to `knn_k`.
fn successors(tracklets: &[Tracklet], cfg: &BuildConfig) -> Vec<Vec<usize>> {
    (0..tracklets.len())
        .into_par_iter()
        .map(|i| {
            let a = &tracklets[i];
            let mut cand: Vec<(u32, f64, usize)> = tracklets
                .iter()
                .enumerate()
                .filter(|(j, b)| *j != i && a.end_frame() < b.start_frame() && admissible_pair(a, b, cfg))
                .map(|(j, b)| (b.start_frame(), a.last().center_distance(b.first()), j))
                .collect();
            cand.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
            cand.truncate(cfg.knn_k);
            cand.into_iter().map(|c| c.2).collect()
        })
        .collect()
}

fn pairwise_admissible(chain: &[usize], tracklets: &[Tracklet], cfg: &BuildConfig) -> bool {
    chain
        .iter()
        .enumerate()
        .all(|(i, &a)| chain[i + 1..].iter().all(|&b| admissible_pair(&tracklets[a], &tracklets[b], cfg)))
}

/// Temporal chains of length `d` starting at `anchor`, grown depth-first
/// over successor lists, at most `cap` of them.
fn chains_from(anchor: usize, d: usize, succ: &[Vec<usize>], tracklets: &[Tracklet], cfg: &BuildConfig, cap: usize) -> Vec<Vec<usize>> {
    fn grow(
        chain: &mut Vec<usize>,
        d: usize,
        succ: &[Vec<usize>],
        tracklets: &[Tracklet],
        cfg: &BuildConfig,
        cap: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if out.len() >= cap {
            return;
        }
        if chain.len() == d {
            out.push(chain.clone());
            return;
        }
        let tail = *chain.last().expect("non-empty chain");
        for &next in &succ[tail] {
            if chain.iter().all(|&c| admissible_pair(&tracklets[c], &tracklets[next], cfg)) {
                chain.push(next);
                grow(chain, d, succ, tracklets, cfg, cap, out);
                chain.pop();
                if out.len() >= cap {
                    return;
                }
            }
        }
    }
    let mut out = Vec::new();
    grow(&mut vec![anchor], d, succ, tracklets, cfg, cap, &mut out);
    out
}

/// Options controlling appearance channels during graph construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    pub channels: Channels,
}

impl BuildOptions {
    /// Disables a channel if any detection in the sequence lacks its feature.
    pub fn for_tracklets(tracklets: &[Tracklet]) -> Self {
        let all = |f: fn(&Detection) -> bool| tracklets.iter().flat_map(|t| t.detections()).all(f);
        Self {
            channels: Channels {
                color: all(|d| d.histogram.is_some()),
                embedding: all(|d| d.embedding.is_some()),
            },
        }
    }
}

/// Builds the non-uniform hypergraph over `tracklets`; node `i` is
/// `tracklets[i]`.
pub fn build_hypergraph(tracklets: &[Tracklet], ctx: &MotionContext, cfg: &BuildConfig) -> Result<Hypergraph> {
    build_hypergraph_with(tracklets, ctx, cfg, BuildOptions::for_tracklets(tracklets))
}

pub fn build_hypergraph_with(tracklets: &[Tracklet], ctx: &MotionContext, cfg: &BuildConfig, opts: BuildOptions) -> Result<Hypergraph> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if cfg.max_velocity.is_none() {
        let dets: Vec<Detection> = tracklets.iter().flat_map(|t| t.detections().iter().cloned()).collect();
        cfg.max_velocity = Some(estimate_max_velocity(&dets));
    }
    let cfg = &cfg;
    let ids: BTreeSet<usize> = tracklets.iter().map(|t| t.node_id).collect();
    if ids.len() != tracklets.len() {
        return Err(Error::InvalidTracklet("duplicate node ids".into()));
    }
    let n = tracklets.len();
    let mut graph = Hypergraph::new(n, default_arities(cfg.max_degree))?;
    for (i, t) in tracklets.iter().enumerate() {
        graph.insert(&[i], self_loop_affinity(t))?;
    }
    if n < 2 {
        return Ok(graph);
    }
    let succ = successors(tracklets, cfg);

    let edges: Vec<Vec<(Vec<usize>, AffinityVector)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            succ[i]
                .iter()
                .map(|&j| {
                    edge_affinity_with(&tracklets[i], &tracklets[j], ctx, opts.channels).map(|a| (vec![i, j], a))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut hyper: Vec<Vec<(Vec<usize>, AffinityVector)>> = Vec::new();
    for d in 3..=cfg.max_degree {
        let per_anchor: Vec<Vec<(Vec<usize>, AffinityVector)>> = (0..n)
            .into_par_iter()
            .map(|anchor| {
                chains_from(anchor, d, &succ, tracklets, cfg, cfg.max_hyperedges_per_node)
                    .into_iter()
                    .map(|chain| {
                        let members: Vec<&Tracklet> = chain.iter().map(|&c| &tracklets[c]).collect();
                        hyperedge_affinity(&members, ctx).map(|a| (chain, a))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        hyper.extend(per_anchor);
    }

    for (nodes, aff) in edges.into_iter().chain(hyper).flatten() {
        if !aff.is_negligible(cfg.prune_eps) {
            debug_assert!(pairwise_admissible(&nodes, tracklets, cfg));
            graph.insert(&nodes, aff)?;
        }
    }
    Ok(graph)
}
