//! Near-online tracking: dense-structure search inside each `τ`-frame window,
//! then association of the window's tracklets with the active targets.

use log::debug;

use crate::affinity::{edge_affinity_with, self_loop_affinity, Channels, MotionContext};
use crate::builder::{build_hypergraph_with, estimate_max_velocity, BuildOptions};
use crate::error::{Error, Result};
use crate::io::Config;
use crate::model::{Detection, Hypergraph, Tracklet, WeightVector};
use crate::postprocess::{interpolate_gaps, resolve_conflicts, restrict_to_compatible, stitch};
use crate::search::search_all;

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub label: u64,
    pub track: Tracklet,
    /// Consecutive non-empty windows without a match.
    pub missed_windows: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub targets: Vec<Target>,
    pub finished: Vec<(u64, Tracklet)>,
    pub next_label: u64,
    /// First frame of the next window.
    pub t: u32,
    pub tau: u32,
}

impl TrackState {
    pub fn new(tau: u32) -> Result<Self> {
        if tau < 2 {
            return Err(Error::Config(format!("tau must be >= 2, got {tau}")));
        }
        Ok(Self {
            targets: Vec::new(),
            finished: Vec::new(),
            next_label: 1,
            t: 0,
            tau,
        })
    }

    /// All trajectories, finished and active, ordered by label.
    pub fn trajectories(&self) -> Vec<(u64, Tracklet)> {
        let mut out: Vec<(u64, Tracklet)> = self
            .finished
            .iter()
            .cloned()
            .chain(self.targets.iter().map(|t| (t.label, t.track.clone())))
            .collect();
        out.sort_by_key(|(l, _)| *l);
        out
    }
}

/// What one window touched, for instrumentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowStats {
    pub index: usize,
    pub start_frame: u32,
    pub detections: usize,
    pub active_targets: usize,
    pub tracklets: usize,
    pub window_nodes: usize,
    pub window_edges: usize,
    pub association_nodes: usize,
    pub spawned: usize,
    pub terminated: usize,
}

pub struct WindowView<'a> {
    pub stats: &'a WindowStats,
    pub graph: &'a Hypergraph,
    pub tracklets: &'a [Tracklet],
}

/// Window graph and its stitched tracklets.
fn window_tracklets(dets: &[Detection], ctx: &MotionContext, cfg: &Config, weights: &WeightVector, channels: Channels) -> Result<(Hypergraph, Vec<Tracklet>, Vec<Tracklet>)> {
    let nodes: Vec<Tracklet> = dets.iter().enumerate().map(|(i, d)| Tracklet::from_detection(i, d.clone())).collect();
    let graph = build_hypergraph_with(&nodes, ctx, &cfg.build, BuildOptions { channels })?;
    let search = cfg.search_config();
    let found = search_all(&graph, weights, &search)?;
    let disjoint_in_time = |u: usize, v: usize| !nodes[u].overlaps(&nodes[v]);
    let feasible = restrict_to_compatible(&found, disjoint_in_time);
    let picked = resolve_conflicts(&feasible, search.alpha_hat);
    let mut claimed = vec![false; nodes.len()];
    let mut out = Vec::new();
    for s in &picked {
        for &v in &s.support {
            claimed[v] = true;
        }
        out.push(stitch(&s.support, &nodes)?);
    }
    for (i, c) in claimed.iter().enumerate() {
        if !c {
            out.push(nodes[i].clone());
        }
    }
    out.sort_by_key(|t| (t.start_frame(), t.first().id));
    let out = out.into_iter().enumerate().map(|(i, t)| t.with_node_id(i)).collect();
    Ok((graph, nodes, out))
}

/// Target ↔ tracklet graph (degrees 1 and 2 only). Targets are nodes
/// `0..targets.len()`, tracklets follow.
fn association_graph(
    targets: &[Target],
    tracklets: &[Tracklet],
    ctx: &MotionContext,
    cfg: &Config,
    channels: Channels,
    blocked: &dyn Fn(usize, usize) -> bool,
) -> Result<Hypergraph> {
    let nt = targets.len();
    let mut g = Hypergraph::new(nt + tracklets.len(), vec![1, 3])?;
    for (i, t) in targets.iter().enumerate() {
        g.insert(&[i], self_loop_affinity(&t.track))?;
    }
    for (j, k) in tracklets.iter().enumerate() {
        g.insert(&[nt + j], self_loop_affinity(k))?;
    }
    let v_max = cfg.build.max_velocity.unwrap_or(f64::INFINITY);
    let max_gap = (cfg.max_missed_windows() + 1).saturating_mul(cfg.tracking.tau).max(cfg.build.max_frame_gap);
    for (i, t) in targets.iter().enumerate() {
        for (j, k) in tracklets.iter().enumerate() {
            if k.start_frame() <= t.track.end_frame() || blocked(i, j) {
                continue;
            }
            let gap = k.start_frame() - t.track.end_frame();
            if gap > max_gap || t.track.last().center_distance(k.first()) > v_max * gap as f64 {
                continue;
            }
            let a = edge_affinity_with(&t.track, k, ctx, channels)?;
            if !a.is_negligible(cfg.build.prune_eps) {
                g.insert(&[i, nt + j], a)?;
            }
        }
    }
    Ok(g)
}

/// One association round: dense structures on the target/tracklet graph, each
/// giving its best-linked target the non-overlapping tracklets it links to.
/// Returns `(target, tracklet indices)` pairs.
fn associate(
    targets: &[Target],
    tracklets: &[Tracklet],
    ctx: &MotionContext,
    cfg: &Config,
    weights: &WeightVector,
    channels: Channels,
    blocked: &dyn Fn(usize, usize) -> bool,
) -> Result<Vec<(usize, Vec<usize>)>> {
    let nt = targets.len();
    if nt == 0 {
        return Ok(Vec::new());
    }
    let assoc = association_graph(targets, tracklets, ctx, cfg, channels, blocked)?;
    let search = cfg.search_config();
    let structures = resolve_conflicts(&search_all(&assoc, weights, &search)?, search.alpha_hat);
    let edge_score = |i: usize, j: usize| -> Option<f64> { assoc.get(&[i, j]).and_then(|e| weights.dot(2, &e.affinity).ok()) };
    let mut taken_target = vec![false; nt];
    let mut used = vec![false; tracklets.len()];
    let mut out = Vec::new();
    for s in &structures {
        let members_k: Vec<usize> = s.support.iter().copied().filter(|&v| v >= nt).collect();
        let link = |t: usize| -> f64 { members_k.iter().filter_map(|&k| edge_score(t, k)).sum() };
        let Some(winner) = s
            .support
            .iter()
            .copied()
            .filter(|&v| v < nt && !taken_target[v])
            .max_by(|&a, &b| link(a).total_cmp(&link(b)).then(b.cmp(&a)))
        else {
            continue;
        };
        let mut cand: Vec<(f64, usize)> = members_k.iter().filter_map(|&k| edge_score(winner, k).map(|w| (w, k - nt))).collect();
        cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut accepted: Vec<usize> = Vec::new();
        for (_, k) in cand {
            if used[k] || accepted.iter().any(|&a| share_frame(&tracklets[a], &tracklets[k])) {
                continue;
            }
            accepted.push(k);
        }
        if !accepted.is_empty() {
            for &a in &accepted {
                used[a] = true;
            }
            taken_target[winner] = true;
            out.push((winner, accepted));
        }
    }
    Ok(out)
}

fn share_frame(a: &Tracklet, b: &Tracklet) -> bool {
    a.overlaps(b) && a.detections().iter().any(|d| b.detections().binary_search_by_key(&d.frame, |e| e.frame).is_ok())
}

/// Processes the detections of `[state.t, state.t + τ)` and advances `t`.
/// `cfg.build.max_velocity` should already be resolved.
pub fn process_window(
    state: &mut TrackState,
    detections: &[Detection],
    ctx: &MotionContext,
    cfg: &Config,
    weights: &WeightVector,
    index: usize,
    observer: &mut dyn FnMut(&WindowView),
) -> Result<()> {
    let start = state.t;
    let end = start.saturating_add(state.tau);
    if let Some(d) = detections.iter().find(|d| d.frame < start || d.frame >= end) {
        return Err(Error::InvalidDetection(format!("frame {} outside window [{start}, {end})", d.frame)));
    }
    state.t = end;
    if detections.is_empty() {
        return Ok(());
    }
    let channels = {
        let all = |f: fn(&Detection) -> bool| detections.iter().all(f);
        Channels {
            color: all(|d| d.histogram.is_some()),
            embedding: all(|d| d.embedding.is_some()),
        }
    };

    let (graph, _, tracklets) = window_tracklets(detections, ctx, cfg, weights, channels)?;
    let active = state.targets.len();
    let mut used = vec![false; tracklets.len()];
    // Pieces of this window given to each target. Gating always uses the track
    // as it stood when the window opened, so fragments may interleave in time
    // as long as no frame is claimed twice.
    let mut pieces: Vec<Vec<usize>> = vec![Vec::new(); active];
    let mut association_nodes = 0;
    let mut spawned = 0;
    loop {
        let free: Vec<usize> = (0..tracklets.len()).filter(|&k| !used[k]).collect();
        if free.is_empty() {
            break;
        }
        let pool: Vec<Tracklet> = free.iter().map(|&k| tracklets[k].clone()).collect();
        let blocked = |i: usize, j: usize| pieces[i].iter().any(|&p| share_frame(&tracklets[p], &pool[j]));
        let round = associate(&state.targets, &pool, ctx, cfg, weights, channels, &blocked)?;
        if association_nodes == 0 {
            association_nodes = state.targets.len() + pool.len();
        }
        if round.is_empty() {
            let Some(&k) = free.iter().find(|&&k| tracklets[k].len() >= 2) else {
                break;
            };
            used[k] = true;
            state.targets.push(Target {
                label: state.next_label,
                track: tracklets[k].clone(),
                missed_windows: 0,
            });
            pieces.push(Vec::new());
            state.next_label += 1;
            spawned += 1;
            continue;
        }
        for (i, ext) in round {
            for k in ext {
                used[free[k]] = true;
                pieces[i].push(free[k]);
            }
        }
    }
    for (target, own) in state.targets.iter_mut().zip(&pieces) {
        if own.is_empty() {
            continue;
        }
        let mut dets = target.track.detections().to_vec();
        dets.extend(own.iter().flat_map(|&k| tracklets[k].detections().iter().cloned()));
        dets.sort_by_key(|d| d.frame);
        target.track = Tracklet::new(target.track.node_id, dets)?;
    }
    let matched: Vec<bool> = pieces.iter().map(|p| !p.is_empty()).collect();

    let mut terminated = 0;
    let mut kept = Vec::with_capacity(state.targets.len());
    for (i, mut target) in std::mem::take(&mut state.targets).into_iter().enumerate() {
        if i >= active || matched[i] {
            target.missed_windows = 0;
            kept.push(target);
            continue;
        }
        target.missed_windows += 1;
        if target.missed_windows > cfg.max_missed_windows() {
            debug!("terminating target {} at frame {start}", target.label);
            state.finished.push((target.label, target.track));
            terminated += 1;
        } else {
            kept.push(target);
        }
    }
    state.targets = kept;

    let stats = WindowStats {
        index,
        start_frame: start,
        detections: detections.len(),
        active_targets: active,
        tracklets: tracklets.len(),
        window_nodes: graph.num_nodes(),
        window_edges: graph.total_edges(),
        association_nodes,
        spawned,
        terminated,
    };
    observer(&WindowView {
        stats: &stats,
        graph: &graph,
        tracklets: &tracklets,
    });
    Ok(())
}

/// Tracks a whole sequence and returns gap-filled trajectories ordered by label.
pub fn run_sequence(detections: &[Detection], ctx: &MotionContext, cfg: &Config, weights: &WeightVector) -> Result<Vec<(u64, Tracklet)>> {
    run_sequence_observed(detections, ctx, cfg, weights, &mut |_| {})
}

pub fn run_sequence_observed(
    detections: &[Detection],
    ctx: &MotionContext,
    cfg: &Config,
    weights: &WeightVector,
    observer: &mut dyn FnMut(&WindowView),
) -> Result<Vec<(u64, Tracklet)>> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if cfg.build.max_velocity.is_none() {
        cfg.build.max_velocity = Some(estimate_max_velocity(detections));
    }
    let mut dets = detections.to_vec();
    dets.sort_by_key(|d| (d.frame, d.id));
    let mut state = TrackState::new(cfg.tracking.tau)?;
    let Some(last) = dets.last().map(|d| d.frame) else {
        return Ok(Vec::new());
    };
    let mut at = 0;
    let mut index = 0;
    while state.t <= last {
        let end = state.t.saturating_add(state.tau);
        let from = at;
        while at < dets.len() && dets[at].frame < end {
            at += 1;
        }
        process_window(&mut state, &dets[from..at], ctx, &cfg, weights, index, observer)?;
        index += 1;
    }
    Ok(state
        .trajectories()
        .into_iter()
        .map(|(l, t)| (l, interpolate_gaps(&t)))
        .collect())
}
