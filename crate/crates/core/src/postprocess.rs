//! Conflict removal among dense structures, stitching and gap interpolation.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::{Detection, Hypergraph, Tracklet};
use crate::search::{by_theta_then_support, DenseStructure};

/// Greedy disjointification: structures are visited by descending `Θ` (ties
/// by smaller support); each loses the nodes already claimed and is kept only
/// if at least `alpha_hat` nodes remain.
pub fn resolve_conflicts(structures: &[DenseStructure], alpha_hat: usize) -> Vec<DenseStructure> {
    let mut order: Vec<&DenseStructure> = structures.iter().collect();
    order.sort_by(|a, b| by_theta_then_support(a, b));
    let mut claimed = HashSet::new();
    let mut out = Vec::new();
    for s in order {
        let remaining: Vec<usize> = s.support.iter().copied().filter(|v| !claimed.contains(v)).collect();
        if remaining.len() >= alpha_hat.max(1) {
            claimed.extend(remaining.iter().copied());
            out.push(DenseStructure {
                support: remaining,
                ..s.clone()
            });
        }
    }
    out
}

/// Shrinks every support to a set of pairwise graph neighbours.
pub fn restrict_to_cliques(structures: &[DenseStructure], graph: &Hypergraph) -> Vec<DenseStructure> {
    restrict_to_compatible(structures, |u, v| graph.neighborhood(u).contains(&v))
}

/// Shrinks every support to members that are pairwise `compatible`. The
/// start node is kept first, then members compatible with more of the
/// support (ties by id) are added while they stay compatible with
/// everything already kept.
pub fn restrict_to_compatible(structures: &[DenseStructure], compatible: impl Fn(usize, usize) -> bool) -> Vec<DenseStructure> {
    structures
        .iter()
        .map(|s| {
            let support = &s.support;
            let score = |v: usize| support.iter().filter(|&&u| u != v && compatible(u, v)).count();
            let mut order = support.clone();
            order.sort_by_key(|&v| (v != s.start, std::cmp::Reverse(score(v)), v));
            let mut kept: Vec<usize> = Vec::with_capacity(order.len());
            for v in order {
                if kept.iter().all(|&u| compatible(u, v)) {
                    kept.push(v);
                }
            }
            kept.sort_unstable();
            DenseStructure {
                support: kept,
                ..s.clone()
            }
        })
        .collect()
}

/// Concatenates the members of `support` in start-frame order.
pub fn stitch(support: &[usize], tracklets: &[Tracklet]) -> Result<Tracklet> {
    let mut members: Vec<&Tracklet> = support
        .iter()
        .map(|&i| {
            tracklets
                .get(i)
                .ok_or_else(|| Error::InvalidTracklet(format!("support node {i} out of range")))
        })
        .collect::<Result<_>>()?;
    let Some(&first) = members.first() else {
        return Err(Error::InvalidTracklet("cannot stitch an empty support".into()));
    };
    if members.len() == 1 {
        return Ok(first.clone());
    }
    members.sort_by_key(|t| (t.start_frame(), t.node_id));
    let mut out = members[0].clone();
    for t in &members[1..] {
        out = Tracklet::concat(&out, t)?;
    }
    Ok(out)
}

/// Fills every missing frame between consecutive detections with a linearly
/// interpolated box of zero confidence.
pub fn interpolate_gaps(t: &Tracklet) -> Tracklet {
    let dets = t.detections();
    let mut out: Vec<Detection> = Vec::with_capacity(dets.len());
    for (i, d) in dets.iter().enumerate() {
        if i > 0 {
            let prev = &dets[i - 1];
            let span = (d.frame - prev.frame) as f64;
            for f in prev.frame + 1..d.frame {
                let a = (f - prev.frame) as f64 / span;
                let lerp = |x: f64, y: f64| x + (y - x) * a;
                out.push(Detection {
                    id: Detection::INTERPOLATED_ID,
                    frame: f,
                    cx: lerp(prev.cx, d.cx),
                    cy: lerp(prev.cy, d.cy),
                    width: lerp(prev.width, d.width),
                    height: lerp(prev.height, d.height),
                    confidence: 0.0,
                    embedding: None,
                    histogram: None,
                    interpolated: true,
                });
            }
        }
        out.push(d.clone());
    }
    if out.len() == dets.len() {
        return t.clone();
    }
    Tracklet::new(t.node_id, out).expect("interpolation keeps frames increasing")
}
