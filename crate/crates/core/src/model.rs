//! Core domain types: detections, tracklets, point trajectories, affinity and
//! weight vectors, the non-uniform hypergraph and identity labelings.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One detector response. Frames are 0-based in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub id: u64,
    pub frame: u32,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
    pub confidence: f64,
    pub embedding: Option<Arc<[f32]>>,
    pub histogram: Option<Arc<[f32]>>,
    /// Set on boxes synthesized by gap interpolation.
    pub interpolated: bool,
}

impl Detection {
    /// Id carried by interpolated detections; they are not detector output.
    pub const INTERPOLATED_ID: u64 = u64::MAX;

    pub fn new(id: u64, frame: u32, cx: f64, cy: f64, width: f64, height: f64, confidence: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidDetection(format!("detection {id}: non-finite center")));
        }
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(Error::InvalidDetection(format!(
                "detection {id}: box size must be positive, got {width}x{height}"
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidDetection(format!(
                "detection {id}: confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            id,
            frame,
            cx,
            cy,
            width,
            height,
            confidence,
            embedding: None,
            histogram: None,
            interpolated: false,
        })
    }

    /// Builds a detection from a top-left anchored box.
    pub fn from_ltwh(id: u64, frame: u32, left: f64, top: f64, width: f64, height: f64, confidence: f64) -> Result<Self> {
        Self::new(id, frame, left + width / 2.0, top + height / 2.0, width, height, confidence)
    }

    pub fn with_embedding(mut self, embedding: Arc<[f32]>) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn with_histogram(mut self, histogram: Arc<[f32]>) -> Self {
        self.histogram = Some(histogram);
        self
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn left(&self) -> f64 {
        self.cx - self.width / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.height / 2.0
    }

    /// Inclusive axis-aligned containment test.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let hw = self.width / 2.0;
        let hh = self.height / 2.0;
        x >= self.cx - hw && x <= self.cx + hw && y >= self.cy - hh && y <= self.cy + hh
    }

    pub fn center_distance(&self, other: &Detection) -> f64 {
        (self.cx - other.cx).hypot(self.cy - other.cy)
    }
}

/// An ordered run of detections with strictly increasing frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub node_id: usize,
    detections: Vec<Detection>,
    score: f64,
}

impl Tracklet {
    pub fn new(node_id: usize, detections: Vec<Detection>) -> Result<Self> {
        if detections.is_empty() {
            return Err(Error::InvalidTracklet("tracklet has no detections".into()));
        }
        if let Some(w) = detections.windows(2).find(|w| w[0].frame >= w[1].frame) {
            return Err(Error::InvalidTracklet(format!(
                "frames not strictly increasing: {} then {}",
                w[0].frame, w[1].frame
            )));
        }
        let score = mean_confidence(&detections);
        Ok(Self {
            node_id,
            detections,
            score,
        })
    }

    pub fn from_detection(node_id: usize, detection: Detection) -> Self {
        let score = detection.confidence;
        Self {
            node_id,
            detections: vec![detection],
            score,
        }
    }

    /// Concatenates `a` then `b`. The frame gap between them is left unfilled.
    pub fn concat(a: &Tracklet, b: &Tracklet) -> Result<Tracklet> {
        if a.end_frame() >= b.start_frame() {
            return Err(Error::TemporalOverlap {
                a_start: a.start_frame(),
                a_end: a.end_frame(),
                b_start: b.start_frame(),
                b_end: b.end_frame(),
            });
        }
        let mut detections = Vec::with_capacity(a.len() + b.len());
        detections.extend_from_slice(&a.detections);
        detections.extend_from_slice(&b.detections);
        let score = mean_confidence(&detections);
        Ok(Tracklet {
            node_id: a.node_id,
            detections,
            score,
        })
    }

    pub fn with_node_id(mut self, node_id: usize) -> Self {
        self.node_id = node_id;
        self
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn into_detections(self) -> Vec<Detection> {
        self.detections
    }

    /// Mean detection confidence.
    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn first(&self) -> &Detection {
        &self.detections[0]
    }

    pub fn last(&self) -> &Detection {
        &self.detections[self.detections.len() - 1]
    }

    pub fn start_frame(&self) -> u32 {
        self.first().frame
    }

    pub fn end_frame(&self) -> u32 {
        self.last().frame
    }

    /// True when the frame spans of the two tracklets intersect.
    pub fn overlaps(&self, other: &Tracklet) -> bool {
        self.start_frame() <= other.end_frame() && other.start_frame() <= self.end_frame()
    }

    pub fn total_area(&self) -> f64 {
        self.detections.iter().map(Detection::area).sum()
    }
}

fn mean_confidence(detections: &[Detection]) -> f64 {
    detections.iter().map(|d| d.confidence).sum::<f64>() / detections.len() as f64
}

/// A tracked feature point path, as produced by a KLT-style point tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTrajectory {
    pub id: i64,
    samples: Vec<(u32, f64, f64)>,
}

impl PointTrajectory {
    pub fn new(id: i64, samples: Vec<(u32, f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidTrajectory {
                id,
                reason: format!("needs at least 2 samples, got {}", samples.len()),
            });
        }
        if samples.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidTrajectory {
                id,
                reason: "frames not strictly increasing".into(),
            });
        }
        if samples.iter().any(|s| !(s.1.is_finite() && s.2.is_finite())) {
            return Err(Error::InvalidTrajectory {
                id,
                reason: "non-finite coordinate".into(),
            });
        }
        Ok(Self { id, samples })
    }

    pub fn samples(&self) -> &[(u32, f64, f64)] {
        &self.samples
    }
}

/// Affinity attached to an edge or hyperedge; one component per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityVector(Vec<f64>);

impl AffinityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidAffinity("empty affinity vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidAffinity(format!("component {v} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// All components at or below `eps`.
    pub fn is_negligible(&self, eps: f64) -> bool {
        self.0.iter().all(|&v| v <= eps)
    }
}

/// Default channel count per degree: three for edges (color, embedding,
/// motion), one for everything else.
pub fn default_arities(max_degree: usize) -> Vec<usize> {
    (1..=max_degree).map(|d| if d == 2 { 3 } else { 1 }).collect()
}

/// Per-degree balancing weights. Entry `d - 1` holds the weights for degree `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    per_degree: Vec<Vec<f64>>,
}

impl WeightVector {
    pub fn new(per_degree: Vec<Vec<f64>>) -> Result<Self> {
        if per_degree.is_empty() {
            return Err(Error::Config("weight vector needs at least one degree".into()));
        }
        for (i, w) in per_degree.iter().enumerate() {
            if w.is_empty() {
                return Err(Error::Config(format!("degree {} has no weights", i + 1)));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("degree {} has a non-finite weight", i + 1)));
            }
        }
        Ok(Self { per_degree })
    }

    /// The learned weights reported for D = 4.
    pub fn builtin() -> Self {
        Self {
            per_degree: vec![vec![0.58535], vec![0.15576, 3.0332, 0.34388], vec![1.2879], vec![0.22324]],
        }
    }

    pub fn filled(arities: &[usize], value: f64) -> Self {
        Self {
            per_degree: arities.iter().map(|&k| vec![value; k]).collect(),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.per_degree.len()
    }

    pub fn arities(&self) -> Vec<usize> {
        self.per_degree.iter().map(Vec::len).collect()
    }

    /// Weights of degree `d` (1-based). Degrees above `max_degree` are absent.
    pub fn degree(&self, d: usize) -> Option<&[f64]> {
        self.per_degree.get(d.wrapping_sub(1)).map(Vec::as_slice)
    }

    pub fn per_degree(&self) -> &[Vec<f64>] {
        &self.per_degree
    }

    /// `λ_d · A`, or an error when the arities disagree. Degrees with no
    /// weights contribute zero.
    pub fn dot(&self, d: usize, affinity: &AffinityVector) -> Result<f64> {
        match self.degree(d) {
            None => Ok(0.0),
            Some(w) if w.len() != affinity.arity() => Err(Error::DimensionMismatch(format!(
                "degree {d}: weight arity {} but affinity arity {}",
                w.len(),
                affinity.arity()
            ))),
            Some(w) => Ok(w.iter().zip(affinity.values()).map(|(a, b)| a * b).sum()),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.per_degree.iter().flatten().copied().collect()
    }

    pub fn from_flat(arities: &[usize], flat: &[f64]) -> Result<Self> {
        let total: usize = arities.iter().sum();
        if total != flat.len() {
            return Err(Error::DimensionMismatch(format!(
                "flat weight length {} does not match arities {:?}",
                flat.len(),
                arities
            )));
        }
        let mut per_degree = Vec::with_capacity(arities.len());
        let mut at = 0;
        for &k in arities {
            per_degree.push(flat[at..at + k].to_vec());
            at += k;
        }
        Self::new(per_degree)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            per_degree: self.per_degree.iter().map(|w| w.iter().map(|v| v * c).collect()).collect(),
        }
    }

    /// Copy with every degree other than `keep` zeroed.
    pub fn only_degree(&self, keep: usize) -> Self {
        Self {
            per_degree: self
                .per_degree
                .iter()
                .enumerate()
                .map(|(i, w)| if i + 1 == keep { w.clone() } else { vec![0.0; w.len()] })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    pub nodes: Vec<usize>,
    pub affinity: AffinityVector,
}

impl Hyperedge {
    pub fn degree(&self) -> usize {
        self.nodes.len()
    }
}

/// Hypergraph mixing self-loops, edges and hyperedges of degree up to `D`.
///
/// Node ids are dense `0..n`. Tuples are stored sorted and deduplicated, and
/// the neighborhood index is kept symmetric as edges are inserted.
#[derive(Debug, Clone)]
pub struct Hypergraph {
    num_nodes: usize,
    arities: Vec<usize>,
    edges: Vec<Vec<Hyperedge>>,
    lookup: Vec<HashMap<Vec<usize>, usize>>,
    incidence: Vec<Vec<(usize, usize)>>,
    neighbors: Vec<BTreeSet<usize>>,
}

impl Hypergraph {
    /// Empty graph over `num_nodes` nodes; `arities[d - 1]` is the affinity
    /// length for degree `d`.
    pub fn new(num_nodes: usize, arities: Vec<usize>) -> Result<Self> {
        if arities.is_empty() || arities.contains(&0) {
            return Err(Error::Config(format!("invalid per-degree arities {arities:?}")));
        }
        let max_degree = arities.len();
        Ok(Self {
            num_nodes,
            arities,
            edges: vec![Vec::new(); max_degree],
            lookup: vec![HashMap::new(); max_degree],
            incidence: vec![Vec::new(); num_nodes],
            neighbors: vec![BTreeSet::new(); num_nodes],
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn max_degree(&self) -> usize {
        self.arities.len()
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn arity(&self, d: usize) -> Option<usize> {
        self.arities.get(d.wrapping_sub(1)).copied()
    }

    /// Inserts a tuple in any node order. Returns `false` when the canonical
    /// tuple is already present, in which case the graph is unchanged.
    pub fn insert(&mut self, nodes: &[usize], affinity: AffinityVector) -> Result<bool> {
        let d = nodes.len();
        let arity = self
            .arity(d)
            .ok_or_else(|| Error::InvalidEdge(format!("degree {d} outside 1..={}", self.max_degree())))?;
        if affinity.arity() != arity {
            return Err(Error::InvalidEdge(format!(
                "degree {d} expects {arity} affinity channels, got {}",
                affinity.arity()
            )));
        }
        let mut key = nodes.to_vec();
        key.sort_unstable();
        if key.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidEdge(format!("repeated node in {nodes:?}")));
        }
        if let Some(&v) = key.last() {
            if v >= self.num_nodes {
                return Err(Error::InvalidEdge(format!("node {v} out of range (n = {})", self.num_nodes)));
            }
        }
        if self.lookup[d - 1].contains_key(&key) {
            return Ok(false);
        }
        let idx = self.edges[d - 1].len();
        for &u in &key {
            self.incidence[u].push((d, idx));
            for &w in &key {
                if w != u {
                    self.neighbors[u].insert(w);
                }
            }
        }
        self.lookup[d - 1].insert(key.clone(), idx);
        self.edges[d - 1].push(Hyperedge { nodes: key, affinity });
        Ok(true)
    }

    /// Edges of degree `d` in insertion order.
    pub fn edges(&self, d: usize) -> &[Hyperedge] {
        self.edges.get(d.wrapping_sub(1)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edge_count(&self, d: usize) -> usize {
        self.edges(d).len()
    }

    pub fn total_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn get(&self, nodes: &[usize]) -> Option<&Hyperedge> {
        let d = nodes.len();
        let mut key = nodes.to_vec();
        key.sort_unstable();
        let idx = *self.lookup.get(d.wrapping_sub(1))?.get(&key)?;
        Some(&self.edges[d - 1][idx])
    }

    pub fn self_loop(&self, v: usize) -> Option<&AffinityVector> {
        self.get(&[v]).map(|e| &e.affinity)
    }

    /// Nodes sharing at least one edge or hyperedge with `v`, excluding `v`.
    pub fn neighborhood(&self, v: usize) -> &BTreeSet<usize> {
        &self.neighbors[v]
    }

    /// Every tuple containing `v`, self-loop included.
    pub fn incident(&self, v: usize) -> impl Iterator<Item = &Hyperedge> + '_ {
        self.incidence[v].iter().map(move |&(d, i)| &self.edges[d - 1][i])
    }

    /// Edges of degree `d` sorted lexicographically by node tuple.
    pub fn sorted_edges(&self, d: usize) -> Vec<&Hyperedge> {
        let mut out: Vec<&Hyperedge> = self.edges(d).iter().collect();
        out.sort_by(|a, b| a.nodes.cmp(&b.nodes));
        out
    }
}

impl PartialEq for Hypergraph {
    fn eq(&self, other: &Self) -> bool {
        self.num_nodes == other.num_nodes
            && self.arities == other.arities
            && (1..=self.max_degree()).all(|d| self.sorted_edges(d) == other.sorted_edges(d))
    }
}

/// Assignment of nodes to identities `1..=k`; `None` means unassigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    labels: Vec<Option<usize>>,
    num_identities: usize,
}

impl Labeling {
    pub fn new(labels: Vec<Option<usize>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for l in labels.iter().flatten() {
            if *l == 0 {
                return Err(Error::InvalidLabeling("labels start at 1".into()));
            }
            seen.insert(*l);
        }
        let k = seen.len();
        if seen.iter().copied().ne(1..=k) {
            return Err(Error::InvalidLabeling(format!("labels are not contiguous 1..={k}")));
        }
        Ok(Self {
            labels,
            num_identities: k,
        })
    }

    /// Relabels arbitrary identity keys to contiguous labels in order of first
    /// appearance.
    pub fn from_keys<K: Eq + std::hash::Hash + Clone>(keys: &[Option<K>]) -> Self {
        let mut map: HashMap<K, usize> = HashMap::new();
        let labels = keys
            .iter()
            .map(|k| {
                k.as_ref().map(|k| {
                    let next = map.len() + 1;
                    *map.entry(k.clone()).or_insert(next)
                })
            })
            .collect();
        Self {
            labels,
            num_identities: map.len(),
        }
    }

    /// Builds a labeling from disjoint clusters over `n` nodes; nodes in no
    /// cluster stay unassigned.
    pub fn from_clusters(n: usize, clusters: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![None; n];
        let mut next = 0;
        for cluster in clusters.iter().filter(|c| !c.is_empty()) {
            next += 1;
            for &v in cluster {
                if v >= n {
                    return Err(Error::InvalidLabeling(format!("node {v} out of range")));
                }
                if labels[v].is_some() {
                    return Err(Error::InvalidLabeling(format!("node {v} in two clusters")));
                }
                labels[v] = Some(next);
            }
        }
        Ok(Self {
            labels,
            num_identities: next,
        })
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (1..=n).map(Some).collect(),
            num_identities: n,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels[v]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn num_identities(&self) -> usize {
        self.num_identities
    }

    /// Members of each identity, index `l - 1` for label `l`.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_identities];
        for (v, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                out[l - 1].push(v);
            }
        }
        out
    }

    /// Canonical form: labels renumbered by first appearance.
    pub fn canonical(&self) -> Self {
        Self::from_keys(&self.labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(frame: u32, conf: f64) -> Detection {
        Detection::new(frame as u64, frame, 10.0, 10.0, 4.0, 8.0, conf).unwrap()
    }

    fn tracklet(frames: &[u32], conf: f64) -> Tracklet {
        Tracklet::new(0, frames.iter().map(|&f| det(f, conf)).collect()).unwrap()
    }

    #[test]
    fn single_detection_tracklet() {
        let t = Tracklet::from_detection(3, det(5, 0.7));
        assert_eq!(t.score(), 0.7);
        assert_eq!((t.start_frame(), t.end_frame()), (5, 5));
    }

    #[test]
    fn zero_width_rejected() {
        assert!(Detection::new(0, 0, 1.0, 1.0, 0.0, 1.0, 0.5).is_err());
        assert!(Detection::new(0, 0, 1.0, 1.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn concat_keeps_gap_and_weights_score() {
        let a = tracklet(&[1, 2, 3], 0.6);
        let b = tracklet(&[5, 6], 0.9);
        let c = Tracklet::concat(&a, &b).unwrap();
        let frames: Vec<u32> = c.detections().iter().map(|d| d.frame).collect();
        assert_eq!(frames, vec![1, 2, 3, 5, 6]);
        assert!((c.score() - 0.72).abs() < 1e-12);
    }

    #[test]
    fn concat_rejects_overlap() {
        let a = tracklet(&[2, 4], 0.5);
        let b = tracklet(&[4, 5], 0.5);
        assert!(matches!(Tracklet::concat(&a, &b), Err(Error::TemporalOverlap { .. })));
    }

    #[test]
    fn unsorted_tracklet_rejected() {
        assert!(Tracklet::new(0, vec![det(3, 0.5), det(3, 0.5)]).is_err());
        assert!(Tracklet::new(0, vec![]).is_err());
    }

    #[test]
    fn duplicate_hyperedge_any_order_is_noop() {
        let mut g = Hypergraph::new(4, default_arities(3)).unwrap();
        assert!(g.insert(&[2, 0, 1], AffinityVector::scalar(0.5).unwrap()).unwrap());
        assert!(!g.insert(&[1, 2, 0], AffinityVector::scalar(0.9).unwrap()).unwrap());
        assert_eq!(g.edge_count(3), 1);
        assert_eq!(g.edges(3)[0].nodes, vec![0, 1, 2]);
        assert_eq!(g.edges(3)[0].affinity.values(), &[0.5]);
    }

    #[test]
    fn repeated_node_and_bad_arity_rejected() {
        let mut g = Hypergraph::new(4, default_arities(3)).unwrap();
        assert!(g.insert(&[1, 1], AffinityVector::new(vec![0.1; 3]).unwrap()).is_err());
        assert!(g.insert(&[0, 1], AffinityVector::scalar(0.1).unwrap()).is_err());
        assert!(g.insert(&[0, 1, 2, 3], AffinityVector::scalar(0.1).unwrap()).is_err());
    }

    #[test]
    fn neighborhood_excludes_self_loops() {
        let mut g = Hypergraph::new(3, default_arities(2)).unwrap();
        g.insert(&[0], AffinityVector::scalar(1.0).unwrap()).unwrap();
        assert!(g.neighborhood(0).is_empty());
        g.insert(&[0, 2], AffinityVector::new(vec![0.2, 0.3, 0.4]).unwrap()).unwrap();
        assert!(g.neighborhood(0).contains(&2));
        assert!(g.neighborhood(2).contains(&0));
    }

    #[test]
    fn weight_dot_checks_arity() {
        let w = WeightVector::builtin();
        let a = AffinityVector::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert!((w.dot(2, &a).unwrap() - (0.15576 + 3.0332 + 0.34388)).abs() < 1e-12);
        assert!(w.dot(1, &a).is_err());
        assert_eq!(w.dot(7, &a).unwrap(), 0.0);
    }

    #[test]
    fn weights_flat_round_trip() {
        let w = WeightVector::builtin();
        let back = WeightVector::from_flat(&w.arities(), &w.flatten()).unwrap();
        assert_eq!(w, back);
    }

    #[test]
    fn labeling_must_be_contiguous() {
        assert!(Labeling::new(vec![Some(1), Some(3)]).is_err());
        let l = Labeling::new(vec![Some(2), None, Some(1)]).unwrap();
        assert_eq!(l.num_identities(), 2);
        assert_eq!(l.clusters(), vec![vec![2], vec![0]]);
        assert_eq!(l.canonical().labels(), &[Some(1), None, Some(2)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn score_is_mean_regardless_of_concat_order(confs in proptest::collection::vec(0.0f64..=1.0, 2..12), split in 1usize..11) {
                let split = split.min(confs.len() - 1);
                let dets: Vec<Detection> = confs.iter().enumerate()
                    .map(|(i, &c)| Detection::new(i as u64, i as u32 * 2, 0.0, 0.0, 1.0, 1.0, c).unwrap())
                    .collect();
                let a = Tracklet::new(0, dets[..split].to_vec()).unwrap();
                let b = Tracklet::new(1, dets[split..].to_vec()).unwrap();
                let joined = Tracklet::concat(&a, &b).unwrap();
                let mean = confs.iter().sum::<f64>() / confs.len() as f64;
                prop_assert!((joined.score() - mean).abs() < 1e-12);
            }

            #[test]
            fn neighborhood_symmetric(tuples in proptest::collection::vec(proptest::collection::btree_set(0usize..8, 2..=3), 0..20)) {
                let mut g = Hypergraph::new(8, vec![1, 1, 1]).unwrap();
                for t in &tuples {
                    let nodes: Vec<usize> = t.iter().copied().collect();
                    g.insert(&nodes, AffinityVector::scalar(0.5).unwrap()).unwrap();
                }
                for u in 0..8 {
                    for &v in g.neighborhood(u) {
                        prop_assert!(g.neighborhood(v).contains(&u));
                    }
                }
            }
        }
    }
}
