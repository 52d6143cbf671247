//! Self-loop, edge and hyperedge affinities.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AffinityVector, Detection, PointTrajectory, Tracklet};

/// Value used for an appearance channel whose features are unavailable.
pub const NEUTRAL_CHANNEL: f64 = 0.5;

/// H×S×V bin counts of the color histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramLayout {
    pub h_bins: usize,
    pub s_bins: usize,
    pub v_bins: usize,
}

impl Default for HistogramLayout {
    fn default() -> Self {
        Self {
            h_bins: 8,
            s_bins: 8,
            v_bins: 4,
        }
    }
}

impl HistogramLayout {
    pub fn len(&self) -> usize {
        self.h_bins * self.s_bins * self.v_bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Color histogram normalized to unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    bins: Vec<f64>,
    degenerate: bool,
}

impl Histogram {
    pub fn new(bins: Vec<f64>) -> Result<Self> {
        if bins.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidAffinity("histogram bins must be finite and non-negative".into()));
        }
        let norm = bins.iter().map(|b| b * b).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(Self { bins, degenerate: true });
        }
        Ok(Self {
            bins: bins.into_iter().map(|b| b / norm).collect(),
            degenerate: false,
        })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    /// All-zero histogram, e.g. from an empty image region.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!("vector lengths {} and {}", u.len(), v.len())));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("cosine similarity of a zero vector".into()));
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

fn cosine_f32(u: &[f32], v: &[f32]) -> Result<f64> {
    let u: Vec<f64> = u.iter().map(|&x| x as f64).collect();
    let v: Vec<f64> = v.iter().map(|&x| x as f64).collect();
    cosine_similarity(&u, &v)
}

/// Point trajectories indexed by frame for box-membership queries.
#[derive(Debug, Clone, Default)]
pub struct MotionContext {
    trajectories: Vec<PointTrajectory>,
    by_frame: HashMap<u32, Vec<(usize, f64, f64)>>,
}

impl MotionContext {
    pub fn new(trajectories: Vec<PointTrajectory>) -> Self {
        let mut by_frame: HashMap<u32, Vec<(usize, f64, f64)>> = HashMap::new();
        for (i, t) in trajectories.iter().enumerate() {
            for &(f, x, y) in t.samples() {
                by_frame.entry(f).or_default().push((i, x, y));
            }
        }
        Self { trajectories, by_frame }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn trajectories(&self) -> &[PointTrajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Indices (ascending) of trajectories with a sample inside `det` at its frame.
    pub fn members(&self, det: &Detection) -> Vec<usize> {
        self.by_frame
            .get(&det.frame)
            .map(|pts| {
                pts.iter()
                    .filter(|(_, x, y)| det.contains_point(*x, *y))
                    .map(|(i, _, _)| *i)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Number of trajectories passing through every one of `boxes`.
    pub fn count_through<'a>(&self, boxes: impl IntoIterator<Item = &'a Detection>) -> usize {
        let mut acc: Option<Vec<usize>> = None;
        for b in boxes {
            let m = self.members(b);
            acc = Some(match acc {
                None => m,
                Some(prev) => intersect_sorted(&prev, &m),
            });
            if acc.as_ref().is_some_and(Vec::is_empty) {
                return 0;
            }
        }
        acc.map_or(0, |v| v.len())
    }
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// `1 - 2 / (1 + exp(d·ζ / area))`, the motion-consistency squashing used by
/// both edges (`d = 2`) and hyperedges.
pub fn motion_consistency(degree: usize, zeta: usize, total_area: f64) -> f64 {
    if zeta == 0 {
        return 0.0;
    }
    let z = degree as f64 * zeta as f64 / total_area;
    (1.0 - 2.0 / (1.0 + z.exp())).clamp(0.0, 1.0)
}

/// Reliability of a node: its mean detection confidence.
pub fn self_loop_affinity(v: &Tracklet) -> AffinityVector {
    AffinityVector::scalar(v.score().clamp(0.0, 1.0)).expect("score in [0, 1]")
}

/// Which appearance channels carry real features. A disabled channel takes
/// [`NEUTRAL_CHANNEL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channels {
    pub color: bool,
    pub embedding: bool,
}

impl Default for Channels {
    fn default() -> Self {
        Self {
            color: true,
            embedding: true,
        }
    }
}

/// `[P_col, P_emb, P_mot]` between the tail of `earlier` and the head of `later`.
pub fn edge_affinity(earlier: &Tracklet, later: &Tracklet, ctx: &MotionContext) -> Result<AffinityVector> {
    edge_affinity_with(earlier, later, ctx, Channels::default())
}

pub fn edge_affinity_with(
    earlier: &Tracklet,
    later: &Tracklet,
    ctx: &MotionContext,
    channels: Channels,
) -> Result<AffinityVector> {
    if earlier.end_frame() >= later.start_frame() {
        return Err(Error::TemporalOverlap {
            a_start: earlier.start_frame(),
            a_end: earlier.end_frame(),
            b_start: later.start_frame(),
            b_end: later.end_frame(),
        });
    }
    let tail = earlier.last();
    let head = later.first();

    let color = match (channels.color, &tail.histogram, &head.histogram) {
        (true, Some(a), Some(b)) => cosine_f32(a, b).map(|c| c.clamp(0.0, 1.0)).unwrap_or(NEUTRAL_CHANNEL),
        _ => NEUTRAL_CHANNEL,
    };
    let embedding = match (channels.embedding, &tail.embedding, &head.embedding) {
        (true, Some(a), Some(b)) => cosine_f32(a, b)
            .map(|c| ((1.0 + c) / 2.0).clamp(0.0, 1.0))
            .unwrap_or(NEUTRAL_CHANNEL),
        _ => NEUTRAL_CHANNEL,
    };
    let zeta = ctx.count_through([tail, head]);
    let motion = motion_consistency(2, zeta, tail.area() + head.area());
    AffinityVector::new(vec![color, embedding, motion])
}

/// Motion consistency of `d >= 3` pairwise non-overlapping tracklets: the
/// number of point trajectories crossing every box of every member.
pub fn hyperedge_affinity(nodes: &[&Tracklet], ctx: &MotionContext) -> Result<AffinityVector> {
    let d = nodes.len();
    if d < 3 {
        return Err(Error::InvalidEdge(format!("hyperedge needs at least 3 nodes, got {d}")));
    }
    for (i, a) in nodes.iter().enumerate() {
        if a.is_empty() {
            return Err(Error::InvalidTracklet("empty tracklet in hyperedge".into()));
        }
        for b in &nodes[i + 1..] {
            if a.overlaps(b) {
                return Err(Error::TemporalOverlap {
                    a_start: a.start_frame(),
                    a_end: a.end_frame(),
                    b_start: b.start_frame(),
                    b_end: b.end_frame(),
                });
            }
        }
    }
    let zeta = ctx.count_through(nodes.iter().flat_map(|t| t.detections()));
    let area: f64 = nodes.iter().map(|t| t.total_area()).sum();
    AffinityVector::scalar(motion_consistency(d, zeta, area))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn det_at(id: u64, frame: u32, cx: f64, cy: f64, w: f64, h: f64) -> Detection {
        Detection::new(id, frame, cx, cy, w, h, 0.9).unwrap()
    }

    fn single(node: usize, d: Detection) -> Tracklet {
        Tracklet::from_detection(node, d)
    }

    #[test]
    fn self_loop_is_mean_confidence() {
        let mk = |c: &[f64]| {
            let dets = c
                .iter()
                .enumerate()
                .map(|(i, &c)| Detection::new(i as u64, i as u32, 0.0, 0.0, 1.0, 1.0, c).unwrap())
                .collect();
            Tracklet::new(0, dets).unwrap()
        };
        assert_eq!(self_loop_affinity(&mk(&[1.0, 1.0, 1.0])).values(), &[1.0]);
        assert!((self_loop_affinity(&mk(&[0.2, 0.8])).values()[0] - 0.5).abs() < 1e-12);
        assert_eq!(self_loop_affinity(&mk(&[0.33])).values(), &[0.33]);
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[0.3, 0.4], &[0.3, 0.4]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Degenerate(_))));
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn motion_channel_values() {
        assert_eq!(motion_consistency(2, 0, 200.0), 0.0);
        // 2·100 / (100 + 100) = 1
        assert!((motion_consistency(2, 100, 200.0) - 0.46211716).abs() < 1e-8);
        // 3·300 / 900 = 1
        assert!((motion_consistency(3, 300, 900.0) - 0.46211716).abs() < 1e-8);
    }

    #[test]
    fn histogram_normalization() {
        let h = Histogram::new(vec![3.0, 4.0]).unwrap();
        assert!((h.bins()[0] - 0.6).abs() < 1e-12);
        assert!(Histogram::new(vec![0.0, 0.0]).unwrap().is_degenerate());
        assert!(Histogram::new(vec![-1.0]).is_err());
    }

    #[test]
    fn edge_affinity_channels() {
        let hist: Arc<[f32]> = Arc::from(vec![1.0f32, 2.0, 0.0]);
        let a = single(0, det_at(0, 0, 10.0, 10.0, 10.0, 10.0).with_histogram(hist.clone()));
        let b = single(1, det_at(1, 2, 10.0, 10.0, 10.0, 10.0).with_histogram(hist));
        let ctx = MotionContext::empty();
        let aff = edge_affinity(&a, &b, &ctx).unwrap();
        assert!((aff.values()[0] - 1.0).abs() < 1e-12);
        assert_eq!(aff.values()[1], NEUTRAL_CHANNEL);
        assert_eq!(aff.values()[2], 0.0);
        assert!(edge_affinity(&b, &a, &ctx).is_err());
    }

    #[test]
    fn edge_motion_counts_shared_trajectories() {
        let a = single(0, det_at(0, 0, 5.0, 5.0, 10.0, 10.0));
        let b = single(1, det_at(1, 1, 5.0, 5.0, 10.0, 10.0));
        let trajs = (0..100)
            .map(|i| PointTrajectory::new(i, vec![(0, 5.0, 5.0), (1, 5.0, 5.0)]).unwrap())
            .chain(std::iter::once(PointTrajectory::new(999, vec![(0, 5.0, 5.0), (1, 50.0, 50.0)]).unwrap()))
            .collect();
        let ctx = MotionContext::new(trajs);
        let aff = edge_affinity(&a, &b, &ctx).unwrap();
        assert!((aff.values()[2] - 0.46211716).abs() < 1e-8);
    }

    #[test]
    fn embedding_channel_maps_cosine() {
        let e1: Arc<[f32]> = Arc::from(vec![1.0f32, 0.0]);
        let e2: Arc<[f32]> = Arc::from(vec![-1.0f32, 0.0]);
        let a = single(0, det_at(0, 0, 0.0, 0.0, 1.0, 1.0).with_embedding(e1));
        let b = single(1, det_at(1, 1, 0.0, 0.0, 1.0, 1.0).with_embedding(e2));
        let aff = edge_affinity(&a, &b, &MotionContext::empty()).unwrap();
        assert_eq!(aff.values()[1], 0.0);
        let off = edge_affinity_with(&a, &b, &MotionContext::empty(), Channels { color: true, embedding: false }).unwrap();
        assert_eq!(off.values()[1], NEUTRAL_CHANNEL);
    }

    #[test]
    fn hyperedge_requires_three_and_no_overlap() {
        let ctx = MotionContext::empty();
        let a = single(0, det_at(0, 0, 0.0, 0.0, 1.0, 1.0));
        let b = single(1, det_at(1, 1, 0.0, 0.0, 1.0, 1.0));
        let c = single(2, det_at(2, 1, 0.0, 0.0, 1.0, 1.0));
        assert!(hyperedge_affinity(&[&a, &b], &ctx).is_err());
        assert!(hyperedge_affinity(&[&a, &b, &c], &ctx).is_err());
    }

    #[test]
    fn hyperedge_is_permutation_invariant() {
        let ts: Vec<Tracklet> = (0..3).map(|i| single(i, det_at(i as u64, i as u32, 5.0, 5.0, 10.0, 10.0))).collect();
        let trajs = (0..40)
            .map(|i| {
                let x = 1.0 + (i % 9) as f64;
                PointTrajectory::new(i, vec![(0, x, 5.0), (1, x, 5.0), (2, x + (i % 2) as f64 * 20.0, 5.0)]).unwrap()
            })
            .collect();
        let ctx = MotionContext::new(trajs);
        let v1 = hyperedge_affinity(&[&ts[0], &ts[1], &ts[2]], &ctx).unwrap();
        let v2 = hyperedge_affinity(&[&ts[2], &ts[0], &ts[1]], &ctx).unwrap();
        assert_eq!(v1, v2);
        // 20 of 40 trajectories stay inside all three boxes.
        let expected = motion_consistency(3, 20, 300.0);
        assert!((v1.values()[0] - expected).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn brute_zeta(trajs: &[PointTrajectory], boxes: &[Detection]) -> usize {
            trajs
                .iter()
                .filter(|t| {
                    boxes.iter().all(|b| {
                        t.samples()
                            .iter()
                            .any(|&(f, x, y)| f == b.frame && x >= b.cx - b.width / 2.0 && x <= b.cx + b.width / 2.0 && y >= b.cy - b.height / 2.0 && y <= b.cy + b.height / 2.0)
                    })
                })
                .count()
        }

        proptest! {
            #[test]
            fn zeta_matches_brute_force(
                pts in proptest::collection::vec(proptest::collection::vec((0.0f64..20.0, 0.0f64..20.0), 4), 0..50),
                boxes in proptest::collection::vec((0u32..4, 0.0f64..20.0, 0.0f64..20.0, 1.0f64..12.0, 1.0f64..12.0), 1..4),
            ) {
                let trajs: Vec<PointTrajectory> = pts.iter().enumerate()
                    .map(|(i, p)| PointTrajectory::new(i as i64, p.iter().enumerate().map(|(f, &(x, y))| (f as u32, x, y)).collect()).unwrap())
                    .collect();
                let dets: Vec<Detection> = boxes.iter().enumerate()
                    .map(|(i, &(f, x, y, w, h))| Detection::new(i as u64, f, x, y, w, h, 0.5).unwrap())
                    .collect();
                let ctx = MotionContext::new(trajs.clone());
                prop_assert_eq!(ctx.count_through(&dets), brute_zeta(&trajs, &dets));
            }

            #[test]
            fn motion_monotone(zeta in 1usize..500, area in 10.0f64..5000.0, d in 2usize..5) {
                let base = motion_consistency(d, zeta, area);
                prop_assert!((0.0..=1.0).contains(&base));
                prop_assert!(motion_consistency(d, zeta + 1, area) >= base);
                prop_assert!(motion_consistency(d, zeta, area * 1.5) <= base);
            }
        }
    }
}
