//! CLEAR-MOT and identity (IDF1) evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_assignment;

/// One box with an identity, in either results or ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub frame: u32,
    pub id: i64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl LabeledBox {
    pub fn new(frame: u32, id: i64, left: f64, top: f64, width: f64, height: f64) -> Self {
        Self {
            frame,
            id,
            left,
            top,
            width,
            height,
        }
    }

    pub fn iou(&self, other: &LabeledBox) -> f64 {
        let x0 = self.left.max(other.left);
        let y0 = self.top.max(other.top);
        let x1 = (self.left + self.width).min(other.left + other.width);
        let y1 = (self.top + self.height).min(other.top + other.height);
        let inter = (x1 - x0).max(0.0) * (y1 - y0).max(0.0);
        let union = self.width * self.height + other.width * other.height - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearMot {
    /// `None` when there are no ground-truth boxes.
    pub mota: Option<f64>,
    /// Mean IoU of matched pairs.
    pub motp_iou: Option<f64>,
    /// `1 - mean((1 - IoU) / (1 - threshold))`, the threshold-normalised variant.
    pub motp_normalized: Option<f64>,
    pub mostly_tracked: usize,
    pub mostly_lost: usize,
    pub gt_trajectories: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub fragmentations: usize,
    pub gt_boxes: usize,
    pub matches: usize,
}

impl ClearMot {
    pub fn mt_ratio(&self) -> Option<f64> {
        (self.gt_trajectories > 0).then(|| self.mostly_tracked as f64 / self.gt_trajectories as f64)
    }

    pub fn ml_ratio(&self) -> Option<f64> {
        (self.gt_trajectories > 0).then(|| self.mostly_lost as f64 / self.gt_trajectories as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdScores {
    /// `None` when both inputs are empty.
    pub idf1: Option<f64>,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iou_threshold: f64,
    pub clear: ClearMot,
    pub identity: IdScores,
}

impl MetricsReport {
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"));
        let c = &self.clear;
        let mut s = String::new();
        let rows: [(&str, String); 15] = [
            ("IoU threshold", format!("{}", self.iou_threshold)),
            ("MOTA", opt(c.mota)),
            ("MOTP (IoU)", opt(c.motp_iou)),
            ("MOTP (normalized)", opt(c.motp_normalized)),
            ("IDF1", opt(self.identity.idf1)),
            ("MT", format!("{} / {}", c.mostly_tracked, c.gt_trajectories)),
            ("ML", format!("{} / {}", c.mostly_lost, c.gt_trajectories)),
            ("FP", c.false_positives.to_string()),
            ("FN", c.false_negatives.to_string()),
            ("IDS", c.id_switches.to_string()),
            ("FM", c.fragmentations.to_string()),
            ("GT boxes", c.gt_boxes.to_string()),
            ("IDTP", self.identity.idtp.to_string()),
            ("IDFP", self.identity.idfp.to_string()),
            ("IDFN", self.identity.idfn.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<18} {v}");
        }
        s
    }
}

fn by_frame(boxes: &[LabeledBox]) -> BTreeMap<u32, Vec<&LabeledBox>> {
    let mut out: BTreeMap<u32, Vec<&LabeledBox>> = BTreeMap::new();
    for b in boxes {
        out.entry(b.frame).or_default().push(b);
    }
    for v in out.values_mut() {
        v.sort_by_key(|b| b.id);
    }
    out
}

/// Per-frame matching with persistence of the previous frame's pairs, then a
/// maximum-IoU assignment for the rest.
pub fn clear_mot(results: &[LabeledBox], ground_truth: &[LabeledBox], iou_threshold: f64) -> ClearMot {
    let res_frames = by_frame(results);
    let gt_frames = by_frame(ground_truth);
    let frames: BTreeSet<u32> = res_frames.keys().chain(gt_frames.keys()).copied().collect();

    let mut active: HashMap<i64, i64> = HashMap::new();
    let mut last_match: HashMap<i64, i64> = HashMap::new();
    // Per-GT presence history: (frame, tracked).
    let mut history: BTreeMap<i64, Vec<bool>> = BTreeMap::new();
    let (mut fp, mut fn_, mut ids, mut matches) = (0usize, 0usize, 0usize, 0usize);
    let mut iou_sum = 0.0;
    let mut norm_sum = 0.0;
    let empty = Vec::new();

    for f in frames {
        let gts = gt_frames.get(&f).unwrap_or(&empty);
        let res = res_frames.get(&f).unwrap_or(&empty);
        let mut gt_taken = vec![None::<usize>; gts.len()];
        let mut res_taken = vec![false; res.len()];

        for (gi, g) in gts.iter().enumerate() {
            if let Some(&rid) = active.get(&g.id) {
                if let Some(ri) = res.iter().position(|r| r.id == rid) {
                    if !res_taken[ri] && g.iou(res[ri]) >= iou_threshold {
                        gt_taken[gi] = Some(ri);
                        res_taken[ri] = true;
                    }
                }
            }
        }

        let free_g: Vec<usize> = (0..gts.len()).filter(|&i| gt_taken[i].is_none()).collect();
        let free_r: Vec<usize> = (0..res.len()).filter(|&i| !res_taken[i]).collect();
        let weights: Vec<Vec<f64>> = free_g
            .iter()
            .map(|&gi| {
                free_r
                    .iter()
                    .map(|&ri| {
                        let iou = gts[gi].iou(res[ri]);
                        // Shift so that an at-threshold pair still counts as an edge.
                        if iou >= iou_threshold {
                            1.0 + iou
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        for (k, a) in max_weight_assignment(&weights).into_iter().enumerate() {
            if let Some(c) = a {
                gt_taken[free_g[k]] = Some(free_r[c]);
                res_taken[free_r[c]] = true;
            }
        }

        let mut next_active = HashMap::new();
        for (gi, g) in gts.iter().enumerate() {
            match gt_taken[gi] {
                Some(ri) => {
                    let r = res[ri];
                    if let Some(&prev) = last_match.get(&g.id) {
                        if prev != r.id {
                            ids += 1;
                        }
                    }
                    last_match.insert(g.id, r.id);
                    next_active.insert(g.id, r.id);
                    let iou = g.iou(r);
                    iou_sum += iou;
                    norm_sum += 1.0 - (1.0 - iou) / (1.0 - iou_threshold);
                    matches += 1;
                    history.entry(g.id).or_default().push(true);
                }
                None => {
                    fn_ += 1;
                    history.entry(g.id).or_default().push(false);
                }
            }
        }
        fp += res_taken.iter().filter(|t| !**t).count();
        active = next_active;
    }

    let (mut mt, mut ml, mut fm) = (0, 0, 0);
    for h in history.values() {
        let ratio = h.iter().filter(|t| **t).count() as f64 / h.len() as f64;
        if ratio >= 0.8 {
            mt += 1;
        } else if ratio <= 0.2 {
            ml += 1;
        }
        let mut seen_tracked = false;
        let mut gap = false;
        for &t in h {
            if t {
                if seen_tracked && gap {
                    fm += 1;
                }
                seen_tracked = true;
                gap = false;
            } else if seen_tracked {
                gap = true;
            }
        }
    }

    let gt_boxes = ground_truth.len();
    ClearMot {
        mota: (gt_boxes > 0).then(|| 1.0 - (fn_ + fp + ids) as f64 / gt_boxes as f64),
        motp_iou: (matches > 0).then(|| iou_sum / matches as f64),
        motp_normalized: (matches > 0).then(|| norm_sum / matches as f64),
        mostly_tracked: mt,
        mostly_lost: ml,
        gt_trajectories: history.len(),
        false_positives: fp,
        false_negatives: fn_,
        id_switches: ids,
        fragmentations: fm,
        gt_boxes,
        matches,
    }
}

/// Identity scores from a global one-to-one assignment of result
/// trajectories to ground-truth trajectories maximising co-located frames.
pub fn idf1(results: &[LabeledBox], ground_truth: &[LabeledBox], iou_threshold: f64) -> IdScores {
    let gt_ids: Vec<i64> = ground_truth.iter().map(|b| b.id).collect::<BTreeSet<_>>().into_iter().collect();
    let res_ids: Vec<i64> = results.iter().map(|b| b.id).collect::<BTreeSet<_>>().into_iter().collect();
    let gi: HashMap<i64, usize> = gt_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let ri: HashMap<i64, usize> = res_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    let mut overlap = vec![vec![0.0; res_ids.len()]; gt_ids.len()];
    let res_frames = by_frame(results);
    for (f, gts) in by_frame(ground_truth) {
        let Some(res) = res_frames.get(&f) else { continue };
        for g in &gts {
            for r in res {
                if g.iou(r) >= iou_threshold {
                    overlap[gi[&g.id]][ri[&r.id]] += 1.0;
                }
            }
        }
    }
    let assignment = max_weight_assignment(&overlap);
    let idtp: usize = assignment
        .iter()
        .enumerate()
        .filter_map(|(g, r)| r.map(|r| overlap[g][r] as usize))
        .sum();
    let total = ground_truth.len() + results.len();
    IdScores {
        idf1: (total > 0).then(|| 2.0 * idtp as f64 / total as f64),
        idtp,
        idfp: results.len() - idtp,
        idfn: ground_truth.len() - idtp,
    }
}

pub fn evaluate(results: &[LabeledBox], ground_truth: &[LabeledBox], iou_threshold: f64) -> MetricsReport {
    MetricsReport {
        iou_threshold,
        clear: clear_mot(results, ground_truth, iou_threshold),
        identity: idf1(results, ground_truth, iou_threshold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(frame: u32, id: i64, x: f64) -> LabeledBox {
        LabeledBox::new(frame, id, x, 0.0, 10.0, 10.0)
    }

    /// Two crossing-free lanes over `frames` frames.
    fn lanes(frames: u32, ids: [i64; 2]) -> Vec<LabeledBox> {
        (0..frames).flat_map(|f| [b(f, ids[0], 0.0), b(f, ids[1], 100.0)]).collect()
    }

    #[test]
    fn perfect_tracking() {
        let gt = lanes(5, [1, 2]);
        let r = evaluate(&gt, &gt, 0.5);
        assert_eq!(r.clear.mota, Some(1.0));
        assert_eq!(r.clear.id_switches, 0);
        assert_eq!(r.clear.fragmentations, 0);
        assert_eq!(r.clear.mt_ratio(), Some(1.0));
        assert_eq!(r.identity.idf1, Some(1.0));
    }

    #[test]
    fn mota_hand_count() {
        // 5 GT boxes in each of 2 frames; one missed in frame 1, one spurious in frame 0.
        let gt: Vec<LabeledBox> = (0..2).flat_map(|f| (0..5).map(move |k| b(f, k, 50.0 * k as f64))).collect();
        let mut res: Vec<LabeledBox> = gt.iter().filter(|g| !(g.frame == 1 && g.id == 3)).copied().collect();
        res.push(b(0, 99, 1000.0));
        let m = clear_mot(&res, &gt, 0.5);
        assert_eq!((m.false_negatives, m.false_positives, m.id_switches), (1, 1, 0));
        assert_eq!(m.mota, Some(0.8));
    }

    #[test]
    fn identity_swap_counts_two_switches() {
        let gt = lanes(4, [1, 2]);
        let mut res = lanes(2, [1, 2]);
        res.extend((2..4).flat_map(|f| [b(f, 2, 0.0), b(f, 1, 100.0)]));
        let m = clear_mot(&res, &gt, 0.5);
        assert_eq!(m.id_switches, 2);
        assert_eq!(m.mota, Some(1.0 - 2.0 / 8.0));
    }

    #[test]
    fn relabeling_results_is_invariant() {
        let gt = lanes(4, [1, 2]);
        let mut res = lanes(2, [1, 2]);
        res.extend((2..4).flat_map(|f| [b(f, 2, 0.0), b(f, 1, 100.0)]));
        let relabeled: Vec<LabeledBox> = res.iter().map(|r| LabeledBox { id: r.id + 40, ..*r }).collect();
        assert_eq!(clear_mot(&res, &gt, 0.5), clear_mot(&relabeled, &gt, 0.5));
    }

    #[test]
    fn empty_cases() {
        let gt = lanes(3, [1, 2]);
        assert_eq!(idf1(&[], &gt, 0.5).idf1, Some(0.0));
        assert_eq!(clear_mot(&gt, &[], 0.5).mota, None);
        assert_eq!(idf1(&[], &[], 0.5).idf1, None);
    }

    #[test]
    fn split_trajectory_identity_scores() {
        let gt: Vec<LabeledBox> = (0..10).map(|f| b(f, 1, 0.0)).collect();
        let res: Vec<LabeledBox> = (0..10).map(|f| b(f, if f < 5 { 7 } else { 8 }, 0.0)).collect();
        let s = idf1(&res, &gt, 0.5);
        assert_eq!((s.idtp, s.idfp, s.idfn), (5, 5, 5));
        assert_eq!(s.idf1, Some(0.5));
    }

    #[test]
    fn half_coverage_identity_score() {
        let gt: Vec<LabeledBox> = (0..10).map(|f| b(f, 1, 0.0)).collect();
        let res: Vec<LabeledBox> = (0..5).map(|f| b(f, 7, 0.0)).collect();
        let s = idf1(&res, &gt, 0.5);
        assert_eq!((s.idtp, s.idfp, s.idfn), (5, 0, 5));
        assert!((s.idf1.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fragmentation_counted() {
        let gt: Vec<LabeledBox> = (0..6).map(|f| b(f, 1, 0.0)).collect();
        let res: Vec<LabeledBox> = [0, 1, 3, 5].iter().map(|&f| b(f, 1, 0.0)).collect();
        let m = clear_mot(&res, &gt, 0.5);
        assert_eq!(m.fragmentations, 2);
        assert_eq!(m.false_negatives, 2);
    }

    #[test]
    fn report_serialises() {
        let gt = lanes(2, [1, 2]);
        let r = evaluate(&gt, &gt, 0.5);
        let s = serde_json::to_string(&r).unwrap();
        let back: MetricsReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        assert!(r.to_table().contains("MOTA"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn track_set() -> impl Strategy<Value = Vec<LabeledBox>> {
            proptest::collection::vec((0u32..8, 0i64..4, 0.0f64..60.0, 0.0f64..60.0), 0..30).prop_map(|v| {
                let mut seen = std::collections::HashSet::new();
                v.into_iter()
                    .filter(|(f, id, _, _)| seen.insert((*f, *id)))
                    .map(|(f, id, x, y)| LabeledBox::new(f, id, x, y, 12.0, 12.0))
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn mota_bounded_and_counts_consistent(res in track_set(), gt in track_set()) {
                let m = clear_mot(&res, &gt, 0.5);
                if let Some(mota) = m.mota {
                    prop_assert!(mota <= 1.0);
                }
                prop_assert_eq!(m.matches + m.false_negatives, gt.len());
                prop_assert_eq!(m.matches + m.false_positives, res.len());
            }

            #[test]
            fn idf1_symmetric(res in track_set(), gt in track_set()) {
                let a = idf1(&res, &gt, 0.5);
                let b = idf1(&gt, &res, 0.5);
                prop_assert_eq!(a.idtp, b.idtp);
                prop_assert_eq!(a.idf1, b.idf1);
            }
        }
    }
}
