//! Structural SVM learning of the per-degree weights with n-slack cutting
//! planes and margin rescaling.

use std::collections::HashSet;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::MotionContext;
use crate::assignment::max_weight_assignment;
use crate::builder::{build_hypergraph_with, estimate_max_velocity, BuildConfig, BuildOptions};
use crate::error::{Error, Result};
use crate::metrics::LabeledBox;
use crate::model::{Detection, Hypergraph, Labeling, Tracklet, WeightVector};
use crate::postprocess::{resolve_conflicts, restrict_to_cliques};
use crate::search::{search_all_biased, SearchConfig};

/// One training clip: the hypergraph over its tracklets, the ground-truth
/// partition and per-node loss weights.
#[derive(Debug, Clone)]
pub struct TrainingInstance {
    pub graph: Hypergraph,
    pub truth: Labeling,
    pub loss_weights: Vec<f64>,
}

impl TrainingInstance {
    pub fn new(graph: Hypergraph, truth: Labeling, loss_weights: Option<Vec<f64>>) -> Result<Self> {
        let n = graph.num_nodes();
        if truth.len() != n {
            return Err(Error::DimensionMismatch(format!("labeling covers {} nodes, graph has {n}", truth.len())));
        }
        if truth.labels().iter().any(Option::is_none) {
            return Err(Error::InvalidLabeling("ground truth must assign every node".into()));
        }
        let loss_weights = loss_weights.unwrap_or_else(|| vec![1.0; n]);
        if loss_weights.len() != n || loss_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidLabeling("loss weights must be one finite non-negative value per node".into()));
        }
        Ok(Self {
            graph,
            truth,
            loss_weights,
        })
    }

    pub fn dimension(&self) -> usize {
        self.graph.arities().iter().sum()
    }
}

/// Cuts a sequence into non-overlapping clips of `cfg.clip_length` frames.
/// Inside each frame detections are matched one-to-one to ground-truth boxes
/// (maximum total IoU over pairs above `cfg.match_iou`); matched detections
/// become the clip's nodes and inherit the ground-truth identity, the rest are
/// dropped. Clips with fewer than two matched detections are skipped.
pub fn training_clips(
    detections: &[Detection],
    ground_truth: &[LabeledBox],
    ctx: &MotionContext,
    build: &BuildConfig,
    cfg: &LearnConfig,
) -> Result<Vec<TrainingInstance>> {
    cfg.validate()?;
    let mut build = build.clone();
    if build.max_velocity.is_none() {
        build.max_velocity = Some(estimate_max_velocity(detections));
    }
    let mut matched: Vec<(Detection, i64)> = Vec::new();
    let mut frames: std::collections::BTreeMap<u32, (Vec<&Detection>, Vec<&LabeledBox>)> = std::collections::BTreeMap::new();
    for d in detections {
        frames.entry(d.frame).or_default().0.push(d);
    }
    for g in ground_truth {
        frames.entry(g.frame).or_default().1.push(g);
    }
    for (dets, gts) in frames.values() {
        let iou: Vec<Vec<f64>> = dets
            .iter()
            .map(|d| {
                let b = LabeledBox::new(d.frame, -1, d.left(), d.top(), d.width, d.height);
                gts.iter()
                    .map(|g| {
                        let v = b.iou(g);
                        if v > cfg.match_iou {
                            v
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        for (i, g) in max_weight_assignment(&iou).into_iter().enumerate() {
            if let Some(g) = g {
                matched.push((dets[i].clone(), gts[g].id));
            }
        }
    }

    let mut out = Vec::new();
    let mut at = 0;
    while at < matched.len() {
        let clip = matched[at].0.frame / cfg.clip_length;
        let end = matched[at..]
            .iter()
            .position(|(d, _)| d.frame / cfg.clip_length != clip)
            .map_or(matched.len(), |k| at + k);
        let members = &matched[at..end];
        at = end;
        if members.len() < 2 {
            continue;
        }
        let nodes: Vec<Tracklet> = members.iter().enumerate().map(|(i, (d, _))| Tracklet::from_detection(i, d.clone())).collect();
        let graph = build_hypergraph_with(&nodes, ctx, &build, BuildOptions::for_tracklets(&nodes))?;
        let keys: Vec<Option<i64>> = members.iter().map(|(_, id)| Some(*id)).collect();
        out.push(TrainingInstance::new(graph, Labeling::from_keys(&keys), None)?);
    }
    Ok(out)
}

/// Joint feature vector `S(Y)` in the flat [`WeightVector`] layout. Every
/// tuple lying inside one cluster of size `s` adds `A · (1/s)^d`.
pub fn feature_map(labeling: &Labeling, graph: &Hypergraph) -> Result<Vec<f64>> {
    if labeling.len() != graph.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "labeling covers {} nodes, graph has {}",
            labeling.len(),
            graph.num_nodes()
        )));
    }
    let sizes: Vec<usize> = labeling.clusters().iter().map(Vec::len).collect();
    let mut out = Vec::with_capacity(graph.arities().iter().sum());
    for d in 1..=graph.max_degree() {
        let mut acc = vec![0.0; graph.arities()[d - 1]];
        for e in graph.edges(d) {
            let Some(l) = labeling.label(e.nodes[0]) else { continue };
            if e.nodes[1..].iter().any(|&v| labeling.label(v) != Some(l)) {
                continue;
            }
            let y = (1.0 / sizes[l - 1] as f64).powi(d as i32);
            for (a, v) in acc.iter_mut().zip(e.affinity.values()) {
                *a += v * y;
            }
        }
        out.extend(acc);
    }
    Ok(out)
}

pub fn score(weights: &WeightVector, features: &[f64]) -> f64 {
    weights.flatten().iter().zip(features).map(|(a, b)| a * b).sum()
}

/// Weighted Hamming loss under the best one-to-one correspondence between the
/// clusters of `y` and `truth` (maximum matched weight). Nodes left
/// unassigned by both labelings count as agreeing.
pub fn hamming_loss(y: &Labeling, truth: &Labeling, weights: Option<&[f64]>) -> f64 {
    let n = y.len().min(truth.len());
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut overlap = vec![vec![0.0; truth.num_identities()]; y.num_identities()];
    let mut total = 0.0;
    let mut agree_unassigned = 0.0;
    for i in 0..n {
        total += w(i);
        match (y.label(i), truth.label(i)) {
            (Some(a), Some(b)) => overlap[a - 1][b - 1] += w(i),
            (None, None) => agree_unassigned += w(i),
            _ => {}
        }
    }
    let matched: f64 = max_weight_assignment(&overlap)
        .iter()
        .enumerate()
        .filter_map(|(a, b)| b.map(|b| overlap[a][b]))
        .sum();
    (total - matched - agree_unassigned).max(0.0)
}

/// Every pair inside each cluster is joined in the graph.
pub fn is_feasible(labeling: &Labeling, graph: &Hypergraph) -> bool {
    labeling.clusters().iter().all(|c| {
        c.iter()
            .enumerate()
            .all(|(i, &u)| c[i + 1..].iter().all(|v| graph.neighborhood(u).contains(v)))
    })
}

/// `λᵀ(S(Y) − S(Y*)) + Δ(Y, Y*)`.
pub fn violation(weights: &WeightVector, instance: &TrainingInstance, y: &Labeling) -> Result<f64> {
    let s = feature_map(y, &instance.graph)?;
    let s_star = feature_map(&instance.truth, &instance.graph)?;
    Ok(score(weights, &s) - score(weights, &s_star) + hamming_loss(y, &instance.truth, Some(&instance.loss_weights)))
}

/// Exact `λᵀS(Y) + Δ(Y, Y*)` on cluster assignments, used by the local
/// search refinement.
struct AugmentedScore<'a> {
    instance: &'a TrainingInstance,
    edges: Vec<(Vec<usize>, f64)>,
}

impl<'a> AugmentedScore<'a> {
    fn new(weights: &WeightVector, instance: &'a TrainingInstance) -> Result<Self> {
        let g = &instance.graph;
        let mut edges = Vec::with_capacity(g.total_edges());
        for d in 1..=g.max_degree() {
            for e in g.edges(d) {
                let c = weights.dot(d, &e.affinity)?;
                if c != 0.0 {
                    edges.push((e.nodes.clone(), c));
                }
            }
        }
        Ok(Self { instance, edges })
    }

    fn eval(&self, assign: &[usize]) -> f64 {
        let mut sizes = vec![0usize; assign.len()];
        for &c in assign {
            sizes[c] += 1;
        }
        let mut s = 0.0;
        for (nodes, coef) in &self.edges {
            let c = assign[nodes[0]];
            if nodes[1..].iter().all(|&v| assign[v] == c) {
                s += coef * (1.0 / sizes[c] as f64).powi(nodes.len() as i32);
            }
        }
        s + hamming_loss(&to_labeling(assign), &self.instance.truth, Some(&self.instance.loss_weights))
    }
}

fn to_labeling(assign: &[usize]) -> Labeling {
    let keys: Vec<Option<usize>> = assign.iter().map(|&c| Some(c)).collect();
    Labeling::from_keys(&keys)
}

fn to_assign(labeling: &Labeling) -> Vec<usize> {
    let k = labeling.num_identities();
    let mut next = k;
    labeling
        .labels()
        .iter()
        .map(|l| match l {
            Some(l) => l - 1,
            None => {
                next += 1;
                next - 1
            }
        })
        .collect()
}

/// First-improvement local search over single-node moves and cluster merges,
/// restricted to feasible partitions.
fn refine(scorer: &AugmentedScore, graph: &Hypergraph, mut assign: Vec<usize>, max_sweeps: usize) -> (Vec<usize>, f64) {
    let n = assign.len();
    let adjacent = |u: usize, v: usize| graph.neighborhood(u).contains(&v);
    let mut best = scorer.eval(&assign);
    for _ in 0..max_sweeps {
        let mut improved = false;
        for v in 0..n {
            let mut labels: Vec<usize> = assign.iter().copied().collect::<HashSet<_>>().into_iter().collect();
            labels.sort_unstable();
            let fresh = (0..=n).find(|c| !labels.contains(c)).expect("a free label exists");
            let alone = assign.iter().filter(|&&c| c == assign[v]).count() == 1;
            for target in labels.into_iter().chain((!alone).then_some(fresh)) {
                if target == assign[v] {
                    continue;
                }
                if !(0..n).all(|u| u == v || assign[u] != target || adjacent(u, v)) {
                    continue;
                }
                let old = assign[v];
                assign[v] = target;
                let s = scorer.eval(&assign);
                if s > best + 1e-12 {
                    best = s;
                    improved = true;
                } else {
                    assign[v] = old;
                }
            }
        }
        let mut labels: Vec<usize> = assign.iter().copied().collect::<HashSet<_>>().into_iter().collect();
        labels.sort_unstable();
        for (i, &a) in labels.iter().enumerate() {
            for &b in &labels[i + 1..] {
                let (ma, mb): (Vec<usize>, Vec<usize>) = (
                    (0..n).filter(|&u| assign[u] == a).collect(),
                    (0..n).filter(|&u| assign[u] == b).collect(),
                );
                if ma.is_empty() || mb.is_empty() || !ma.iter().all(|&u| mb.iter().all(|&w| adjacent(u, w))) {
                    continue;
                }
                let mut trial = assign.clone();
                for &u in &mb {
                    trial[u] = a;
                }
                let s = scorer.eval(&trial);
                if s > best + 1e-12 {
                    best = s;
                    assign = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (assign, best)
}

/// Approximate most-violated labeling. Candidates come from loss-augmented
/// and plain dense search (supports made feasible, leftovers as singletons),
/// the ground truth and the all-singleton labeling; each is refined by local
/// search on the exact augmented score and the best is returned.
pub fn separation_oracle(weights: &WeightVector, instance: &TrainingInstance, cfg: &SearchConfig) -> Result<Labeling> {
    let g = &instance.graph;
    let n = g.num_nodes();
    let scorer = AugmentedScore::new(weights, instance)?;
    let mut candidates = vec![to_assign(&instance.truth), (0..n).collect()];
    for bonus in [Some(instance.loss_weights.as_slice()), None] {
        let found = search_all_biased(g, weights, cfg, bonus)?;
        let feasible = restrict_to_cliques(&found, g);
        let picked = resolve_conflicts(&feasible, cfg.alpha_hat);
        let clusters: Vec<Vec<usize>> = picked.into_iter().map(|s| s.support).collect();
        candidates.push(to_assign(&Labeling::from_clusters(n, &clusters)?));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for c in candidates {
        let (a, s) = refine(&scorer, g, c, 50);
        if best.as_ref().is_none_or(|(_, b)| s > *b + 1e-12) {
            best = Some((a, s));
        }
    }
    let (assign, _) = best.expect("at least one candidate");
    Ok(to_labeling(&assign).canonical())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub c: f64,
    pub epsilon: f64,
    pub max_rounds: usize,
    /// Training clip length in frames.
    pub clip_length: u32,
    /// Minimum IoU for a detection to inherit a ground-truth identity.
    pub match_iou: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 1e-3,
            max_rounds: 200,
            clip_length: 14,
            match_iou: 0.5,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config("learn.c must be positive".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("learn.epsilon must be positive".into()));
        }
        if self.max_rounds == 0 || self.clip_length == 0 {
            return Err(Error::Config("learn.max_rounds and learn.clip_length must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.match_iou) {
            return Err(Error::Config("learn.match_iou must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One margin constraint `λᵀ dpsi ≥ loss − ξ_block`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub block: usize,
    pub dpsi: Vec<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub weights: Vec<f64>,
    pub alphas: Vec<f64>,
    pub slacks: Vec<f64>,
    pub kkt_residual: f64,
    pub primal: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `min ½‖λ‖² + C Σ_j ξ_j` over the working set in the dual. Each block
/// carries an implicit zero constraint so that its multipliers sum to `C`;
/// pairwise transfers inside a block are repeated until the largest gradient
/// gap over active multipliers is at most `tol`.
pub fn solve_dual(constraints: &[Constraint], blocks: usize, dim: usize, c: f64, tol: f64) -> DualSolution {
    // Index 0 of every block is the zero constraint.
    let mut members: Vec<Vec<Option<usize>>> = vec![vec![None]; blocks];
    for (i, k) in constraints.iter().enumerate() {
        members[k.block].push(Some(i));
    }
    let mut alpha: Vec<Vec<f64>> = members
        .iter()
        .map(|m| {
            let mut a = vec![0.0; m.len()];
            a[0] = c;
            a
        })
        .collect();
    let mut w = vec![0.0; dim];
    let zero = vec![0.0; dim];
    let vec_of = |m: Option<usize>| m.map_or(zero.as_slice(), |i| constraints[i].dpsi.as_slice());
    let loss_of = |m: Option<usize>| m.map_or(0.0, |i| constraints[i].loss);
    let sq: Vec<f64> = constraints.iter().map(|k| dot(&k.dpsi, &k.dpsi)).collect();
    let sq_of = |m: Option<usize>| m.map_or(0.0, |i| sq[i]);

    let mut residual = 0.0;
    for _ in 0..200_000 {
        residual = 0.0;
        for (b, m) in members.iter().enumerate() {
            if m.len() < 2 {
                continue;
            }
            let grads: Vec<f64> = m.iter().map(|&k| loss_of(k) - dot(&w, vec_of(k))).collect();
            let (up, gu) = grads.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
            let (down, gd) = grads
                .iter()
                .copied()
                .enumerate()
                .filter(|(i, _)| alpha[b][*i] > 0.0)
                .fold((0, f64::INFINITY), |acc, (i, g)| if g < acc.1 { (i, g) } else { acc });
            let gap = gu - gd;
            residual = f64::max(residual, gap);
            if gap <= tol || up == down {
                continue;
            }
            let (vu, vd) = (vec_of(m[up]), vec_of(m[down]));
            let curv = sq_of(m[up]) + sq_of(m[down]) - 2.0 * dot(vu, vd);
            let t = if curv > 0.0 { (gap / curv).min(alpha[b][down]) } else { alpha[b][down] };
            alpha[b][up] += t;
            alpha[b][down] -= t;
            if alpha[b][down] < 1e-15 {
                alpha[b][up] += alpha[b][down];
                alpha[b][down] = 0.0;
            }
            for ((wi, a), bv) in w.iter_mut().zip(vu).zip(vd) {
                *wi += t * (a - bv);
            }
        }
        if residual <= tol {
            break;
        }
    }
    let mut alphas = vec![0.0; constraints.len()];
    for (b, m) in members.iter().enumerate() {
        for (i, k) in m.iter().enumerate() {
            if let Some(k) = k {
                alphas[*k] = alpha[b][i];
            }
        }
    }
    let slacks = block_slacks(constraints, blocks, &w);
    let primal = 0.5 * dot(&w, &w) + c * slacks.iter().sum::<f64>();
    DualSolution {
        weights: w,
        alphas,
        slacks,
        kkt_residual: residual,
        primal,
    }
}

/// `ξ_j = max(0, max_k loss_k − λᵀ dpsi_k)` per block.
pub fn block_slacks(constraints: &[Constraint], blocks: usize, w: &[f64]) -> Vec<f64> {
    let mut xi = vec![0.0f64; blocks];
    for k in constraints {
        xi[k.block] = xi[k.block].max(k.loss - dot(w, &k.dpsi));
    }
    xi
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundLog {
    pub round: usize,
    pub max_violation: f64,
    pub slack_sum: f64,
    pub added: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: WeightVector,
    pub rounds: usize,
    pub converged: bool,
    pub slack_sum: f64,
    pub working_set: Vec<Constraint>,
    pub history: Vec<RoundLog>,
}

/// n-slack cutting-plane training: separation per instance (in parallel),
/// constraints violated by more than `epsilon` beyond the current slack are
/// added, and the QP is re-solved until no constraint is added.
pub fn train(instances: &[TrainingInstance], cfg: &LearnConfig, search: &SearchConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let Some(first) = instances.first() else {
        return Err(Error::Config("training needs at least one instance".into()));
    };
    let arities = first.graph.arities().to_vec();
    if let Some(bad) = instances.iter().find(|i| i.graph.arities() != arities.as_slice()) {
        return Err(Error::DimensionMismatch(format!(
            "instance arities {:?} differ from {:?}",
            bad.graph.arities(),
            arities
        )));
    }
    let dim: usize = arities.iter().sum();
    let truth_features: Vec<Vec<f64>> = instances
        .iter()
        .map(|i| feature_map(&i.truth, &i.graph))
        .collect::<Result<_>>()?;

    let mut working: Vec<Constraint> = Vec::new();
    let mut seen: HashSet<(usize, Vec<Option<usize>>)> = HashSet::new();
    let mut w = vec![0.0; dim];
    let mut history = Vec::new();
    let mut converged = false;
    let mut rounds = 0;

    while rounds < cfg.max_rounds {
        rounds += 1;
        let lambda = WeightVector::from_flat(&arities, &w)?;
        let slacks = block_slacks(&working, instances.len(), &w);
        let found: Vec<(Labeling, Vec<f64>, f64)> = instances
            .par_iter()
            .map(|inst| {
                let y = separation_oracle(&lambda, inst, search)?;
                let s = feature_map(&y, &inst.graph)?;
                let loss = hamming_loss(&y, &inst.truth, Some(&inst.loss_weights));
                Ok((y, s, loss))
            })
            .collect::<Result<_>>()?;

        let mut added = 0;
        let mut max_violation = f64::NEG_INFINITY;
        for (j, (y, s, loss)) in found.into_iter().enumerate() {
            let dpsi: Vec<f64> = truth_features[j].iter().zip(&s).map(|(a, b)| a - b).collect();
            let h = loss - dot(&w, &dpsi);
            max_violation = max_violation.max(h - slacks[j]);
            if h > slacks[j] + cfg.epsilon && seen.insert((j, y.labels().to_vec())) {
                working.push(Constraint { block: j, dpsi, loss });
                added += 1;
            }
        }
        if added == 0 {
            converged = true;
            history.push(RoundLog {
                round: rounds,
                max_violation,
                slack_sum: slacks.iter().sum(),
                added,
            });
            info!("round {rounds}: max violation {max_violation:.6}, no constraint added");
            break;
        }
        let sol = solve_dual(&working, instances.len(), dim, cfg.c, 1e-8);
        if sol.kkt_residual > 1e-8 {
            log::warn!("round {rounds}: QP residual {:.3e} above 1e-8", sol.kkt_residual);
        }
        w = sol.weights;
        let slack_sum = sol.slacks.iter().sum::<f64>();
        info!("round {rounds}: max violation {max_violation:.6}, slack sum {slack_sum:.6}, constraints {}", working.len());
        history.push(RoundLog {
            round: rounds,
            max_violation,
            slack_sum,
            added,
        });
    }
    let slack_sum = block_slacks(&working, instances.len(), &w).iter().sum();
    Ok(TrainOutcome {
        weights: WeightVector::from_flat(&arities, &w)?,
        rounds,
        converged,
        slack_sum,
        working_set: working,
        history,
    })
}
