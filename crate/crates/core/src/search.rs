//! Pairwise-update search for dense structures around a starting node.
//!
//! The objective is the multilinear polynomial
//! `Θ(y) = Σ_d λ_d Σ_{tuples of degree d} A(tuple) Π y_i` restricted to a
//! node set, maximized over the simplex with every coordinate boxed in
//! `[0, 1/α̂]`. Each step moves mass `η` from a low-reward node `q` to a
//! high-reward node `p`. Because every tuple holds distinct nodes, the change
//! in `Θ` is exactly quadratic in `η`:
//!
//! ```text
//! ΔΘ = φ_pq · η² + (φ_p − φ_q) · η
//! ```
//!
//! where `φ_i = ∂Θ/∂y_i` is the reward and `φ_pq` the (non-positive, for
//! non-negative affinities and weights) pair curvature. The starting node may
//! gain mass but never gives it up, and always belongs to the extracted
//! support.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hypergraph, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Set from the tracking section when loaded from a config file.
    #[serde(skip)]
    pub alpha_hat: usize,
    /// Reward comparison tolerance.
    pub tol: f64,
    /// Distance from a box bound at which a coordinate counts as on it.
    pub partition_eps: f64,
    /// Iteration cap is `iteration_factor · |N(v_s)|`.
    pub iteration_factor: usize,
    /// Full reward recomputation period, in steps.
    pub refresh_every: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            alpha_hat: 2,
            tol: 1e-7,
            partition_eps: 1e-9,
            iteration_factor: 50,
            refresh_every: 1000,
        }
    }
}

impl SearchConfig {
    pub fn with_alpha_hat(alpha_hat: usize) -> Self {
        Self {
            alpha_hat,
            ..Self::default()
        }
    }

    pub fn upper_bound(&self) -> f64 {
        1.0 / self.alpha_hat as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_hat < 1 {
            return Err(Error::Config("alpha_hat must be >= 1".into()));
        }
        if !(self.tol >= 0.0 && self.partition_eps >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

/// Relaxed membership vector over `N(v_s) ∪ {v_s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorVector {
    start: usize,
    nodes: Vec<usize>,
    values: Vec<f64>,
    alpha_hat: usize,
}

impl IndicatorVector {
    /// Validates `Σ y = 1` (within 1e-9) and `0 <= y_i <= 1/α̂`.
    pub fn new(start: usize, nodes: Vec<usize>, values: Vec<f64>, alpha_hat: usize) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::DimensionMismatch(format!("{} nodes but {} values", nodes.len(), values.len())));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLabeling("indicator nodes must be sorted and distinct".into()));
        }
        if nodes.binary_search(&start).is_err() {
            return Err(Error::InvalidLabeling(format!("start node {start} not in the index set")));
        }
        let ub = 1.0 / alpha_hat as f64;
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidLabeling(format!("indicator sums to {sum}")));
        }
        if values.iter().any(|&v| !(-1e-12..=ub + 1e-12).contains(&v)) {
            return Err(Error::InvalidLabeling(format!("indicator component outside [0, {ub}]")));
        }
        Ok(Self {
            start,
            nodes,
            values,
            alpha_hat,
        })
    }

    /// Uniform start over the index set of `start` in `graph`.
    pub fn initial(graph: &Hypergraph, start: usize, alpha_hat: usize) -> Self {
        let nodes = index_set(graph, start);
        let m = nodes.len();
        Self {
            start,
            values: vec![1.0 / m as f64; m],
            nodes,
            alpha_hat,
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn alpha_hat(&self) -> usize {
        self.alpha_hat
    }

    pub fn get(&self, node: usize) -> f64 {
        self.nodes.binary_search(&node).map_or(0.0, |i| self.values[i])
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }

    /// Nodes at or above half the uniform mass over the active set, plus the
    /// starting node.
    pub fn support(&self, eps: f64) -> Vec<usize> {
        let active = self.values.iter().filter(|&&v| v > eps).count().max(1);
        let threshold = 1.0 / (2.0 * active as f64);
        self.entries()
            .filter(|&(n, v)| v >= threshold || n == self.start)
            .map(|(n, _)| n)
            .collect()
    }
}

/// `N(v_s) ∪ {v_s}`, sorted.
pub fn index_set(graph: &Hypergraph, start: usize) -> Vec<usize> {
    let mut nodes: Vec<usize> = graph.neighborhood(start).iter().copied().collect();
    if let Err(pos) = nodes.binary_search(&start) {
        nodes.insert(pos, start);
    }
    nodes
}

#[derive(Debug, Clone)]
struct Term {
    members: Vec<usize>,
    coef: f64,
}

/// The objective restricted to a node set, with weights folded into scalar
/// coefficients. Local indices follow the order of `nodes`.
#[derive(Debug, Clone)]
pub struct LocalProblem {
    nodes: Vec<usize>,
    terms: Vec<Term>,
    incidence: Vec<Vec<usize>>,
    adjacent: Vec<Vec<usize>>,
}

impl LocalProblem {
    /// Collects every tuple of `graph` lying fully inside `nodes`.
    /// `self_loop_bonus`, when given, is added to each node's degree-1
    /// coefficient (indexed by global node id).
    pub fn new(graph: &Hypergraph, weights: &WeightVector, nodes: &[usize], self_loop_bonus: Option<&[f64]>) -> Result<Self> {
        let mut nodes = nodes.to_vec();
        nodes.sort_unstable();
        nodes.dedup();
        let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let mut terms = Vec::new();
        let mut has_self = vec![false; nodes.len()];
        for (li, &g) in nodes.iter().enumerate() {
            for e in graph.incident(g) {
                if e.nodes[0] != g {
                    continue;
                }
                let Some(members) = e.nodes.iter().map(|v| local.get(v).copied()).collect::<Option<Vec<usize>>>() else {
                    continue;
                };
                let d = members.len();
                let mut coef = weights.dot(d, &e.affinity)?;
                if d == 1 {
                    has_self[li] = true;
                    if let Some(b) = self_loop_bonus {
                        coef += b[g];
                    }
                }
                if coef != 0.0 {
                    terms.push(Term { members, coef });
                }
            }
        }
        if let Some(b) = self_loop_bonus {
            for (li, &g) in nodes.iter().enumerate() {
                if !has_self[li] && b[g] != 0.0 {
                    terms.push(Term {
                        members: vec![li],
                        coef: b[g],
                    });
                }
            }
        }
        let mut incidence = vec![Vec::new(); nodes.len()];
        let mut adjacent = vec![Vec::new(); nodes.len()];
        for (ti, t) in terms.iter().enumerate() {
            for &m in &t.members {
                incidence[m].push(ti);
                for &o in &t.members {
                    if o != m {
                        adjacent[m].push(o);
                    }
                }
            }
        }
        for a in &mut adjacent {
            a.sort_unstable();
            a.dedup();
        }
        Ok(Self {
            nodes,
            terms,
            incidence,
            adjacent,
        })
    }

    /// The problem for starting node `start`: its index set and every tuple
    /// inside it.
    pub fn for_start(graph: &Hypergraph, weights: &WeightVector, start: usize) -> Result<Self> {
        Self::new(graph, weights, &index_set(graph, start), None)
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn local_index(&self, node: usize) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.coef * t.members.iter().map(|&m| y[m]).product::<f64>()).sum()
    }

    /// `∂Θ/∂y_i`.
    pub fn reward(&self, i: usize, y: &[f64]) -> f64 {
        self.incidence[i]
            .iter()
            .map(|&ti| {
                let t = &self.terms[ti];
                t.coef * t.members.iter().filter(|&&m| m != i).map(|&m| y[m]).product::<f64>()
            })
            .sum()
    }

    /// Quadratic coefficient of `ΔΘ` for a transfer between `p` and `q`.
    pub fn curvature(&self, p: usize, q: usize, y: &[f64]) -> f64 {
        -self.incidence[p]
            .iter()
            .filter_map(|&ti| {
                let t = &self.terms[ti];
                t.members.contains(&q).then(|| {
                    t.coef * t.members.iter().filter(|&&m| m != p && m != q).map(|&m| y[m]).product::<f64>()
                })
            })
            .sum::<f64>()
    }

    /// Uniform indicator over all nodes of the problem.
    pub fn uniform_objective(&self) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        self.objective(&vec![1.0 / self.nodes.len() as f64; self.nodes.len()])
    }
}

/// Θ at a sparse point given as `(node, y)` pairs; tuples touching a node
/// outside the support contribute nothing.
pub fn sparse_objective(graph: &Hypergraph, weights: &WeightVector, entries: &[(usize, f64)]) -> Result<f64> {
    let nodes: Vec<usize> = entries.iter().map(|e| e.0).collect();
    let problem = LocalProblem::new(graph, weights, &nodes, None)?;
    let mut y = vec![0.0; problem.len()];
    for &(n, v) in entries {
        let i = problem.local_index(n).expect("node in problem");
        y[i] += v;
    }
    Ok(problem.objective(&y))
}

/// Θ with mass spread uniformly over `support`.
pub fn uniform_objective(graph: &Hypergraph, weights: &WeightVector, support: &[usize]) -> Result<f64> {
    Ok(LocalProblem::new(graph, weights, support, None)?.uniform_objective())
}

pub fn objective(y: &IndicatorVector, graph: &Hypergraph, weights: &WeightVector) -> Result<f64> {
    let problem = LocalProblem::new(graph, weights, y.nodes(), None)?;
    Ok(problem.objective(y.values()))
}

pub fn reward(node: usize, y: &IndicatorVector, graph: &Hypergraph, weights: &WeightVector) -> Result<f64> {
    let problem = LocalProblem::new(graph, weights, y.nodes(), None)?;
    let i = problem
        .local_index(node)
        .ok_or_else(|| Error::InvalidLabeling(format!("node {node} not in the index set")))?;
    Ok(problem.reward(i, y.values()))
}

pub fn pair_curvature(p: usize, q: usize, y: &IndicatorVector, graph: &Hypergraph, weights: &WeightVector) -> Result<f64> {
    if p == q {
        return Err(Error::InvalidLabeling("pair curvature needs two distinct nodes".into()));
    }
    let problem = LocalProblem::new(graph, weights, y.nodes(), None)?;
    let (Some(lp), Some(lq)) = (problem.local_index(p), problem.local_index(q)) else {
        return Err(Error::InvalidLabeling("pair not in the index set".into()));
    };
    Ok(problem.curvature(lp, lq, y.values()))
}

/// Transfer size for moving mass from `q` to `p` given `φ_p >= φ_q`.
///
/// Box-limited when the curvature is non-negative, otherwise also capped by
/// the unconstrained maximizer `(φ_q − φ_p) / (2 φ_pq)`. Never negative.
pub fn step_size(y_p: f64, y_q: f64, phi_p: f64, phi_q: f64, phi_pq: f64, alpha_hat: usize) -> f64 {
    let room = (1.0 / alpha_hat as f64 - y_p).min(y_q);
    let eta = if phi_pq >= 0.0 {
        room
    } else {
        room.min((phi_q - phi_p) / (2.0 * phi_pq))
    };
    eta.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchStatus {
    Converged,
    IterationCap,
    /// Fewer than α̂ nodes available; the box constraint cannot be met.
    Infeasible,
}

/// One accepted mass transfer, in global node ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub p: usize,
    pub q: usize,
    pub eta: f64,
    pub predicted_gain: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub y: IndicatorVector,
    pub theta: f64,
    pub iterations: usize,
    pub status: SearchStatus,
    pub trace: Vec<Transfer>,
}

impl SearchOutcome {
    pub fn converged(&self) -> bool {
        self.status == SearchStatus::Converged
    }
}

struct Partition {
    p: Option<usize>,
    q: Option<usize>,
}

fn select_pair(rewards: &[f64], y: &[f64], start: usize, ub: f64, eps: f64) -> Partition {
    let mut p: Option<usize> = None;
    let mut q: Option<usize> = None;
    for i in 0..y.len() {
        if y[i] < ub - eps && p.is_none_or(|b| rewards[i] > rewards[b]) {
            p = Some(i);
        }
        if i != start && y[i] > eps && q.is_none_or(|b| rewards[i] < rewards[b]) {
            q = Some(i);
        }
    }
    Partition { p, q }
}

/// Runs pairwise updates from the uniform start until the partition
/// optimality conditions hold within `cfg.tol`.
pub fn local_maximizer(graph: &Hypergraph, weights: &WeightVector, start: usize, cfg: &SearchConfig) -> Result<SearchOutcome> {
    local_maximizer_traced(graph, weights, start, cfg, false)
}

pub fn local_maximizer_traced(graph: &Hypergraph, weights: &WeightVector, start: usize, cfg: &SearchConfig, trace: bool) -> Result<SearchOutcome> {
    let problem = LocalProblem::for_start(graph, weights, start)?;
    maximize(&problem, start, cfg, trace)
}

/// Pairwise-update maximization of a prepared problem; `start` is a global id
/// contained in `problem`.
pub fn maximize(problem: &LocalProblem, start: usize, cfg: &SearchConfig, record_trace: bool) -> Result<SearchOutcome> {
    cfg.validate()?;
    let s = problem
        .local_index(start)
        .ok_or_else(|| Error::InvalidLabeling(format!("start node {start} not in problem")))?;
    let m = problem.len();
    let ub = cfg.upper_bound();
    let eps = cfg.partition_eps;
    let mut y = vec![1.0 / m as f64; m];
    let make = |y: Vec<f64>| IndicatorVector {
        start,
        nodes: problem.nodes().to_vec(),
        values: y,
        alpha_hat: cfg.alpha_hat,
    };
    if m < cfg.alpha_hat {
        let theta = problem.objective(&y);
        return Ok(SearchOutcome {
            y: make(y),
            theta,
            iterations: 0,
            status: SearchStatus::Infeasible,
            trace: Vec::new(),
        });
    }

    let cap = cfg.iteration_factor.saturating_mul((m - 1).max(1));
    let mut rewards: Vec<f64> = (0..m).map(|i| problem.reward(i, &y)).collect();
    let mut trace = Vec::new();
    let mut status = SearchStatus::IterationCap;
    let mut iterations = 0;

    while iterations < cap {
        let Partition { p, q } = select_pair(&rewards, &y, s, ub, eps);
        let (Some(p), Some(q)) = (p, q) else {
            status = SearchStatus::Converged;
            break;
        };
        let step = if p != q && rewards[p] > rewards[q] + cfg.tol {
            let phi_pq = problem.curvature(p, q, &y);
            Some((p, q, step_size(y[p], y[q], rewards[p], rewards[q], phi_pq, cfg.alpha_hat), phi_pq))
        } else if (rewards[p] - rewards[q]).abs() <= cfg.tol {
            find_equal_reward_pair(problem, &rewards, &y, s, ub, cfg)
        } else {
            None
        };
        let Some((p, q, eta, phi_pq)) = step else {
            status = SearchStatus::Converged;
            break;
        };
        let mut eta = eta;
        if y[q] - eta < eps {
            eta = y[q];
        }
        if y[p] + eta > ub - eps {
            eta = ub - y[p];
        }
        if eta <= 0.0 {
            status = SearchStatus::Converged;
            break;
        }
        let gain = phi_pq * eta * eta + (rewards[p] - rewards[q]) * eta;
        debug_assert!(gain >= -1e-12, "objective decreased by {gain}");
        y[p] += eta;
        y[q] -= eta;
        iterations += 1;
        if record_trace {
            trace.push(Transfer {
                p: problem.nodes()[p],
                q: problem.nodes()[q],
                eta,
                predicted_gain: gain,
            });
        }

        let sum: f64 = y.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            y.iter_mut().for_each(|v| *v /= sum);
        }
        if iterations % cfg.refresh_every == 0 {
            for (i, r) in rewards.iter_mut().enumerate() {
                *r = problem.reward(i, &y);
            }
        } else {
            refresh_around(problem, &mut rewards, &y, p, q);
        }
    }

    let theta = problem.objective(&y);
    Ok(SearchOutcome {
        y: make(y),
        theta,
        iterations,
        status,
        trace,
    })
}

fn refresh_around(problem: &LocalProblem, rewards: &mut [f64], y: &[f64], p: usize, q: usize) {
    let mut touched: Vec<usize> = problem.adjacent[p].iter().chain(&problem.adjacent[q]).copied().collect();
    touched.sort_unstable();
    touched.dedup();
    for i in touched {
        rewards[i] = problem.reward(i, y);
    }
}

/// Equal-reward pair with positive curvature, scanned in index order.
fn find_equal_reward_pair(
    problem: &LocalProblem,
    rewards: &[f64],
    y: &[f64],
    s: usize,
    ub: f64,
    cfg: &SearchConfig,
) -> Option<(usize, usize, f64, f64)> {
    let eps = cfg.partition_eps;
    for i in (0..y.len()).filter(|&i| y[i] < ub - eps) {
        for j in (0..y.len()).filter(|&j| j != i && j != s && y[j] > eps) {
            if (rewards[i] - rewards[j]).abs() > cfg.tol {
                continue;
            }
            let phi = problem.curvature(i, j, y);
            if phi > 0.0 {
                let eta = (ub - y[i]).min(y[j]);
                return Some((i, j, eta, phi));
            }
        }
    }
    None
}

/// Partition-level optimality check: the largest reward among nodes that can
/// still grow does not exceed the smallest reward among nodes that can shrink
/// by more than `tol`.
pub fn kkt_certificate(problem: &LocalProblem, y: &[f64], start: usize, cfg: &SearchConfig, tol: f64) -> bool {
    let Some(s) = problem.local_index(start) else {
        return false;
    };
    let ub = cfg.upper_bound();
    let eps = cfg.partition_eps;
    let rewards: Vec<f64> = (0..y.len()).map(|i| problem.reward(i, y)).collect();
    let grow = (0..y.len()).filter(|&i| y[i] < ub - eps).map(|i| rewards[i]).fold(f64::NEG_INFINITY, f64::max);
    let shrink = (0..y.len())
        .filter(|&i| i != s && y[i] > eps)
        .map(|i| rewards[i])
        .fold(f64::INFINITY, f64::min);
    if grow == f64::NEG_INFINITY || shrink == f64::INFINITY {
        return true;
    }
    // With a = max reward over the growable set, Ω1 sits at or below a, Ω3 at
    // or above it, and Ω2 (in both sets) is pinned to a within tol.
    grow <= shrink + tol
}

/// One dense structure found from a starting node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseStructure {
    pub support: Vec<usize>,
    pub theta: f64,
    pub start: usize,
    pub converged: bool,
}

/// Runs the local maximizer from every node and deduplicates the supports,
/// keeping the best `Θ` for each. Output is ordered by descending `Θ`, then
/// lexicographically by support.
pub fn search_all(graph: &Hypergraph, weights: &WeightVector, cfg: &SearchConfig) -> Result<Vec<DenseStructure>> {
    search_all_biased(graph, weights, cfg, None)
}

/// [`search_all`] with an additive per-node bonus on the self-loop terms.
pub fn search_all_biased(graph: &Hypergraph, weights: &WeightVector, cfg: &SearchConfig, self_loop_bonus: Option<&[f64]>) -> Result<Vec<DenseStructure>> {
    cfg.validate()?;
    let runs: Vec<Option<DenseStructure>> = (0..graph.num_nodes())
        .into_par_iter()
        .map(|start| {
            let nodes = index_set(graph, start);
            if nodes.len() < cfg.alpha_hat {
                return Ok(None);
            }
            let problem = LocalProblem::new(graph, weights, &nodes, self_loop_bonus)?;
            let out = maximize(&problem, start, cfg, false)?;
            Ok(Some(DenseStructure {
                support: out.y.support(cfg.partition_eps),
                theta: out.theta,
                start,
                converged: out.converged(),
            }))
        })
        .collect::<Result<_>>()?;

    let mut best: HashMap<Vec<usize>, DenseStructure> = HashMap::new();
    for run in runs.into_iter().flatten() {
        match best.get(&run.support) {
            Some(b) if b.theta >= run.theta => {}
            _ => {
                best.insert(run.support.clone(), run);
            }
        }
    }
    let mut out: Vec<DenseStructure> = best.into_values().collect();
    out.sort_by(by_theta_then_support);
    Ok(out)
}

pub(crate) fn by_theta_then_support(a: &DenseStructure, b: &DenseStructure) -> Ordering {
    b.theta.total_cmp(&a.theta).then_with(|| a.support.cmp(&b.support))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AffinityVector;

    fn scalar_graph(n: usize, d: usize) -> Hypergraph {
        Hypergraph::new(n, vec![1; d]).unwrap()
    }

    fn add(g: &mut Hypergraph, nodes: &[usize], a: f64) {
        g.insert(nodes, AffinityVector::scalar(a).unwrap()).unwrap();
    }

    #[test]
    fn two_node_objective() {
        let mut g = scalar_graph(2, 2);
        add(&mut g, &[0], 1.0);
        add(&mut g, &[1], 1.0);
        add(&mut g, &[0, 1], 1.0);
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let y = IndicatorVector::new(0, vec![0, 1], vec![0.5, 0.5], 2).unwrap();
        assert!((objective(&y, &g, &w).unwrap() - 1.25).abs() < 1e-15);
        let doubled = objective(&y, &g, &w.scaled(3.0)).unwrap();
        assert!((doubled - 3.75).abs() < 1e-12);
    }

    #[test]
    fn objective_without_self_loop_at_vertex() {
        let mut g = scalar_graph(2, 2);
        add(&mut g, &[0, 1], 1.0);
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let y = IndicatorVector::new(0, vec![0, 1], vec![0.5, 0.5], 2).unwrap();
        let degenerate = sparse_objective(&g, &w, &[(0, 1.0)]).unwrap();
        assert_eq!(degenerate, 0.0);
        assert!(objective(&y, &g, &w).is_ok());
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let mut g = Hypergraph::new(2, vec![1, 3]).unwrap();
        g.insert(&[0, 1], AffinityVector::new(vec![0.1, 0.2, 0.3]).unwrap()).unwrap();
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(LocalProblem::for_start(&g, &w, 0), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn reward_at_zero_is_self_loop() {
        let mut g = scalar_graph(3, 3);
        add(&mut g, &[0], 0.4);
        add(&mut g, &[1], 0.7);
        add(&mut g, &[0, 1], 0.9);
        add(&mut g, &[0, 1, 2], 0.9);
        let w = WeightVector::new(vec![vec![2.0], vec![1.0], vec![1.0]]).unwrap();
        let p = LocalProblem::for_start(&g, &w, 0).unwrap();
        let zeros = vec![0.0; 3];
        assert!((p.reward(0, &zeros) - 0.8).abs() < 1e-15);
        assert!((p.reward(1, &zeros) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_reward_is_constant() {
        let mut g = scalar_graph(3, 2);
        add(&mut g, &[0, 1], 0.5);
        add(&mut g, &[2], 0.3);
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let p = LocalProblem::new(&g, &w, &[0, 1, 2], None).unwrap();
        assert_eq!(p.reward(2, &[0.1, 0.2, 0.7]), p.reward(2, &[0.5, 0.5, 0.0]));
    }

    #[test]
    fn curvature_examples() {
        let mut g = scalar_graph(3, 2);
        add(&mut g, &[0, 1], 0.5);
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let p = LocalProblem::new(&g, &w, &[0, 1, 2], None).unwrap();
        let y = [0.3, 0.3, 0.4];
        assert_eq!(p.curvature(0, 2, &y), 0.0);
        assert_eq!(p.curvature(0, 1, &y), -0.5);
    }

    #[test]
    fn step_size_examples() {
        assert!((step_size(0.3, 0.2, 1.0, 1.0, 0.0, 2) - 0.2).abs() < 1e-15);
        assert!((step_size(0.0, 0.4, 2.0, 1.0, -1.0, 2) - 0.4).abs() < 1e-15);
        assert_eq!(step_size(0.1, 0.0, 2.0, 1.0, -1.0, 2), 0.0);
        // interior optimum wins when it is the tightest bound
        assert!((step_size(0.0, 0.4, 1.2, 1.0, -1.0, 2) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn infeasible_box_is_flagged() {
        let mut g = scalar_graph(1, 2);
        add(&mut g, &[0], 1.0);
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let out = local_maximizer(&g, &w, 0, &SearchConfig::default()).unwrap();
        assert_eq!(out.status, SearchStatus::Infeasible);
    }

    #[test]
    fn clique_support_found() {
        // 4 mutually strong nodes plus 4 weakly attached ones
        let mut g = scalar_graph(8, 2);
        for i in 0..8 {
            add(&mut g, &[i], 0.5);
        }
        for i in 0..4 {
            for j in i + 1..4 {
                add(&mut g, &[i, j], 0.9);
            }
            for j in 4..8 {
                add(&mut g, &[i, j], 0.01);
            }
        }
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let out = local_maximizer(&g, &w, 0, &SearchConfig::default()).unwrap();
        assert!(out.converged());
        assert_eq!(out.y.support(1e-9), vec![0, 1, 2, 3]);
    }

    #[test]
    fn start_never_loses_mass() {
        let mut g = scalar_graph(4, 2);
        add(&mut g, &[0, 1], 0.01);
        add(&mut g, &[1, 2], 0.9);
        add(&mut g, &[2, 3], 0.9);
        add(&mut g, &[1, 3], 0.9);
        add(&mut g, &[0, 3], 0.01);
        add(&mut g, &[0, 2], 0.01);
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let out = local_maximizer_traced(&g, &w, 0, &SearchConfig::default(), true).unwrap();
        assert!(out.trace.iter().all(|t| t.q != 0));
        assert!(out.y.get(0) >= 0.25 - 1e-12);
        assert!(out.y.support(1e-9).contains(&0));
    }

    #[test]
    fn equal_reward_branch_fires_with_negative_weight() {
        // negative λ2 makes the pair curvature positive
        let w = WeightVector::new(vec![vec![1.0], vec![-1.0]]).unwrap();
        let mut g3 = scalar_graph(3, 2);
        add(&mut g3, &[0, 1], 1.0);
        add(&mut g3, &[0, 2], 1.0);
        add(&mut g3, &[1, 2], 1.0);
        let cfg = SearchConfig::with_alpha_hat(1);
        let out = local_maximizer_traced(&g3, &w, 0, &cfg, true).unwrap();
        assert!(out.converged());
        assert!(!out.trace.is_empty());
        // mass concentrates on one vertex, which kills every pairwise penalty
        let theta = out.theta;
        assert!(theta.abs() < 1e-12, "theta {theta}");
    }

    #[test]
    fn search_all_empty_graph() {
        let g = scalar_graph(0, 2);
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(search_all(&g, &w, &SearchConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn search_all_two_cliques() {
        let mut g = scalar_graph(6, 2);
        for i in 0..6 {
            add(&mut g, &[i], 0.5);
        }
        for c in [[0, 1, 2], [3, 4, 5]] {
            add(&mut g, &[c[0], c[1]], 0.9);
            add(&mut g, &[c[0], c[2]], 0.9);
            add(&mut g, &[c[1], c[2]], 0.9);
        }
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let found = search_all(&g, &w, &SearchConfig::default()).unwrap();
        let supports: Vec<Vec<usize>> = found.iter().map(|s| s.support.clone()).collect();
        assert_eq!(supports, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let again = search_all(&g, &w, &SearchConfig::default()).unwrap();
        assert_eq!(found, again);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use std::collections::BTreeMap;

        fn graph_strategy() -> impl Strategy<Value = Hypergraph> {
            (3usize..8).prop_flat_map(|n| {
                proptest::collection::btree_map(proptest::collection::btree_set(0..n, 1..=3), 0.01f64..1.0, 1..30).prop_map(
                    move |edges: BTreeMap<_, f64>| {
                        let mut g = scalar_graph(n, 3);
                        for (nodes, a) in edges {
                            add(&mut g, &nodes.into_iter().collect::<Vec<_>>(), a);
                        }
                        g
                    },
                )
            })
        }

        proptest! {
            #[test]
            fn step_stays_in_box_and_never_loses(
                y_p in 0.0f64..0.5, y_q in 0.0f64..0.5, phi_q in -2.0f64..2.0,
                lead in 0.0f64..2.0, phi_pq in -3.0f64..3.0,
            ) {
                let phi_p = phi_q + lead;
                let eta = step_size(y_p, y_q, phi_p, phi_q, phi_pq, 2);
                prop_assert!(eta >= 0.0 && eta <= y_q + 1e-15 && y_p + eta <= 0.5 + 1e-15);
                prop_assert!(phi_pq * eta * eta + (phi_p - phi_q) * eta >= -1e-12);
            }

            #[test]
            fn maximizer_is_feasible_monotone_and_certified(g in graph_strategy(), start in 0usize..3, w2 in 0.1f64..2.0, w3 in 0.1f64..2.0) {
                let w = WeightVector::new(vec![vec![1.0], vec![w2], vec![w3]]).unwrap();
                let cfg = SearchConfig::default();
                let problem = LocalProblem::for_start(&g, &w, start).unwrap();
                let out = maximize(&problem, start, &cfg, true).unwrap();
                if out.status == SearchStatus::Infeasible {
                    return Ok(());
                }
                let total: f64 = out.y.values().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
                prop_assert!(out.y.values().iter().all(|&v| (-1e-12..=0.5 + 1e-12).contains(&v)));
                prop_assert!(out.trace.iter().all(|t| t.predicted_gain >= -1e-12 && t.q != start));
                let gained: f64 = out.trace.iter().map(|t| t.predicted_gain).sum();
                prop_assert!((problem.uniform_objective() + gained - out.theta).abs() < 1e-9);
                prop_assert!((objective(&out.y, &g, &w).unwrap() - out.theta).abs() < 1e-9);
                if out.converged() {
                    prop_assert!(kkt_certificate(&problem, out.y.values(), start, &cfg, 1e-6));
                }
            }
        }
    }
}
