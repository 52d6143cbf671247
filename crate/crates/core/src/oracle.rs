//! Exhaustive reference solvers for small graphs.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learn::{feature_map, hamming_loss, is_feasible, score, TrainingInstance};
use crate::model::{Hypergraph, Labeling, WeightVector};
use crate::search::LocalProblem;

pub const DENSE_NODE_CAP: usize = 16;
pub const PARTITION_NODE_CAP: usize = 8;

/// Best support over all subsets of size at least `alpha_hat`, scored at the
/// uniform indicator. Ties go to the lexicographically smaller support.
/// Returns `None` when no subset is large enough.
pub fn brute_force_dense(graph: &Hypergraph, weights: &WeightVector, alpha_hat: usize) -> Result<Option<(Vec<usize>, f64)>> {
    let n = graph.num_nodes();
    if n > DENSE_NODE_CAP {
        return Err(Error::SizeCap {
            size: n,
            cap: DENSE_NODE_CAP,
        });
    }
    let all: Vec<usize> = (0..n).collect();
    let problem = LocalProblem::new(graph, weights, &all, None)?;
    let best = (1u32..(1u32 << n))
        .into_par_iter()
        .filter(|m| m.count_ones() as usize >= alpha_hat.max(1))
        .map(|m| {
            let support: Vec<usize> = (0..n).filter(|i| m >> i & 1 == 1).collect();
            let y: Vec<f64> = (0..n).map(|i| if m >> i & 1 == 1 { 1.0 / support.len() as f64 } else { 0.0 }).collect();
            (support, problem.objective(&y))
        })
        .reduce_with(better);
    Ok(best)
}

fn better(a: (Vec<usize>, f64), b: (Vec<usize>, f64)) -> (Vec<usize>, f64) {
    match a.1.total_cmp(&b.1) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.0 <= b.0 {
                a
            } else {
                b
            }
        }
    }
}

/// Every set partition of `0..n` as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max + 1 {
            if i == 0 && c > 0 {
                break;
            }
            cur.push(c);
            go(i + 1, n, cur, max.max(c), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return vec![Vec::new()];
    }
    go(0, n, &mut Vec::with_capacity(n), 0, &mut out);
    out
}

/// Exhaustive most-violated labeling: the feasible partition maximising
/// `λᵀS(Y) + Δ(Y, Y*)`, with its value.
pub fn brute_force_partitions(weights: &WeightVector, instance: &TrainingInstance) -> Result<(Labeling, f64)> {
    let n = instance.graph.num_nodes();
    if n > PARTITION_NODE_CAP {
        return Err(Error::SizeCap {
            size: n,
            cap: PARTITION_NODE_CAP,
        });
    }
    let scored: Vec<Option<(Labeling, f64)>> = set_partitions(n)
        .into_par_iter()
        .map(|rgs| {
            let keys: Vec<Option<usize>> = rgs.into_iter().map(Some).collect();
            let y = Labeling::from_keys(&keys);
            if !is_feasible(&y, &instance.graph) {
                return Ok(None);
            }
            let s = feature_map(&y, &instance.graph)?;
            let v = score(weights, &s) + hamming_loss(&y, &instance.truth, Some(&instance.loss_weights));
            Ok(Some((y, v)))
        })
        .collect::<Result<_>>()?;
    let (y, v) = scored
        .into_iter()
        .flatten()
        .fold(None::<(Labeling, f64)>, |acc, cur| match acc {
            Some(a) if a.1 >= cur.1 => Some(a),
            _ => Some(cur),
        })
        .ok_or_else(|| Error::Internal("no feasible partition".into()))?;
    let s_star = feature_map(&instance.truth, &instance.graph)?;
    Ok((y, v - score(weights, &s_star)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AffinityVector;

    fn planted_clique(n: usize, clique: &[usize]) -> Hypergraph {
        let mut g = Hypergraph::new(n, vec![1, 1]).unwrap();
        for u in 0..n {
            g.insert(&[u], AffinityVector::scalar(0.1).unwrap()).unwrap();
            for v in u + 1..n {
                let a = if clique.contains(&u) && clique.contains(&v) { 0.9 } else { 0.05 };
                g.insert(&[u, v], AffinityVector::scalar(a).unwrap()).unwrap();
            }
        }
        g
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (0..=8).map(|n| set_partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 15, 52, 203, 877, 4140]);
    }

    #[test]
    fn too_small_graph_has_no_support() {
        let g = planted_clique(1, &[]);
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(brute_force_dense(&g, &w, 2).unwrap(), None);
    }

    #[test]
    fn finds_planted_clique() {
        let g = planted_clique(9, &[2, 4, 7]);
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let (s, _) = brute_force_dense(&g, &w, 2).unwrap().unwrap();
        assert_eq!(s, vec![2, 4, 7]);
    }

    #[test]
    fn relabeling_symmetry() {
        let g = planted_clique(7, &[0, 1, 5]);
        let perm = [6, 3, 1, 0, 5, 2, 4];
        let mut h = Hypergraph::new(7, vec![1, 1]).unwrap();
        for d in 1..=2 {
            for e in g.edges(d) {
                let nodes: Vec<usize> = e.nodes.iter().map(|&v| perm[v]).collect();
                h.insert(&nodes, e.affinity.clone()).unwrap();
            }
        }
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let (a, ta) = brute_force_dense(&g, &w, 2).unwrap().unwrap();
        let (b, tb) = brute_force_dense(&h, &w, 2).unwrap().unwrap();
        let mut mapped: Vec<usize> = a.iter().map(|&v| perm[v]).collect();
        mapped.sort_unstable();
        assert_eq!(mapped, b);
        assert!((ta - tb).abs() < 1e-12);
    }

    #[test]
    fn caps_enforced() {
        let g = planted_clique(17, &[]);
        let w = WeightVector::new(vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(brute_force_dense(&g, &w, 2), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn partition_oracle_dominates_truth() {
        let g = planted_clique(6, &[0, 1, 2]);
        let truth = Labeling::new(vec![Some(1), Some(1), Some(1), Some(2), Some(3), Some(4)]).unwrap();
        let inst = TrainingInstance::new(g, truth, None).unwrap();
        let w = WeightVector::new(vec![vec![0.5], vec![2.0]]).unwrap();
        let (y, v) = brute_force_partitions(&w, &inst).unwrap();
        assert!(v >= 0.0);
        assert!(is_feasible(&y, &inst.graph));
    }
}
