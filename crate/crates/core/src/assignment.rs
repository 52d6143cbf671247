//! Maximum-weight bipartite assignment (Hungarian method with potentials).

/// Returns, for each row, the column it is assigned to in a maximum-weight
/// matching of the rectangular `weights` matrix. Only pairs with strictly
/// positive weight are reported; everything else is treated as "no edge".
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.iter().map(Vec::len).max().unwrap_or(0);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let n = rows.max(cols);
    let w = |i: usize, j: usize| -> f64 {
        weights
            .get(i)
            .and_then(|r| r.get(j))
            .copied()
            .filter(|v| *v > 0.0)
            .unwrap_or(0.0)
    };
    let max_w = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| w(i, j))
        .fold(0.0, f64::max);
    // Minimise max_w - w on the padded square matrix.
    let cost = |i: usize, j: usize| max_w - w(i, j);

    // 1-based arrays, classic e-maxx layout.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; rows];
    for (j, &i) in p.iter().enumerate().take(n + 1).skip(1) {
        if i >= 1 && i <= rows && j <= cols && w(i - 1, j - 1) > 0.0 {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

/// Total weight of an assignment returned by [`max_weight_assignment`].
pub fn assignment_weight(weights: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| weights[i][j]))
        .sum()
}
