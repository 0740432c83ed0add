use ndarray::ArrayView2;

/// Minimum-cost assignment of rows to distinct columns.
///
/// Works for rectangular matrices; with more rows than columns some rows stay
/// unassigned. Returns the column of each row. Shortest augmenting paths with
/// row and column potentials, `O(r^2 c)`.
pub fn hungarian(cost: ArrayView2<'_, f64>) -> Vec<Option<usize>> {
    let (r, c) = cost.dim();
    if r == 0 || c == 0 {
        return vec![None; r];
    }
    if r > c {
        let t = hungarian(cost.t());
        let mut out = vec![None; r];
        for (col, row) in t.into_iter().enumerate() {
            if let Some(row) = row {
                out[row] = Some(col);
            }
        }
        return out;
    }
    // 1-based with a virtual column 0
    let mut u = vec![0.0; r + 1];
    let mut v = vec![0.0; c + 1];
    let mut owner = vec![0usize; c + 1];
    let mut way = vec![0usize; c + 1];
    for i in 1..=r {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; c + 1];
        let mut used = vec![false; c + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=c {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=c {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; r];
    for j in 1..=c {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Assignment maximizing the summed entries.
pub fn max_weight_matching(weights: ArrayView2<'_, f64>) -> Vec<Option<usize>> {
    hungarian(weights.mapv(|w| -w).view())
}
