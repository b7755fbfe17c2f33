//! Exact linear minimization over the capacitated transportation polytope.
//!
//! `min sum c[i][j] x[i][j]` subject to unit row sums, column sums at most `K`
//! and `0 <= x <= 1` always has an integral optimum. Splitting every column
//! into `K` identical slots turns it into a rectangular assignment problem,
//! solved here with the shortest-augmenting-path Hungarian method.

/// Minimum-cost assignment of every row of an `n x m` cost table (`n <= m`)
/// to a distinct column. Returns the column of each row.
pub fn min_cost_assignment(cost: &[f64], n: usize, m: usize) -> Vec<usize> {
    assert!(n <= m, "need rows <= columns, got {n}x{m}");
    assert_eq!(cost.len(), n * m);
    if n == 0 {
        return Vec::new();
    }
    let at = |i: usize, j: usize| cost[(i - 1) * m + (j - 1)];
    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = at(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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
    let mut col_of = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            col_of[owner[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Vertex of the transportation polytope minimizing `sum grad[i][j] x[i][j]`.
///
/// `grad` is `n_rows x n_cols`, row-major. Returns the column picked for each
/// row; no column is picked more than `capacity` times.
pub fn transport_vertex(grad: &[f64], n_rows: usize, n_cols: usize, capacity: usize) -> Vec<usize> {
    let slots = n_cols * capacity;
    let mut expanded = Vec::with_capacity(n_rows * slots);
    for i in 0..n_rows {
        for j in 0..n_cols {
            let g = grad[i * n_cols + j];
            expanded.extend(std::iter::repeat_n(g, capacity));
        }
    }
    min_cost_assignment(&expanded, n_rows, slots)
        .into_iter()
        .map(|slot| slot / capacity)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerates every capacity-respecting assignment.
    fn brute_force(grad: &[f64], n: usize, m: usize, k: usize) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(i: usize, n: usize, m: usize, k: usize, grad: &[f64], used: &mut [usize], acc: f64, best: &mut f64) {
            if i == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..m {
                if used[j] < k {
                    used[j] += 1;
                    rec(i + 1, n, m, k, grad, used, acc + grad[i * m + j], best);
                    used[j] -= 1;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(0, n, m, k, grad, &mut vec![0; m], 0.0, &mut best);
        best
    }

    #[test]
    fn square_assignment() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let a = min_cost_assignment(&cost, 3, 3);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn empty() {
        assert!(transport_vertex(&[], 0, 2, 2).is_empty());
    }

    #[test]
    fn capacity_is_respected() {
        // Every row prefers column 0 but only two fit.
        let grad = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let cols = transport_vertex(&grad, 3, 2, 2);
        assert_eq!(cols.iter().filter(|&&c| c == 0).count(), 2);
    }

    proptest! {
        #[test]
        fn matches_enumeration(
            n in 1usize..=6,
            m in 1usize..=3,
            k in 1usize..=3,
            raw in proptest::collection::vec(-10.0f64..10.0, 18),
        ) {
            prop_assume!(n <= m * k);
            let grad = &raw[..n * m];
            let cols = transport_vertex(grad, n, m, k);
            let mut counts = vec![0; m];
            for &c in &cols {
                counts[c] += 1;
            }
            prop_assert!(counts.iter().all(|&c| c <= k));
            let got: f64 = cols.iter().enumerate().map(|(i, &j)| grad[i * m + j]).sum();
            let want = brute_force(grad, n, m, k);
            prop_assert!((got - want).abs() < 1e-9, "got {} want {}", got, want);
        }
    }
}
