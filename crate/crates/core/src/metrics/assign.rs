//! Linear assignment (Hungarian method with potentials, O(n²m)).

/// Minimum-cost assignment of every row to a distinct column.
///
/// `cost` is row-major with `rows <= cols`. Returns the column chosen for
/// each row and the total cost.
pub fn solve(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment needs rows <= cols ({n} > {m})");

    // 1-based; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum();
    (assignment, total)
}

/// Like [`solve`] on a square matrix, but among all optimal assignments
/// returns the lexicographically smallest column sequence. Rows are fixed
/// one at a time to the lowest column that still admits an optimum.
pub fn solve_lexicographic(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    let (_, optimum) = solve(cost);
    let tol = 1e-9 * optimum.abs().max(1.0);

    let mut free: Vec<usize> = (0..n).collect();
    let mut fixed = 0.0;
    let mut assignment = Vec::with_capacity(n);
    for row in 0..n {
        let mut chosen = None;
        for (k, &col) in free.iter().enumerate() {
            let rest: Vec<usize> = free.iter().copied().filter(|&c| c != col).collect();
            let sub: Vec<Vec<f64>> = ((row + 1)..n)
                .map(|r| rest.iter().map(|&c| cost[r][c]).collect())
                .collect();
            let value = fixed + cost[row][col] + solve(&sub).1;
            if (value - optimum).abs() <= tol {
                chosen = Some(k);
                break;
            }
        }
        // The optimum is reachable through some column, so a candidate exists.
        let k = chosen.expect("optimal completion exists");
        let col = free.remove(k);
        fixed += cost[row][col];
        assignment.push(col);
    }
    (assignment, optimum)
}
