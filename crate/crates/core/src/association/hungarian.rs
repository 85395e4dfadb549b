//! Rectangular min-cost assignment via shortest augmenting paths with
//! row/column potentials (the O(n²m) Hungarian variant).

/// Assigns every row of a `rows × cols` cost matrix (row-major) to a distinct
/// column, minimizing total cost. Requires `rows <= cols`.
///
/// Returns, for each row, its assigned column.
pub fn solve_rows(rows: usize, cols: usize, cost: &[f64]) -> Vec<usize> {
    assert!(rows <= cols, "solve_rows needs rows <= cols");
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return Vec::new();
    }

    // 1-based internal indexing; column 0 is the virtual source
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut col_owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];

    for row in 1..=rows {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; rows];
    for j in 1..=cols {
        if col_owner[j] != 0 {
            assignment[col_owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Maximum-weight matching on a non-negative `rows × cols` weight matrix.
/// Pairs whose weight is zero are left out of the result.
pub fn max_weight_matching(rows: usize, cols: usize, weight: &[f64]) -> Vec<(usize, usize)> {
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut cost = vec![0.0; n * m];
    for i in 0..rows {
        for j in 0..cols {
            let w = weight[i * cols + j];
            if transpose {
                cost[j * m + i] = -w;
            } else {
                cost[i * m + j] = -w;
            }
        }
    }
    let assigned = solve_rows(n, m, &cost);
    let mut out: Vec<(usize, usize)> = assigned
        .into_iter()
        .enumerate()
        .map(|(a, b)| if transpose { (b, a) } else { (a, b) })
        .filter(|&(i, j)| weight[i * cols + j] > 0.0)
        .collect();
    out.sort_unstable();
    out
}
