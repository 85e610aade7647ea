use crate::scalar::Scalar;

/// Minimum-cost assignment on a rectangular `rows × cols` cost matrix (Kuhn–Munkres with potentials).
///
/// Returns, for each row, the matched column; exactly `min(rows, cols)` rows are matched.
pub fn hungarian<T: Scalar>(cost: &[Vec<T>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    // The potential-based solver needs rows <= cols; transpose otherwise.
    if rows > cols {
        let transposed: Vec<Vec<T>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        let by_col = hungarian(&transposed);
        let mut out = vec![None; rows];
        for (j, i) in by_col.into_iter().enumerate() {
            if let Some(i) = i {
                out[i] = Some(j);
            }
        }
        return out;
    }

    let (n, m) = (rows, cols);
    let inf = T::infinity();
    // 1-based arrays; index 0 is the virtual column.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
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
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

pub fn assignment_cost<T: Scalar>(cost: &[Vec<T>], assignment: &[Option<usize>]) -> T {
    assignment.iter().enumerate().filter_map(|(i, j)| j.map(|j| cost[i][j])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_square() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&c);
        assert_eq!(assignment_cost(&c, &a), 5.0);
    }

    #[test]
    fn rectangular_both_ways() {
        let wide = vec![vec![5.0, 1.0, 9.0]];
        assert_eq!(hungarian(&wide), vec![Some(1)]);
        let tall = vec![vec![5.0], vec![1.0], vec![9.0]];
        assert_eq!(hungarian(&tall), vec![None, Some(0), None]);
    }

    #[test]
    fn empty() {
        assert!(hungarian::<f64>(&[]).is_empty());
    }
}
