//! Optimal one-to-one assignment (Hungarian algorithm, O(n³)).
//!
//! Used for the CEAF chain alignment, which needs the exact maximum of the
//! summed similarity over injective chain matchings.

/// Maximum-weight assignment between rows and columns of `w`.
///
/// The matrix may be rectangular; the unmatched remainder of the larger side
/// pairs with implicit zero-weight padding. Returns the total weight of the
/// optimum and, for each row, the matched column (`None` when the row ended
/// up on padding).
pub fn max_weight_assignment(w: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let rows = w.len();
    let cols = w.first().map(|r| r.len()).unwrap_or(0);
    if rows == 0 || cols == 0 {
        return (0.0, vec![None; rows]);
    }
    let dim = rows.max(cols);
    // Pad to square and negate: the solver minimizes.
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -w[i][j]
        } else {
            0.0
        }
    };

    // Potentials over rows (u) and columns (v); p[j] = row matched to
    // column j (0 = unmatched sentinel, rows are 1-based internally).
    let n = dim;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
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

    let mut row_to_col = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            row_to_col[i - 1] = Some(j - 1);
            total += w[i - 1][j - 1];
        }
    }
    (total, row_to_col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn brute_force_max(w: &[Vec<f64>]) -> f64 {
        let cols = w.first().map(|r| r.len()).unwrap_or(0);
        fn rec(w: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == w.len() {
                return 0.0;
            }
            // Leaving the row unmatched is allowed (zero padding).
            let mut best = rec(w, row + 1, used);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    let v = w[row][j] + rec(w, row + 1, used);
                    used[j] = false;
                    if v > best {
                        best = v;
                    }
                }
            }
            best
        }
        let mut used = vec![false; cols];
        rec(w, 0, &mut used)
    }

    #[test]
    fn known_square_case() {
        let w = vec![vec![7.0, 4.0], vec![3.0, 2.0]];
        let (total, m) = max_weight_assignment(&w);
        assert_eq!(total, 9.0);
        assert_eq!(m, vec![Some(0), Some(1)]);
    }

    #[test]
    fn rectangular_uses_best_columns() {
        let w = vec![vec![1.0, 5.0, 2.0]];
        let (total, m) = max_weight_assignment(&w);
        assert_eq!(total, 5.0);
        assert_eq!(m, vec![Some(1)]);
    }

    #[test]
    fn empty_inputs() {
        let (total, m) = max_weight_assignment(&[]);
        assert_eq!(total, 0.0);
        assert!(m.is_empty());
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = StdRng::seed_from_u64(23);
        for case in 0..200 {
            let rows = rng.random_range(1..=6usize);
            let cols = rng.random_range(1..=6usize);
            let w: Vec<Vec<f64>> = (0..rows)
                .map(|_| {
                    (0..cols)
                        .map(|_| rng.random_range(0..100) as f64 / 10.0)
                        .collect()
                })
                .collect();
            let (total, assignment) = max_weight_assignment(&w);
            let brute = brute_force_max(&w);
            assert!(
                (total - brute).abs() < 1e-9,
                "case {case}: solver {total} vs brute force {brute} on {w:?}"
            );
            // The reported matching is injective and consistent with total.
            let mut seen = vec![false; cols];
            let mut sum = 0.0;
            for (i, c) in assignment.iter().enumerate() {
                if let Some(j) = c {
                    assert!(!seen[*j]);
                    seen[*j] = true;
                    sum += w[i][*j];
                }
            }
            assert!((sum - total).abs() < 1e-9);
        }
    }
}
