//! Partition agreement measures.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Maps arbitrary label ids to `0..k` in order of first appearance.
pub fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let dense = labels
        .iter()
        .map(|z| {
            let next = ids.len();
            *ids.entry(*z).or_insert(next)
        })
        .collect();
    (dense, ids.len())
}

fn contingency(a: &[usize], b: &[usize]) -> (Vec<Vec<usize>>, usize, usize) {
    let (a, ka) = relabel(a);
    let (b, kb) = relabel(b);
    let mut table = vec![vec![0usize; kb]; ka];
    for (x, y) in a.iter().zip(&b) {
        table[*x][*y] += 1;
    }
    (table, ka, kb)
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Fraction of point pairs on which the two partitions agree.
pub fn rand_index(z1: &[usize], z2: &[usize]) -> Result<f64> {
    check_lengths(z1, z2)?;
    let n = z1.len();
    if n < 2 {
        return Err(Error::domain("rand index needs at least two points"));
    }
    let pairs = |c: usize| (c * c.saturating_sub(1) / 2) as f64;
    let (table, _, _) = contingency(z1, z2);
    let both: f64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let mut col_sums = vec![0usize; table.first().map_or(0, Vec::len)];
    for r in &table {
        for (j, &c) in r.iter().enumerate() {
            col_sums[j] += c;
        }
    }
    let cols: f64 = col_sums.iter().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    // agreements = together in both + apart in both
    Ok((total + 2.0 * both - rows - cols) / total)
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian
/// algorithm with potentials). Returns `assignment[row] = column`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based arrays; index 0 is a sentinel column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
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
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of points misassigned under the best one-to-one matching of
/// cluster labels. Both partitions must have the same number of clusters.
pub fn misclassification_error(z_est: &[usize], z_true: &[usize]) -> Result<f64> {
    check_lengths(z_est, z_true)?;
    if z_est.is_empty() {
        return Err(Error::Empty("partitions"));
    }
    let (table, ka, kb) = contingency(z_est, z_true);
    if ka != kb {
        return Err(Error::Labels(format!(
            "error rate is defined only for equal cluster counts ({ka} vs {kb})"
        )));
    }
    let cost: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|&c| -(c as f64)).collect()).collect();
    let assignment = min_cost_assignment(&cost);
    let matched: usize = assignment.iter().enumerate().map(|(i, &j)| table[i][j]).sum();
    Ok(1.0 - matched as f64 / z_est.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rand_examples() {
        assert_eq!(rand_index(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_abs_diff_eq!(rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(rand_index(&[0, 0, 1, 2], &[7, 7, 3, 9]).unwrap(), 1.0);
        assert!(rand_index(&[0], &[0]).is_err());
        assert!(rand_index(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn error_examples() {
        assert_eq!(misclassification_error(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 0.0);
        assert_abs_diff_eq!(misclassification_error(&[1, 1, 2, 2], &[1, 2, 2, 2]).unwrap(), 0.25);
        assert!(misclassification_error(&[0, 1, 2, 2], &[0, 1, 1, 1]).is_err());
    }

    #[test]
    fn assignment_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = min_cost_assignment(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }
}
