//! Minimum-cost perfect matching on a square cost matrix.
//!
//! Shortest augmenting path with row/column potentials, O(n^3).

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Optimal assignment: `perm[i]` is the column matched to row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub cost: f64,
}

pub fn hungarian(cost: &Matrix) -> Result<Assignment> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(Error::invalid("cost matrix", format!("must be square, got {}x{}", n, cost.cols())));
    }
    if !cost.is_finite() {
        return Err(Error::invalid("cost matrix", "entries must be finite"));
    }
    if n == 0 {
        return Ok(Assignment { perm: Vec::new(), cost: 0.0 });
    }
    // 1-based arrays where index 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        row_of_col[0] = row;
        let mut col0 = 0;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = row_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = col0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            col0 = col1;
            if row_of_col[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            row_of_col[col0] = row_of_col[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[row_of_col[j] - 1] = j - 1;
    }
    let total = perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
    Ok(Assignment { perm, cost: total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_zeros() {
        let c = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let a = hungarian(&c).unwrap();
        assert_eq!(a.perm, vec![0, 1]);
        assert_eq!(a.cost, 0.0);
    }

    #[test]
    fn three_by_three() {
        let c = Matrix::from_rows(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]]).unwrap();
        let a = hungarian(&c).unwrap();
        assert_eq!(a.cost, 5.0);
        assert_eq!(a.perm, vec![1, 0, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(hungarian(&Matrix::zeros(2, 3)).is_err());
        let mut c = Matrix::zeros(2, 2);
        c.set(0, 1, f64::NAN);
        assert!(hungarian(&c).is_err());
        assert!(hungarian(&Matrix::zeros(0, 0)).unwrap().perm.is_empty());
    }
}
