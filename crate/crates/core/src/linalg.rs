//! Kernel of a small dense matrix by rank-revealing Gauss-Jordan elimination.

/// Pivot tolerance for kernel computations.
pub const PIVOT_TOL: f64 = 1e-10;

/// Reduced row echelon form with partial pivoting. Returns the reduced
/// matrix and the pivot columns.
pub fn rref(rows: &[Vec<f64>], cols: usize, tol: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == m.len() {
            break;
        }
        let (best, best_abs) = (r..m.len())
            .map(|i| (i, m[i][c].abs()))
            .fold((r, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best_abs <= tol {
            for row in m.iter_mut().skip(r) {
                row[c] = 0.0;
            }
            continue;
        }
        m.swap(r, best);
        let p = m[r][c];
        for entry in m[r].iter_mut() {
            *entry /= p;
        }
        for i in 0..m.len() {
            if i != r && m[i][c] != 0.0 {
                let factor = m[i][c];
                for j in 0..cols {
                    m[i][j] -= factor * m[r][j];
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (m, pivots)
}

/// Basis of the null space of an `rows.len() x cols` matrix, one vector per
/// free column.
pub fn kernel_basis(rows: &[Vec<f64>], cols: usize, tol: f64) -> Vec<Vec<f64>> {
    let (m, pivots) = rref(rows, cols, tol);
    (0..cols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![0.0; cols];
            v[free] = 1.0;
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[r][free];
            }
            v
        })
        .collect()
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injective_has_empty_kernel() {
        assert!(kernel_basis(&[vec![1.0]], 1, PIVOT_TOL).is_empty());
        assert!(kernel_basis(&[vec![1.0, 2.0], vec![3.0, 4.0]], 2, PIVOT_TOL).is_empty());
    }

    #[test]
    fn projection_kernel() {
        assert_eq!(kernel_basis(&[vec![1.0, 0.0]], 2, PIVOT_TOL), vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let k = kernel_basis(&[vec![0.0, 0.0]], 2, PIVOT_TOL);
        assert_eq!(k, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn rank_deficient() {
        let m = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]];
        let k = kernel_basis(&m, 3, PIVOT_TOL);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(max_abs(&mat_vec(&m, v)) < 1e-12);
        }
    }

    #[test]
    fn tiny_pivots_are_rank_deficient() {
        let k = kernel_basis(&[vec![1e-12, 0.0]], 2, PIVOT_TOL);
        assert_eq!(k.len(), 2);
    }
}
