//! Tiny dense-matrix helpers for the (p+1)-dimensional normal equations.
//! Matrices are row-major `Vec<f64>` slices; p is 1 or 2 in practice, so
//! nothing here tries to be clever.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn mat_vec(m: &[f64], dim: usize, v: &[f64]) -> Vec<f64> {
    (0..dim).map(|i| dot(&m[i * dim..(i + 1) * dim], v)).collect()
}

/// Gaussian elimination with partial pivoting; `None` when a pivot falls
/// below `rel_tol` times the largest entry of the matrix.
pub(crate) fn solve(m: &[f64], dim: usize, rhs: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    debug_assert_eq!(m.len(), dim * dim);
    debug_assert_eq!(rhs.len(), dim);
    let scale = m.iter().fold(0.0_f64, |s, x| s.max(x.abs())).max(1e-300);
    let mut a = m.to_vec();
    let mut x = rhs.to_vec();
    for col in 0..dim {
        let mut piv = col;
        for r in col + 1..dim {
            if a[r * dim + col].abs() > a[piv * dim + col].abs() {
                piv = r;
            }
        }
        if a[piv * dim + col].abs() < rel_tol * scale {
            return None;
        }
        if piv != col {
            for c in 0..dim {
                a.swap(col * dim + c, piv * dim + c);
            }
            x.swap(col, piv);
        }
        let d = a[col * dim + col];
        for r in 0..dim {
            if r == col {
                continue;
            }
            let f = a[r * dim + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..dim {
                a[r * dim + c] -= f * a[col * dim + c];
            }
            x[r] -= f * x[col];
        }
    }
    for i in 0..dim {
        x[i] /= a[i * dim + i];
    }
    Some(x)
}

pub(crate) fn invert(m: &[f64], dim: usize, rel_tol: f64) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; dim * dim];
    for col in 0..dim {
        let mut e = vec![0.0; dim];
        e[col] = 1.0;
        let x = solve(m, dim, &e, rel_tol)?;
        for row in 0..dim {
            inv[row * dim + col] = x[row];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_systems() {
        let m = [4.0, 1.0, 1.0, 3.0];
        let x = solve(&m, 2, &[1.0, 2.0], 1e-13).unwrap();
        // Hand-solved: x = (1/11, 7/11).
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = [2.0, -1.0, 0.5, -1.0, 3.0, 1.0, 0.5, 1.0, 4.0];
        let inv = invert(&m, 3, 1e-13).unwrap();
        for i in 0..3 {
            let row = mat_vec(&inv, 3, &[m[i], m[3 + i], m[6 + i]]);
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = [1.0, 2.0, 2.0, 4.0];
        assert!(solve(&m, 2, &[1.0, 1.0], 1e-13).is_none());
        assert!(invert(&m, 2, 1e-13).is_none());
    }
}
