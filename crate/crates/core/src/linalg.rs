//! Dense solves for the handful-of-nodes systems that show up in PageRank and
//! clearing. Nothing here is meant for large matrices.

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
///
/// `a` is row-major `n × n` and is destroyed; on success `b` holds `x`.
/// Returns `false` when a pivot falls below `1e-14` relative to the largest
/// entry of `a`, i.e. the system is singular for our purposes.
pub(crate) fn solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let eps = 1e-14 * scale;

    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col * n + col].abs();
        for row in (col + 1)..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best <= eps {
            return false;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            a[row * n + col] = 0.0;
            for k in (col + 1)..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }

    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // 2x + y = 5, x + 3y = 10  ->  x = 1, y = 3
        let mut a = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![5.0, 10.0];
        assert!(solve_in_place(&mut a, &mut b, 2));
        assert!((b[0] - 1.0).abs() < 1e-14);
        assert!((b[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn needs_pivoting() {
        let mut a = vec![0.0, 1.0, 1.0, 0.0];
        let mut b = vec![2.0, 7.0];
        assert!(solve_in_place(&mut a, &mut b, 2));
        assert_eq!(b, vec![7.0, 2.0]);
    }

    #[test]
    fn rejects_singular() {
        let mut a = vec![1.0, -1.0, -1.0, 1.0];
        let mut b = vec![0.0, 0.0];
        assert!(!solve_in_place(&mut a, &mut b, 2));
    }
}
