//! Minimal dense block kernels, column-major.
//!
//! Both the sequential and the parallel inversion paths call these exact
//! routines on identically shaped operands; accumulation orders are fixed so
//! results agree bitwise whenever the call sequences agree.

use crate::scalar::Scalar;

/// In-place LU factorization without pivoting of an `n x n` column-major
/// block: unit lower triangle below the diagonal, upper triangle including
/// the diagonal above. Returns the offending column and pivot magnitude when
/// a pivot falls below `threshold`.
pub fn lu_nopivot<T: Scalar>(n: usize, a: &mut [T], threshold: f64) -> Result<(), (usize, f64)> {
    debug_assert_eq!(a.len(), n * n);
    for t in 0..n {
        let pivot = a[t + t * n];
        let mag = pivot.modulus();
        if !(mag > threshold) {
            return Err((t, mag));
        }
        for i in t + 1..n {
            a[i + t * n] = a[i + t * n] / pivot;
        }
        for j in t + 1..n {
            let u = a[t + j * n];
            if u == T::zero() {
                continue;
            }
            for i in t + 1..n {
                let l = a[i + t * n];
                a[i + j * n] -= l * u;
            }
        }
    }
    Ok(())
}

/// `B <- B * U^{-1}` with `U` the upper triangle (diagonal included) of a
/// packed `n x n` LU block. `B` is `m x n` column-major.
pub fn solve_upper_right<T: Scalar>(m: usize, n: usize, lu: &[T], b: &mut [T]) {
    debug_assert_eq!(lu.len(), n * n);
    debug_assert_eq!(b.len(), m * n);
    for t in 0..n {
        for s in 0..t {
            let u = lu[s + t * n];
            if u == T::zero() {
                continue;
            }
            for i in 0..m {
                let x = b[i + s * m];
                b[i + t * m] -= x * u;
            }
        }
        let d = lu[t + t * n];
        for i in 0..m {
            b[i + t * m] = b[i + t * m] / d;
        }
    }
}

/// `B <- B * L^{-1}` with `L` the unit lower triangle of a packed `n x n` LU
/// block (implicit unit diagonal). `B` is `m x n` column-major.
pub fn solve_unit_lower_right<T: Scalar>(m: usize, n: usize, lu: &[T], b: &mut [T]) {
    debug_assert_eq!(lu.len(), n * n);
    debug_assert_eq!(b.len(), m * n);
    for t in (0..n).rev() {
        for s in t + 1..n {
            let l = lu[s + t * n];
            if l == T::zero() {
                continue;
            }
            for i in 0..m {
                let x = b[i + s * m];
                b[i + t * m] -= x * l;
            }
        }
    }
}

/// Dense inverse `U^{-1} L^{-1}` of a packed `n x n` LU block, by solving
/// `L Y = I` then `U X = Y` column by column.
pub fn inverse_from_packed_lu<T: Scalar>(n: usize, lu: &[T]) -> Vec<T> {
    debug_assert_eq!(lu.len(), n * n);
    let mut x = vec![T::zero(); n * n];
    for j in 0..n {
        x[j + j * n] = T::one();
    }
    for j in 0..n {
        let col = &mut x[j * n..(j + 1) * n];
        // forward solve with unit lower
        for t in 0..n {
            let y = col[t];
            if y == T::zero() {
                continue;
            }
            for i in t + 1..n {
                let l = lu[i + t * n];
                col[i] -= l * y;
            }
        }
        // back substitution with upper
        for t in (0..n).rev() {
            let mut y = col[t];
            for s in t + 1..n {
                y -= lu[t + s * n] * col[s];
            }
            col[t] = y / lu[t + t * n];
        }
    }
    x
}

/// Fresh product `-A * B`: `A` is `m x k`, `B` is `k x n`, both column-major.
pub fn gemm_neg<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![T::zero(); m * n];
    for j in 0..n {
        for t in 0..k {
            let x = b[t + j * k];
            if x == T::zero() {
                continue;
            }
            for i in 0..m {
                c[i + j * m] -= a[i + t * m] * x;
            }
        }
    }
    c
}

/// Fresh product `-Aᵀ * B`: `A` is `m x p`, `B` is `m x n`, result `p x n`.
pub fn gemm_neg_at<T: Scalar>(m: usize, p: usize, n: usize, a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), m * p);
    debug_assert_eq!(b.len(), m * n);
    let mut c = vec![T::zero(); p * n];
    for j in 0..n {
        for i in 0..p {
            let mut acc = T::zero();
            for t in 0..m {
                acc += a[t + i * m] * b[t + j * m];
            }
            c[i + j * p] = -acc;
        }
    }
    c
}

/// Product `A * Bᵀ`: `A` is `m x k`, `B` is `n x k`, result `m x n`.
pub fn gemm_nt<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut c = vec![T::zero(); m * n];
    for j in 0..n {
        for t in 0..k {
            let x = b[j + t * n];
            if x == T::zero() {
                continue;
            }
            for i in 0..m {
                c[i + j * m] += a[i + t * m] * x;
            }
        }
    }
    c
}

/// Column-major transpose of an `m x n` block.
pub fn transpose<T: Scalar>(m: usize, n: usize, a: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), m * n);
    let mut t = vec![T::zero(); m * n];
    for j in 0..n {
        for i in 0..m {
            t[j + i * n] = a[i + j * m];
        }
    }
    t
}

pub fn add_assign<T: Scalar>(dst: &mut [T], src: &[T]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// `A <- (A + Aᵀ) / 2` on an `n x n` block.
pub fn symmetrize<T: Scalar>(n: usize, a: &mut [T]) {
    debug_assert_eq!(a.len(), n * n);
    let half = T::from_re(0.5);
    for j in 0..n {
        for i in 0..j {
            let v = (a[i + j * n] + a[j + i * n]) * half;
            a[i + j * n] = v;
            a[j + i * n] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_of_2x2_spd() {
        // [[4,2],[2,3]]: L21 = 0.5, U = [[4,2],[0,2]]
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        lu_nopivot(2, &mut a, 0.0).unwrap();
        assert_eq!(a, vec![4.0, 0.5, 2.0, 2.0]);
    }

    #[test]
    fn lu_reports_tiny_pivot() {
        let mut a = vec![1.0, 1.0, 1.0, 1.0]; // singular
        let err = lu_nopivot(2, &mut a, 1e-12).unwrap_err();
        assert_eq!(err.0, 1);
    }

    #[test]
    fn right_solves_invert_the_triangles() {
        // random 3x3 LU block and 2x3 B; check (B U^{-1}) U = B and similarly for L
        let lu = vec![2.0, 0.5, -1.0, 1.0, 4.0, 0.25, -3.0, 2.0, 5.0];
        let b = vec![1.0, 2.0, -1.0, 0.5, 3.0, -2.0];
        let mut x = b.clone();
        solve_upper_right(2, 3, &lu, &mut x);
        // multiply back by U
        let mut back = vec![0.0; 6];
        for j in 0..3 {
            for s in 0..=j {
                let u = lu[s + j * 3];
                for i in 0..2 {
                    back[i + j * 2] += x[i + s * 2] * u;
                }
            }
        }
        for k in 0..6 {
            assert!((back[k] - b[k]).abs() < 1e-14);
        }

        let mut y = b.clone();
        solve_unit_lower_right(2, 3, &lu, &mut y);
        let mut back = vec![0.0; 6];
        for j in 0..3 {
            back[j * 2] += y[j * 2];
            back[1 + j * 2] += y[1 + j * 2];
            for s in j + 1..3 {
                let l = lu[s + j * 3];
                for i in 0..2 {
                    back[i + j * 2] += y[i + s * 2] * l;
                }
            }
        }
        for k in 0..6 {
            assert!((back[k] - b[k]).abs() < 1e-14, "L path at {k}");
        }
    }

    #[test]
    fn packed_inverse_times_matrix_is_identity() {
        let a = vec![4.0, 2.0, -1.0, 2.0, 5.0, 0.5, -1.0, 0.5, 3.0];
        let mut lu = a.clone();
        lu_nopivot(3, &mut lu, 0.0).unwrap();
        let inv = inverse_from_packed_lu(3, &lu);
        // inv * a == I
        for j in 0..3 {
            for i in 0..3 {
                let mut acc = 0.0;
                for t in 0..3 {
                    acc += inv[i + t * 3] * a[t + j * 3];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((acc - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn transpose_roundtrip() {
        let a: Vec<f64> = (0..12).map(|k| k as f64).collect();
        assert_eq!(transpose(4, 3, &transpose(3, 4, &a)), a);
    }
}
