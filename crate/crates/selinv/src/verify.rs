//! Independent oracles, error metrics and test-matrix generators.
//!
//! The dense oracle uses its own LU with partial pivoting — deliberately a
//! different algorithm from the pipeline's no-pivot factorization, so that
//! agreement between the two is evidence rather than tautology.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::factor::BlockFactor;
use crate::inverse::SelectedInverse;
use crate::scalar::Scalar;
use crate::sparse::{coord_to_csc, CooMatrix, CscMatrix, Symmetry};

/// Dense inverse by LU with partial pivoting followed by the column solves
/// `L y_j = e_j`, `U x_j = y_j`. Column-major input and output, `n <= 256`.
pub fn dense_inverse_oracle<T: Scalar>(a: &[T], n: usize) -> Result<Vec<T>> {
    assert!(n <= 256, "oracle is for desk-scale matrices");
    assert_eq!(a.len(), n * n);
    let mut lu = a.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();
    for t in 0..n {
        // partial pivoting on column t
        let mut best = t;
        let mut best_mag = lu[t + t * n].modulus();
        for i in t + 1..n {
            let mag = lu[i + t * n].modulus();
            if mag > best_mag {
                best = i;
                best_mag = mag;
            }
        }
        if best_mag == 0.0 {
            return Err(Error::SingularOracle { col: t });
        }
        if best != t {
            for j in 0..n {
                lu.swap(t + j * n, best + j * n);
            }
            piv.swap(t, best);
        }
        let pivot = lu[t + t * n];
        for i in t + 1..n {
            lu[i + t * n] = lu[i + t * n] / pivot;
        }
        for j in t + 1..n {
            let u = lu[t + j * n];
            if u == T::zero() {
                continue;
            }
            for i in t + 1..n {
                let l = lu[i + t * n];
                lu[i + j * n] -= l * u;
            }
        }
    }
    // solve for each column of the inverse: P A x = P e_j
    let mut inv = vec![T::zero(); n * n];
    for j in 0..n {
        let mut y = vec![T::zero(); n];
        // rhs = P e_j
        for (row, &p) in piv.iter().enumerate() {
            if p == j {
                y[row] = T::one();
            }
        }
        for t in 0..n {
            let v = y[t];
            if v == T::zero() {
                continue;
            }
            for i in t + 1..n {
                let l = lu[i + t * n];
                y[i] -= l * v;
            }
        }
        for t in (0..n).rev() {
            let mut v = y[t];
            for s in t + 1..n {
                v -= lu[t + s * n] * y[s];
            }
            y[t] = v / lu[t + t * n];
        }
        inv[j * n..(j + 1) * n].copy_from_slice(&y);
    }
    Ok(inv)
}

/// Comparison of two inverse restrictions over the same position set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    /// max over columns j of ||Δ col_j|| / ||col_j||
    pub max_col_relative: f64,
    /// max entrywise |Δ| scaled by the reference column's largest entry.
    /// Entries far below the column scale carry absolute roundoff from any
    /// inversion algorithm (the oracle included), so a plain entrywise ratio
    /// would diverge on them without measuring anything.
    pub max_entry_relative: f64,
    pub entries_compared: usize,
}

/// Compare a computed selected inverse against the dense reference on the
/// computed position set (lower triangle plus its mirror).
pub fn compare_selected<T: Scalar>(
    s: &SelectedInverse<T>,
    dense_ref: &[T],
    n: usize,
) -> ComparisonReport {
    let perm = &s.meta.permutation;
    let mut col_scale = vec![f64::MIN_POSITIVE; n];
    for j in 0..n {
        for i in 0..n {
            col_scale[j] = col_scale[j].max(dense_ref[i + j * n].modulus());
        }
    }
    let mut col_diff = vec![0.0f64; n];
    let mut col_norm = vec![0.0f64; n];
    let mut max_entry = 0.0f64;
    let mut count = 0usize;
    let mut visit = |io: usize, jo: usize, got: T| {
        let want = dense_ref[io + jo * n];
        let d = (got - want).modulus();
        col_diff[jo] += d * d;
        col_norm[jo] += want.modulus() * want.modulus();
        max_entry = max_entry.max(d / col_scale[jo]);
        count += 1;
    };
    let part = &s.symbolic.partition;
    for k in 0..part.nsup() {
        let cols = part.cols(k);
        let w = cols.end - cols.start;
        let sn = &s.supernodes[k];
        for c in cols.clone() {
            let jo = perm.new_to_old[c];
            for r in cols.clone() {
                let io = perm.new_to_old[r];
                visit(io, jo, sn.diag[(r - cols.start) + (c - cols.start) * w]);
            }
        }
        for b in &sn.off {
            let nr = b.rows.len();
            for c in cols.clone() {
                let jo = perm.new_to_old[c];
                for (p, &r) in b.rows.iter().enumerate() {
                    let io = perm.new_to_old[r];
                    let v = b.values[p + (c - cols.start) * nr];
                    visit(io, jo, v);
                    visit(jo, io, v); // symmetric mirror position
                }
            }
        }
    }
    let mut max_col = 0.0f64;
    for j in 0..n {
        if col_norm[j] > 0.0 {
            max_col = max_col.max((col_diff[j] / col_norm[j]).sqrt());
        } else if col_diff[j] > 0.0 {
            max_col = f64::INFINITY;
        }
    }
    ComparisonReport {
        max_col_relative: max_col,
        max_entry_relative: max_entry,
        entries_compared: count,
    }
}

/// Five-point Laplacian stencil on a `k x k` grid: `n = k²`, diagonal 4,
/// -1 on grid-neighbor edges. Symmetric-lower storage.
pub fn laplacian2d(k: usize) -> CscMatrix<f64> {
    let n = k * k;
    let idx = |x: usize, y: usize| x + y * k;
    let mut entries = Vec::new();
    for y in 0..k {
        for x in 0..k {
            let c = idx(x, y);
            entries.push((c, c, 4.0));
            if x + 1 < k {
                entries.push((idx(x + 1, y), c, -1.0));
            }
            if y + 1 < k {
                entries.push((idx(x, y + 1), c, -1.0));
            }
        }
    }
    coord_to_csc(&CooMatrix {
        n,
        entries,
        symmetry: Symmetry::SymmetricLower,
    })
}

/// Random symmetric positive definite matrix `BᵀB + δI` with `δ = 1e-2`,
/// where `B` is sparse with roughly the requested density. Deterministic for
/// a fixed seed.
pub fn random_spd(n: usize, density: f64, seed: u64) -> CscMatrix<f64> {
    assert!(n <= 256, "generator is for desk-scale matrices");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = vec![0.0f64; n * n];
    for j in 0..n {
        for i in 0..n {
            if rng.gen::<f64>() < density {
                b[i + j * n] = rng.gen::<f64>() * 2.0 - 1.0;
            }
        }
    }
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j..n {
            // (BᵀB)_{ij} = Σ_t B_{ti} B_{tj}
            let mut v = 0.0;
            for t in 0..n {
                v += b[t + i * n] * b[t + j * n];
            }
            if i == j {
                entries.push((i, j, v + 1e-2));
            } else if v != 0.0 {
                entries.push((i, j, v));
            }
        }
    }
    coord_to_csc(&CooMatrix {
        n,
        entries,
        symmetry: Symmetry::SymmetricLower,
    })
}

/// Random symmetric indefinite matrix shifted into the complex plane:
/// `A = H - z I` with `H` random symmetric (indefinite by construction).
/// Deterministic for a fixed seed.
pub fn shifted_indefinite(n: usize, density: f64, z: Complex64, seed: u64) -> CscMatrix<Complex64> {
    assert!(n <= 256, "generator is for desk-scale matrices");
    let h = random_symmetric_indefinite(n, density, seed);
    let a = crate::sparse::build_shifted(&h.to_complex(), None, z)
        .expect("generator keeps the diagonal in pattern");
    a
}

/// Random symmetric matrix with full diagonal and signed entries; its
/// spectrum straddles zero, so real factorizations of `H - zI` need the
/// complex shift to stay away from the spectrum.
pub fn random_symmetric_indefinite(n: usize, density: f64, seed: u64) -> CscMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for j in 0..n {
        entries.push((j, j, rng.gen::<f64>() * 2.0 - 1.0));
        for i in j + 1..n {
            if rng.gen::<f64>() < density {
                entries.push((i, j, rng.gen::<f64>() * 2.0 - 1.0));
            }
        }
    }
    coord_to_csc(&CooMatrix {
        n,
        entries,
        symmetry: Symmetry::SymmetricLower,
    })
}

/// Eigenvalues of a dense real symmetric matrix by cyclic Jacobi rotations.
/// Test-oracle quality: small `n`, absolute accuracy near machine epsilon.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += m[i + j * n] * m[i + j * n];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p + q * n];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p + p * n];
                let aqq = m[q + q * n];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k + p * n];
                    let akq = m[k + q * n];
                    m[k + p * n] = c * akp - s * akq;
                    m[k + q * n] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p + k * n];
                    let aqk = m[q + k * n];
                    m[p + k * n] = c * apk - s * aqk;
                    m[q + k * n] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i + i * n]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// Dense `L` and `U` of a factor, for reconstruction checks. `U`'s
/// off-diagonal part is rebuilt from the pivots and `Lᵀ`, the relation the
/// symmetric no-pivot factorization preserves.
pub fn factor_to_dense_lu<T: Scalar>(f: &BlockFactor<T>) -> (Vec<T>, Vec<T>) {
    assert!(!f.normalized, "reconstruction needs the raw factor");
    let part = &f.symbolic.partition;
    let n = f.symbolic.n;
    let mut l = vec![T::zero(); n * n];
    let mut u = vec![T::zero(); n * n];
    for i in 0..n {
        l[i + i * n] = T::one();
    }
    let mut pivots = vec![T::zero(); n];
    for k in 0..part.nsup() {
        let cols = part.cols(k);
        let w = cols.end - cols.start;
        let sn = &f.supernodes[k];
        for (t, &p) in sn.pivots.iter().enumerate() {
            pivots[cols.start + t] = p;
        }
        for jj in 0..w {
            let j = cols.start + jj;
            for ii in 0..w {
                let i = cols.start + ii;
                let v = sn.diag[ii + jj * w];
                if ii > jj {
                    l[i + j * n] = v;
                } else {
                    u[i + j * n] = v;
                }
            }
            for b in &sn.off {
                let nr = b.rows.len();
                for (p, &r) in b.rows.iter().enumerate() {
                    l[r + j * n] = b.values[p + jj * nr];
                }
            }
        }
    }
    // U_{k,j} = d_k L_{j,k} for j beyond k's supernode
    for j in 0..n {
        for i in 0..n {
            if i < j && u[i + j * n] == T::zero() && l[j + i * n] != T::zero() {
                u[i + j * n] = pivots[i] * l[j + i * n];
            }
        }
    }
    (l, u)
}

/// Relative Frobenius distance `||LU - A||_F / ||A||_F` from dense pieces.
pub fn reconstruction_error<T: Scalar>(l: &[T], u: &[T], a: &[T], n: usize) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..n {
        for i in 0..n {
            let mut lu = T::zero();
            for t in 0..n {
                lu += l[i + t * n] * u[t + j * n];
            }
            let d = (lu - a[i + j * n]).modulus();
            num += d * d;
            den += a[i + j * n].modulus() * a[i + j * n].modulus();
        }
    }
    (num / den).sqrt()
}
