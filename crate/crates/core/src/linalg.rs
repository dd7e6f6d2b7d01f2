//! Dense helpers for the tiny linear systems the estimators need (the
//! slope block is one or two columns; test fixtures stay below ~30).
//! Matrices are row-major flat slices.

use crate::scalar::Scalar;

/// Matrix product of `a` (r x m) and `b` (m x c).
pub(crate) fn mat_mul<F: Scalar>(a: &[F], b: &[F], r: usize, m: usize, c: usize) -> Vec<F> {
    let mut out = vec![F::zero(); r * c];
    for i in 0..r {
        for l in 0..m {
            let ail = a[i * m + l];
            if ail == F::zero() {
                continue;
            }
            for j in 0..c {
                out[i * c + j] = out[i * c + j] + ail * b[l * c + j];
            }
        }
    }
    out
}

/// Inverse of a k x k matrix by Gauss-Jordan with partial pivoting.
/// Returns `None` when a pivot vanishes.
pub(crate) fn invert<F: Scalar>(a: &[F], k: usize) -> Option<Vec<F>> {
    debug_assert_eq!(a.len(), k * k);
    let mut m = a.to_vec();
    let mut inv = vec![F::zero(); k * k];
    for i in 0..k {
        inv[i * k + i] = F::one();
    }
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&i, &j| {
                m[i * k + col]
                    .abs()
                    .partial_cmp(&m[j * k + col].abs())
                    .expect("non-NaN pivot")
            })
            .unwrap();
        let pivot = m[pivot_row * k + col];
        if pivot.abs() == F::zero() {
            return None;
        }
        if pivot_row != col {
            for j in 0..k {
                m.swap(col * k + j, pivot_row * k + j);
                inv.swap(col * k + j, pivot_row * k + j);
            }
        }
        let inv_pivot = F::one() / pivot;
        for j in 0..k {
            m[col * k + j] = m[col * k + j] * inv_pivot;
            inv[col * k + j] = inv[col * k + j] * inv_pivot;
        }
        for row in 0..k {
            if row == col {
                continue;
            }
            let factor = m[row * k + col];
            if factor == F::zero() {
                continue;
            }
            for j in 0..k {
                m[row * k + j] = m[row * k + j] - factor * m[col * k + j];
                inv[row * k + j] = inv[row * k + j] - factor * inv[col * k + j];
            }
        }
    }
    Some(inv)
}

/// Eigenvalues of a symmetric k x k matrix by cyclic Jacobi rotations,
/// sorted ascending.
pub(crate) fn symmetric_eigenvalues<F: Scalar>(a: &[F], k: usize) -> Vec<F> {
    debug_assert_eq!(a.len(), k * k);
    if k == 0 {
        return Vec::new();
    }
    if k == 1 {
        return vec![a[0]];
    }
    let mut m = a.to_vec();
    let scale = (0..k)
        .map(|i| m[i * k + i].abs())
        .fold(F::zero(), F::max)
        .max(F::one());
    let tol = F::from_f64_lossy(1e-14) * scale;
    for _sweep in 0..100 {
        let mut off = F::zero();
        for p in 0..k {
            for q in (p + 1)..k {
                off = off + m[p * k + q].abs();
            }
        }
        if off < tol {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                let apq = m[p * k + q];
                if apq.abs() <= tol * F::from_f64_lossy(1e-2) {
                    continue;
                }
                let theta = (m[q * k + q] - m[p * k + p]) / (F::from_f64_lossy(2.0) * apq);
                let t = {
                    let sign = if theta >= F::zero() { F::one() } else { -F::one() };
                    sign / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for j in 0..k {
                    let mpj = m[p * k + j];
                    let mqj = m[q * k + j];
                    m[p * k + j] = c * mpj - s * mqj;
                    m[q * k + j] = s * mpj + c * mqj;
                }
                for i in 0..k {
                    let mip = m[i * k + p];
                    let miq = m[i * k + q];
                    m[i * k + p] = c * mip - s * miq;
                    m[i * k + q] = s * mip + c * miq;
                }
            }
        }
    }
    let mut eigs: Vec<F> = (0..k).map(|i| m[i * k + i]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN eigenvalues"));
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn invert_2x2() {
        let a = [4.0, 7.0, 2.0, 6.0];
        let inv = invert(&a, 2).unwrap();
        let id = mat_mul(&a, &inv, 2, 2, 2);
        assert_relative_eq!(id[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(id[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(id[2], 0.0, epsilon = 1e-12);
        assert_relative_eq!(id[3], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn invert_singular_is_none() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(invert(&a, 2).is_none());
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let a = [3.0, 0.0, 0.0, 1.0];
        let e = symmetric_eigenvalues(&a, 2);
        assert_relative_eq!(e[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(e[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_of_symmetric_3x3() {
        // [[2,1,0],[1,2,1],[0,1,2]] has eigenvalues 2-sqrt(2), 2, 2+sqrt(2)
        let a = [2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0];
        let e = symmetric_eigenvalues(&a, 3);
        let s = 2.0f64.sqrt();
        assert_relative_eq!(e[0], 2.0 - s, epsilon = 1e-10);
        assert_relative_eq!(e[1], 2.0, epsilon = 1e-10);
        assert_relative_eq!(e[2], 2.0 + s, epsilon = 1e-10);
    }
}
