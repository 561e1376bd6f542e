//! Small dense linear-algebra kernels in `f64`.

use alloc::vec;
use alloc::vec::Vec;

/// Eigen-decomposition of a symmetric `n x n` row-major matrix by cyclic
/// Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as rows of the second result (`n x n`, row-major). Each
/// eigenvector's sign is fixed so its largest-magnitude entry is positive.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= scale * 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &col in &order {
        let mut e: Vec<f64> = (0..n).map(|k| v[k * n + col]).collect();
        canonical_sign(&mut e);
        vectors.extend(e);
    }
    (values, vectors)
}

/// Flip `v` so its largest-magnitude entry is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormalize the rows of `rows` (`count x dim`) in place with two
/// passes of modified Gram-Schmidt. Rows that collapse numerically are
/// replaced by zeros; the number of surviving rows is returned.
pub fn orthonormalize_rows(rows: &mut [f64], count: usize, dim: usize) -> usize {
    let mut rank = 0;
    for i in 0..count {
        let (done, rest) = rows.split_at_mut(i * dim);
        let row = &mut rest[..dim];
        let norm0 = libm::sqrt(dot(row, row));
        for _ in 0..2 {
            for j in 0..i {
                let prev = &done[j * dim..(j + 1) * dim];
                let proj = dot(row, prev);
                row.iter_mut().zip(prev).for_each(|(r, p)| *r -= proj * p);
            }
        }
        let norm = libm::sqrt(dot(row, row));
        if norm > 1e-10 * norm0.max(1e-300) && norm > 0.0 {
            row.iter_mut().for_each(|r| *r /= norm);
            rank += 1;
        } else {
            row.iter_mut().for_each(|r| *r = 0.0);
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix() {
        let (vals, vecs) = symmetric_eigen(&[1.0, 0.0, 0.0, 3.0], 2);
        assert_eq!(vals, vec![3.0, 1.0]);
        assert_eq!(vecs, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two() {
        let (vals, vecs) = symmetric_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let r = core::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[0] - r).abs() < 1e-12 && (vecs[1] - r).abs() < 1e-12);
    }

    #[test]
    fn gram_schmidt_rank() {
        let mut rows = vec![1.0, 1.0, 0.0, 2.0, 2.0, 0.0, 0.0, 1.0, 1.0];
        assert_eq!(orthonormalize_rows(&mut rows, 3, 3), 2);
        assert!(rows[3..6].iter().all(|&x| x == 0.0));
        assert!(dot(&rows[0..3], &rows[6..9]).abs() < 1e-12);
    }
}
