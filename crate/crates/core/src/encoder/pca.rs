use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{canonical_sign, orthonormalize_rows, symmetric_eigen};
use crate::nn::{matmul_slices, Matrix, Op};
use crate::{Error, Result};

/// Fits on more rows than this use an evenly strided subsample.
pub const PCA_MAX_SAMPLES: usize = 20_000;
/// Widths up to this use a dense covariance eigendecomposition; wider
/// inputs use subspace iteration on the covariance operator.
pub const PCA_EXACT_LIMIT: usize = 256;
const SUBSPACE_OVERSAMPLE: usize = 16;
const SUBSPACE_ITERATIONS: usize = 12;

/// Mean and leading covariance eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x input_dim`, row-major, one unit component per row.
    pub components: Vec<f64>,
    /// Sample-covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub k: usize,
    pub input_dim: usize,
}

impl PcaModel {
    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.input_dim..(i + 1) * self.input_dim]
    }

    /// `mean + components^T y`.
    pub fn reconstruct(&self, projected: &[f32]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (i, &y) in projected.iter().enumerate().take(self.k) {
            for (o, c) in out.iter_mut().zip(self.component(i)) {
                *o += f64::from(y) * c;
            }
        }
        out
    }
}

fn subsample<R: AsRef<[f32]>>(rows: &[R]) -> Vec<&[f32]> {
    if rows.len() <= PCA_MAX_SAMPLES {
        return rows.iter().map(AsRef::as_ref).collect();
    }
    (0..PCA_MAX_SAMPLES)
        .map(|i| rows[i * rows.len() / PCA_MAX_SAMPLES].as_ref())
        .collect()
}

/// Fit the top-`k` principal components. `k` is truncated to `n - 1` when
/// fewer samples are available.
pub fn pca_fit<R: AsRef<[f32]>>(rows: &[R], k: usize, seed: u64) -> Result<PcaModel> {
    let rows = subsample(rows);
    let n = rows.len();
    if n < 2 {
        return Err(Error::Empty("PCA needs at least two samples"));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape("PCA rows differ in width".into()));
    }
    if k == 0 || k > dim {
        return Err(Error::Invalid(format!("cannot keep {k} components of {dim}-wide data")));
    }
    let k = k.min(n - 1);

    let mut mean = vec![0.0f64; dim];
    for r in &rows {
        for (m, &v) in mean.iter_mut().zip(r.iter()) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centered = Vec::with_capacity(n * dim);
    for r in &rows {
        centered.extend(r.iter().zip(&mean).map(|(&v, m)| f64::from(v) - m));
    }
    let denom = (n - 1) as f64;

    let (eigenvalues, components) = if dim <= PCA_EXACT_LIMIT {
        let cov = matmul_slices(&centered, n, dim, Op::T, &centered, n, dim, Op::N);
        let cov: Vec<f64> = cov.into_vec().into_iter().map(|c| c / denom).collect();
        let (vals, vecs) = symmetric_eigen(&cov, dim);
        (vals[..k].to_vec(), vecs[..k * dim].to_vec())
    } else {
        subspace_iteration(&centered, n, dim, k, denom, seed)
    };
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        k,
        input_dim: dim,
    })
}

/// Leading eigenpairs of `X^T X / denom` from block power iteration and a
/// Rayleigh-Ritz step.
fn subspace_iteration(x: &[f64], n: usize, dim: usize, k: usize, denom: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let r = (k + SUBSPACE_OVERSAMPLE).min(dim).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..r * dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    orthonormalize_rows(&mut q, r, dim);
    for _ in 0..SUBSPACE_ITERATIONS {
        // Q <- orth(Q X^T X)
        let z = matmul_slices(x, n, dim, Op::N, &q, r, dim, Op::T); // n x r
        let y = matmul_slices(z.data(), n, r, Op::T, x, n, dim, Op::N); // r x dim
        q = y.into_vec();
        orthonormalize_rows(&mut q, r, dim);
    }
    let z = matmul_slices(x, n, dim, Op::N, &q, r, dim, Op::T);
    let b: Matrix<f64> = matmul_slices(z.data(), n, r, Op::T, z.data(), n, r, Op::N);
    let b: Vec<f64> = b.into_vec().into_iter().map(|v| v / denom).collect();
    let (vals, vecs) = symmetric_eigen(&b, r);
    // component_i = sum_j w_ij q_j
    let w = &vecs[..k * r];
    let mut comps = matmul_slices(w, k, r, Op::N, &q, r, dim, Op::N).into_vec();
    for c in comps.chunks_exact_mut(dim) {
        canonical_sign(c);
    }
    (vals[..k].to_vec(), comps)
}

/// `components (x - mean)`.
pub fn pca_project(model: &PcaModel, x: &[f32]) -> Result<Vec<f32>> {
    if x.len() != model.input_dim {
        return Err(Error::Shape(format!(
            "vector has {} values, PCA expects {}",
            x.len(),
            model.input_dim
        )));
    }
    let centered: Vec<f64> = x.iter().zip(&model.mean).map(|(&v, m)| f64::from(v) - m).collect();
    Ok((0..model.k)
        .map(|i| crate::linalg::dot(model.component(i), &centered) as f32)
        .collect())
}
