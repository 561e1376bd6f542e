//! Minimal dense-network framework: layers, forward/backward propagation,
//! inverted dropout, Adam, and MSE / binary cross-entropy losses.
//!
//! Parameters are generic over [`Scalar`]; `f32` is the storage type used by
//! the encoder pipeline and `f64` is used for finite-difference checks.

mod adam;
mod loss;
mod network;
mod train;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use loss::{loss, LossKind};
pub use network::{Activation, DenseLayer, ForwardTrace, Gradients, LayerGradient, Network};
pub use train::{train, TrainConfig, TrainHistory};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::Float;

use crate::{Error, Result};

/// Floating-point element type for network parameters.
pub trait Scalar: Float + Debug + Default + Send + Sync + 'static {
    fn lit(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `C = alpha * A B + beta * C` with arbitrary strides.
    ///
    /// # Safety
    /// The pointers and strides must describe valid `m x k`, `k x n` and
    /// `m x n` matrices; `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    fn lit(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    fn lit(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Stack equal-length rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!("ragged rows: {} vs {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copy the listed rows into a new matrix.
    pub fn gather_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn convert<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Op {
    N,
    T,
}

/// `op(a) * op(b)` for row-major storage.
pub(crate) fn matmul<T: Scalar>(a: &Matrix<T>, ta: Op, b: &Matrix<T>, tb: Op) -> Matrix<T> {
    matmul_slices(&a.data, a.rows, a.cols, ta, &b.data, b.rows, b.cols, tb)
}

/// Same as [`matmul`] on borrowed row-major buffers.
#[allow(clippy::too_many_arguments)]
pub(crate) fn matmul_slices<T: Scalar>(
    a: &[T],
    a_rows: usize,
    a_cols: usize,
    ta: Op,
    b: &[T],
    b_rows: usize,
    b_cols: usize,
    tb: Op,
) -> Matrix<T> {
    assert_eq!(a.len(), a_rows * a_cols);
    assert_eq!(b.len(), b_rows * b_cols);
    let (m, ka, rsa, csa) = match ta {
        Op::N => (a_rows, a_cols, a_cols as isize, 1),
        Op::T => (a_cols, a_rows, 1, a_cols as isize),
    };
    let (kb, n, rsb, csb) = match tb {
        Op::N => (b_rows, b_cols, b_cols as isize, 1),
        Op::T => (b_cols, b_rows, 1, b_cols as isize),
    };
    assert_eq!(ka, kb, "inner dimensions disagree");
    let mut c = Matrix::zeros(m, n);
    if m == 0 || n == 0 {
        return c;
    }
    // SAFETY: the asserts above tie every shape and stride to the lengths of
    // `a` and `b`, and `c` is a freshly allocated m x n buffer.
    unsafe {
        T::gemm(
            m,
            ka,
            n,
            T::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            T::zero(),
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_transposes() {
        let a = Matrix::from_vec(2, 3, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(3, 2, vec![1.0f64, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(matmul(&a, Op::N, &b, Op::N).data(), &[4.0, 5.0, 10.0, 11.0]);
        // a^T a is 3x3
        let ata = matmul(&a, Op::T, &a, Op::N);
        assert_eq!(ata.shape(), (3, 3));
        assert_eq!(ata.data()[0], 17.0);
        let aat = matmul(&a, Op::N, &a, Op::T);
        assert_eq!(aat.data(), &[14.0, 32.0, 32.0, 77.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::<f32>::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
