use alloc::format;

use serde::{Deserialize, Serialize};

use super::{Matrix, Scalar};
use crate::{Error, Result};

/// Predictions are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the BCE.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean of squared errors over every element.
    Mse,
    /// Mean binary cross-entropy over every element.
    Bce,
}

/// Loss value and its gradient with respect to `prediction`.
pub fn loss<T: Scalar>(kind: LossKind, prediction: &Matrix<T>, target: &Matrix<T>) -> Result<(f64, Matrix<T>)> {
    if prediction.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let count = prediction.data().len();
    if count == 0 {
        return Err(Error::Empty("loss input"));
    }
    let inv_n = 1.0 / count as f64;
    let mut grad = Matrix::zeros(prediction.rows(), prediction.cols());
    let mut total = 0.0f64;
    match kind {
        LossKind::Mse => {
            let scale = T::lit(2.0 * inv_n);
            for ((g, &p), &t) in grad.data_mut().iter_mut().zip(prediction.data()).zip(target.data()) {
                let diff = p - t;
                total += diff.as_f64() * diff.as_f64();
                *g = diff * scale;
            }
        }
        LossKind::Bce => {
            let lo = T::lit(BCE_CLAMP);
            let hi = T::one() - lo;
            for ((g, &p), &y) in grad.data_mut().iter_mut().zip(prediction.data()).zip(target.data()) {
                let pc = p.max(lo).min(hi);
                let (pf, yf) = (pc.as_f64(), y.as_f64());
                total -= yf * libm::log(pf) + (1.0 - yf) * libm::log(1.0 - pf);
                *g = T::lit((pf - yf) / (pf * (1.0 - pf)) * inv_n);
            }
        }
    }
    Ok((total * inv_n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn perfect_fit_is_zero() {
        let m = Matrix::from_vec(2, 2, vec![0.1f64, 0.2, 0.3, 0.4]).unwrap();
        let (v, g) = loss(LossKind::Mse, &m, &m).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bce_at_half_is_ln2() {
        let p = Matrix::from_vec(1, 1, vec![0.5f64]).unwrap();
        let y = Matrix::from_vec(1, 1, vec![1.0f64]).unwrap();
        let (v, _) = loss(LossKind::Bce, &p, &y).unwrap();
        assert!((v - core::f64::consts::LN_2).abs() < 1e-12);
        assert!((v - 0.6931).abs() < 1e-4);
    }

    #[test]
    fn bce_clamps_extremes() {
        let p = Matrix::from_vec(1, 2, vec![0.0f64, 1.0]).unwrap();
        let y = Matrix::from_vec(1, 2, vec![1.0f64, 0.0]).unwrap();
        let (v, g) = loss(LossKind::Bce, &p, &y).unwrap();
        assert!(v.is_finite() && g.is_finite());
        assert!((v + libm::log(BCE_CLAMP)).abs() < 1e-6);
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let p = vec![0.3f64, -1.2, 2.5, 0.7, 0.0, 1.1];
        let t = vec![0.1f64, -1.0, 2.0, 1.7, 0.4, 1.1];
        let pm = Matrix::from_vec(2, 3, p.clone()).unwrap();
        let tm = Matrix::from_vec(2, 3, t).unwrap();
        let (_, g) = loss(LossKind::Mse, &pm, &tm).unwrap();
        let h = 1e-5;
        for i in 0..p.len() {
            let mut plus = p.clone();
            plus[i] += h;
            let mut minus = p.clone();
            minus[i] -= h;
            let fp = loss(LossKind::Mse, &Matrix::from_vec(2, 3, plus).unwrap(), &tm).unwrap().0;
            let fm = loss(LossKind::Mse, &Matrix::from_vec(2, 3, minus).unwrap(), &tm).unwrap().0;
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - g.data()[i]).abs() < 1e-6, "{i}: {fd} vs {}", g.data()[i]);
        }
    }

    #[test]
    fn shape_mismatch() {
        let a = Matrix::<f32>::zeros(1, 2);
        let b = Matrix::<f32>::zeros(2, 1);
        assert!(loss(LossKind::Mse, &a, &b).is_err());
    }
}
