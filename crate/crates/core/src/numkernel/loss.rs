use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Mean squared error over every entry, with its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Matrix, label: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != label.shape() {
        return Err(Error::shape("mse_loss", pred.shape(), label.shape()));
    }
    let n = pred.as_slice().len();
    if n == 0 {
        return Err(Error::Data("mse_loss on empty input".into()));
    }
    let scale = 2.0 / n as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut total = 0.0;
    for ((g, &p), &y) in grad.as_mut_slice().iter_mut().zip(pred.as_slice()).zip(label.as_slice()) {
        let d = p - y;
        total += d * d;
        *g = scale * d;
    }
    Ok((total / n as f64, grad))
}
