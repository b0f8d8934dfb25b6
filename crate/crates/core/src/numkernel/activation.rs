use super::matrix::Matrix;
use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GeLU, `x·Φ(x)` with the erf-based normal CDF.
#[inline]
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// `d/dx [x·Φ(x)] = Φ(x) + x·φ(x)`.
#[inline]
pub fn gelu_derivative(x: f64) -> f64 {
    normal_cdf(x) + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

pub fn gelu_forward(pre: &Matrix) -> Matrix {
    pre.map(gelu)
}

/// Gradient through GeLU given the pre-activation it was applied to.
pub fn gelu_backward(pre: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    if pre.shape() != grad_out.shape() {
        return Err(Error::shape("gelu_backward", pre.shape(), grad_out.shape()));
    }
    let mut out = grad_out.clone();
    for (g, &x) in out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        *g *= gelu_derivative(x);
    }
    Ok(out)
}
