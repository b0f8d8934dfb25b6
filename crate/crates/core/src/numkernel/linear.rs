use super::matrix::{gemm, Matrix, Op};
use super::rng::Rng;
use super::Parameterized;
use crate::error::{Error, Result};

/// Affine layer `y = x·W + b` with `W` stored `in_dim × out_dim`, plus
/// accumulated gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub weight: Matrix,
    pub bias: Option<Vec<f64>>,
    grad_weight: Option<Matrix>,
    grad_bias: Option<Vec<f64>>,
}

impl LinearParams {
    pub fn new(weight: Matrix, bias: Option<Vec<f64>>) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != weight.cols() {
                return Err(Error::shape("linear bias", weight.shape(), (1, b.len())));
            }
        }
        Ok(LinearParams {
            weight,
            bias,
            grad_weight: None,
            grad_bias: None,
        })
    }

    /// Uniform in ±√(6 / (fan_in + fan_out)), zero bias.
    pub fn xavier(in_dim: usize, out_dim: usize, with_bias: bool, rng: &mut Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weight = Matrix::from_fn(in_dim, out_dim, |_, _| rng.uniform_range(-limit, limit));
        let bias = with_bias.then(|| vec![0.0; out_dim]);
        LinearParams::new(weight, bias).expect("consistent by construction")
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape("linear_forward", x.shape(), self.weight.shape()));
        }
        let mut out = match &self.bias {
            Some(b) => {
                let mut m = Matrix::zeros(x.rows(), self.out_dim());
                for r in 0..x.rows() {
                    m.row_mut(r).copy_from_slice(b);
                }
                m
            }
            None => Matrix::zeros(x.rows(), self.out_dim()),
        };
        let beta = if self.bias.is_some() { 1.0 } else { 0.0 };
        gemm(1.0, x, Op::N, &self.weight, Op::N, beta, &mut out)?;
        Ok(out)
    }

    /// Accumulates `∂W += xᵀ·g` and `∂b += Σ_rows g`; returns `g·Wᵀ` when
    /// `want_input_grad` is set.
    pub fn backward(&mut self, x: &Matrix, grad_out: &Matrix, want_input_grad: bool) -> Result<Option<Matrix>> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape("linear_backward input", x.shape(), self.weight.shape()));
        }
        if grad_out.shape() != (x.rows(), self.out_dim()) {
            return Err(Error::shape(
                "linear_backward grad",
                grad_out.shape(),
                (x.rows(), self.out_dim()),
            ));
        }
        let (in_dim, out_dim) = self.weight.shape();
        let gw = self.grad_weight.get_or_insert_with(|| Matrix::zeros(in_dim, out_dim));
        gemm(1.0, x, Op::T, grad_out, Op::N, 1.0, gw)?;
        if self.bias.is_some() {
            let gb = self.grad_bias.get_or_insert_with(|| vec![0.0; out_dim]);
            for row in grad_out.iter_rows() {
                for (g, v) in gb.iter_mut().zip(row) {
                    *g += v;
                }
            }
        }
        if !want_input_grad {
            return Ok(None);
        }
        let mut gx = Matrix::zeros(x.rows(), in_dim);
        gemm(1.0, grad_out, Op::N, &self.weight, Op::T, 0.0, &mut gx)?;
        Ok(Some(gx))
    }

    /// Accumulated weight gradient (zeros if nothing has been accumulated).
    pub fn grad_weight(&self) -> Matrix {
        self.grad_weight
            .clone()
            .unwrap_or_else(|| Matrix::zeros(self.in_dim(), self.out_dim()))
    }

    pub fn grad_bias(&self) -> Option<Vec<f64>> {
        self.bias.as_ref().map(|b| {
            self.grad_bias
                .clone()
                .unwrap_or_else(|| vec![0.0; b.len()])
        })
    }
}

impl Parameterized for LinearParams {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        let (in_dim, out_dim) = self.weight.shape();
        let gw = self.grad_weight.get_or_insert_with(|| Matrix::zeros(in_dim, out_dim));
        f(self.weight.as_mut_slice(), gw.as_slice());
        if let Some(b) = self.bias.as_mut() {
            let gb = self.grad_bias.get_or_insert_with(|| vec![0.0; out_dim]);
            f(b, gb);
        }
    }

    fn zero_grad(&mut self) {
        if let Some(g) = self.grad_weight.as_mut() {
            g.fill(0.0);
        }
        if let Some(g) = self.grad_bias.as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}
