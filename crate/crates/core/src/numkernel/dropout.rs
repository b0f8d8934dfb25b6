use super::matrix::Matrix;
use super::rng::Rng;
use crate::error::{Error, Result};

/// Per-element scale factors recorded by a dropout forward pass.
#[derive(Debug, Clone, PartialEq)]
pub enum DropoutMask {
    /// Rate zero or inference: every factor is one.
    Identity,
    /// Each factor is `0` (dropped) or `1 / (1 - rate)` (kept).
    Scaled(Vec<f64>),
}

impl DropoutMask {
    pub fn factor(&self, i: usize) -> f64 {
        match self {
            DropoutMask::Identity => 1.0,
            DropoutMask::Scaled(f) => f[i],
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        match self {
            DropoutMask::Identity => x.clone(),
            DropoutMask::Scaled(f) => {
                let mut y = x.clone();
                for (v, s) in y.as_mut_slice().iter_mut().zip(f) {
                    *v *= s;
                }
                y
            }
        }
    }

    /// The backward of a fixed mask is the mask itself.
    pub fn backward(&self, grad_out: &Matrix) -> Matrix {
        self.apply(grad_out)
    }
}

pub fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")))
    }
}

/// Inverted dropout. In training each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; otherwise identity.
pub fn dropout(x: &Matrix, rate: f64, rng: &mut Rng, training: bool) -> Result<(Matrix, DropoutMask)> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok((x.clone(), DropoutMask::Identity));
    }
    let keep = 1.0 / (1.0 - rate);
    let factors: Vec<f64> = (0..x.as_slice().len())
        .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
        .collect();
    let mask = DropoutMask::Scaled(factors);
    Ok((mask.apply(x), mask))
}
