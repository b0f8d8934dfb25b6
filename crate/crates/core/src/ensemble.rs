//! Regression-head ensemble and the two-level mean aggregation
//! (heads within a response, then responses within a subject).

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{check_rate, dropout, gelu_backward, gelu_forward, DropoutMask, LinearParams, Matrix, Parameterized, Rng};

pub const SCORE_DIMS: usize = 5;

pub const DIMENSION_NAMES: [&str; SCORE_DIMS] = [
    "Integrity",
    "Collegiality",
    "Social versatility",
    "Development orientation",
    "Overall hireability",
];

pub const SCORE_MIN: f64 = 1.0;
pub const SCORE_MAX: f64 = 5.0;

/// Five scores in [`DIMENSION_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(pub [f64; SCORE_DIMS]);

impl ScoreVector {
    pub fn splat(v: f64) -> Self {
        ScoreVector([v; SCORE_DIMS])
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        let arr: [f64; SCORE_DIMS] = s
            .try_into()
            .map_err(|_| Error::Data(format!("score vector needs {SCORE_DIMS} values, got {}", s.len())))?;
        Ok(ScoreVector(arr))
    }

    pub fn clamped(self) -> Self {
        ScoreVector(self.0.map(|v| v.clamp(SCORE_MIN, SCORE_MAX)))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn in_score_range(&self) -> bool {
        self.0.iter().all(|v| (SCORE_MIN..=SCORE_MAX).contains(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for ScoreVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ScoreVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Display for ScoreVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| format!("{v:.4}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// One FFN head: linear → GeLU → dropout → linear, five raw outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionHead {
    pub hidden: LinearParams,
    pub output: LinearParams,
}

impl RegressionHead {
    pub fn init(in_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        RegressionHead {
            hidden: LinearParams::xavier(in_dim, hidden_dim, true, rng),
            output: LinearParams::xavier(hidden_dim, SCORE_DIMS, true, rng),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.out_dim() != self.output.in_dim() || self.output.out_dim() != SCORE_DIMS {
            return Err(Error::shape("regression head", self.hidden.weight.shape(), self.output.weight.shape()));
        }
        Ok(())
    }
}

impl Parameterized for RegressionHead {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        self.hidden.visit_params(f);
        self.output.visit_params(f);
    }

    fn zero_grad(&mut self) {
        self.hidden.zero_grad();
        self.output.zero_grad();
    }
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    pre: Matrix,
    mask: DropoutMask,
    activated: Matrix,
}

pub fn head_forward(x: &Matrix, head: &RegressionHead, rate: f64, rng: &mut Rng, training: bool) -> Result<(Matrix, HeadCache)> {
    let pre = head.hidden.forward(x)?;
    let (activated, mask) = dropout(&gelu_forward(&pre), rate, rng, training)?;
    let out = head.output.forward(&activated)?;
    Ok((out, HeadCache { pre, mask, activated }))
}

/// Accumulates head gradients; returns `∂/∂x` if requested.
pub fn head_backward(
    x: &Matrix,
    grad_out: &Matrix,
    cache: &HeadCache,
    head: &mut RegressionHead,
    want_input_grad: bool,
) -> Result<Option<Matrix>> {
    let g_act = head
        .output
        .backward(&cache.activated, grad_out, true)?
        .expect("input grad requested");
    let g_pre = gelu_backward(&cache.pre, &cache.mask.backward(&g_act))?;
    head.hidden.backward(x, &g_pre, want_input_grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleParams {
    pub heads: Vec<RegressionHead>,
}

impl EnsembleParams {
    /// `head_count` heads, each initialised from its own derived stream.
    pub fn init(head_count: usize, in_dim: usize, hidden_dim: usize, rng: &Rng) -> Result<Self> {
        if head_count == 0 {
            return Err(Error::Config("head count must be at least 1".into()));
        }
        let heads = (0..head_count)
            .map(|i| RegressionHead::init(in_dim, hidden_dim, &mut rng.derive(&[i as u64])))
            .collect();
        Ok(EnsembleParams { heads })
    }

    pub fn from_heads(heads: Vec<RegressionHead>) -> Result<Self> {
        let e = EnsembleParams { heads };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .heads
            .first()
            .ok_or_else(|| Error::Data("ensemble has no heads".into()))?;
        for h in &self.heads {
            h.validate()?;
            if h.hidden.weight.shape() != first.hidden.weight.shape() {
                return Err(Error::shape("ensemble heads", first.hidden.weight.shape(), h.hidden.weight.shape()));
            }
        }
        Ok(())
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn in_dim(&self) -> usize {
        self.heads[0].hidden.in_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.heads[0].hidden.out_dim()
    }
}

impl Parameterized for EnsembleParams {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        for h in &mut self.heads {
            h.visit_params(f);
        }
    }

    fn zero_grad(&mut self) {
        for h in &mut self.heads {
            h.zero_grad();
        }
    }
}

/// Runs every head on `x`; head `i` draws dropout from `rng.derive([i])`.
pub fn ensemble_forward(
    x: &Matrix,
    ens: &EnsembleParams,
    rate: f64,
    rng: &Rng,
    training: bool,
) -> Result<(Vec<Matrix>, Vec<HeadCache>)> {
    check_rate(rate)?;
    if x.cols() != ens.in_dim() {
        return Err(Error::shape("ensemble input", x.shape(), ens.heads[0].hidden.weight.shape()));
    }
    let mut outs = Vec::with_capacity(ens.head_count());
    let mut caches = Vec::with_capacity(ens.head_count());
    for (i, head) in ens.heads.iter().enumerate() {
        let (o, c) = head_forward(x, head, rate, &mut rng.derive(&[i as u64]), training)?;
        outs.push(o);
        caches.push(c);
    }
    Ok((outs, caches))
}

/// Backward through all heads with per-head output gradients; input gradients
/// are summed in head order.
pub fn ensemble_backward(
    x: &Matrix,
    grad_per_head: &[Matrix],
    caches: &[HeadCache],
    ens: &mut EnsembleParams,
    want_input_grad: bool,
) -> Result<Option<Matrix>> {
    if grad_per_head.len() != ens.head_count() || caches.len() != ens.head_count() {
        return Err(Error::Data(format!(
            "ensemble backward got {} grads / {} caches for {} heads",
            grad_per_head.len(),
            caches.len(),
            ens.head_count()
        )));
    }
    let mut total: Option<Matrix> = None;
    for ((head, cache), g) in ens.heads.iter_mut().zip(caches).zip(grad_per_head) {
        if let Some(gx) = head_backward(x, g, cache, head, want_input_grad)? {
            match total.as_mut() {
                Some(t) => t.add_assign(&gx)?,
                None => total = Some(gx),
            }
        }
    }
    Ok(total)
}

/// Running mean; exact when all inputs are identical.
fn running_mean(items: impl IntoIterator<Item = ScoreVector>) -> Option<ScoreVector> {
    let mut it = items.into_iter();
    let mut mean = it.next()?;
    for (n, v) in it.enumerate() {
        let count = (n + 2) as f64;
        for d in 0..SCORE_DIMS {
            mean[d] += (v[d] - mean[d]) / count;
        }
    }
    Some(mean)
}

/// Two-level mean: `predictions[k][i]` is head `i` on response `k`. Heads are
/// averaged first (inner), then responses (outer), always in index order.
pub fn aggregate(predictions: &[Vec<ScoreVector>]) -> Result<ScoreVector> {
    if predictions.is_empty() {
        return Err(Error::Data("aggregate: no responses".into()));
    }
    let heads = predictions[0].len();
    if heads == 0 {
        return Err(Error::Data("aggregate: no heads".into()));
    }
    if let Some(k) = predictions.iter().position(|p| p.len() != heads) {
        return Err(Error::Data(format!(
            "aggregate: response {k} has {} head predictions, expected {heads}",
            predictions[k].len()
        )));
    }
    let per_response = predictions
        .iter()
        .map(|heads| running_mean(heads.iter().copied()).expect("non-empty"));
    Ok(running_mean(per_response).expect("non-empty"))
}

/// Mean of equally weighted score vectors (used for fold-level ensembling).
pub fn mean_scores(items: &[ScoreVector]) -> Result<ScoreVector> {
    running_mean(items.iter().copied()).ok_or_else(|| Error::Data("mean of zero score vectors".into()))
}
