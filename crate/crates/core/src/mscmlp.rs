//! Multimodal shared-compression MLP.
//!
//! Each modality has its own "keys" layer whose GeLU activations score a set
//! of `C` basis vectors. The basis (the "values" layer, no bias) is shared by
//! all three modalities, so every modality is re-expressed as a weighted sum
//! of the same vectors in a `shared_dim` space:
//!
//! ```text
//! a_m  = GeLU(f_m · W_m + b_m)          m ∈ {audio, video, text}
//! f'_m = Σ_i a_m[i] · c_i = a_m · V
//! x    = concat(f'_audio, f'_video, f'_text)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{check_rate, dropout, gelu_backward, gelu_forward, DropoutMask, LinearParams, Matrix, Parameterized, Rng};
use crate::pooling::{Modality, ModalityDims};

/// Concatenation order of the fused feature.
pub const FUSION_ORDER: [Modality; 3] = [Modality::Audio, Modality::Video, Modality::Text];

#[derive(Debug, Clone, PartialEq)]
pub struct MscMlpParams {
    pub keys_audio: LinearParams,
    pub keys_video: LinearParams,
    pub keys_text: LinearParams,
    /// `C × shared_dim`; row `i` is basis vector `c_i`.
    pub values: LinearParams,
}

impl MscMlpParams {
    pub fn init(dims: &ModalityDims, basis_count: usize, shared_dim: usize, rng: &mut Rng) -> Self {
        MscMlpParams {
            keys_audio: LinearParams::xavier(dims.audio, basis_count, true, rng),
            keys_video: LinearParams::xavier(dims.video, basis_count, true, rng),
            keys_text: LinearParams::xavier(dims.text, basis_count, true, rng),
            values: LinearParams::xavier(basis_count, shared_dim, false, rng),
        }
    }

    pub fn from_parts(
        keys_audio: LinearParams,
        keys_video: LinearParams,
        keys_text: LinearParams,
        values: LinearParams,
    ) -> Result<Self> {
        let p = MscMlpParams {
            keys_audio,
            keys_video,
            keys_text,
            values,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.values.in_dim();
        for keys in [&self.keys_audio, &self.keys_video, &self.keys_text] {
            if keys.out_dim() != c {
                return Err(Error::shape("mscmlp keys/values", keys.weight.shape(), self.values.weight.shape()));
            }
            if keys.bias.is_none() {
                return Err(Error::Data("mscmlp keys layers require a bias".into()));
            }
        }
        if self.values.bias.is_some() {
            return Err(Error::Data("mscmlp values layer must not carry a bias".into()));
        }
        Ok(())
    }

    pub fn keys(&self, modality: Modality) -> &LinearParams {
        match modality {
            Modality::Audio => &self.keys_audio,
            Modality::Video => &self.keys_video,
            Modality::Text => &self.keys_text,
        }
    }

    pub fn keys_mut(&mut self, modality: Modality) -> &mut LinearParams {
        match modality {
            Modality::Audio => &mut self.keys_audio,
            Modality::Video => &mut self.keys_video,
            Modality::Text => &mut self.keys_text,
        }
    }

    pub fn basis_count(&self) -> usize {
        self.values.in_dim()
    }

    pub fn shared_dim(&self) -> usize {
        self.values.out_dim()
    }

    pub fn fused_dim(&self) -> usize {
        3 * self.shared_dim()
    }

    pub fn input_dims(&self) -> ModalityDims {
        ModalityDims {
            video: self.keys_video.in_dim(),
            audio: self.keys_audio.in_dim(),
            text: self.keys_text.in_dim(),
        }
    }
}

impl Parameterized for MscMlpParams {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        self.keys_audio.visit_params(f);
        self.keys_video.visit_params(f);
        self.keys_text.visit_params(f);
        self.values.visit_params(f);
    }

    fn zero_grad(&mut self) {
        self.keys_audio.zero_grad();
        self.keys_video.zero_grad();
        self.keys_text.zero_grad();
        self.values.zero_grad();
    }
}

/// Dropout rates around the fusion block: `temporal` on pooled video/audio
/// inputs, `text` on the text input, `adapter` on the fused output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionDropout {
    pub temporal: f64,
    pub text: f64,
    pub adapter: f64,
}

impl Default for FusionDropout {
    fn default() -> Self {
        FusionDropout {
            temporal: 0.3,
            text: 0.1,
            adapter: 0.2,
        }
    }
}

impl FusionDropout {
    pub const NONE: FusionDropout = FusionDropout {
        temporal: 0.0,
        text: 0.0,
        adapter: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        check_rate(self.temporal)?;
        check_rate(self.text)?;
        check_rate(self.adapter)
    }

    fn input_rate(&self, modality: Modality) -> f64 {
        match modality {
            Modality::Video | Modality::Audio => self.temporal,
            Modality::Text => self.text,
        }
    }
}

/// Pooled inputs for a batch of responses; row `r` of each matrix belongs to
/// the same response.
#[derive(Debug, Clone, Copy)]
pub struct FusionInput<'a> {
    pub audio: &'a Matrix,
    pub video: &'a Matrix,
    pub text: &'a Matrix,
}

impl<'a> FusionInput<'a> {
    fn get(&self, modality: Modality) -> &'a Matrix {
        match modality {
            Modality::Audio => self.audio,
            Modality::Video => self.video,
            Modality::Text => self.text,
        }
    }
}

#[derive(Debug, Clone)]
struct BranchCache {
    input: Matrix,
    input_mask: DropoutMask,
    pre: Matrix,
    scores: Matrix,
}

/// Intermediates kept for [`mscmlp_backward`], branches in [`FUSION_ORDER`].
#[derive(Debug, Clone)]
pub struct MscMlpCache {
    branches: Vec<BranchCache>,
    adapter_mask: DropoutMask,
    rows: usize,
    basis_count: usize,
    shared_dim: usize,
}

impl MscMlpCache {
    /// GeLU activation scores `a_m` for one modality.
    pub fn scores(&self, modality: Modality) -> &Matrix {
        let idx = FUSION_ORDER.iter().position(|&m| m == modality).expect("known modality");
        &self.branches[idx].scores
    }
}

pub fn mscmlp_forward(
    input: FusionInput<'_>,
    p: &MscMlpParams,
    drop: &FusionDropout,
    rng: &Rng,
    training: bool,
) -> Result<(Matrix, MscMlpCache)> {
    drop.validate()?;
    let rows = input.audio.rows();
    let mut branches = Vec::with_capacity(3);
    let mut slices = Vec::with_capacity(3);
    for (tag, modality) in FUSION_ORDER.into_iter().enumerate() {
        let raw = input.get(modality);
        if raw.rows() != rows {
            return Err(Error::shape("mscmlp batch rows", input.audio.shape(), raw.shape()));
        }
        let keys = p.keys(modality);
        if raw.cols() != keys.in_dim() {
            return Err(Error::shape("mscmlp input", raw.shape(), keys.weight.shape()));
        }
        let mut branch_rng = rng.derive(&[tag as u64]);
        let (dropped, input_mask) = dropout(raw, drop.input_rate(modality), &mut branch_rng, training)?;
        let pre = keys.forward(&dropped)?;
        let scores = gelu_forward(&pre);
        slices.push(p.values.forward(&scores)?);
        branches.push(BranchCache {
            input: dropped,
            input_mask,
            pre,
            scores,
        });
    }
    let fused = Matrix::hconcat(&slices.iter().collect::<Vec<_>>())?;
    let mut adapter_rng = rng.derive(&[3]);
    let (out, adapter_mask) = dropout(&fused, drop.adapter, &mut adapter_rng, training)?;
    Ok((
        out,
        MscMlpCache {
            branches,
            adapter_mask,
            rows,
            basis_count: p.basis_count(),
            shared_dim: p.shared_dim(),
        },
    ))
}

/// Input gradients per modality, returned when requested.
#[derive(Debug, Clone)]
pub struct FusionInputGrad {
    pub audio: Matrix,
    pub video: Matrix,
    pub text: Matrix,
}

/// Accumulates gradients into `p`. The shared values layer receives the sum
/// of all three modalities' contributions.
pub fn mscmlp_backward(
    grad_x: &Matrix,
    cache: &MscMlpCache,
    p: &mut MscMlpParams,
    want_input_grad: bool,
) -> Result<Option<FusionInputGrad>> {
    if cache.basis_count != p.basis_count() || cache.shared_dim != p.shared_dim() {
        return Err(Error::Data(format!(
            "mscmlp cache built for C={}, shared={} but params have C={}, shared={}",
            cache.basis_count,
            cache.shared_dim,
            p.basis_count(),
            p.shared_dim()
        )));
    }
    let s = p.shared_dim();
    if grad_x.shape() != (cache.rows, 3 * s) {
        return Err(Error::shape("mscmlp_backward", grad_x.shape(), (cache.rows, 3 * s)));
    }
    let grad_fused = cache.adapter_mask.backward(grad_x);
    let mut input_grads = Vec::with_capacity(3);
    for (idx, modality) in FUSION_ORDER.into_iter().enumerate() {
        let branch = &cache.branches[idx];
        let g_slice = grad_fused.col_slice(idx * s, s);
        let g_scores = p
            .values
            .backward(&branch.scores, &g_slice, true)?
            .expect("input grad requested");
        let g_pre = gelu_backward(&branch.pre, &g_scores)?;
        let g_in = p.keys_mut(modality).backward(&branch.input, &g_pre, want_input_grad)?;
        if let Some(g) = g_in {
            input_grads.push(branch.input_mask.backward(&g));
        }
    }
    if !want_input_grad {
        return Ok(None);
    }
    let mut it = input_grads.into_iter();
    let (audio, video, text) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    Ok(Some(FusionInputGrad { audio, video, text }))
}
