#![allow(dead_code)]
pub mod gradcheck;
pub mod oracles;

use interview_core::numkernel::{Matrix, Parameterized, Rng};

pub const FD_STEP: f64 = 1e-5;

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, or the absolute difference when both are tiny.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n) * (a - n)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Flattened copies of every parameter tensor's accumulated gradient.
pub fn collect_grads<P: Parameterized>(p: &mut P) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    p.visit_params(&mut |_, g| out.push(g.to_vec()));
    out
}

/// Sets entry `index` of tensor `tensor` (visit order) to `value`.
pub fn set_param<P: Parameterized>(p: &mut P, tensor: usize, index: usize, value: f64) {
    let mut t = 0;
    p.visit_params(&mut |w, _| {
        if t == tensor {
            w[index] = value;
        }
        t += 1;
    });
}

pub fn get_param<P: Parameterized>(p: &mut P, tensor: usize, index: usize) -> f64 {
    let mut t = 0;
    let mut out = f64::NAN;
    p.visit_params(&mut |w, _| {
        if t == tensor {
            out = w[index];
        }
        t += 1;
    });
    out
}

/// Numeric gradient of `loss` with respect to every parameter, per tensor.
pub fn numeric_param_grads<P: Parameterized + Clone>(p: &P, loss: impl Fn(&P) -> f64) -> Vec<Vec<f64>> {
    let mut shapes = Vec::new();
    p.clone().visit_params(&mut |w, _| shapes.push(w.len()));
    let mut probe = p.clone();
    shapes
        .iter()
        .enumerate()
        .map(|(t, &len)| {
            (0..len)
                .map(|i| {
                    let orig = get_param(&mut probe, t, i);
                    set_param(&mut probe, t, i, orig + FD_STEP);
                    let up = loss(&probe);
                    set_param(&mut probe, t, i, orig - FD_STEP);
                    let down = loss(&probe);
                    set_param(&mut probe, t, i, orig);
                    (up - down) / (2.0 * FD_STEP)
                })
                .collect()
        })
        .collect()
}

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

/// `Σ r ⊙ y`, a scalar whose gradient with respect to `y` is `r`.
pub fn project(y: &Matrix, r: &Matrix) -> f64 {
    y.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
}

pub const SMALL_DIMS: interview_core::ModalityDims = interview_core::ModalityDims { video: 6, audio: 5, text: 7 };

/// Synthetic dataset with small feature widths, written under `dir`.
pub fn small_dataset(
    dir: &std::path::Path,
    n_subjects: usize,
    seed: u64,
    noise_sigma: f64,
) -> (interview_core::dataio::Dataset, interview_core::dataio::OracleMeta) {
    use interview_core::dataio::{gen_synthetic, load_dataset, SynthSpec, MANIFEST_FILE};
    let spec = SynthSpec {
        n_subjects,
        seed,
        noise_sigma,
        dims: SMALL_DIMS,
        min_len: 2,
        max_len: 5,
        ..Default::default()
    };
    let meta = gen_synthetic(&spec, dir).unwrap();
    (load_dataset(&dir.join(MANIFEST_FILE)).unwrap(), meta)
}

pub fn small_config(seed: u64) -> interview_core::TrainConfig {
    interview_core::TrainConfig {
        seed,
        head_count: 4,
        hidden_dim: 8,
        basis_count: 6,
        shared_dim: 6,
        batch_size: 8,
        max_epochs: 6,
        learning_rate: 1e-3,
        ..Default::default()
    }
}
