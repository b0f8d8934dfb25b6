//! Independent brute-force references for the forward paths.

use interview_core::dataio::{ResponseFeatures, Split, SubjectRecord};
use interview_core::ensemble::{aggregate, ScoreVector, SCORE_DIMS};
use interview_core::model::{predict_subject, DropoutPlan, Model, PooledSubject};
use interview_core::mscmlp::{mscmlp_backward, mscmlp_forward, FusionDropout, FusionInput, MscMlpParams};
use interview_core::numkernel::{gemm, mse_loss, AdamWConfig, AdamWState, LinearParams, Matrix, Op, Parameterized, Rng};
use interview_core::pooling::{pool_max, pool_mean, FeatureSequence, Modality, ModalityDims, PooledResponse};
use interview_core::TrainConfig;

use super::{collect_grads, random_matrix};

fn gelu_ref(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn scaled_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn matmul_worst(cases: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..cases {
        let mut rng = Rng::new(seed);
        let (m, k, n) = (1 + rng.below(32), 1 + rng.below(32), 1 + rng.below(32));
        let a = random_matrix(&mut rng, m, k);
        let b = random_matrix(&mut rng, k, n);
        let mut c = Matrix::zeros(m, n);
        gemm(1.0, &a, Op::N, &b, Op::N, 0.0, &mut c).unwrap();
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for t in 0..k {
                    acc += a.get(i, t) * b.get(t, j);
                }
                worst = worst.max(scaled_diff(c.get(i, j), acc));
            }
        }
    }
    worst
}

fn random_fusion(rng: &mut Rng) -> (MscMlpParams, ModalityDims, usize) {
    let dims = ModalityDims {
        video: 1 + rng.below(6),
        audio: 1 + rng.below(6),
        text: 1 + rng.below(8),
    };
    let c = 1 + rng.below(5);
    let s = 1 + rng.below(5);
    let mut p = MscMlpParams::init(&dims, c, s, rng);
    for keys in [&mut p.keys_audio, &mut p.keys_video, &mut p.keys_text] {
        for b in keys.bias.as_mut().unwrap() {
            *b = rng.normal();
        }
    }
    let rows = 1 + rng.below(3);
    (p, dims, rows)
}

/// Loop-level weighted sum of basis vectors per modality, concatenated
/// audio, video, text.
fn fusion_ref(p: &MscMlpParams, inputs: [(&LinearParams, &Matrix); 3], row: usize) -> Vec<f64> {
    let s = p.values.weight.cols();
    let c = p.values.weight.rows();
    let mut out = Vec::new();
    for (keys, f) in inputs {
        let mut a = vec![0.0; c];
        for (i, ai) in a.iter_mut().enumerate() {
            let mut z = keys.bias.as_ref().unwrap()[i];
            for j in 0..f.cols() {
                z += f.get(row, j) * keys.weight.get(j, i);
            }
            *ai = gelu_ref(z);
        }
        for k in 0..s {
            let mut acc = 0.0;
            for (i, ai) in a.iter().enumerate() {
                acc += ai * p.values.weight.get(i, k);
            }
            out.push(acc);
        }
    }
    out
}

pub fn fusion_worst(configs: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..configs {
        let mut rng = Rng::new(1000 + seed);
        let (p, dims, rows) = random_fusion(&mut rng);
        let a = random_matrix(&mut rng, rows, dims.audio);
        let v = random_matrix(&mut rng, rows, dims.video);
        let t = random_matrix(&mut rng, rows, dims.text);
        let (x, _) = mscmlp_forward(FusionInput { audio: &a, video: &v, text: &t }, &p, &FusionDropout::default(), &Rng::new(0), false).unwrap();
        for r in 0..rows {
            let expect = fusion_ref(&p, [(&p.keys_audio, &a), (&p.keys_video, &v), (&p.keys_text, &t)], r);
            for (got, want) in x.row(r).iter().zip(&expect) {
                worst = worst.max(scaled_diff(*got, *want));
            }
        }
    }
    worst
}

/// The shared basis gradient equals the sum of three separately computed
/// per-modality outer products, bit for bit.
pub fn values_decomposition_exact(cases: u64) -> bool {
    (0..cases).all(|seed| {
        let mut rng = Rng::new(2000 + seed);
        let (mut p, dims, rows) = random_fusion(&mut rng);
        let a = random_matrix(&mut rng, rows, dims.audio);
        let v = random_matrix(&mut rng, rows, dims.video);
        let t = random_matrix(&mut rng, rows, dims.text);
        let s = p.shared_dim();
        let g = random_matrix(&mut rng, rows, 3 * s);
        let (_, cache) = mscmlp_forward(FusionInput { audio: &a, video: &v, text: &t }, &p, &FusionDropout::NONE, &Rng::new(0), false).unwrap();
        mscmlp_backward(&g, &cache, &mut p, false).unwrap();
        let shared = p.values.grad_weight();

        let mut sum = Matrix::zeros(p.basis_count(), s);
        for (idx, m) in [Modality::Audio, Modality::Video, Modality::Text].into_iter().enumerate() {
            let mut part = Matrix::zeros(p.basis_count(), s);
            gemm(1.0, cache.scores(m), Op::T, &g.col_slice(idx * s, s), Op::N, 0.0, &mut part).unwrap();
            if idx == 0 {
                sum = part;
            } else {
                for (acc, x) in sum.as_mut_slice().iter_mut().zip(part.as_slice()) {
                    *acc += x;
                }
            }
        }
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        bits(&sum) == bits(&shared)
    })
}

/// Inference mode: perturbing one keys layer moves only its own slice of
/// the fused output, while perturbing the shared basis moves all three.
pub fn sharing_check(cases: u64) -> bool {
    (0..cases).all(|seed| {
        let mut rng = Rng::new(3000 + seed);
        let dims = ModalityDims { video: 3, audio: 2, text: 4 };
        let p = MscMlpParams::init(&dims, 3, 2, &mut rng);
        let a = random_matrix(&mut rng, 1, 2);
        let v = random_matrix(&mut rng, 1, 3);
        let t = random_matrix(&mut rng, 1, 4);
        let run = |p: &MscMlpParams| {
            mscmlp_forward(FusionInput { audio: &a, video: &v, text: &t }, p, &FusionDropout::default(), &Rng::new(0), false)
                .unwrap()
                .0
        };
        let base = run(&p);
        let changed = |x: &Matrix, slice: usize| (0..2).any(|k| x.get(0, slice * 2 + k) != base.get(0, slice * 2 + k));

        let mut q = p.clone();
        for w in q.keys_audio.weight.as_mut_slice() {
            *w += 0.1;
        }
        let xa = run(&q);
        let mut q = p.clone();
        for w in q.values.weight.as_mut_slice() {
            *w *= 1.5;
        }
        let xv = run(&q);
        changed(&xa, 0) && !changed(&xa, 1) && !changed(&xa, 2) && (0..3).all(|s| changed(&xv, s))
    })
}

pub fn aggregation_worst(cases: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..cases {
        let mut rng = Rng::new(4000 + seed);
        let block: Vec<Vec<ScoreVector>> = (0..6)
            .map(|_| {
                (0..32)
                    .map(|_| ScoreVector::from_slice(&(0..SCORE_DIMS).map(|_| 1.0 + 4.0 * rng.uniform()).collect::<Vec<_>>()).unwrap())
                    .collect()
            })
            .collect();
        let got = aggregate(&block).unwrap();
        for d in 0..SCORE_DIMS {
            let mut acc = 0.0;
            for response in &block {
                for head in response {
                    acc += head[d];
                }
            }
            worst = worst.max(scaled_diff(got[d], acc / 192.0));
        }
    }
    worst
}

fn tiny_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        head_count: 4,
        hidden_dim: 5,
        basis_count: 3,
        shared_dim: 3,
        ..Default::default()
    }
}

fn sequence(rng: &mut Rng, modality: Modality, len: usize, dim: usize) -> FeatureSequence {
    FeatureSequence::new(modality, Matrix::from_fn(len, dim, |_, _| f64::from(rng.normal() as f32))).unwrap()
}

fn response(rng: &mut Rng, dims: &ModalityDims, q: u8) -> ResponseFeatures {
    let (lv, la) = (1 + rng.below(8), 1 + rng.below(8));
    ResponseFeatures {
        question_index: q,
        video: sequence(rng, Modality::Video, lv, dims.video),
        audio: sequence(rng, Modality::Audio, la, dims.audio),
        text: sequence(rng, Modality::Text, 1, dims.text),
    }
}

const TINY_DIMS: ModalityDims = ModalityDims { video: 4, audio: 3, text: 5 };

pub fn duplication_invariant(cases: u64) -> bool {
    (0..cases).all(|seed| {
        let mut rng = Rng::new(5000 + seed);
        let cfg = tiny_cfg(seed);
        let model = Model::init(&TINY_DIMS, &cfg).unwrap();
        let one = response(&mut rng, &TINY_DIMS, 1);
        let single = SubjectRecord {
            subject_id: "a".into(),
            split: Split::Test,
            responses: vec![one.clone()],
            label: None,
        };
        let six = SubjectRecord {
            responses: (1..=6).map(|q| ResponseFeatures { question_index: q, ..one.clone() }).collect(),
            ..single.clone()
        };
        let cfg = TrainConfig { clamp_at_inference: false, ..cfg };
        predict_subject(&single, &model, &cfg).unwrap() == predict_subject(&six, &model, &cfg).unwrap()
    })
}

pub fn permutation_invariant(cases: u64) -> bool {
    (0..cases).all(|seed| {
        let mut rng = Rng::new(6000 + seed);
        let cfg = TrainConfig { clamp_at_inference: false, ..tiny_cfg(seed) };
        let model = Model::init(&TINY_DIMS, &cfg).unwrap();
        let canonical = SubjectRecord {
            subject_id: "a".into(),
            split: Split::Test,
            responses: (1..=6).map(|q| response(&mut rng, &TINY_DIMS, q)).collect(),
            label: None,
        };
        let mut shuffled = canonical.clone();
        rng.shuffle(&mut shuffled.responses);
        let raw = predict_subject(&shuffled, &model, &cfg).unwrap();
        shuffled.canonicalize();
        let want = predict_subject(&canonical, &model, &cfg).unwrap();
        let close = (0..SCORE_DIMS).all(|d| scaled_diff(raw[d], want[d]) <= 1e-12);
        predict_subject(&shuffled, &model, &cfg).unwrap() == want && close
    })
}

/// Max against a double loop; mean against an exact rational reference on
/// dyadic data (`k / 2^20`, where the integer sum is exact and a single
/// division rounds correctly), and against constants.
pub fn pooling_brute_force(cases: u64) -> bool {
    (0..cases).all(|seed| {
        let mut rng = Rng::new(7000 + seed);
        let (n, d) = (1 + rng.below(50), 1 + rng.below(16));
        let ints: Vec<i64> = (0..n * d).map(|_| rng.below(1 << 31) as i64 - (1 << 30)).collect();
        let scale = 2f64.powi(-20);
        let x = Matrix::new(n, d, ints.iter().map(|&k| k as f64 * scale).collect()).unwrap();
        let max = pool_max(&x).unwrap();
        let mean = pool_mean(&x).unwrap();
        let mut ok = true;
        for c in 0..d {
            let mut m = f64::NEG_INFINITY;
            let mut s: i64 = 0;
            for r in 0..n {
                m = m.max(x.get(r, c));
                s += ints[r * d + c];
            }
            ok &= max[c] == m;
            ok &= mean[c] == (s as f64 / n as f64) * scale;
        }
        let v = rng.normal();
        let constant = Matrix::filled(n, d, v);
        ok && pool_mean(&constant).unwrap().iter().all(|&m| m == v) && pool_max(&constant).unwrap().iter().all(|&m| m == v)
    })
}

pub fn max_dominates_mean(cases: u64) -> bool {
    (0..cases).all(|seed| {
        let mut rng = Rng::new(8000 + seed);
        let (n, d) = (1 + rng.below(40), 1 + rng.below(16));
        let x = Matrix::from_fn(n, d, |_, _| rng.normal() * 10f64.powi(rng.below(7) as i32 - 3));
        let max = pool_max(&x).unwrap();
        let mean = pool_mean(&x).unwrap();
        max.iter().zip(&mean).all(|(a, b)| a >= b)
    })
}

struct Scalar {
    theta: [f64; 1],
    grad: [f64; 1],
}

impl Parameterized for Scalar {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        f(&mut self.theta, &self.grad);
    }
    fn zero_grad(&mut self) {
        self.grad = [0.0];
    }
}

/// Ten steps on `f(θ) = θ²` against the update written out by hand.
pub fn adamw_trace_worst() -> f64 {
    let cfg = AdamWConfig {
        learning_rate: 0.1,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
        weight_decay: 0.01,
    };
    let mut opt = AdamWState::new(cfg);
    let mut s = Scalar { theta: [1.0], grad: [0.0] };
    let (mut theta, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    let mut worst = 0.0f64;
    for t in 1..=10 {
        s.grad = [2.0 * s.theta[0]];
        opt.step(&mut s).unwrap();

        let g = 2.0 * theta;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let m_hat = m / (1.0 - 0.9f64.powi(t));
        let v_hat = v / (1.0 - 0.999f64.powi(t));
        theta -= 0.1 * (m_hat / (v_hat.sqrt() + 1e-8) + 0.01 * theta);
        worst = worst.max((s.theta[0] - theta).abs());
    }
    worst
}

/// `θ` after each of 100 steps on `θ²` from 1 (lr 0.015, no decay).
pub fn adamw_convergence() -> Vec<f64> {
    let mut opt = AdamWState::new(AdamWConfig {
        learning_rate: 0.015,
        weight_decay: 0.0,
        ..Default::default()
    });
    let mut s = Scalar { theta: [1.0], grad: [0.0] };
    (0..100)
        .map(|_| {
            s.grad = [2.0 * s.theta[0]];
            opt.step(&mut s).unwrap();
            s.theta[0]
        })
        .collect()
}

fn pooled(rng: &mut Rng, dims: &ModalityDims, id: &str) -> PooledSubject {
    PooledSubject {
        subject_id: id.into(),
        responses: (0..6)
            .map(|_| PooledResponse {
                video: (0..dims.video).map(|_| rng.normal()).collect(),
                audio: (0..dims.audio).map(|_| rng.normal()).collect(),
                text: (0..dims.text).map(|_| rng.normal()).collect(),
            })
            .collect(),
        label: Some(ScoreVector::from_slice(&(0..SCORE_DIMS).map(|_| 1.0 + 4.0 * rng.uniform()).collect::<Vec<_>>()).unwrap()),
    }
}

/// Model batch loss against `(1/(n·5)) Σ_i Σ_d (y − ŷ)²` written as loops.
pub fn batch_loss_worst(cases: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..cases {
        let mut rng = Rng::new(9000 + seed);
        let model = Model::init(&TINY_DIMS, &tiny_cfg(seed)).unwrap();
        let n = 1 + rng.below(6);
        let subjects: Vec<PooledSubject> = (0..n).map(|i| pooled(&mut rng, &TINY_DIMS, &i.to_string())).collect();
        let refs: Vec<&PooledSubject> = subjects.iter().collect();
        let (preds, _) = model.forward(&refs, &DropoutPlan::NONE, &Rng::new(0), false).unwrap();
        let p = Matrix::from_fn(n, SCORE_DIMS, |r, c| preds[r][c]);
        let y = Matrix::from_fn(n, SCORE_DIMS, |r, c| subjects[r].label.unwrap()[c]);
        let (loss, _) = mse_loss(&p, &y).unwrap();
        let mut acc = 0.0;
        for i in 0..n {
            for d in 0..SCORE_DIMS {
                let e = subjects[i].label.unwrap()[d] - preds[i][d];
                acc += e * e;
            }
        }
        worst = worst.max(scaled_diff(loss, acc / (n * SCORE_DIMS) as f64));
    }
    worst
}

/// One AdamW step at lr 1e-6 with dropout off lowers the loss on the same batch.
pub fn small_step_decreases(cases: u64) -> bool {
    (0..cases).all(|seed| {
        let mut rng = Rng::new(10_000 + seed);
        let cfg = TrainConfig {
            learning_rate: 1e-6,
            weight_decay: 0.0,
            ..tiny_cfg(seed)
        }
        .without_dropout();
        let mut model = Model::init(&TINY_DIMS, &cfg).unwrap();
        let subjects: Vec<PooledSubject> = (0..4).map(|i| pooled(&mut rng, &TINY_DIMS, &i.to_string())).collect();
        let refs: Vec<&PooledSubject> = subjects.iter().collect();
        let y = Matrix::from_fn(4, SCORE_DIMS, |r, c| subjects[r].label.unwrap()[c]);
        let loss_of = |m: &Model| {
            let (p, cache) = m.forward(&refs, &DropoutPlan::NONE, &Rng::new(0), true).unwrap();
            let (l, g) = mse_loss(&Matrix::from_fn(4, SCORE_DIMS, |r, c| p[r][c]), &y).unwrap();
            (l, g, cache)
        };
        let (before, g, cache) = loss_of(&model);
        let gp: Vec<ScoreVector> = (0..4).map(|r| ScoreVector::from_slice(g.row(r)).unwrap()).collect();
        model.zero_grad();
        model.backward(&cache, &gp).unwrap();
        assert!(collect_grads(&mut model).iter().flatten().any(|&v| v != 0.0));
        AdamWState::new(cfg.adamw()).step(&mut model).unwrap();
        let (after, _, _) = loss_of(&model);
        after < before
    })
}
