//! Finite-difference checks; each returns the worst relative error seen
//! over `instances` random problems.

use interview_core::ensemble::{head_forward, head_backward, RegressionHead, ScoreVector, SCORE_DIMS};
use interview_core::model::{DropoutPlan, Model, PooledSubject};
use interview_core::mscmlp::{mscmlp_backward, mscmlp_forward, FusionDropout, FusionInput, MscMlpParams};
use interview_core::numkernel::{dropout, gelu_backward, gelu_forward, mse_loss, LinearParams, Matrix, Parameterized, Rng};
use interview_core::pooling::{ModalityDims, PooledResponse};
use interview_core::TrainConfig;

use super::{collect_grads, numeric_grad, numeric_param_grads, project, random_matrix, rel_err};

fn worst(errs: impl IntoIterator<Item = f64>) -> f64 {
    errs.into_iter().fold(0.0, f64::max)
}

fn dim(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

pub fn linear(instances: u64) -> f64 {
    worst((0..instances).flat_map(|seed| {
        let mut rng = Rng::new(seed);
        let (b, i, o) = (dim(&mut rng, 1, 4), dim(&mut rng, 1, 5), dim(&mut rng, 1, 5));
        let mut p = LinearParams::new(random_matrix(&mut rng, i, o), Some((0..o).map(|_| rng.normal()).collect())).unwrap();
        let x = random_matrix(&mut rng, b, i);
        let r = random_matrix(&mut rng, b, o);
        let gx = p.backward(&x, &r, true).unwrap().unwrap();
        let analytic = collect_grads(&mut p);
        let loss = |p: &LinearParams| project(&p.forward(&x).unwrap(), &r);
        let numeric = numeric_param_grads(&p, loss);
        let nx = numeric_grad(x.as_slice(), |v| project(&p.forward(&Matrix::new(b, i, v.to_vec()).unwrap()).unwrap(), &r));
        let mut errs = vec![rel_err(gx.as_slice(), &nx)];
        errs.extend(analytic.iter().zip(&numeric).map(|(a, n)| rel_err(a, n)));
        errs
    }))
}

pub fn gelu(instances: u64) -> f64 {
    worst((0..instances).map(|seed| {
        let mut rng = Rng::new(seed);
        let x = Matrix::from_fn(3, 4, |_, _| 3.0 * rng.normal());
        let r = random_matrix(&mut rng, 3, 4);
        let g = gelu_backward(&x, &r).unwrap();
        let n = numeric_grad(x.as_slice(), |v| project(&gelu_forward(&Matrix::new(3, 4, v.to_vec()).unwrap()), &r));
        rel_err(g.as_slice(), &n)
    }))
}

pub fn dropout_frozen(instances: u64) -> f64 {
    worst((0..instances).map(|seed| {
        let mut rng = Rng::new(seed);
        let x = random_matrix(&mut rng, 4, 5);
        let r = random_matrix(&mut rng, 4, 5);
        let (_, mask) = dropout(&x, 0.3, &mut rng.derive(&[1]), true).unwrap();
        let g = mask.backward(&r);
        let n = numeric_grad(x.as_slice(), |v| project(&mask.apply(&Matrix::new(4, 5, v.to_vec()).unwrap()), &r));
        rel_err(g.as_slice(), &n)
    }))
}

pub fn mse(instances: u64) -> f64 {
    worst((0..instances).map(|seed| {
        let mut rng = Rng::new(seed);
        let n = dim(&mut rng, 1, 8);
        let pred = random_matrix(&mut rng, n, SCORE_DIMS);
        let label = random_matrix(&mut rng, n, SCORE_DIMS);
        let (_, g) = mse_loss(&pred, &label).unwrap();
        let num = numeric_grad(pred.as_slice(), |v| {
            mse_loss(&Matrix::new(n, SCORE_DIMS, v.to_vec()).unwrap(), &label).unwrap().0
        });
        rel_err(g.as_slice(), &num)
    }))
}

fn randomize_biases(p: &mut LinearParams, rng: &mut Rng) {
    if let Some(b) = p.bias.as_mut() {
        for v in b {
            *v = 0.5 * rng.normal();
        }
    }
}

/// Training mode with every fusion dropout active; masks are frozen because
/// each forward call re-derives them from the same stream.
pub fn mscmlp(instances: u64) -> f64 {
    worst((0..instances).flat_map(|seed| {
        let mut rng = Rng::new(seed);
        let dims = ModalityDims {
            video: dim(&mut rng, 2, 6),
            audio: dim(&mut rng, 2, 6),
            text: dim(&mut rng, 2, 8),
        };
        let (c, s, b) = (dim(&mut rng, 1, 4), dim(&mut rng, 1, 5), dim(&mut rng, 1, 3));
        let mut p = MscMlpParams::init(&dims, c, s, &mut rng);
        randomize_biases(&mut p.keys_audio, &mut rng);
        randomize_biases(&mut p.keys_video, &mut rng);
        randomize_biases(&mut p.keys_text, &mut rng);
        let a = random_matrix(&mut rng, b, dims.audio);
        let v = random_matrix(&mut rng, b, dims.video);
        let t = random_matrix(&mut rng, b, dims.text);
        let r = random_matrix(&mut rng, b, 3 * s);
        let drop = FusionDropout::default();
        let stream = rng.derive(&[99]);
        let fwd = |p: &MscMlpParams, a: &Matrix, v: &Matrix, t: &Matrix| {
            let (x, _) = mscmlp_forward(FusionInput { audio: a, video: v, text: t }, p, &drop, &stream, true).unwrap();
            project(&x, &r)
        };
        let (_, cache) = mscmlp_forward(FusionInput { audio: &a, video: &v, text: &t }, &p, &drop, &stream, true).unwrap();
        let gin = mscmlp_backward(&r, &cache, &mut p, true).unwrap().unwrap();
        let analytic = collect_grads(&mut p);
        let numeric = numeric_param_grads(&p, |q| fwd(q, &a, &v, &t));
        let na = numeric_grad(a.as_slice(), |x| fwd(&p, &Matrix::new(b, dims.audio, x.to_vec()).unwrap(), &v, &t));
        let nv = numeric_grad(v.as_slice(), |x| fwd(&p, &a, &Matrix::new(b, dims.video, x.to_vec()).unwrap(), &t));
        let nt = numeric_grad(t.as_slice(), |x| fwd(&p, &a, &v, &Matrix::new(b, dims.text, x.to_vec()).unwrap()));
        let mut errs = vec![
            rel_err(gin.audio.as_slice(), &na),
            rel_err(gin.video.as_slice(), &nv),
            rel_err(gin.text.as_slice(), &nt),
        ];
        errs.extend(analytic.iter().zip(&numeric).map(|(a, n)| rel_err(a, n)));
        errs
    }))
}

pub fn head(instances: u64) -> f64 {
    worst((0..instances).flat_map(|seed| {
        let mut rng = Rng::new(seed);
        let (b, i, h) = (dim(&mut rng, 1, 4), dim(&mut rng, 1, 6), dim(&mut rng, 1, 5));
        let mut head = RegressionHead::init(i, h, &mut rng);
        randomize_biases(&mut head.hidden, &mut rng);
        randomize_biases(&mut head.output, &mut rng);
        let x = random_matrix(&mut rng, b, i);
        let r = random_matrix(&mut rng, b, SCORE_DIMS);
        let stream = rng.derive(&[7]);
        let fwd = |head: &RegressionHead, x: &Matrix| {
            let (y, _) = head_forward(x, head, 0.2, &mut stream.clone(), true).unwrap();
            project(&y, &r)
        };
        let (_, cache) = head_forward(&x, &head, 0.2, &mut stream.clone(), true).unwrap();
        let gx = head_backward(&x, &r, &cache, &mut head, true).unwrap().unwrap();
        let analytic = collect_grads(&mut head);
        let numeric = numeric_param_grads(&head, |q| fwd(q, &x));
        let nx = numeric_grad(x.as_slice(), |v| fwd(&head, &Matrix::new(b, i, v.to_vec()).unwrap()));
        let mut errs = vec![rel_err(gx.as_slice(), &nx)];
        errs.extend(analytic.iter().zip(&numeric).map(|(a, n)| rel_err(a, n)));
        errs
    }))
}

fn random_subject(rng: &mut Rng, dims: &ModalityDims, responses: usize) -> PooledSubject {
    PooledSubject {
        subject_id: "s".into(),
        responses: (0..responses)
            .map(|_| PooledResponse {
                video: (0..dims.video).map(|_| rng.normal()).collect(),
                audio: (0..dims.audio).map(|_| rng.normal()).collect(),
                text: (0..dims.text).map(|_| rng.normal()).collect(),
            })
            .collect(),
        label: Some(ScoreVector::from_slice(&(0..SCORE_DIMS).map(|_| 1.0 + 4.0 * rng.uniform()).collect::<Vec<_>>()).unwrap()),
    }
}

/// Whole pipeline: fusion, heads, two-level mean and MSE against labels.
pub fn pipeline(instances: u64) -> f64 {
    worst((0..instances).flat_map(|seed| {
        let mut rng = Rng::new(seed);
        let dims = ModalityDims { video: 3, audio: 2, text: 4 };
        let cfg = TrainConfig {
            seed,
            head_count: dim(&mut rng, 1, 3),
            hidden_dim: 3,
            basis_count: 3,
            shared_dim: 2,
            ..Default::default()
        };
        let mut model = Model::init(&dims, &cfg).unwrap();
        let subjects: Vec<PooledSubject> = (0..3).map(|_| {
            let r = dim(&mut rng, 1, 3);
            random_subject(&mut rng, &dims, r)
        }).collect();
        let refs: Vec<&PooledSubject> = subjects.iter().collect();
        let labels = Matrix::from_fn(3, SCORE_DIMS, |r, c| subjects[r].label.unwrap()[c]);
        let plan = DropoutPlan::from_config(&cfg);
        let stream = rng.derive(&[5]);
        let loss = |m: &Model| {
            let (p, _) = m.forward(&refs, &plan, &stream, true).unwrap();
            mse_loss(&Matrix::from_fn(3, SCORE_DIMS, |r, c| p[r][c]), &labels).unwrap().0
        };
        let (preds, cache) = model.forward(&refs, &plan, &stream, true).unwrap();
        let (_, g) = mse_loss(&Matrix::from_fn(3, SCORE_DIMS, |r, c| preds[r][c]), &labels).unwrap();
        let gp: Vec<ScoreVector> = (0..3).map(|r| ScoreVector::from_slice(g.row(r)).unwrap()).collect();
        model.zero_grad();
        model.backward(&cache, &gp).unwrap();
        let analytic = collect_grads(&mut model);
        let numeric = numeric_param_grads(&model, loss);
        analytic.iter().zip(&numeric).map(|(a, n)| rel_err(a, n)).collect::<Vec<_>>()
    }))
}
