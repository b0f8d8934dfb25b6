mod common;

use common::gradcheck;

const INSTANCES: u64 = 20;
const TOL: f64 = 1e-6;

#[test]
fn linear_matches_finite_differences() {
    let e = gradcheck::linear(INSTANCES);
    assert!(e < TOL, "{e}");
}

#[test]
fn gelu_matches_finite_differences() {
    let e = gradcheck::gelu(INSTANCES);
    assert!(e < TOL, "{e}");
}

#[test]
fn frozen_dropout_matches_finite_differences() {
    let e = gradcheck::dropout_frozen(INSTANCES);
    assert!(e < TOL, "{e}");
}

#[test]
fn mse_matches_finite_differences() {
    let e = gradcheck::mse(INSTANCES);
    assert!(e < TOL, "{e}");
}

#[test]
fn mscmlp_matches_finite_differences() {
    let e = gradcheck::mscmlp(INSTANCES);
    assert!(e < TOL, "{e}");
}

#[test]
fn head_matches_finite_differences() {
    let e = gradcheck::head(INSTANCES);
    assert!(e < TOL, "{e}");
}

#[test]
fn full_pipeline_matches_finite_differences() {
    let e = gradcheck::pipeline(INSTANCES);
    assert!(e < TOL, "{e}");
}
