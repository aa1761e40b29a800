//! Analytic backward passes vs central finite differences, in f64.

use nn_core::{
    gradient_check, ConvSpec, Dims4, LayerCheck, LayerKind, LayerParams, LstmCheck, LstmParams,
    Mode, PoolSpec, SoftmaxCeCheck, Tensor4, FD_STEP,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Distinct values with gaps far above the FD step, so max-pool argmaxes and
/// ReLU signs cannot flip inside the +-h probe.
fn lattice_input(dims: Dims4, seed: u64) -> Tensor4<f64> {
    let n = dims.count();
    let mut values: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * 0.01 + 0.005).collect();
    values.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Tensor4::from_vec(dims, values).unwrap()
}

fn checked_layer(kind: LayerKind, in_channels: usize, dims: Dims4, mode: Mode, seed: u64) -> LayerCheck {
    let params = match kind {
        LayerKind::Conv(spec) => Some(LayerParams::<f64>::init(
            &spec,
            in_channels,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )),
        _ => None,
    };
    LayerCheck::new(kind, params, lattice_input(dims, seed ^ 0xabc), mode, seed)
}

#[test]
fn conv_gradients_match_finite_differences() {
    // 3x3 kernel, 2 in / 2 out channels on a 6x5 input.
    let kind = LayerKind::Conv(ConvSpec::plain(3, 3, 2, 1, 1));
    let mut check = checked_layer(kind, 2, Dims4::new(2, 6, 5, 2), Mode::Train, 7);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 7);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn conv_with_batchnorm_gradients_match() {
    let spec = ConvSpec {
        kernel_h: 3,
        kernel_w: 3,
        out_channels: 3,
        stride_h: 1,
        stride_w: 1,
        use_batchnorm: true,
        dropout_rate: None,
    };
    let mut check = checked_layer(LayerKind::Conv(spec), 2, Dims4::new(3, 6, 5, 2), Mode::Train, 21);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 21);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn conv_with_batchnorm_eval_mode_gradients_match() {
    let spec = ConvSpec {
        kernel_h: 2,
        kernel_w: 2,
        out_channels: 2,
        stride_h: 1,
        stride_w: 1,
        use_batchnorm: true,
        dropout_rate: None,
    };
    let mut check = checked_layer(LayerKind::Conv(spec), 1, Dims4::new(2, 4, 4, 1), Mode::Eval, 33);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 33);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn strided_conv_gradients_match() {
    let kind = LayerKind::Conv(ConvSpec::plain(3, 2, 2, 2, 3));
    let mut check = checked_layer(kind, 2, Dims4::new(2, 9, 8, 2), Mode::Train, 15);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 15);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn dropout_eval_gradients_match() {
    let spec = ConvSpec {
        kernel_h: 2,
        kernel_w: 2,
        out_channels: 2,
        stride_h: 1,
        stride_w: 1,
        use_batchnorm: false,
        dropout_rate: Some(0.4),
    };
    let mut check = checked_layer(LayerKind::Conv(spec), 2, Dims4::new(2, 5, 4, 2), Mode::Eval, 40);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 40);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn dropout_train_gradients_match_under_fixed_mask() {
    let spec = ConvSpec {
        kernel_h: 2,
        kernel_w: 2,
        out_channels: 2,
        stride_h: 1,
        stride_w: 1,
        use_batchnorm: false,
        dropout_rate: Some(0.4),
    };
    let mut check = checked_layer(LayerKind::Conv(spec), 2, Dims4::new(2, 5, 4, 2), Mode::Train, 41);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 41);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn relu_gradients_match() {
    let mut check = checked_layer(LayerKind::Relu, 0, Dims4::new(2, 5, 4, 3), Mode::Eval, 50);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 50);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn maxpool_gradients_match() {
    let kind = LayerKind::MaxPool(PoolSpec {
        pool_h: 3,
        pool_w: 2,
        stride_h: 2,
        stride_w: 2,
    });
    let mut check = checked_layer(kind, 0, Dims4::new(2, 7, 6, 2), Mode::Eval, 60);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 60);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn avgpool_gradients_match() {
    let kind = LayerKind::AvgPool(PoolSpec {
        pool_h: 2,
        pool_w: 2,
        stride_h: 1,
        stride_w: 2,
    });
    let mut check = checked_layer(kind, 0, Dims4::new(2, 5, 6, 2), Mode::Eval, 61);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 61);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn softmax_layer_gradients_match() {
    let mut check = checked_layer(LayerKind::Softmax, 0, Dims4::new(3, 1, 1, 9), Mode::Eval, 70);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 70);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn softmax_cross_entropy_gradient_matches() {
    let logits = lattice_input(Dims4::new(4, 1, 1, 11), 80);
    let mut check = SoftmaxCeCheck {
        logits,
        labels: vec![0, 3, 7, 10],
    };
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 80);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn lstm_bptt_gradients_match() {
    // T=3, input 4, hidden 5.
    let params = LstmParams::<f64>::init(4, 5, 3, &mut ChaCha8Rng::seed_from_u64(90));
    let window: Vec<f64> = (0..12).map(|i| ((i * 37 % 24) as f64 - 12.0) * 0.08).collect();
    let mut check = LstmCheck::new(params, window, 90);
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 90);
    assert!(report.pass, "max rel err {}", report.max_relative_error);
}

#[test]
fn linear_conv_check_is_exact_to_rounding() {
    // A 1x1 conv is linear, so central differences are exact up to f64 noise.
    let kind = LayerKind::Conv(ConvSpec::plain(1, 1, 1, 1, 1));
    let mut check = checked_layer(kind, 1, Dims4::new(1, 4, 4, 1), Mode::Eval, 99);
    let report = gradient_check(&mut check, 1e-8, FD_STEP, None, 99);
    assert!(
        report.pass,
        "linear map should check below 1e-8, got {}",
        report.max_relative_error
    );
}

#[test]
fn corrupted_backward_fails_the_check() {
    let kind = LayerKind::Conv(ConvSpec::plain(3, 3, 2, 1, 1));
    let mut check = checked_layer(kind, 2, Dims4::new(2, 6, 5, 2), Mode::Train, 7);
    check.grad_scale = 2.0; // simulate a backward implementation off by x2
    let report = gradient_check(&mut check, 1e-4, FD_STEP, None, 7);
    assert!(!report.pass, "scaled gradients must fail the check");
    assert!(report.max_relative_error > 0.1);
}
