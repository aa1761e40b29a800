//! Hand-computable forward/backward contracts for every layer kind.

use nn_core::{
    layer_backward, layer_forward, ConvSpec, Dims4, LayerKind, LayerParams, Mode, PoolSpec,
    Tensor4,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

fn plain_conv_params(kh: usize, kw: usize, cin: usize, cout: usize, w: f64) -> LayerParams<f64> {
    LayerParams {
        weights: Tensor4::from_vec(Dims4::new(kh, kw, cin, cout), vec![w; kh * kw * cin * cout])
            .unwrap(),
        bias: vec![0.0; cout],
        batchnorm: None,
    }
}

#[test]
fn identity_kernel_conv_copies_input() {
    let kind = LayerKind::Conv(ConvSpec::plain(1, 1, 1, 1, 1));
    let params = plain_conv_params(1, 1, 1, 1, 1.0);
    let data: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 2.0).collect();
    let input = Tensor4::from_vec(Dims4::new(1, 4, 3, 1), data.clone()).unwrap();
    let (out, _) = layer_forward(&kind, Some(&params), &input, Mode::Eval, &mut rng()).unwrap();
    assert_eq!(out.dims(), input.dims());
    assert_eq!(out.data(), &data[..]);
}

#[test]
fn avgpool_2x2_stride_2_is_the_window_mean() {
    let kind = LayerKind::AvgPool(PoolSpec {
        pool_h: 2,
        pool_w: 2,
        stride_h: 2,
        stride_w: 2,
    });
    let input =
        Tensor4::from_vec(Dims4::new(1, 2, 2, 1), vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
    let (out, _) = layer_forward(&kind, None, &input, Mode::Eval, &mut rng()).unwrap();
    assert_eq!(out.dims(), Dims4::new(1, 1, 1, 1));
    assert_eq!(out.data(), &[2.5]);
}

#[test]
fn conv_5x5_x20_output_dims_on_60x30() {
    let kind = LayerKind::Conv(ConvSpec::plain(5, 5, 20, 1, 1));
    let mut r = rng();
    let params = LayerParams::<f32>::init(
        &ConvSpec::plain(5, 5, 20, 1, 1),
        1,
        &mut r,
    );
    let input = Tensor4::<f32>::zeros(Dims4::new(1, 60, 30, 1));
    let (out, _) = layer_forward(&kind, Some(&params), &input, Mode::Eval, &mut r).unwrap();
    assert_eq!(out.dims(), Dims4::new(1, 56, 26, 20));
}

#[test]
fn maxpool_on_monotone_ramp_picks_bottom_right_corner() {
    // Values strictly increase in both axes, so the max of every window sits
    // at its bottom-right corner.
    let (h, w) = (9, 7);
    let data: Vec<f64> = (0..h * w).map(|i| (i / w) as f64 * 10.0 + (i % w) as f64).collect();
    let input = Tensor4::from_vec(Dims4::new(1, h, w, 1), data.clone()).unwrap();
    let kind = LayerKind::MaxPool(PoolSpec {
        pool_h: 3,
        pool_w: 3,
        stride_h: 2,
        stride_w: 2,
    });
    let (out, _) = layer_forward(&kind, None, &input, Mode::Eval, &mut rng()).unwrap();
    let od = out.dims();
    assert_eq!((od.height, od.width), (4, 3));
    for oy in 0..od.height {
        for ox in 0..od.width {
            let corner = data[(oy * 2 + 2) * w + (ox * 2 + 2)];
            assert_eq!(out.at(0, oy, ox, 0), corner);
        }
    }
}

#[test]
fn relu_backward_is_identity_on_positive_inputs() {
    let input = Tensor4::from_vec(Dims4::new(1, 2, 2, 1), vec![0.5f64, 1.0, 2.0, 3.0]).unwrap();
    let (_, cache) = layer_forward(&LayerKind::Relu, None, &input, Mode::Eval, &mut rng()).unwrap();
    let grad_out =
        Tensor4::from_vec(Dims4::new(1, 2, 2, 1), vec![0.1f64, -0.2, 0.3, -0.4]).unwrap();
    let (grad_in, grad_params) = layer_backward(&LayerKind::Relu, None, &cache, &grad_out).unwrap();
    assert!(grad_params.is_none());
    assert_eq!(grad_in.data(), grad_out.data());
}

#[test]
fn avgpool_backward_spreads_quarter_gradient() {
    let kind = LayerKind::AvgPool(PoolSpec {
        pool_h: 2,
        pool_w: 2,
        stride_h: 2,
        stride_w: 2,
    });
    let input = Tensor4::<f64>::zeros(Dims4::new(1, 2, 2, 1));
    let (_, cache) = layer_forward(&kind, None, &input, Mode::Eval, &mut rng()).unwrap();
    let grad_out = Tensor4::from_vec(Dims4::new(1, 1, 1, 1), vec![1.0f64]).unwrap();
    let (grad_in, _) = layer_backward(&kind, None, &cache, &grad_out).unwrap();
    assert_eq!(grad_in.data(), &[0.25, 0.25, 0.25, 0.25]);
}

#[test]
fn shape_mismatch_error_names_layer_and_dimension() {
    let kind = LayerKind::Conv(ConvSpec::plain(5, 5, 1, 1, 1));
    let mut r = rng();
    let params = LayerParams::<f32>::init(&ConvSpec::plain(5, 5, 1, 1, 1), 3, &mut r);
    let input = Tensor4::<f32>::zeros(Dims4::new(1, 8, 8, 1));
    let err = layer_forward(&kind, Some(&params), &input, Mode::Eval, &mut r).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("conv"), "{msg}");
    assert!(msg.contains("channels"), "{msg}");

    // spatial underflow also points at the axis
    let params1 = LayerParams::<f32>::init(&ConvSpec::plain(5, 5, 1, 1, 1), 1, &mut r);
    let small = Tensor4::<f32>::zeros(Dims4::new(1, 4, 8, 1));
    let err = layer_forward(&kind, Some(&params1), &small, Mode::Eval, &mut r).unwrap_err();
    assert!(err.to_string().contains("height"), "{err}");
}

#[test]
fn non_finite_input_rejected() {
    let mut input = Tensor4::<f32>::zeros(Dims4::new(1, 2, 2, 1));
    input.data_mut()[2] = f32::INFINITY;
    let err = layer_forward(&LayerKind::Relu, None, &input, Mode::Eval, &mut rng()).unwrap_err();
    assert!(err.to_string().contains("non-finite"));
}

#[test]
fn dropout_eval_is_identity_and_train_zeroes_at_rate() {
    let spec = ConvSpec {
        kernel_h: 1,
        kernel_w: 1,
        out_channels: 1,
        stride_h: 1,
        stride_w: 1,
        use_batchnorm: false,
        dropout_rate: Some(0.3),
    };
    let kind = LayerKind::Conv(spec);
    let params = plain_conv_params(1, 1, 1, 1, 1.0);
    let n = 200 * 100;
    let input = Tensor4::from_vec(Dims4::new(1, 200, 100, 1), vec![1.0f64; n]).unwrap();

    let (eval_out, _) =
        layer_forward(&kind, Some(&params), &input, Mode::Eval, &mut rng()).unwrap();
    assert_eq!(eval_out.data(), input.data());

    let (train_out, _) =
        layer_forward(&kind, Some(&params), &input, Mode::Train, &mut rng()).unwrap();
    let zeroed = train_out.data().iter().filter(|&&v| v == 0.0).count() as f64;
    let rate = zeroed / n as f64;
    // Binomial(n, 0.3): sigma = sqrt(p(1-p)/n)
    let sigma = (0.3f64 * 0.7 / n as f64).sqrt();
    assert!(
        (rate - 0.3).abs() < 3.0 * sigma,
        "dropout rate {rate} out of 3-sigma band around 0.3"
    );
    // Survivors carry the inverted-dropout scale.
    let kept = train_out.data().iter().find(|&&v| v != 0.0).unwrap();
    assert!((kept - 1.0 / 0.7).abs() < 1e-12);
}

#[test]
fn batchnorm_train_output_is_normalized_per_channel() {
    let spec = ConvSpec {
        kernel_h: 1,
        kernel_w: 1,
        out_channels: 2,
        stride_h: 1,
        stride_w: 1,
        use_batchnorm: true,
        dropout_rate: None,
    };
    let kind = LayerKind::Conv(spec);
    // 1x1 conv with identity-ish weights: channel 0 copies input, channel 1 doubles it.
    let params = LayerParams {
        weights: Tensor4::from_vec(Dims4::new(1, 1, 1, 2), vec![1.0f64, 2.0]).unwrap(),
        bias: vec![0.0; 2],
        batchnorm: Some(nn_core::BatchNormParams::identity(2)),
    };
    let data: Vec<f64> = (0..64).map(|i| (i as f64 * 0.7).sin() * 3.0 + 1.0).collect();
    let input = Tensor4::from_vec(Dims4::new(2, 4, 8, 1), data).unwrap();
    let (out, _) = layer_forward(&kind, Some(&params), &input, Mode::Train, &mut rng()).unwrap();

    for c in 0..2 {
        let vals: Vec<f64> = out
            .data()
            .chunks_exact(2)
            .map(|chunk| chunk[c])
            .collect();
        let n = vals.len() as f64;
        let mean: f64 = vals.iter().sum::<f64>() / n;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-6, "channel {c} mean {mean}");
        assert!((var - 1.0).abs() < 1e-4, "channel {c} var {var}");
    }
}

#[test]
fn eval_mode_is_deterministic_across_runs() {
    let spec = ConvSpec {
        kernel_h: 3,
        kernel_w: 3,
        out_channels: 4,
        stride_h: 1,
        stride_w: 1,
        use_batchnorm: true,
        dropout_rate: Some(0.5),
    };
    let kind = LayerKind::Conv(spec);
    let mut r = rng();
    let params = LayerParams::<f32>::init(&spec, 2, &mut r);
    let data: Vec<f32> = (0..2 * 6 * 5 * 2).map(|i| (i as f32 * 0.13).cos()).collect();
    let input = Tensor4::from_vec(Dims4::new(2, 6, 5, 2), data).unwrap();

    let (a, _) =
        layer_forward(&kind, Some(&params), &input, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
    let (b, _) =
        layer_forward(&kind, Some(&params), &input, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(99))
            .unwrap();
    assert_eq!(a.data(), b.data(), "eval must ignore the generator entirely");
}
