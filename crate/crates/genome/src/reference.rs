//! The three fixed reference architectures used as baselines and search
//! sanity anchors. All of them pass shape inference on the 60x30 glyph input.

use std::collections::BTreeMap;

use crate::genes::{ActivationGene, ConvGene, Genome, LayerGene};

/// LeNet-flavored baseline: three conv+pool pairs and a conv+relu before the
/// fixed head.
pub fn snn() -> Genome {
    Genome::new(vec![
        LayerGene {
            conv: ConvGene::plain(5, 5, 20),
            activation: ActivationGene::max_pool(2, 2, 2, 2),
        },
        LayerGene {
            conv: ConvGene::plain(5, 5, 50),
            activation: ActivationGene::max_pool(2, 2, 2, 2),
        },
        LayerGene {
            conv: ConvGene::plain(4, 4, 500),
            activation: ActivationGene::max_pool(2, 1, 4, 1),
        },
        LayerGene {
            conv: ConvGene::plain(2, 1, 500),
            activation: ActivationGene::Relu,
        },
    ])
}

/// AlexNet-flavored deep baseline, adapted to the 60x30 input: kernels and
/// pools are clamped to the spatial extent that actually remains at their
/// depth (the original extents assume a much larger image), and each block
/// keeps a single activation.
pub fn alx() -> Genome {
    Genome::new(vec![
        LayerGene {
            conv: ConvGene::plain(11, 11, 96).with_stride(2, 1).with_batchnorm(),
            activation: ActivationGene::max_pool(3, 3, 2, 2),
        },
        LayerGene {
            conv: ConvGene::plain(5, 5, 256).with_batchnorm(),
            activation: ActivationGene::max_pool(3, 3, 1, 1),
        },
        LayerGene {
            conv: ConvGene::plain(3, 3, 384).with_batchnorm(),
            activation: ActivationGene::Relu,
        },
        LayerGene {
            conv: ConvGene::plain(3, 1, 192).with_batchnorm(),
            activation: ActivationGene::Relu,
        },
        LayerGene {
            conv: ConvGene::plain(2, 1, 256).with_batchnorm(),
            activation: ActivationGene::max_pool(1, 1, 1, 1),
        },
        LayerGene {
            conv: ConvGene::plain(1, 1, 4096).with_batchnorm(),
            activation: ActivationGene::Relu,
        },
        LayerGene {
            conv: ConvGene::plain(1, 1, 4096).with_batchnorm(),
            activation: ActivationGene::Relu,
        },
    ])
}

/// The search-found architecture: three aggressive conv+pool stages whose
/// final 14x9 kernel collapses the remaining extent to 1x1 in one step.
pub fn automl() -> Genome {
    Genome::new(vec![
        LayerGene {
            conv: ConvGene::plain(7, 7, 19).with_stride(1, 2).with_dropout(0.5),
            activation: ActivationGene::avg_pool(4, 2, 1, 1),
        },
        LayerGene {
            conv: ConvGene::plain(7, 1, 83),
            activation: ActivationGene::max_pool(4, 3, 3, 1),
        },
        LayerGene {
            conv: ConvGene::plain(14, 9, 987).with_stride(14, 9),
            activation: ActivationGene::Relu,
        },
    ])
}

pub fn reference_genomes() -> BTreeMap<&'static str, Genome> {
    BTreeMap::from([("SNN", snn()), ("ALX", alx()), ("AUTOML", automl())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genes::DEFAULT_CLASSES;
    use crate::shape::{param_count, shape_infer, InputDims, LayerShape};

    #[test]
    fn all_three_pass_shape_inference_on_the_glyph_input() {
        for (name, g) in reference_genomes() {
            assert!(
                shape_infer(&g, InputDims::GLYPH, DEFAULT_CLASSES).is_ok(),
                "{name} failed shape inference"
            );
        }
    }

    #[test]
    fn automl_first_layer_matches_its_table_row() {
        let g = automl();
        let first = &g.layers[0];
        assert_eq!((first.conv.kernel_h, first.conv.kernel_w), (7, 7));
        assert_eq!(first.conv.out_channels, 19);
        assert_eq!((first.conv.stride_h, first.conv.stride_w), (1, 2));
        assert!(first.conv.dropout.is_some());
        assert_eq!(first.activation, ActivationGene::avg_pool(4, 2, 1, 1));

        let trace = shape_infer(&g, InputDims::GLYPH, DEFAULT_CLASSES).unwrap();
        assert_eq!(
            trace.layers[0].0,
            LayerShape { height: 54, width: 12, channels: 19 }
        );
        // the deep 14x9 stride-(14,9) conv lands exactly on 1x1
        assert_eq!(
            trace.layers[2].1,
            LayerShape { height: 1, width: 1, channels: 987 }
        );
    }

    #[test]
    fn snn_has_three_conv_pool_pairs_before_the_head() {
        let g = snn();
        let pool_pairs = g.layers.iter().filter(|l| l.activation.is_pool()).count();
        assert_eq!(pool_pairs, 3);
        assert_eq!(g.len(), 4);

        let trace = shape_infer(&g, InputDims::GLYPH, DEFAULT_CLASSES).unwrap();
        assert_eq!(
            trace.layers[0],
            (
                LayerShape { height: 56, width: 26, channels: 20 },
                LayerShape { height: 28, width: 13, channels: 20 }
            )
        );
        // the stack reaches 1x1 without the global-average bridge
        assert_eq!(
            trace.layers[3].1,
            LayerShape { height: 1, width: 1, channels: 500 }
        );
    }

    #[test]
    fn snn_parameter_count_from_the_analytic_oracle() {
        // Layerwise: 520 + 25,050 + 400,500 + 500,500 + head 28,056.
        let expected = (5 * 5 * 1 * 20 + 20)
            + (5 * 5 * 20 * 50 + 50)
            + (4 * 4 * 50 * 500 + 500)
            + (2 * 1 * 500 * 500 + 500)
            + (1 * 1 * 500 * 56 + 56);
        let got = param_count(&snn(), InputDims::GLYPH, DEFAULT_CLASSES).unwrap();
        assert_eq!(got, expected);
        // ~0.95M learnable parameters
        assert!((900_000..1_010_000).contains(&got), "{got}");
    }
}
