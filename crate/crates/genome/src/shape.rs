//! Shape inference and parameter accounting under valid convolution.

use nn_core::{conv_out_dim, Dims4, LayerKind, PoolSpec};

use crate::error::{GenomeError, Result};
use crate::genes::{ActivationGene, Genome};

/// (height, width, channels) of the single-sample input plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputDims {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl InputDims {
    pub const GLYPH: InputDims = InputDims {
        height: 60,
        width: 30,
        channels: 1,
    };

    pub fn to_dims4(self, batch: usize) -> Dims4 {
        Dims4::new(batch, self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

/// Per-stage output dims: for each searched layer, after the conv and after
/// the activation; then the head stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeTrace {
    pub input: InputDims,
    /// (after_conv, after_activation) per searched layer.
    pub layers: Vec<(LayerShape, LayerShape)>,
    /// Dims entering the terminal 1x1 classifier (1x1 spatial).
    pub head_input: LayerShape,
    pub classes: usize,
}

impl ShapeTrace {
    pub fn final_shape(&self) -> LayerShape {
        LayerShape {
            height: 1,
            width: 1,
            channels: self.classes,
        }
    }
}

fn step(
    layer: usize,
    stage: &'static str,
    shape: LayerShape,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    channels: usize,
) -> Result<LayerShape> {
    let height = conv_out_dim(shape.height, kh, sh).ok_or(GenomeError::Underflow {
        layer,
        stage,
        axis: "height",
        input: shape.height,
        kernel: kh,
    })?;
    let width = conv_out_dim(shape.width, kw, sw).ok_or(GenomeError::Underflow {
        layer,
        stage,
        axis: "width",
        input: shape.width,
        kernel: kw,
    })?;
    Ok(LayerShape {
        height,
        width,
        channels,
    })
}

/// Walks the genome over `input`, recording every stage's output dims.
/// Errors pinpoint the first layer whose spatial dims underflow.
pub fn shape_infer(genome: &Genome, input: InputDims, classes: usize) -> Result<ShapeTrace> {
    genome.validate()?;
    let mut shape = LayerShape {
        height: input.height,
        width: input.width,
        channels: input.channels,
    };
    let mut layers = Vec::with_capacity(genome.len());
    for (i, gene) in genome.layers.iter().enumerate() {
        let c = &gene.conv;
        let after_conv = step(
            i,
            "conv",
            shape,
            c.kernel_h,
            c.kernel_w,
            c.stride_h,
            c.stride_w,
            c.out_channels,
        )?;
        let after_act = match gene.activation {
            ActivationGene::Relu => after_conv,
            ActivationGene::MaxPool {
                pool_h,
                pool_w,
                stride_h,
                stride_w,
            }
            | ActivationGene::AvgPool {
                pool_h,
                pool_w,
                stride_h,
                stride_w,
            } => step(i, "pool", after_conv, pool_h, pool_w, stride_h, stride_w, after_conv.channels)?,
        };
        layers.push((after_conv, after_act));
        shape = after_act;
    }

    // The head reduces any remaining spatial extent to 1x1 by global
    // average pooling before the fixed 1x1 classifier.
    let head_input = LayerShape {
        height: 1,
        width: 1,
        channels: shape.channels,
    };
    Ok(ShapeTrace {
        input,
        layers,
        head_input,
        classes,
    })
}

/// Lowers a genome to the concrete layer stack, terminal head included.
pub fn lower(genome: &Genome, input: InputDims, classes: usize) -> Result<Vec<LayerKind>> {
    let trace = shape_infer(genome, input, classes)?;
    let mut kinds: Vec<LayerKind> = Vec::with_capacity(genome.len() * 2 + 3);
    for gene in &genome.layers {
        kinds.push(LayerKind::Conv(gene.conv.to_spec()));
        kinds.push(gene.activation.to_kind());
    }
    let last = trace
        .layers
        .last()
        .map(|(_, after)| *after)
        .unwrap_or(LayerShape {
            height: input.height,
            width: input.width,
            channels: input.channels,
        });
    if last.height > 1 || last.width > 1 {
        kinds.push(LayerKind::AvgPool(PoolSpec {
            pool_h: last.height,
            pool_w: last.width,
            stride_h: 1,
            stride_w: 1,
        }));
    }
    kinds.push(LayerKind::Conv(nn_core::ConvSpec::plain(1, 1, classes, 1, 1)));
    kinds.push(LayerKind::Softmax);
    Ok(kinds)
}

/// Learnable parameter count: per conv, kh*kw*cin*cout + cout, plus 2*cout
/// when batch-normalized (scale and shift), plus the terminal classifier.
pub fn param_count(genome: &Genome, input: InputDims, classes: usize) -> Result<usize> {
    let trace = shape_infer(genome, input, classes)?;
    let mut cin = input.channels;
    let mut total = 0usize;
    for (gene, _) in genome.layers.iter().zip(&trace.layers) {
        total += conv_gene_params(gene.conv.kernel_h, gene.conv.kernel_w, cin, gene.conv.out_channels, gene.conv.batchnorm);
        cin = gene.conv.out_channels;
    }
    total += conv_gene_params(1, 1, trace.head_input.channels, classes, false);
    Ok(total)
}

/// Parameters of a single convolution: weights + bias (+ scale/shift).
pub fn conv_gene_params(kh: usize, kw: usize, cin: usize, cout: usize, batchnorm: bool) -> usize {
    kh * kw * cin * cout + cout + if batchnorm { 2 * cout } else { 0 }
}
