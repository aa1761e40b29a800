//! Gene types: the unit of search is a convolution paired with an activation.

use serde::{Deserialize, Serialize};

use nn_core::{ConvSpec, LayerKind, PoolSpec};

use crate::error::{GenomeError, Result};

/// Character classes of the OCR head (27 + 27 script variants, the ligature,
/// and space).
pub const DEFAULT_CLASSES: usize = 56;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvGene {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub out_channels: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    #[serde(default)]
    pub batchnorm: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
}

impl ConvGene {
    pub fn plain(kernel_h: usize, kernel_w: usize, out_channels: usize) -> Self {
        Self {
            kernel_h,
            kernel_w,
            out_channels,
            stride_h: 1,
            stride_w: 1,
            batchnorm: false,
            dropout: None,
        }
    }

    pub fn with_stride(mut self, stride_h: usize, stride_w: usize) -> Self {
        self.stride_h = stride_h;
        self.stride_w = stride_w;
        self
    }

    pub fn with_batchnorm(mut self) -> Self {
        self.batchnorm = true;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = Some(rate);
        self
    }

    pub fn to_spec(&self) -> ConvSpec {
        ConvSpec {
            kernel_h: self.kernel_h,
            kernel_w: self.kernel_w,
            out_channels: self.out_channels,
            stride_h: self.stride_h,
            stride_w: self.stride_w,
            use_batchnorm: self.batchnorm,
            dropout_rate: self.dropout,
        }
    }

    fn validate(&self, layer: usize) -> Result<()> {
        let check = |name: &str, v: usize| {
            if v == 0 {
                Err(GenomeError::InvalidField {
                    layer,
                    field: name.to_string(),
                    message: "must be >= 1".into(),
                })
            } else {
                Ok(())
            }
        };
        check("kernel_h", self.kernel_h)?;
        check("kernel_w", self.kernel_w)?;
        check("out_channels", self.out_channels)?;
        check("stride_h", self.stride_h)?;
        check("stride_w", self.stride_w)?;
        if let Some(p) = self.dropout {
            if !(p > 0.0 && p < 1.0) {
                return Err(GenomeError::InvalidField {
                    layer,
                    field: "dropout".into(),
                    message: format!("rate {p} must lie strictly inside (0,1)"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationGene {
    Relu,
    MaxPool {
        pool_h: usize,
        pool_w: usize,
        stride_h: usize,
        stride_w: usize,
    },
    AvgPool {
        pool_h: usize,
        pool_w: usize,
        stride_h: usize,
        stride_w: usize,
    },
}

impl ActivationGene {
    pub fn max_pool(pool_h: usize, pool_w: usize, stride_h: usize, stride_w: usize) -> Self {
        ActivationGene::MaxPool {
            pool_h,
            pool_w,
            stride_h,
            stride_w,
        }
    }

    pub fn avg_pool(pool_h: usize, pool_w: usize, stride_h: usize, stride_w: usize) -> Self {
        ActivationGene::AvgPool {
            pool_h,
            pool_w,
            stride_h,
            stride_w,
        }
    }

    pub fn is_pool(&self) -> bool {
        !matches!(self, ActivationGene::Relu)
    }

    pub fn to_kind(&self) -> LayerKind {
        match *self {
            ActivationGene::Relu => LayerKind::Relu,
            ActivationGene::MaxPool {
                pool_h,
                pool_w,
                stride_h,
                stride_w,
            } => LayerKind::MaxPool(PoolSpec {
                pool_h,
                pool_w,
                stride_h,
                stride_w,
            }),
            ActivationGene::AvgPool {
                pool_h,
                pool_w,
                stride_h,
                stride_w,
            } => LayerKind::AvgPool(PoolSpec {
                pool_h,
                pool_w,
                stride_h,
                stride_w,
            }),
        }
    }

    fn validate(&self, layer: usize) -> Result<()> {
        match *self {
            ActivationGene::Relu => Ok(()),
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
            } => {
                if pool_h == 0 || pool_w == 0 || stride_h == 0 || stride_w == 0 {
                    Err(GenomeError::InvalidField {
                        layer,
                        field: "pool".into(),
                        message: "pool extents and strides must be >= 1".into(),
                    })
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerGene {
    pub conv: ConvGene,
    #[serde(rename = "act")]
    pub activation: ActivationGene,
}

/// An ordered list of conv+activation genes. The terminal head (global
/// average reduction to 1x1 where needed, a fixed 1x1 convolution to the
/// class count, and softmax) is not part of the searched encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Genome {
    pub layers: Vec<LayerGene>,
}

impl Genome {
    pub fn new(layers: Vec<LayerGene>) -> Self {
        Self { layers }
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Structural validity (bounds-independent): positive extents, dropout
    /// strictly inside (0,1), at least one layer.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(GenomeError::InvalidField {
                layer: 0,
                field: "layers".into(),
                message: "genome must contain at least one layer".into(),
            });
        }
        for (i, gene) in self.layers.iter().enumerate() {
            gene.conv.validate(i)?;
            gene.activation.validate(i)?;
        }
        Ok(())
    }
}
