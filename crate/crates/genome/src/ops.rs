//! Generation, recombination, and mutation of genomes.
//!
//! Every operation revalidates its result with `shape_infer`, so downstream
//! code never sees a genome whose spatial dims underflow.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bounds::ParamBounds;
use crate::error::{GenomeError, Result};
use crate::genes::{ActivationGene, ConvGene, Genome, LayerGene};
use crate::shape::{shape_infer, InputDims};

const LAYER_RETRIES: usize = 500;
const CROSSOVER_RETRIES: usize = 40;
const MUTATE_RETRIES: usize = 60;

fn draw_range(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    if lo >= hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn draw_conv(bounds: &ParamBounds, rng: &mut ChaCha8Rng) -> ConvGene {
    ConvGene {
        kernel_h: draw_range(rng, bounds.kernel_min, bounds.kernel_max),
        kernel_w: draw_range(rng, bounds.kernel_min, bounds.kernel_max),
        out_channels: draw_range(rng, bounds.channels_min, bounds.channels_max),
        stride_h: draw_range(rng, bounds.stride_min, bounds.stride_max),
        stride_w: draw_range(rng, bounds.stride_min, bounds.stride_max),
        batchnorm: rng.random::<f64>() < bounds.batchnorm_prob,
        dropout: (rng.random::<f64>() < bounds.dropout_prob)
            .then(|| rng.random_range(bounds.dropout_min..=bounds.dropout_max)),
    }
}

fn draw_activation(bounds: &ParamBounds, rng: &mut ChaCha8Rng) -> ActivationGene {
    match rng.random_range(0..3u8) {
        0 => ActivationGene::Relu,
        kind => {
            let pool_h = draw_range(rng, bounds.pool_min, bounds.pool_max);
            let pool_w = draw_range(rng, bounds.pool_min, bounds.pool_max);
            let stride_h = draw_range(rng, bounds.pool_stride_min, bounds.pool_stride_max);
            let stride_w = draw_range(rng, bounds.pool_stride_min, bounds.pool_stride_max);
            if kind == 1 {
                ActivationGene::max_pool(pool_h, pool_w, stride_h, stride_w)
            } else {
                ActivationGene::avg_pool(pool_h, pool_w, stride_h, stride_w)
            }
        }
    }
}

/// Draws a genome of exactly `l` layers, every field uniform within bounds.
/// Layers are resampled individually until the prefix stays shape-valid;
/// exhaustion reports the constraint that kept failing.
pub fn random_genome(l: usize, bounds: &ParamBounds, rng: &mut ChaCha8Rng) -> Result<Genome> {
    if l == 0 {
        return Err(GenomeError::InvalidField {
            layer: 0,
            field: "layers".into(),
            message: "requested length 0".into(),
        });
    }
    let input = bounds.input();
    let classes = crate::genes::DEFAULT_CLASSES;
    let mut genome = Genome::new(Vec::with_capacity(l));
    for i in 0..l {
        let mut last_err = None;
        let mut placed = false;
        for _ in 0..LAYER_RETRIES {
            genome.layers.push(LayerGene {
                conv: draw_conv(bounds, rng),
                activation: draw_activation(bounds, rng),
            });
            match shape_infer(&genome, input, classes) {
                Ok(_) => {
                    placed = true;
                    break;
                }
                Err(e) => {
                    last_err = Some(e);
                    genome.layers.pop();
                }
            }
        }
        if !placed {
            let detail = last_err
                .map(|e| e.to_string())
                .unwrap_or_else(|| "no feasible draw".into());
            return Err(GenomeError::RetriesExhausted {
                context: format!(
                    "layer {i} of {l} found no shape-valid draw in {LAYER_RETRIES} tries ({detail})"
                ),
            });
        }
    }
    Ok(genome)
}

/// Joins the first `prefix_len` genes of `a` to the last `suffix_len` genes
/// of `b`, without validation.
pub fn splice(a: &Genome, b: &Genome, prefix_len: usize, suffix_len: usize) -> Genome {
    let mut layers = Vec::with_capacity(prefix_len + suffix_len);
    layers.extend_from_slice(&a.layers[..prefix_len]);
    layers.extend_from_slice(&b.layers[b.len() - suffix_len..]);
    Genome::new(layers)
}

/// Child = a genuine prefix of `a` joined to a nonempty suffix of `b`.
/// Invalid children redraw their cut points; if no cut pair works, the child
/// falls back to a mutated copy of `a`, so a genome is always produced.
pub fn crossover(a: &Genome, b: &Genome, bounds: &ParamBounds, rng: &mut ChaCha8Rng) -> Genome {
    let input = bounds.input();
    let classes = crate::genes::DEFAULT_CLASSES;
    for _ in 0..CROSSOVER_RETRIES {
        let prefix_len = if a.len() <= 1 {
            1
        } else {
            rng.random_range(1..a.len())
        };
        let suffix_len = rng.random_range(1..=b.len());
        let child = splice(a, b, prefix_len, suffix_len);
        if shape_infer(&child, input, classes).is_ok() {
            return child;
        }
    }
    mutate(a, bounds, rng)
}

/// Mutable scalar slots of one layer. Pool parameters only exist while the
/// activation is a pooling kind.
fn field_count(gene: &LayerGene) -> usize {
    // kernel_h kernel_w out_channels stride_h stride_w batchnorm dropout kind
    let base = 8;
    if gene.activation.is_pool() {
        base + 4
    } else {
        base
    }
}

fn redraw_distinct(rng: &mut ChaCha8Rng, lo: usize, hi: usize, current: usize) -> Option<usize> {
    if lo >= hi || (lo == current && hi == current) {
        return None;
    }
    for _ in 0..16 {
        let v = draw_range(rng, lo, hi);
        if v != current {
            return Some(v);
        }
    }
    None
}

fn mutate_field(
    gene: &mut LayerGene,
    field: usize,
    bounds: &ParamBounds,
    rng: &mut ChaCha8Rng,
) -> bool {
    match field {
        0 => redraw_distinct(rng, bounds.kernel_min, bounds.kernel_max, gene.conv.kernel_h)
            .map(|v| gene.conv.kernel_h = v)
            .is_some(),
        1 => redraw_distinct(rng, bounds.kernel_min, bounds.kernel_max, gene.conv.kernel_w)
            .map(|v| gene.conv.kernel_w = v)
            .is_some(),
        2 => redraw_distinct(
            rng,
            bounds.channels_min,
            bounds.channels_max,
            gene.conv.out_channels,
        )
        .map(|v| gene.conv.out_channels = v)
        .is_some(),
        3 => redraw_distinct(rng, bounds.stride_min, bounds.stride_max, gene.conv.stride_h)
            .map(|v| gene.conv.stride_h = v)
            .is_some(),
        4 => redraw_distinct(rng, bounds.stride_min, bounds.stride_max, gene.conv.stride_w)
            .map(|v| gene.conv.stride_w = v)
            .is_some(),
        5 => {
            gene.conv.batchnorm = !gene.conv.batchnorm;
            true
        }
        6 => {
            // toggle dropout presence or move its rate
            match gene.conv.dropout {
                None => {
                    gene.conv.dropout =
                        Some(rng.random_range(bounds.dropout_min..=bounds.dropout_max));
                }
                Some(rate) => {
                    if rng.random::<bool>() {
                        gene.conv.dropout = None;
                    } else {
                        let next = rng.random_range(bounds.dropout_min..=bounds.dropout_max);
                        if (next - rate).abs() < 1e-9 {
                            gene.conv.dropout = None;
                        } else {
                            gene.conv.dropout = Some(next);
                        }
                    }
                }
            }
            true
        }
        7 => {
            // switch the activation category; a freshly drawn activation of a
            // different kind still counts as one categorical change
            let current = std::mem::discriminant(&gene.activation);
            for _ in 0..16 {
                let candidate = draw_activation(bounds, rng);
                if std::mem::discriminant(&candidate) != current {
                    gene.activation = candidate;
                    return true;
                }
            }
            false
        }
        _ => {
            let slot = field - 8;
            match &mut gene.activation {
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
                    let (target, lo, hi): (&mut usize, usize, usize) = match slot {
                        0 => (pool_h, bounds.pool_min, bounds.pool_max),
                        1 => (pool_w, bounds.pool_min, bounds.pool_max),
                        2 => (stride_h, bounds.pool_stride_min, bounds.pool_stride_max),
                        _ => (stride_w, bounds.pool_stride_min, bounds.pool_stride_max),
                    };
                    redraw_distinct(rng, lo, hi, *target)
                        .map(|v| *target = v)
                        .is_some()
                }
                ActivationGene::Relu => false,
            }
        }
    }
}

/// Changes exactly one field of one layer, revalidating the result. Shape
/// violations retry a different (layer, field) pick; flipping batchnorm never
/// alters shapes, so a valid single-field mutant always exists.
pub fn mutate(a: &Genome, bounds: &ParamBounds, rng: &mut ChaCha8Rng) -> Genome {
    let input = bounds.input();
    let classes = crate::genes::DEFAULT_CLASSES;
    for _ in 0..MUTATE_RETRIES {
        let layer = rng.random_range(0..a.len());
        let field = rng.random_range(0..field_count(&a.layers[layer]));
        let mut candidate = a.clone();
        if !mutate_field(&mut candidate.layers[layer], field, bounds, rng) {
            continue;
        }
        if shape_infer(&candidate, input, classes).is_ok() {
            return candidate;
        }
    }
    // shape-neutral fallback
    let mut fallback = a.clone();
    let layer = rng.random_range(0..a.len());
    fallback.layers[layer].conv.batchnorm = !fallback.layers[layer].conv.batchnorm;
    fallback
}

/// Number of differing fields between genomes, where an activation-kind
/// switch counts as one regardless of pool parameters, and dropout
/// presence/rate counts as one slot.
pub fn diff_count(a: &Genome, b: &Genome) -> usize {
    let mut count = 0usize;
    for (ga, gb) in a.layers.iter().zip(&b.layers) {
        let (ca, cb) = (&ga.conv, &gb.conv);
        count += (ca.kernel_h != cb.kernel_h) as usize;
        count += (ca.kernel_w != cb.kernel_w) as usize;
        count += (ca.out_channels != cb.out_channels) as usize;
        count += (ca.stride_h != cb.stride_h) as usize;
        count += (ca.stride_w != cb.stride_w) as usize;
        count += (ca.batchnorm != cb.batchnorm) as usize;
        count += match (ca.dropout, cb.dropout) {
            (None, None) => 0,
            (Some(x), Some(y)) => ((x - y).abs() > 1e-12) as usize,
            _ => 1,
        };
        count += activation_diff(&ga.activation, &gb.activation);
    }
    let (longer, shorter) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    for gene in &longer.layers[shorter.len()..] {
        count += field_count(gene);
    }
    count
}

fn activation_diff(a: &ActivationGene, b: &ActivationGene) -> usize {
    use ActivationGene::*;
    match (a, b) {
        (Relu, Relu) => 0,
        (
            MaxPool { pool_h: ph, pool_w: pw, stride_h: sh, stride_w: sw },
            MaxPool { pool_h: qh, pool_w: qw, stride_h: th, stride_w: tw },
        )
        | (
            AvgPool { pool_h: ph, pool_w: pw, stride_h: sh, stride_w: sw },
            AvgPool { pool_h: qh, pool_w: qw, stride_h: th, stride_w: tw },
        ) => {
            (ph != qh) as usize + (pw != qw) as usize + (sh != th) as usize + (sw != tw) as usize
        }
        _ => 1,
    }
}

/// True when every gene of `child` is byte-identical to a gene of one parent
/// (crossover provenance).
pub fn genes_from_parents(child: &Genome, a: &Genome, b: &Genome) -> bool {
    child
        .layers
        .iter()
        .all(|g| a.layers.contains(g) || b.layers.contains(g))
}

/// Convenience wrapper re-exported for callers that only need validity.
pub fn is_valid(genome: &Genome, input: InputDims) -> bool {
    shape_infer(genome, input, crate::genes::DEFAULT_CLASSES).is_ok()
}
