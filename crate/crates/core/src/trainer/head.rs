//! Embedding heads: a single affine projection, or an encoder/decoder
//! "linguistic bottleneck" whose compressed latent both feeds the
//! identification map and reconstructs body descriptors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Result, TrainerError};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    #[default]
    Projection,
    LinguisticBottleneck,
}

impl HeadKind {
    pub fn code(self) -> u32 {
        match self {
            HeadKind::Projection => 0,
            HeadKind::LinguisticBottleneck => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(HeadKind::Projection),
            1 => Some(HeadKind::LinguisticBottleneck),
            _ => None,
        }
    }
}

/// Widths of the bottleneck head: encoder `in → h1 → h2 → latent`,
/// decoder `latent → decoder_hidden → n_desc`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BottleneckDims {
    pub h1: usize,
    pub h2: usize,
    pub latent: usize,
    pub decoder_hidden: usize,
    pub n_desc: usize,
}

/// Reference widths for a 2048-d input.
const REF_INPUT: f64 = 2048.0;
const REF_ENCODER: [f64; 3] = [512.0, 64.0, 16.0];
const REF_DECODER_HIDDEN: f64 = 24.0;
pub const DEFAULT_DESCRIPTORS: usize = 30;
/// Smallest width any scaled encoder layer is allowed to shrink to.
const MIN_SCALED_WIDTH: usize = 16;

impl BottleneckDims {
    /// 2048 → 512 → 64 → 16 and 16 → 24 → `n_desc` at `d_in = 2048`, scaled
    /// proportionally otherwise, never narrower than 16 per encoder layer.
    pub fn scaled(d_in: usize, n_desc: usize) -> Self {
        let r = d_in as f64 / REF_INPUT;
        let w = |x: f64| ((x * r).round() as usize).max(MIN_SCALED_WIDTH);
        let latent = w(REF_ENCODER[2]);
        Self {
            h1: w(REF_ENCODER[0]),
            h2: w(REF_ENCODER[1]),
            latent,
            decoder_hidden: ((REF_DECODER_HIDDEN * latent as f64 / REF_ENCODER[2]).round()
                as usize)
                .max(1),
            n_desc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// out × in.
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_out, fan_in),
            bias: vec![0.0; fan_out],
        }
    }

    /// Weights uniform in ±sqrt(6 / (fan_in + fan_out)); zero biases.
    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-a..a))
            .collect();
        Self {
            weight: Matrix::from_vec(fan_out, fan_in, data),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.rows()
    }
}

// bottleneck layer slots
const ENC1: usize = 0;
const ENC2: usize = 1;
const ENC3: usize = 2;
const DEC1: usize = 3;
const DEC2: usize = 4;
const IDENT: usize = 5;

/// Trainable head weights. Also used, zero-initialized, to hold gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    kind: HeadKind,
    layers: Vec<Layer>,
}

/// Outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    pub embeddings: Matrix,
    pub descriptors: Option<Matrix>,
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    kind: HeadKind,
    input: Matrix,
    /// Pre-activation output of every layer, in layer order.
    pre: Vec<Matrix>,
}

impl ForwardCache {
    /// Smallest |pre-activation| feeding a ReLU; infinite when there is none.
    /// Finite differences are only meaningful when this exceeds the step.
    pub fn relu_margin(&self) -> f64 {
        let gated = match self.kind {
            HeadKind::Projection => 0,
            HeadKind::LinguisticBottleneck => DEC1 + 1,
        };
        self.pre[..gated]
            .iter()
            .flat_map(|m| m.data())
            .fold(f64::INFINITY, |acc, v| acc.min(v.abs()))
    }
}

fn relu(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    out.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
    out
}

/// Zeroes `grad` wherever the pre-activation was not positive.
fn relu_backward(grad: &mut Matrix, pre: &Matrix) {
    for (g, &p) in grad.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for r in m.iter_rows() {
        for (o, x) in out.iter_mut().zip(r) {
            *o += x;
        }
    }
    out
}

fn layer_grad(upstream: &Matrix, input: &Matrix) -> Layer {
    Layer {
        weight: linalg::transpose_matmul(upstream, input),
        bias: column_sums(upstream),
    }
}

impl HeadParams {
    pub fn from_layers(kind: HeadKind, layers: Vec<Layer>) -> Result<Self> {
        let expected = match kind {
            HeadKind::Projection => 1,
            HeadKind::LinguisticBottleneck => 6,
        };
        if layers.len() != expected {
            return Err(TrainerError::Shape(format!(
                "{kind:?} head needs {expected} layers, got {}",
                layers.len()
            )));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(TrainerError::Shape(format!(
                    "layer {i}: bias length {} ≠ fan-out {}",
                    l.bias.len(),
                    l.fan_out()
                )));
            }
        }
        let chain = |from: usize, to: usize| -> Result<()> {
            if layers[from].fan_out() != layers[to].fan_in() {
                return Err(TrainerError::Shape(format!(
                    "layer {from} emits {} but layer {to} takes {}",
                    layers[from].fan_out(),
                    layers[to].fan_in()
                )));
            }
            Ok(())
        };
        if kind == HeadKind::LinguisticBottleneck {
            chain(ENC1, ENC2)?;
            chain(ENC2, ENC3)?;
            chain(ENC3, DEC1)?;
            chain(DEC1, DEC2)?;
            chain(ENC3, IDENT)?;
        }
        Ok(Self { kind, layers })
    }

    pub fn projection<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        Self {
            kind: HeadKind::Projection,
            layers: vec![Layer::glorot(d_in, d_out, rng)],
        }
    }

    pub fn bottleneck<R: Rng + ?Sized>(
        d_in: usize,
        d_out: usize,
        dims: BottleneckDims,
        rng: &mut R,
    ) -> Self {
        let layers = vec![
            Layer::glorot(d_in, dims.h1, rng),
            Layer::glorot(dims.h1, dims.h2, rng),
            Layer::glorot(dims.h2, dims.latent, rng),
            Layer::glorot(dims.latent, dims.decoder_hidden, rng),
            Layer::glorot(dims.decoder_hidden, dims.n_desc, rng),
            Layer::glorot(dims.latent, d_out, rng),
        ];
        Self {
            kind: HeadKind::LinguisticBottleneck,
            layers,
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            kind: self.kind,
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    pub fn kind(&self) -> HeadKind {
        self.kind
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn embed_dim(&self) -> usize {
        match self.kind {
            HeadKind::Projection => self.layers[0].fan_out(),
            HeadKind::LinguisticBottleneck => self.layers[IDENT].fan_out(),
        }
    }

    pub fn descriptor_dim(&self) -> Option<usize> {
        match self.kind {
            HeadKind::Projection => None,
            HeadKind::LinguisticBottleneck => Some(self.layers[DEC2].fan_out()),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// Every weight and bias buffer, weight before bias, in layer order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn forward(&self, features: &Matrix) -> Result<(HeadOutput, ForwardCache)> {
        if features.cols() != self.input_dim() {
            return Err(TrainerError::Shape(format!(
                "features have {} columns, head expects {}",
                features.cols(),
                self.input_dim()
            )));
        }
        let l = &self.layers;
        match self.kind {
            HeadKind::Projection => {
                let e = linalg::affine(features, &l[0].weight, &l[0].bias);
                let cache = ForwardCache {
                    kind: self.kind,
                    input: features.clone(),
                    pre: vec![e.clone()],
                };
                Ok((
                    HeadOutput {
                        embeddings: e,
                        descriptors: None,
                    },
                    cache,
                ))
            }
            HeadKind::LinguisticBottleneck => {
                let p1 = linalg::affine(features, &l[ENC1].weight, &l[ENC1].bias);
                let p2 = linalg::affine(&relu(&p1), &l[ENC2].weight, &l[ENC2].bias);
                let p3 = linalg::affine(&relu(&p2), &l[ENC3].weight, &l[ENC3].bias);
                let z = relu(&p3);
                let p4 = linalg::affine(&z, &l[DEC1].weight, &l[DEC1].bias);
                let p5 = linalg::affine(&relu(&p4), &l[DEC2].weight, &l[DEC2].bias);
                let p6 = linalg::affine(&z, &l[IDENT].weight, &l[IDENT].bias);
                let out = HeadOutput {
                    embeddings: p6.clone(),
                    descriptors: Some(p5.clone()),
                };
                let cache = ForwardCache {
                    kind: self.kind,
                    input: features.clone(),
                    pre: vec![p1, p2, p3, p4, p5, p6],
                };
                Ok((out, cache))
            }
        }
    }

    /// Embeddings only, for evaluation.
    pub fn embed(&self, features: &Matrix) -> Result<Matrix> {
        Ok(self.forward(features)?.0.embeddings)
    }

    /// Reverse-mode gradients of a loss given its gradients with respect to the
    /// embeddings and (for the bottleneck head) the descriptor reconstructions.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_embeddings: &Matrix,
        d_descriptors: Option<&Matrix>,
    ) -> Result<HeadParams> {
        if cache.kind != self.kind
            || cache.pre.len() != self.layers.len()
            || cache.input.cols() != self.input_dim()
        {
            return Err(TrainerError::CacheMismatch);
        }
        let batch = cache.input.rows();
        if d_embeddings.shape() != (batch, self.embed_dim()) {
            return Err(TrainerError::Shape(format!(
                "embedding gradient is {:?}, expected {:?}",
                d_embeddings.shape(),
                (batch, self.embed_dim())
            )));
        }
        let l = &self.layers;
        match self.kind {
            HeadKind::Projection => Ok(HeadParams {
                kind: self.kind,
                layers: vec![layer_grad(d_embeddings, &cache.input)],
            }),
            HeadKind::LinguisticBottleneck => {
                let pre = &cache.pre;
                let h1 = relu(&pre[ENC1]);
                let h2 = relu(&pre[ENC2]);
                let z = relu(&pre[ENC3]);

                let g_ident = layer_grad(d_embeddings, &z);
                let mut dz = linalg::matmul(d_embeddings, &l[IDENT].weight);

                let (g_dec1, g_dec2) = match d_descriptors {
                    Some(dd) => {
                        if dd.shape() != pre[DEC2].shape() {
                            return Err(TrainerError::Shape(format!(
                                "descriptor gradient is {:?}, expected {:?}",
                                dd.shape(),
                                pre[DEC2].shape()
                            )));
                        }
                        let g5 = layer_grad(dd, &relu(&pre[DEC1]));
                        let mut d4 = linalg::matmul(dd, &l[DEC2].weight);
                        relu_backward(&mut d4, &pre[DEC1]);
                        let g4 = layer_grad(&d4, &z);
                        let back = linalg::matmul(&d4, &l[DEC1].weight);
                        for (a, b) in dz.data_mut().iter_mut().zip(back.data()) {
                            *a += b;
                        }
                        (g4, g5)
                    }
                    None => (
                        Layer::zeros(l[DEC1].fan_in(), l[DEC1].fan_out()),
                        Layer::zeros(l[DEC2].fan_in(), l[DEC2].fan_out()),
                    ),
                };

                relu_backward(&mut dz, &pre[ENC3]);
                let g3 = layer_grad(&dz, &h2);
                let mut d2 = linalg::matmul(&dz, &l[ENC3].weight);
                relu_backward(&mut d2, &pre[ENC2]);
                let g2 = layer_grad(&d2, &h1);
                let mut d1 = linalg::matmul(&d2, &l[ENC2].weight);
                relu_backward(&mut d1, &pre[ENC1]);
                let g1 = layer_grad(&d1, &cache.input);

                Ok(HeadParams {
                    kind: self.kind,
                    layers: vec![g1, g2, g3, g_dec1, g_dec2, g_ident],
                })
            }
        }
    }
}
