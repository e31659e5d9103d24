use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::graph::{sigmoid, Graph, Padding, Var};
use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

pub const EMBEDDING_DIM: usize = 256;
pub const DROPOUT: f64 = 0.5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
    C,
    D,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::A, Variant::B, Variant::C, Variant::D];

    pub fn depth(&self) -> usize {
        *self as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Cnn1d,
    EegNet,
    Topo(Variant),
    Spect(Variant),
    FusionMlp,
    Siamese,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arch::Cnn1d => f.write_str("cnn1d"),
            Arch::EegNet => f.write_str("eegnet"),
            Arch::Topo(v) => write!(f, "topo-{}", format!("{v:?}").to_lowercase()),
            Arch::Spect(v) => write!(f, "spect-{}", format!("{v:?}").to_lowercase()),
            Arch::FusionMlp => f.write_str("fusion"),
            Arch::Siamese => f.write_str("siamese"),
        }
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let variant = |v: &str| match v {
            "a" => Ok(Variant::A),
            "b" => Ok(Variant::B),
            "c" => Ok(Variant::C),
            "d" => Ok(Variant::D),
            _ => Err(Error::invalid("architecture", s)),
        };
        match lower.as_str() {
            "cnn1d" => Ok(Arch::Cnn1d),
            "eegnet" => Ok(Arch::EegNet),
            "fusion" | "fusion-mlp" => Ok(Arch::FusionMlp),
            "siamese" => Ok(Arch::Siamese),
            _ => {
                if let Some(v) = lower.strip_prefix("topo-") {
                    Ok(Arch::Topo(variant(v)?))
                } else if let Some(v) = lower.strip_prefix("spect-") {
                    Ok(Arch::Spect(variant(v)?))
                } else {
                    Err(Error::invalid("architecture", s))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    /// Input `(C, L)`, weights `(filters, C, kernel)`, same padding.
    Conv1d { filters: usize, kernel: usize },
    /// Input `(C, H, W)`, stride 1.
    Conv2d {
        filters: usize,
        kernel: (usize, usize),
        groups: usize,
        same: bool,
        bias: bool,
    },
    MaxPool1d { size: usize },
    MaxPool2d { size: (usize, usize) },
    AvgPool2d { size: (usize, usize) },
    /// Normalizes over axis 1 (channels, or features after a flatten).
    BatchNorm,
    Dropout { p: f64 },
    Flatten,
    Relu,
    Dense { units: usize },
    /// Reshape of the per-sample part; the batch axis is kept.
    Reshape { shape: Vec<usize> },
}

impl Layer {
    /// Per-sample output shape, or an error when the input does not fit.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = || Error::ShapeMismatch {
            op: "layer",
            lhs: input.to_vec(),
            rhs: vec![],
        };
        Ok(match self {
            Layer::Conv1d { filters, .. } => {
                if input.len() != 2 {
                    return Err(bad());
                }
                vec![*filters, input[1]]
            }
            Layer::Conv2d {
                filters,
                kernel,
                groups,
                same,
                ..
            } => {
                if input.len() != 3 || *groups == 0 || input[0] % groups != 0 || filters % groups != 0 {
                    return Err(bad());
                }
                if *same {
                    vec![*filters, input[1], input[2]]
                } else {
                    if kernel.0 > input[1] || kernel.1 > input[2] {
                        return Err(bad());
                    }
                    vec![*filters, input[1] - kernel.0 + 1, input[2] - kernel.1 + 1]
                }
            }
            Layer::MaxPool1d { size } => {
                if input.len() != 2 || *size == 0 || input[1] / size == 0 {
                    return Err(bad());
                }
                vec![input[0], input[1] / size]
            }
            Layer::MaxPool2d { size } | Layer::AvgPool2d { size } => {
                if input.len() != 3 || size.0 == 0 || size.1 == 0 {
                    return Err(bad());
                }
                let (h, w) = (input[1] / size.0, input[2] / size.1);
                if h == 0 || w == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "pooling {size:?} reduces {input:?} to an empty map"
                    )));
                }
                vec![input[0], h, w]
            }
            Layer::BatchNorm | Layer::Relu => input.to_vec(),
            Layer::Dropout { p } => {
                if !(0.0..1.0).contains(p) {
                    return Err(Error::InvalidArgument(format!("dropout rate {p}")));
                }
                input.to_vec()
            }
            Layer::Flatten => vec![input.iter().product()],
            Layer::Dense { .. } if input.len() != 1 => return Err(bad()),
            Layer::Dense { units } => vec![*units],
            Layer::Reshape { shape } => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() {
                    return Err(bad());
                }
                shape.clone()
            }
        })
    }

    /// Trainable parameter count given the per-sample input shape.
    pub fn param_count(&self, input: &[usize]) -> usize {
        match self {
            Layer::Conv1d { filters, kernel } => filters * input[0] * kernel + filters,
            Layer::Conv2d {
                filters,
                kernel,
                groups,
                bias,
                ..
            } => filters * (input[0] / groups) * kernel.0 * kernel.1 + if *bias { *filters } else { 0 },
            Layer::BatchNorm => 2 * input[0],
            Layer::Dense { units } => input[0] * units + units,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    /// Per-sample shape of each input stream. Two streams are joined on
    /// the feature axis before the first layer.
    pub inputs: Vec<Vec<usize>>,
    pub layers: Vec<Layer>,
    /// Index of the layer whose output is the embedding.
    pub embedding_layer: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn input_len(&self) -> usize {
        self.inputs.iter().map(|s| s.iter().product::<usize>()).sum()
    }

    fn first_shape(&self) -> Result<Vec<usize>> {
        match self.inputs.as_slice() {
            [one] => Ok(one.clone()),
            [a, b] if a.len() == 1 && b.len() == 1 => Ok(vec![a[0] + b[0]]),
            _ => Err(Error::InvalidArgument(format!("unsupported inputs {:?}", self.inputs))),
        }
    }

    /// Output shape of every layer, validating the whole stack.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut cur = self.first_shape()?;
        let mut out = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            cur = l.output_shape(&cur)?;
            out.push(cur.clone());
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shapes()?.pop().unwrap_or(self.first_shape()?))
    }

    pub fn embedding_dim(&self) -> Result<usize> {
        Ok(self.shapes()?[self.embedding_layer].iter().product())
    }

    pub fn param_count(&self) -> Result<usize> {
        let mut cur = self.first_shape()?;
        let mut n = 0;
        for l in &self.layers {
            n += l.param_count(&cur);
            cur = l.output_shape(&cur)?;
        }
        Ok(n)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn classifier_head(layers: &mut Vec<Layer>) -> usize {
    layers.push(Layer::Dense { units: EMBEDDING_DIM });
    layers.push(Layer::Relu);
    let emb = layers.len() - 1;
    layers.push(Layer::Dropout { p: DROPOUT });
    layers.push(Layer::Dense { units: 2 });
    emb
}

/// Three conv1d blocks (32/64/128 filters, kernel 7) over a `(14, 256)` epoch.
pub fn build_cnn1d(channels: usize, samples: usize, seed: u64) -> Result<ModelSpec> {
    let mut layers = Vec::new();
    for filters in [32, 64, 128] {
        layers.push(Layer::Conv1d { filters, kernel: 7 });
        layers.push(Layer::Relu);
        layers.push(Layer::MaxPool1d { size: 2 });
    }
    layers.extend([Layer::Flatten, Layer::BatchNorm, Layer::Dropout { p: DROPOUT }]);
    layers.push(Layer::Dense { units: EMBEDDING_DIM });
    layers.push(Layer::Relu);
    let embedding_layer = layers.len() - 1;
    layers.push(Layer::Dense { units: 2 });
    finish(Arch::Cnn1d, vec![vec![channels, samples]], layers, embedding_layer, seed)
}

/// Compact depthwise-separable net with F1 = 8, D = 2, F2 = 16.
pub fn build_eegnet(channels: usize, samples: usize, seed: u64) -> Result<ModelSpec> {
    let conv = |filters, kernel, groups, same| Layer::Conv2d {
        filters,
        kernel,
        groups,
        same,
        bias: false,
    };
    let mut layers = vec![
        Layer::Reshape {
            shape: vec![1, channels, samples],
        },
        conv(8, (1, 64), 1, true),
        Layer::BatchNorm,
        conv(16, (channels, 1), 8, false),
        Layer::Relu,
        Layer::AvgPool2d { size: (1, 4) },
        Layer::Dropout { p: DROPOUT },
        conv(16, (1, 16), 16, true),
        conv(16, (1, 1), 1, true),
        Layer::Relu,
        Layer::AvgPool2d { size: (1, 8) },
        Layer::Dropout { p: DROPOUT },
        Layer::Flatten,
    ];
    layers.push(Layer::Dense { units: EMBEDDING_DIM });
    layers.push(Layer::Relu);
    let embedding_layer = layers.len() - 1;
    layers.push(Layer::Dense { units: 2 });
    finish(Arch::EegNet, vec![vec![channels, samples]], layers, embedding_layer, seed)
}

fn conv_blocks(depth: usize) -> Vec<Layer> {
    let mut layers = Vec::new();
    for _ in 0..depth {
        layers.push(Layer::Conv2d {
            filters: 32,
            kernel: (3, 3),
            groups: 1,
            same: true,
            bias: true,
        });
        layers.push(Layer::Relu);
        layers.push(Layer::MaxPool2d { size: (2, 2) });
    }
    layers.push(Layer::Flatten);
    layers
}

/// 2-D CNN over a `(C, H, W)` topographic stack.
pub fn build_topo_cnn(variant: Variant, input: [usize; 3], seed: u64) -> Result<ModelSpec> {
    let mut layers = conv_blocks(variant.depth());
    let emb = classifier_head(&mut layers);
    finish(Arch::Topo(variant), vec![input.to_vec()], layers, emb, seed)
}

/// Same stack over a `(channels, frames, bins)` spectrogram.
pub fn build_spect_cnn(variant: Variant, input: [usize; 3], seed: u64) -> Result<ModelSpec> {
    let mut layers = conv_blocks(variant.depth());
    let emb = classifier_head(&mut layers);
    finish(Arch::Spect(variant), vec![input.to_vec()], layers, emb, seed)
}

pub fn build_fusion_mlp(temporal: usize, spatial: usize, seed: u64) -> Result<ModelSpec> {
    let layers = vec![
        Layer::Dense { units: 128 },
        Layer::Relu,
        Layer::Dropout { p: DROPOUT },
        Layer::Dense { units: 128 },
        Layer::Relu,
        Layer::Dense { units: 2 },
    ];
    finish(Arch::FusionMlp, vec![vec![temporal], vec![spatial]], layers, 4, seed)
}

/// Topo-A tower ending in a linear 256-unit embedding.
pub fn build_siamese(input: [usize; 3], seed: u64) -> Result<ModelSpec> {
    let mut layers = conv_blocks(1);
    layers.push(Layer::Dense { units: EMBEDDING_DIM });
    let emb = layers.len() - 1;
    finish(Arch::Siamese, vec![input.to_vec()], layers, emb, seed)
}

fn finish(arch: Arch, inputs: Vec<Vec<usize>>, layers: Vec<Layer>, embedding_layer: usize, seed: u64) -> Result<ModelSpec> {
    let spec = ModelSpec {
        arch,
        inputs,
        layers,
        embedding_layer,
        seed,
    };
    spec.shapes()?;
    Ok(spec)
}

/// Default spec for an architecture at the standard input sizes.
pub fn build(arch: Arch, seed: u64) -> Result<ModelSpec> {
    use crate::data::{N_CHANNELS, STIMULUS_SAMPLES};
    use crate::features::{SPECT_BINS, SPECT_FRAMES, TOPO_RESOLUTION};
    let topo = [5, TOPO_RESOLUTION, TOPO_RESOLUTION];
    match arch {
        Arch::Cnn1d => build_cnn1d(N_CHANNELS, STIMULUS_SAMPLES, seed),
        Arch::EegNet => build_eegnet(N_CHANNELS, STIMULUS_SAMPLES, seed),
        Arch::Topo(v) => build_topo_cnn(v, topo, seed),
        Arch::Spect(v) => build_spect_cnn(v, [N_CHANNELS, SPECT_FRAMES, SPECT_BINS], seed),
        Arch::FusionMlp => build_fusion_mlp(EMBEDDING_DIM, EMBEDDING_DIM, seed),
        Arch::Siamese => build_siamese(topo, seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics and dropout masks drawn from `seed`.
    Train { seed: u64 },
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum LayerParams {
    None,
    Weights { w: usize, b: Option<usize> },
    Norm { gamma: usize, beta: usize, mean: usize, var: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ParamStore,
    slots: Vec<LayerParams>,
}

pub struct Forward {
    pub output: Var,
    pub embedding: Var,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let mut r = rng(spec.seed);
        let mut params = ParamStore::default();
        let mut slots = Vec::with_capacity(spec.layers.len());
        let mut cur = spec.first_shape()?;
        for (i, l) in spec.layers.iter().enumerate() {
            let slot = match l {
                Layer::Conv1d { filters, kernel } => {
                    let fan_in = cur[0] * kernel;
                    let w = params.kaiming(format!("{i}.w"), vec![*filters, cur[0], *kernel], fan_in, &mut r);
                    let b = params.constant(format!("{i}.b"), vec![*filters], 0.0, true);
                    LayerParams::Weights { w, b: Some(b) }
                }
                Layer::Conv2d {
                    filters,
                    kernel,
                    groups,
                    bias,
                    ..
                } => {
                    let cin = cur[0] / groups;
                    let fan_in = cin * kernel.0 * kernel.1;
                    let w = params.kaiming(format!("{i}.w"), vec![*filters, cin, kernel.0, kernel.1], fan_in, &mut r);
                    let b = bias.then(|| params.constant(format!("{i}.b"), vec![*filters], 0.0, true));
                    LayerParams::Weights { w, b }
                }
                Layer::Dense { units } => {
                    let w = params.kaiming(format!("{i}.w"), vec![cur[0], *units], cur[0], &mut r);
                    let b = params.constant(format!("{i}.b"), vec![*units], 0.0, true);
                    LayerParams::Weights { w, b: Some(b) }
                }
                Layer::BatchNorm => {
                    let c = cur[0];
                    LayerParams::Norm {
                        gamma: params.constant(format!("{i}.gamma"), vec![c], 1.0, true),
                        beta: params.constant(format!("{i}.beta"), vec![c], 0.0, true),
                        mean: params.constant(format!("{i}.running_mean"), vec![c], 0.0, false),
                        var: params.constant(format!("{i}.running_var"), vec![c], 1.0, false),
                    }
                }
                _ => LayerParams::None,
            };
            slots.push(slot);
            cur = l.output_shape(&cur)?;
        }
        Ok(Self { spec, params, slots })
    }

    pub fn input_len(&self) -> usize {
        self.spec.input_len()
    }

    /// Pushes a batch of flat samples as graph inputs (split per stream).
    pub fn input_batch(&self, g: &mut Graph, samples: &[&[f64]]) -> Result<Vec<Var>> {
        let len = self.input_len();
        if let Some(bad) = samples.iter().find(|s| s.len() != len) {
            return Err(Error::ShapeMismatch {
                op: "model input",
                lhs: vec![len],
                rhs: vec![bad.len()],
            });
        }
        let mut offset = 0;
        let mut vars = Vec::new();
        for shape in &self.spec.inputs {
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n * samples.len());
            for s in samples {
                data.extend_from_slice(&s[offset..offset + n]);
            }
            let mut full = vec![samples.len()];
            full.extend(shape);
            vars.push(g.input(full, data)?);
            offset += n;
        }
        Ok(vars)
    }

    pub fn forward(&self, g: &mut Graph, inputs: &[Var], mode: Mode) -> Result<Forward> {
        let mut x = match inputs {
            [one] => *one,
            [a, b] => g.concat(*a, *b)?,
            _ => return Err(Error::InvalidArgument(format!("{} input streams", inputs.len()))),
        };
        let batch = g.shape(x)[0];
        let mut embedding = None;
        for (i, (l, slot)) in self.spec.layers.iter().zip(&self.slots).enumerate() {
            x = match (l, slot) {
                (Layer::Conv1d { .. }, LayerParams::Weights { w, b }) => {
                    let wv = g.param(&self.params, *w);
                    let bv = b.map(|b| g.param(&self.params, b));
                    g.conv1d(x, wv, bv, Padding::Same)?
                }
                (Layer::Conv2d { groups, same, .. }, LayerParams::Weights { w, b }) => {
                    let wv = g.param(&self.params, *w);
                    let bv = b.map(|b| g.param(&self.params, b));
                    let pad = if *same { Padding::Same } else { Padding::Valid };
                    g.conv2d(x, wv, bv, *groups, pad)?
                }
                (Layer::Dense { .. }, LayerParams::Weights { w, b }) => {
                    let wv = g.param(&self.params, *w);
                    let bv = b.map(|b| g.param(&self.params, b));
                    g.dense(x, wv, bv)?
                }
                (Layer::BatchNorm, LayerParams::Norm { gamma, beta, mean, var }) => {
                    let gv = g.param(&self.params, *gamma);
                    let bv = g.param(&self.params, *beta);
                    let train = matches!(mode, Mode::Train { .. });
                    g.batchnorm(x, gv, bv, (*mean, *var), &self.params, train)?
                }
                (Layer::MaxPool1d { size }, _) => g.maxpool1d(x, *size)?,
                (Layer::MaxPool2d { size }, _) => g.maxpool2d(x, size.0, size.1)?,
                (Layer::AvgPool2d { size }, _) => g.avgpool2d(x, size.0, size.1)?,
                (Layer::Dropout { p }, _) => match mode {
                    Mode::Train { seed } => g.dropout(x, *p, derive_seed(seed, &[i as u64]))?,
                    Mode::Eval => x,
                },
                (Layer::Flatten, _) => g.flatten(x)?,
                (Layer::Relu, _) => g.relu(x),
                (Layer::Reshape { shape }, _) => {
                    let mut full = vec![batch];
                    full.extend(shape);
                    g.reshape(x, full)?
                }
                _ => return Err(Error::InvalidArgument(format!("layer {i} has no parameters"))),
            };
            if i == self.spec.embedding_layer {
                embedding = Some(x);
            }
        }
        Ok(Forward {
            output: x,
            embedding: embedding.unwrap_or(x),
        })
    }

    /// Folds batch statistics recorded during a training forward pass into
    /// the running estimates.
    pub fn apply_bn_updates(&mut self, g: &Graph) {
        for obs in &g.bn_observations {
            let n = self.params.get_mut(obs.running_mean);
            for (r, m) in n.data.iter_mut().zip(&obs.mean) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
            }
            let n = self.params.get_mut(obs.running_var);
            for (r, v) in n.data.iter_mut().zip(&obs.var) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v;
            }
        }
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        self.params.set_frozen(frozen);
    }

    pub fn n_trainable(&self) -> usize {
        self.params.n_trainable()
    }

    /// Eval-mode forward for a batch of flat samples; returns
    /// `(outputs, embeddings)` as row-major matrices.
    pub fn infer(&self, samples: &[&[f64]]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let mut outs = Vec::with_capacity(samples.len());
        let mut embs = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(64) {
            let mut g = Graph::new();
            let inputs = self.input_batch(&mut g, chunk)?;
            let f = self.forward(&mut g, &inputs, Mode::Eval)?;
            let ow = g.value(f.output).len() / chunk.len();
            let ew = g.value(f.embedding).len() / chunk.len();
            outs.extend(g.value(f.output).chunks(ow).map(<[f64]>::to_vec));
            embs.extend(g.value(f.embedding).chunks(ew).map(<[f64]>::to_vec));
        }
        Ok((outs, embs))
    }

    /// Class probabilities from the 2-way head.
    pub fn predict_proba(&self, samples: &[&[f64]]) -> Result<Vec<[f64; 2]>> {
        let (logits, _) = self.infer(samples)?;
        Ok(logits
            .iter()
            .map(|l| {
                let p = super::graph::softmax_rows(l, l.len());
                [p[0], p[1]]
            })
            .collect())
    }

    pub fn predict(&self, samples: &[&[f64]]) -> Result<Vec<usize>> {
        Ok(self
            .predict_proba(samples)?
            .iter()
            .map(|p| (p[1] > p[0]) as usize)
            .collect())
    }

    pub fn embeddings(&self, samples: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        Ok(self.infer(samples)?.1)
    }
}

/// `1 - sigmoid(|e1 - e2|)`: 0.5 for identical embeddings, towards 0 when far.
pub fn similarity(e1: &[f64], e2: &[f64]) -> f64 {
    let d = e1.iter().zip(e2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    1.0 - sigmoid(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arch_names_round_trip() {
        let all = [
            Arch::Cnn1d,
            Arch::EegNet,
            Arch::Topo(Variant::C),
            Arch::Spect(Variant::D),
            Arch::FusionMlp,
            Arch::Siamese,
        ];
        for a in all {
            assert_eq!(a.to_string().parse::<Arch>().unwrap(), a);
        }
        assert!("topo-e".parse::<Arch>().is_err());
    }

    #[test]
    fn topo_a_first_block_halves_the_map() {
        let spec = build(Arch::Topo(Variant::A), 0).unwrap();
        assert_eq!(spec.shapes().unwrap()[2], vec![32, 16, 16]);
    }

    #[test]
    fn spect_d_keeps_every_dim_positive() {
        let spec = build(Arch::Spect(Variant::D), 0).unwrap();
        let pooled: Vec<_> = spec
            .shapes()
            .unwrap()
            .into_iter()
            .zip(&spec.layers)
            .filter(|(_, l)| matches!(l, Layer::MaxPool2d { .. }))
            .map(|(s, _)| (s[1], s[2]))
            .collect();
        assert_eq!(pooled, vec![(12, 16), (6, 8), (3, 4), (1, 2)]);
    }

    #[test]
    fn pooling_to_nothing_is_rejected() {
        assert!(build_topo_cnn(Variant::D, [5, 8, 8], 0).is_err());
    }

    #[test]
    fn every_arch_embeds_to_256() {
        for a in [Arch::Cnn1d, Arch::EegNet, Arch::FusionMlp, Arch::Siamese]
            .into_iter()
            .chain(Variant::ALL.map(Arch::Topo))
            .chain(Variant::ALL.map(Arch::Spect))
        {
            let spec = build(a, 0).unwrap();
            let expected = if a == Arch::FusionMlp { 128 } else { 256 };
            assert_eq!(spec.embedding_dim().unwrap(), expected, "{a}");
        }
    }

    #[test]
    fn similarity_convention() {
        assert_eq!(similarity(&[1.0, 2.0], &[1.0, 2.0]), 0.5);
        let s = similarity(&[0.0], &[10.0]);
        assert!((s - 4.5398e-5).abs() < 1e-8);
    }

    #[test]
    fn store_count_matches_formula() {
        for a in [Arch::EegNet, Arch::Topo(Variant::B), Arch::FusionMlp, Arch::Siamese] {
            let spec = build(a, 3).unwrap();
            let m = Model::new(spec.clone()).unwrap();
            assert_eq!(m.n_trainable(), spec.param_count().unwrap(), "{a}");
        }
    }
}
