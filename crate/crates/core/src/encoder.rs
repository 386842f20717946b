//! Pluggable feature extractors mapping an input batch to `n×d` features.
//!
//! Three small families stand in for the large pretrained backbones: a
//! multilayer perceptron, a two-block CNN and a single-block attention
//! encoder. Architectures above this layer only see the feature width.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{AttentionBlock, BoundAttention, BoundConv2d, BoundDense, Conv2dLayer, DenseLayer, Parameterized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum EncoderFamily {
    Mlp,
    TinyCnn,
    TinyAttention,
}

impl EncoderFamily {
    pub const ALL: [EncoderFamily; 3] = [EncoderFamily::Mlp, EncoderFamily::TinyCnn, EncoderFamily::TinyAttention];

    pub fn name(self) -> &'static str {
        match self {
            EncoderFamily::Mlp => "mlp",
            EncoderFamily::TinyCnn => "tiny_cnn",
            EncoderFamily::TinyAttention => "tiny_attention",
        }
    }
}

impl std::str::FromStr for EncoderFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown encoder family {s:?}")))
    }
}

impl std::fmt::Display for EncoderFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_CNN_CHANNELS: [usize; 2] = [8, 16];
pub const DEFAULT_PATCH: usize = 4;
const CONV_KERNEL: usize = 3;

/// Declarative encoder description.
///
/// `hidden` is family specific: hidden layer widths for `mlp`, channel
/// widths of the conv blocks for `tiny_cnn` (empty means `[8, 16]`), and
/// `[model_dim]` for `tiny_attention` (empty means `feature_dim`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub family: EncoderFamily,
    pub input_shape: Vec<usize>,
    pub feature_dim: usize,
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default = "default_patch")]
    pub patch: usize,
}

fn default_patch() -> usize {
    DEFAULT_PATCH
}

impl EncoderSpec {
    pub fn mlp(input_dim: usize, hidden: &[usize], feature_dim: usize) -> Self {
        Self {
            family: EncoderFamily::Mlp,
            input_shape: vec![input_dim],
            feature_dim,
            hidden: hidden.to_vec(),
            patch: DEFAULT_PATCH,
        }
    }

    pub fn tiny_cnn(input_shape: [usize; 3], channels: &[usize], feature_dim: usize) -> Self {
        Self {
            family: EncoderFamily::TinyCnn,
            input_shape: input_shape.to_vec(),
            feature_dim,
            hidden: channels.to_vec(),
            patch: DEFAULT_PATCH,
        }
    }

    pub fn tiny_attention(input_shape: [usize; 3], patch: usize, model_dim: usize, feature_dim: usize) -> Self {
        Self {
            family: EncoderFamily::TinyAttention,
            input_shape: input_shape.to_vec(),
            feature_dim,
            hidden: vec![model_dim],
            patch,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    fn image_shape(&self) -> Result<[usize; 3]> {
        match self.input_shape[..] {
            [c, h, w] if c > 0 && h > 0 && w > 0 => Ok([c, h, w]),
            _ => Err(Error::Config(format!(
                "{} expects a c×h×w input shape, got {:?}",
                self.family, self.input_shape
            ))),
        }
    }

    fn cnn_channels(&self) -> Vec<usize> {
        if self.hidden.is_empty() {
            DEFAULT_CNN_CHANNELS.to_vec()
        } else {
            self.hidden.clone()
        }
    }

    fn model_dim(&self) -> usize {
        self.hidden.first().copied().unwrap_or(self.feature_dim)
    }

    fn tokens(&self) -> Result<(usize, usize)> {
        let [c, h, w] = self.image_shape()?;
        let p = self.patch;
        if p == 0 || h % p != 0 || w % p != 0 {
            return Err(Error::Config(format!("patch {p} does not tile {h}×{w}")));
        }
        Ok(((h / p) * (w / p), c * p * p))
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.input_shape.is_empty() || self.input_len() == 0 {
            return Err(Error::Config("encoder needs positive feature_dim and input shape".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("encoder widths must be positive".into()));
        }
        match self.family {
            EncoderFamily::Mlp => Ok(()),
            EncoderFamily::TinyCnn => {
                let [_, h, w] = self.image_shape()?;
                let blocks = self.cnn_channels().len() as u32;
                if h >> blocks == 0 || w >> blocks == 0 {
                    return Err(Error::Config(format!(
                        "{h}×{w} input too small for {blocks} pooled conv blocks"
                    )));
                }
                Ok(())
            }
            EncoderFamily::TinyAttention => self.tokens().map(|_| ()),
        }
    }

    /// Trainable scalars, from the closed form of each family.
    pub fn parameter_count(&self) -> usize {
        let dense = |i: usize, o: usize| i * o + o;
        let d = self.feature_dim;
        match self.family {
            EncoderFamily::Mlp => {
                let mut widths = vec![self.input_len()];
                widths.extend(&self.hidden);
                widths.push(d);
                widths.windows(2).map(|w| dense(w[0], w[1])).sum()
            }
            EncoderFamily::TinyCnn => {
                let mut ch = vec![self.input_shape[0]];
                ch.extend(self.cnn_channels());
                let convs: usize = ch
                    .windows(2)
                    .map(|w| w[0] * w[1] * CONV_KERNEL * CONV_KERNEL + w[1])
                    .sum();
                convs + dense(*ch.last().unwrap(), d)
            }
            EncoderFamily::TinyAttention => {
                let (t, tok) = self.tokens().unwrap_or((0, 0));
                let m = self.model_dim();
                dense(tok, m) + t * m + 2 * m + 4 * dense(m, m) + dense(m, d)
            }
        }
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
enum Body {
    Mlp {
        layers: Vec<DenseLayer>,
    },
    TinyCnn {
        convs: Vec<Conv2dLayer>,
        projection: DenseLayer,
    },
    TinyAttention {
        embed: DenseLayer,
        position: Tensor,
        block: AttentionBlock,
        projection: DenseLayer,
    },
}

/// An encoder built from an [`EncoderSpec`] with its own parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    spec: EncoderSpec,
    body: Body,
}

impl Encoder {
    pub fn new(spec: EncoderSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let d = spec.feature_dim;
        let body = match spec.family {
            EncoderFamily::Mlp => {
                let mut widths = vec![spec.input_len()];
                widths.extend(&spec.hidden);
                widths.push(d);
                Body::Mlp {
                    layers: widths.windows(2).map(|w| DenseLayer::new(w[0], w[1], rng)).collect(),
                }
            }
            EncoderFamily::TinyCnn => {
                let mut ch = vec![spec.input_shape[0]];
                ch.extend(spec.cnn_channels());
                let convs = ch
                    .windows(2)
                    .map(|w| Conv2dLayer::new(w[0], w[1], CONV_KERNEL, 1, 1, rng))
                    .collect::<Result<Vec<_>>>()?;
                Body::TinyCnn {
                    convs,
                    projection: DenseLayer::new(*ch.last().unwrap(), d, rng),
                }
            }
            EncoderFamily::TinyAttention => {
                let (t, tok) = spec.tokens()?;
                let m = spec.model_dim();
                Body::TinyAttention {
                    embed: DenseLayer::new(tok, m, rng),
                    position: Tensor::zeros(&[t, m]),
                    block: AttentionBlock::new(m, rng),
                    projection: DenseLayer::new(m, d, rng),
                }
            }
        };
        Ok(Self { spec, body })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn feature_dim(&self) -> usize {
        self.spec.feature_dim
    }

    /// Weight multiply-accumulates for a single input.
    pub fn flops(&self) -> u64 {
        match &self.body {
            Body::Mlp { layers } => layers.iter().map(|l| l.flops(1)).sum(),
            Body::TinyCnn { convs, projection } => {
                let (mut h, mut w) = (self.spec.input_shape[1], self.spec.input_shape[2]);
                let mut total = 0;
                for conv in convs {
                    total += conv.flops(h, w);
                    let (oh, ow) = conv.output_hw(h, w).unwrap_or((0, 0));
                    h = oh / 2;
                    w = ow / 2;
                }
                total + projection.flops(1)
            }
            Body::TinyAttention {
                embed,
                position,
                block,
                projection,
            } => {
                let t = position.shape()[0];
                embed.flops(t) + block.flops(t) + projection.flops(1)
            }
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundEncoder {
        let body = match &self.body {
            Body::Mlp { layers } => BoundBody::Mlp(layers.iter().map(|l| l.bind(tape)).collect()),
            Body::TinyCnn { convs, projection } => BoundBody::TinyCnn {
                convs: convs.iter().map(|c| c.bind(tape)).collect(),
                projection: projection.bind(tape),
            },
            Body::TinyAttention {
                embed,
                position,
                block,
                projection,
            } => BoundBody::TinyAttention {
                embed: embed.bind(tape),
                position: tape.param(position.clone()),
                block: block.bind(tape),
                projection: projection.bind(tape),
            },
        };
        BoundEncoder {
            input_shape: self.spec.input_shape.clone(),
            patch: self.spec.patch,
            body,
        }
    }

    pub fn encode(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        self.bind(tape).encode(tape, x)
    }
}

impl Parameterized for Encoder {
    fn params(&self) -> Vec<&Tensor> {
        match &self.body {
            Body::Mlp { layers } => layers.iter().flat_map(|l| l.params()).collect(),
            Body::TinyCnn { convs, projection } => convs
                .iter()
                .flat_map(|c| c.params())
                .chain(projection.params())
                .collect(),
            Body::TinyAttention {
                embed,
                position,
                block,
                projection,
            } => {
                let mut p = embed.params();
                p.push(position);
                p.extend(block.params());
                p.extend(projection.params());
                p
            }
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match &mut self.body {
            Body::Mlp { layers } => layers.iter_mut().flat_map(|l| l.params_mut()).collect(),
            Body::TinyCnn { convs, projection } => {
                let mut p: Vec<&mut Tensor> = convs.iter_mut().flat_map(|c| c.params_mut()).collect();
                p.extend(projection.params_mut());
                p
            }
            Body::TinyAttention {
                embed,
                position,
                block,
                projection,
            } => {
                let mut p = embed.params_mut();
                p.push(position);
                p.extend(block.params_mut());
                p.extend(projection.params_mut());
                p
            }
        }
    }
}

#[derive(Debug, Clone)]
enum BoundBody {
    Mlp(Vec<BoundDense>),
    TinyCnn {
        convs: Vec<BoundConv2d>,
        projection: BoundDense,
    },
    TinyAttention {
        embed: BoundDense,
        position: Var,
        block: BoundAttention,
        projection: BoundDense,
    },
}

#[derive(Debug, Clone)]
pub struct BoundEncoder {
    input_shape: Vec<usize>,
    patch: usize,
    body: BoundBody,
}

impl BoundEncoder {
    /// `x` must be `n×input_shape...`; returns `n×feature_dim`.
    pub fn encode(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let shape = tape.shape(x);
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] {
            return Err(Error::dim("encode", shape, &self.input_shape));
        }
        let n = shape[0];
        match &self.body {
            BoundBody::Mlp(layers) => {
                let width: usize = self.input_shape.iter().product();
                let mut h = tape.reshape(x, &[n, width])?;
                for (i, layer) in layers.iter().enumerate() {
                    h = layer.forward(tape, h)?;
                    if i + 1 < layers.len() {
                        h = tape.relu(h);
                    }
                }
                Ok(h)
            }
            BoundBody::TinyCnn { convs, projection } => {
                let mut h = x;
                for conv in convs {
                    h = conv.forward(tape, h)?;
                    h = tape.relu(h);
                    h = tape.avg_pool2d(h, 2)?;
                }
                let s = tape.shape(h).to_vec();
                let h = tape.reshape(h, &[s[0], s[1], s[2] * s[3]])?;
                let pooled = tape.mean_axis(h, 2)?;
                projection.forward(tape, pooled)
            }
            BoundBody::TinyAttention {
                embed,
                position,
                block,
                projection,
            } => {
                let tokens = tape.patchify(x, self.patch)?;
                let h = embed.forward(tape, tokens)?;
                let h = tape.add(h, *position)?;
                let h = block.forward(tape, h)?.output;
                let pooled = tape.mean_axis(h, 1)?;
                let pooled = tape.gelu(pooled);
                projection.forward(tape, pooled)
            }
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        match &self.body {
            BoundBody::Mlp(layers) => layers.iter().flat_map(|l| l.vars()).collect(),
            BoundBody::TinyCnn { convs, projection } => convs
                .iter()
                .flat_map(|c| c.vars())
                .chain(projection.vars())
                .collect(),
            BoundBody::TinyAttention {
                embed,
                position,
                block,
                projection,
            } => {
                let mut v = embed.vars();
                v.push(*position);
                v.extend(block.vars());
                v.extend(projection.vars());
                v
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn rng() -> crate::rng::Rng {
        stream(21, Stream::EncoderInit)
    }

    fn random_batch(shape: &[usize], seed: u64) -> Tensor {
        let mut r = stream(seed, Stream::Synthetic);
        let mut t = Tensor::zeros(shape);
        t.data_mut().iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
        t
    }

    #[test]
    fn mlp_identity_projection_returns_input() {
        let mut enc = Encoder::new(EncoderSpec::mlp(5, &[], 5), &mut rng()).unwrap();
        let mut p = enc.params_mut();
        *p[0] = Tensor::eye(5);
        *p[1] = Tensor::zeros(&[5]);
        let mut tape = Tape::new();
        let x = tape.constant(random_batch(&[3, 5], 1));
        let f = enc.encode(&mut tape, x).unwrap();
        assert_eq!(tape.value(f).data(), tape.value(x).data());
    }

    #[test]
    fn mlp_parameter_count_closed_form() {
        let spec = EncoderSpec::mlp(64, &[32], 16);
        assert_eq!(spec.parameter_count(), 2_608);
        assert_eq!(Encoder::new(spec, &mut rng()).unwrap().parameter_count(), 2_608);
    }

    #[test]
    fn tiny_cnn_shape_contract() {
        let spec = EncoderSpec::tiny_cnn([3, 16, 16], &[8, 16], 12);
        let enc = Encoder::new(spec, &mut rng()).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(random_batch(&[2, 3, 16, 16], 2));
        let f = enc.encode(&mut tape, x).unwrap();
        assert_eq!(tape.shape(f), &[2, 12]);
    }

    #[test]
    fn tiny_attention_shape_contract() {
        let spec = EncoderSpec::tiny_attention([1, 8, 8], 4, 6, 10);
        let enc = Encoder::new(spec, &mut rng()).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(random_batch(&[3, 1, 8, 8], 3));
        let f = enc.encode(&mut tape, x).unwrap();
        assert_eq!(tape.shape(f), &[3, 10]);
    }

    #[test]
    fn parameter_count_matches_enumeration() {
        let specs = [
            EncoderSpec::mlp(20, &[7, 5], 3),
            EncoderSpec::tiny_cnn([2, 8, 8], &[], 9),
            EncoderSpec::tiny_cnn([1, 12, 4], &[3, 4, 5], 2),
            EncoderSpec::tiny_attention([3, 8, 4], 2, 5, 7),
            EncoderSpec::tiny_attention([1, 4, 4], 4, 0, 6),
        ];
        for spec in specs.into_iter().filter(|s| s.validate().is_ok()) {
            let enc = Encoder::new(spec.clone(), &mut rng()).unwrap();
            let enumerated: usize = enc.params().iter().map(|t| t.len()).sum();
            assert_eq!(spec.parameter_count(), enumerated, "{spec:?}");
        }
    }

    #[test]
    fn wrong_input_shape_is_dimension_error() {
        let enc = Encoder::new(EncoderSpec::mlp(6, &[4], 3), &mut rng()).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[2, 5]));
        assert!(matches!(enc.encode(&mut tape, x), Err(Error::Dimension { .. })));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(EncoderSpec::tiny_cnn([1, 3, 3], &[4, 4], 2).validate().is_err());
        assert!(EncoderSpec::tiny_attention([1, 6, 6], 4, 4, 2).validate().is_err());
        assert!(EncoderSpec::mlp(4, &[0], 2).validate().is_err());
    }

    #[test]
    fn bound_vars_align_with_params() {
        for spec in [
            EncoderSpec::mlp(6, &[4], 3),
            EncoderSpec::tiny_cnn([1, 8, 8], &[], 4),
            EncoderSpec::tiny_attention([1, 8, 8], 4, 5, 4),
        ] {
            let enc = Encoder::new(spec, &mut rng()).unwrap();
            let mut tape = Tape::new();
            let bound = enc.bind(&mut tape);
            let vars = bound.vars();
            let params = enc.params();
            assert_eq!(vars.len(), params.len());
            for (v, p) in vars.iter().zip(params) {
                assert_eq!(tape.value(*v), p);
            }
        }
    }

    #[test]
    fn family_names_roundtrip() {
        for f in EncoderFamily::ALL {
            assert_eq!(f.name().parse::<EncoderFamily>().unwrap(), f);
        }
    }
}
