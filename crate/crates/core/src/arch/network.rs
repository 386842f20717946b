use rand::Rng;
use serde::{Deserialize, Serialize};

use super::accounting::{head_flop_deltas, head_parameter_deltas, HeadDims, HeadFlopCounts, HeadParameterCounts};
use crate::autodiff::{Tape, Tensor, Var};
use crate::data::Taxonomy;
use crate::encoder::{BoundEncoder, Encoder, EncoderSpec};
use crate::error::{Error, Result};
use crate::nn::{BoundDense, DenseLayer, DropoutSpec, Parameterized, Phase};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureMode {
    /// Encoder plus a model head only.
    SingleTask,
    /// Make and model heads both read the shared features.
    Parallel,
    /// The model head reads the shared features concatenated with the
    /// make head's raw logits.
    Cascaded,
}

impl ArchitectureMode {
    pub const ALL: [ArchitectureMode; 3] = [
        ArchitectureMode::SingleTask,
        ArchitectureMode::Parallel,
        ArchitectureMode::Cascaded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureMode::SingleTask => "single_task",
            ArchitectureMode::Parallel => "parallel",
            ArchitectureMode::Cascaded => "cascaded",
        }
    }

    pub fn has_make_head(self) -> bool {
        self != ArchitectureMode::SingleTask
    }
}

impl std::str::FromStr for ArchitectureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture mode {s:?}")))
    }
}

impl std::fmt::Display for ArchitectureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the dropout before the heads is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutPlacement {
    /// One mask on the encoder output, seen by every head.
    #[default]
    SharedFeatures,
    /// Only the model head's copy of the features is dropped.
    ModelHeadOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyBinding {
    pub num_makes: usize,
    pub num_models: usize,
    pub hash: u64,
}

impl From<&Taxonomy> for TaxonomyBinding {
    fn from(t: &Taxonomy) -> Self {
        Self {
            num_makes: t.num_makes(),
            num_models: t.num_models(),
            hash: t.hash(),
        }
    }
}

/// Declarative description of encoder and head wiring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub encoder: EncoderSpec,
    pub mode: ArchitectureMode,
    pub dropout: f64,
    #[serde(default)]
    pub dropout_placement: DropoutPlacement,
    /// Cascaded only: also apply dropout to the make logits before they
    /// are concatenated.
    #[serde(default)]
    pub cascade_logit_dropout: bool,
    #[serde(default)]
    pub taxonomy: Option<TaxonomyBinding>,
}

impl NetworkSpec {
    pub fn new(encoder: EncoderSpec, mode: ArchitectureMode, dropout: f64) -> Self {
        Self {
            encoder,
            mode,
            dropout,
            dropout_placement: DropoutPlacement::default(),
            cascade_logit_dropout: false,
            taxonomy: None,
        }
    }

    pub fn with_taxonomy(mut self, taxonomy: &Taxonomy) -> Self {
        self.taxonomy = Some(taxonomy.into());
        self
    }

    /// Initializes parameters from independent streams of `seed`, so the
    /// encoder and model head come out the same in every mode.
    pub fn build(&self, seed: u64) -> Result<MtlNetwork> {
        let binding = self
            .taxonomy
            .ok_or_else(|| Error::Config("network has no taxonomy bound".into()))?;
        let dropout = DropoutSpec::new(self.dropout)?;
        let encoder = Encoder::new(self.encoder.clone(), &mut stream(seed, Stream::EncoderInit))?;
        let d = encoder.feature_dim();
        let (k, m) = (binding.num_makes, binding.num_models);
        let make_head = self
            .mode
            .has_make_head()
            .then(|| DenseLayer::new(d, k, &mut stream(seed, Stream::MakeHeadInit)));
        let model_in = if self.mode == ArchitectureMode::Cascaded { d + k } else { d };
        let model_head = DenseLayer::new(model_in, m, &mut stream(seed, Stream::ModelHeadInit));
        Ok(MtlNetwork {
            spec: self.clone(),
            binding,
            encoder,
            dropout,
            make_head,
            model_head,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtlNetwork {
    spec: NetworkSpec,
    binding: TaxonomyBinding,
    encoder: Encoder,
    dropout: DropoutSpec,
    make_head: Option<DenseLayer>,
    model_head: DenseLayer,
}

impl MtlNetwork {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn mode(&self) -> ArchitectureMode {
        self.spec.mode
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn make_head(&self) -> Option<&DenseLayer> {
        self.make_head.as_ref()
    }

    pub fn model_head(&self) -> &DenseLayer {
        &self.model_head
    }

    pub fn make_head_mut(&mut self) -> Option<&mut DenseLayer> {
        self.make_head.as_mut()
    }

    pub fn model_head_mut(&mut self) -> &mut DenseLayer {
        &mut self.model_head
    }

    pub fn num_makes(&self) -> usize {
        self.binding.num_makes
    }

    pub fn num_models(&self) -> usize {
        self.binding.num_models
    }

    pub fn taxonomy_hash(&self) -> u64 {
        self.binding.hash
    }

    pub fn check_taxonomy(&self, taxonomy: &Taxonomy) -> Result<()> {
        if TaxonomyBinding::from(taxonomy) != self.binding {
            return Err(Error::Config(format!(
                "network bound to taxonomy {:016x} ({} makes, {} models), data has {:016x} ({} makes, {} models)",
                self.binding.hash,
                self.binding.num_makes,
                self.binding.num_models,
                taxonomy.hash(),
                taxonomy.num_makes(),
                taxonomy.num_models()
            )));
        }
        Ok(())
    }

    pub fn head_dims(&self) -> HeadDims {
        HeadDims {
            feature_dim: self.encoder.feature_dim(),
            makes: self.num_makes(),
            models: self.num_models(),
        }
    }

    /// Single-task total plus the parallel and cascaded deltas, from the
    /// closed form for this network's `d`, `K` and `M`.
    pub fn head_parameter_counts(&self) -> HeadParameterCounts {
        let dims = self.head_dims();
        let (parallel_delta, cascaded_extra_delta) = head_parameter_deltas(dims);
        HeadParameterCounts {
            base: (self.encoder.parameter_count() + dims.models * (dims.feature_dim + 1)) as u64,
            parallel_delta,
            cascaded_extra_delta,
        }
    }

    pub fn head_flop_counts(&self) -> HeadFlopCounts {
        head_flop_deltas(self.head_dims())
    }

    /// Weight multiply-accumulates of a full forward pass for one input.
    pub fn flops(&self) -> u64 {
        self.encoder.flops() + self.make_head.as_ref().map_or(0, |h| h.flops(1)) + self.model_head.flops(1)
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundNetwork {
        BoundNetwork {
            encoder: self.encoder.bind(tape),
            make_head: self.make_head.as_ref().map(|h| h.bind(tape)),
            model_head: self.model_head.bind(tape),
            mode: self.spec.mode,
            dropout: self.dropout,
            placement: self.spec.dropout_placement,
            cascade_logit_dropout: self.spec.cascade_logit_dropout,
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, phase: Phase, rng: &mut impl Rng) -> Result<ForwardOutput> {
        self.bind(tape).forward(tape, x, phase, rng)
    }

    /// Evaluation-mode logits `(model, make)` for a batch.
    pub fn predict(&self, batch: &Tensor) -> Result<(Tensor, Option<Tensor>)> {
        let mut tape = Tape::new();
        let x = tape.constant(batch.clone());
        // eval mode never draws from the generator
        let mut unused = stream(0, Stream::Dropout);
        let out = self.forward(&mut tape, x, Phase::Eval, &mut unused)?;
        Ok((
            tape.value(out.model_logits).clone(),
            out.make_logits.map(|v| tape.value(v).clone()),
        ))
    }
}

impl Parameterized for MtlNetwork {
    fn params(&self) -> Vec<&Tensor> {
        let mut p = self.encoder.params();
        if let Some(h) = &self.make_head {
            p.extend(h.params());
        }
        p.extend(self.model_head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.encoder.params_mut();
        if let Some(h) = &mut self.make_head {
            p.extend(h.params_mut());
        }
        p.extend(self.model_head.params_mut());
        p
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOutput {
    pub features: Var,
    pub model_logits: Var,
    /// Absent exactly in single-task mode.
    pub make_logits: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct BoundNetwork {
    pub encoder: BoundEncoder,
    pub make_head: Option<BoundDense>,
    pub model_head: BoundDense,
    mode: ArchitectureMode,
    dropout: DropoutSpec,
    placement: DropoutPlacement,
    cascade_logit_dropout: bool,
}

impl BoundNetwork {
    pub fn forward(&self, tape: &mut Tape, x: Var, phase: Phase, rng: &mut impl Rng) -> Result<ForwardOutput> {
        let features = self.encoder.encode(tape, x)?;
        let (make_in, model_in) = match self.placement {
            DropoutPlacement::SharedFeatures => {
                let dropped = self.dropout.forward(tape, features, phase, rng)?;
                (dropped, dropped)
            }
            DropoutPlacement::ModelHeadOnly => (features, self.dropout.forward(tape, features, phase, rng)?),
        };
        let make_logits = match &self.make_head {
            Some(head) => Some(head.forward(tape, make_in)?),
            None => None,
        };
        let model_logits = match (self.mode, make_logits) {
            (ArchitectureMode::Cascaded, Some(make)) => {
                let make = if self.cascade_logit_dropout {
                    self.dropout.forward(tape, make, phase, rng)?
                } else {
                    make
                };
                let joined = tape.concat(&[model_in, make], 1)?;
                self.model_head.forward(tape, joined)?
            }
            _ => self.model_head.forward(tape, model_in)?,
        };
        Ok(ForwardOutput {
            features,
            model_logits,
            make_logits,
        })
    }

    /// Parameter handles in the same order as `MtlNetwork::params`.
    pub fn vars(&self) -> Vec<Var> {
        let mut v = self.encoder.vars();
        if let Some(h) = &self.make_head {
            v.extend(h.vars());
        }
        v.extend(self.model_head.vars());
        v
    }
}
