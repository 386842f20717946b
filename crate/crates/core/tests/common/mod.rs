#![allow(dead_code)]

use hiertask::arch::{ArchitectureMode, MtlNetwork, NetworkSpec};
use hiertask::autodiff::gradcheck::{compare, numeric_gradient, GradCheckConfig, GradCheckReport};
use hiertask::data::Taxonomy;
use hiertask::encoder::{EncoderFamily, EncoderSpec};
use hiertask::nn::{Parameterized, Phase};
use hiertask::rng::{stream, Rng as StreamRng, Stream};
use hiertask::train::{joint_loss, LossWeights};
use hiertask::{Result, Tape, Tensor};
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(lo..hi));
    t
}

/// Values in ±[0.1, 1], away from kinks at zero.
pub fn signed_away_from_zero(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        let mag = rng.random_range(0.1..1.0);
        *v = if rng.random_bool(0.5) { mag } else { -mag };
    }
    t
}

pub fn labels(n: usize, classes: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..classes)).collect()
}

/// `makes` makes with `per` models each, models numbered make-major.
pub fn grid_taxonomy(makes: usize, per: usize) -> Taxonomy {
    let pairs: Vec<(String, String)> = (0..makes * per)
        .map(|m| (format!("model{m:03}"), format!("make{:03}", m / per)))
        .collect();
    Taxonomy::from_pairs(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap()
}

/// A small encoder of each family reading 1×4×4 inputs.
pub fn small_encoder(family: EncoderFamily) -> EncoderSpec {
    match family {
        EncoderFamily::Mlp => EncoderSpec::mlp(16, &[6], 5),
        EncoderFamily::TinyCnn => EncoderSpec::tiny_cnn([1, 4, 4], &[2, 3], 5),
        EncoderFamily::TinyAttention => EncoderSpec::tiny_attention([1, 4, 4], 2, 4, 5),
    }
}

pub fn small_network(family: EncoderFamily, mode: ArchitectureMode, dropout: f64, seed: u64) -> MtlNetwork {
    NetworkSpec::new(small_encoder(family), mode, dropout)
        .with_taxonomy(&grid_taxonomy(2, 3))
        .build(seed)
        .unwrap()
}

pub fn network_input(net: &MtlNetwork, n: usize, seed: u64) -> Tensor {
    let mut shape = vec![n];
    shape.extend(&net.spec().encoder.input_shape);
    uniform(&shape, -1.0, 1.0, &mut rng(seed))
}

/// Joint training loss of `net` on a fixed batch, with a dropout stream
/// reseeded on every call so each evaluation sees the same mask.
pub fn network_loss(net: &MtlNetwork, x: &Tensor, models: &[usize], makes: &[usize], w: LossWeights) -> Result<(Tape, Vec<hiertask::Var>, hiertask::Var)> {
    let mut tape = Tape::new();
    let bound = net.bind(&mut tape);
    let xv = tape.constant(x.clone());
    let mut drop_rng = stream(99, Stream::Dropout);
    let out = bound.forward(&mut tape, xv, Phase::Train, &mut drop_rng)?;
    let terms = joint_loss(&mut tape, &out, models, Some(makes), w)?;
    Ok((tape, bound.vars(), terms.total))
}

/// Checks tape gradients of the joint loss for every network parameter
/// against central differences.
pub fn check_network(net: &MtlNetwork, x: &Tensor, models: &[usize], makes: &[usize], w: LossWeights) -> GradCheckReport {
    let cfg = GradCheckConfig::default();
    let (mut tape, vars, loss) = network_loss(net, x, models, makes, w).unwrap();
    tape.backward(loss).unwrap();
    let analytic: Vec<Tensor> = vars.iter().map(|v| tape.grad_or_zeros(*v)).collect();
    let params: Vec<Tensor> = net.params().into_iter().cloned().collect();
    let numeric = numeric_gradient(
        |ps| {
            let mut probe = net.clone();
            for (dst, src) in probe.params_mut().into_iter().zip(ps) {
                *dst = src.clone();
            }
            let (tape, _, loss) = network_loss(&probe, x, models, makes, w)?;
            tape.value(loss).item()
        },
        &params,
        cfg.epsilon,
    )
    .unwrap();
    compare(&analytic, &numeric, &cfg)
}
