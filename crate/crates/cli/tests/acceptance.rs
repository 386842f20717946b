//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances are pinned in the constants below.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hiertask::arch::{ArchitectureMode, ForwardOutput, MtlNetwork, NetworkSpec};
use hiertask::autodiff::gradcheck::{check, compare, numeric_gradient, GradCheckConfig, GradCheckReport};
use hiertask::data::{generate_synthetic, split, Dataset, DatasetSplit, SyntheticSpec, Taxonomy, DEFAULT_RATIOS};
use hiertask::encoder::{EncoderFamily, EncoderSpec};
use hiertask::metrics::{consistency_rate, derived_make_accuracy, model_accuracy, top_k_accuracy};
use hiertask::nn::{Parameterized, Phase};
use hiertask::rng::{stream, Stream};
use hiertask::train::{evaluate, joint_loss, train, train_with_observer, LossWeights, ScheduleConfig, TrainConfig};
use hiertask::{Tape, Tensor, Var};
use rand::{Rng, SeedableRng};

const FD_EPSILON: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-4;
const MIN_GRAD_CASES: usize = 100;
const LOSS_TOL: f64 = 1e-12;
const LN196_TOL: f64 = 1e-9;
const CONVERGENCE_ACC: f64 = 0.95;
const CENTROID_ACC: f64 = 0.99;
const TREND_MARGIN: f64 = 0.02;
const TREND_BAND: (f64, f64) = (0.5, 0.8);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rng(seed: u64) -> hiertask::rng::Rng {
    hiertask::rng::Rng::seed_from_u64(seed)
}

fn uniform(shape: &[usize], lo: f64, hi: f64, r: &mut impl Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    t.data_mut().iter_mut().for_each(|v| *v = r.random_range(lo..hi));
    t
}

fn grid_taxonomy(makes: usize, per: usize) -> Taxonomy {
    let pairs: Vec<(String, String)> = (0..makes * per)
        .map(|m| (format!("model{m:03}"), format!("make{:03}", m / per)))
        .collect();
    Taxonomy::from_pairs(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap()
}

fn ce_oracle(logits: &Tensor, labels: &[usize]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &l)| {
            let row = logits.row(r);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            z.ln() - row[l]
        })
        .sum();
    total / labels.len() as f64
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hiertask"))
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let out = binary()
        .args(["accounting", "1024", "49", "196"])
        .args(["--expect-parallel", &(7_204_981u64 - 7_154_756).to_string()])
        .args(["--expect-cascaded", &(7_214_585u64 - 7_204_981).to_string()])
        .args(["--expect-parallel-flops", &(2_896_233_984u64 - 2_896_183_808).to_string()])
        .args(["--expect-cascaded-flops", &(5_455_938_692u64 - 5_455_929_088).to_string()])
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    ensure(out.status.success(), format!("accounting reported a mismatch:\n{text}"))?;
    let value = |name: &str| -> Option<u64> {
        text.lines()
            .find(|l| l.starts_with(name))
            .and_then(|l| l.split_whitespace().nth(1))
            .and_then(|v| v.parse().ok())
    };
    let got = [
        value("parallel_delta_params"),
        value("cascaded_extra_delta_params"),
        value("parallel_delta_flops"),
        value("cascaded_extra_delta_flops"),
    ];
    ensure(got == [Some(50_225), Some(9_604), Some(50_176), Some(9_604)], format!("{got:?}"))?;
    ensure(text.matches("PASS").count() == 4, "expected four PASS flags")?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok("params 50225 / 9604, FLOPs 50176 / 9604, exact".into())
}

fn network_loss(net: &MtlNetwork, x: &Tensor, models: &[usize], makes: &[usize]) -> hiertask::Result<(Tape, Vec<Var>, Var)> {
    let mut tape = Tape::new();
    let bound = net.bind(&mut tape);
    let xv = tape.constant(x.clone());
    let out = bound.forward(&mut tape, xv, Phase::Train, &mut stream(7, Stream::Dropout))?;
    let w = LossWeights::new(0.6, 0.4)?;
    let total = joint_loss(&mut tape, &out, models, Some(makes), w)?.total;
    Ok((tape, bound.vars(), total))
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let cfg = GradCheckConfig {
        epsilon: FD_EPSILON,
        rel_tolerance: FD_REL_TOL,
        ..Default::default()
    };
    type Build = Box<dyn Fn(&mut Tape, &[Var]) -> hiertask::Result<Var>>;
    let ops: Vec<(&str, Vec<Vec<usize>>, Build)> = vec![
        ("matmul", vec![vec![3, 4], vec![4, 2]], Box::new(|t, v| t.matmul(v[0], v[1]))),
        ("matmul3x2", vec![vec![2, 3, 4], vec![4, 2]], Box::new(|t, v| t.matmul(v[0], v[1]))),
        ("matmul3x3", vec![vec![2, 3, 4], vec![2, 4, 2]], Box::new(|t, v| t.matmul(v[0], v[1]))),
        ("add", vec![vec![3, 4], vec![4]], Box::new(|t, v| t.add(v[0], v[1]))),
        ("mul", vec![vec![3, 4], vec![4]], Box::new(|t, v| t.mul(v[0], v[1]))),
        ("scale", vec![vec![6]], Box::new(|t, v| Ok(t.scale(v[0], 1.7)))),
        ("relu", vec![vec![4, 5]], Box::new(|t, v| Ok(t.relu(v[0])))),
        ("gelu", vec![vec![4, 5]], Box::new(|t, v| Ok(t.gelu(v[0])))),
        ("mean_axis", vec![vec![2, 3, 4]], Box::new(|t, v| t.mean_axis(v[0], 1))),
        ("concat", vec![vec![2, 3], vec![2, 2]], Box::new(|t, v| t.concat(&[v[0], v[1]], 1))),
        ("transpose", vec![vec![2, 3, 4]], Box::new(|t, v| t.transpose(v[0]))),
        ("patchify", vec![vec![1, 2, 4, 4]], Box::new(|t, v| t.patchify(v[0], 2))),
        ("softmax", vec![vec![3, 5]], Box::new(|t, v| t.softmax(v[0]))),
        ("layer_norm", vec![vec![3, 5]], Box::new(|t, v| Ok(t.layer_norm(v[0], 1e-5)))),
        (
            "conv2d",
            vec![vec![1, 2, 5, 5], vec![3, 2, 3, 3], vec![3]],
            Box::new(|t, v| t.conv2d(v[0], v[1], v[2], 2, 1)),
        ),
        ("avg_pool2d", vec![vec![1, 2, 4, 4]], Box::new(|t, v| t.avg_pool2d(v[0], 2))),
    ];
    let mut total = GradCheckReport::default();
    let mut cases = 0;
    for (name, shapes, build) in &ops {
        for case in 0..6u64 {
            let mut r = rng(case * 100 + cases as u64);
            let inputs: Vec<Tensor> = shapes.iter().map(|s| uniform(s, -1.0, 1.0, &mut r)).collect();
            let report = check(
                |t, v| {
                    let y = build(t, v)?;
                    // fixed pseudo-random upstream weights
                    let n = t.value(y).len();
                    let w = Tensor::new(
                        t.shape(y).to_vec(),
                        (0..n).map(|i| ((i * 7919 + 13) % 17) as f64 / 8.0 - 1.0).collect(),
                    )?;
                    let wv = t.constant(w);
                    let p = t.mul(y, wv)?;
                    Ok(t.sum(p))
                },
                &inputs,
                &cfg,
            )
            .map_err(|e| format!("{name}: {e}"))?;
            ensure(report.passed(), format!("{name} case {case}: {:?}", report.mismatches.first()))?;
            total.merge(report);
            cases += 1;
        }
        for case in 0..2u64 {
            let mut r = rng(9000 + case);
            let x = uniform(&[4, 6], -2.0, 2.0, &mut r);
            let y: Vec<usize> = (0..4).map(|_| r.random_range(0..6)).collect();
            let report = check(|t, v| t.cross_entropy(v[0], &y), &[x], &cfg).map_err(|e| e.to_string())?;
            ensure(report.passed(), format!("cross_entropy: {:?}", report.mismatches.first()))?;
            total.merge(report);
            cases += 1;
        }
    }

    let tax = grid_taxonomy(2, 3);
    for family in EncoderFamily::ALL {
        let enc = match family {
            EncoderFamily::Mlp => EncoderSpec::mlp(16, &[6], 5),
            EncoderFamily::TinyCnn => EncoderSpec::tiny_cnn([1, 4, 4], &[2, 3], 5),
            EncoderFamily::TinyAttention => EncoderSpec::tiny_attention([1, 4, 4], 2, 4, 5),
        };
        for mode in ArchitectureMode::ALL {
            for seed in 0..2u64 {
                let net = NetworkSpec::new(enc.clone(), mode, 0.25).with_taxonomy(&tax).build(seed).unwrap();
                let mut shape = vec![3];
                shape.extend(&enc.input_shape);
                let mut r = rng(50 + seed);
                let x = uniform(&shape, -1.0, 1.0, &mut r);
                let models: Vec<usize> = (0..3).map(|_| r.random_range(0..6)).collect();
                let makes: Vec<usize> = models.iter().map(|m| m / 3).collect();
                let (mut tape, vars, loss) = network_loss(&net, &x, &models, &makes).map_err(|e| e.to_string())?;
                tape.backward(loss).map_err(|e| e.to_string())?;
                let analytic: Vec<Tensor> = vars.iter().map(|v| tape.grad_or_zeros(*v)).collect();
                let params: Vec<Tensor> = net.params().into_iter().cloned().collect();
                let numeric = numeric_gradient(
                    |ps| {
                        let mut probe = net.clone();
                        probe.params_mut().into_iter().zip(ps).for_each(|(d, s)| *d = s.clone());
                        let (t, _, l) = network_loss(&probe, &x, &models, &makes)?;
                        t.value(l).item()
                    },
                    &params,
                    FD_EPSILON,
                )
                .map_err(|e| e.to_string())?;
                let report = compare(&analytic, &numeric, &cfg);
                ensure(report.passed(), format!("{family}/{mode}: {:?}", report.mismatches.first()))?;
                total.merge(report);
                cases += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(cases >= MIN_GRAD_CASES, format!("only {cases} cases"))?;
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{cases} cases ({} elements incl. 9 encoder x mode networks), max rel err {:.2e} < {FD_REL_TOL:e}",
        total.checked, total.max_relative_error
    ))
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for batch in 0..1000u64 {
        let mut r = rng(batch);
        let n = r.random_range(1..10);
        let model = uniform(&[n, 8], -4.0, 4.0, &mut r);
        let make = uniform(&[n, 3], -4.0, 4.0, &mut r);
        let models: Vec<usize> = (0..n).map(|_| r.random_range(0..8)).collect();
        let makes: Vec<usize> = (0..n).map(|_| r.random_range(0..3)).collect();
        let (l1, l2) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        let mut tape = Tape::new();
        let out = ForwardOutput {
            features: tape.constant(Tensor::zeros(&[n, 1])),
            model_logits: tape.constant(model.clone()),
            make_logits: Some(tape.constant(make.clone())),
        };
        let w = LossWeights::new(l1, l2).map_err(|e| e.to_string())?;
        let total = joint_loss(&mut tape, &out, &models, Some(&makes), w).map_err(|e| e.to_string())?.total;
        let got = tape.value(total).item().unwrap();
        let err = (got - (l1 * ce_oracle(&model, &models) + l2 * ce_oracle(&make, &makes))).abs();
        worst = worst.max(err);
    }
    ensure(worst <= LOSS_TOL, format!("max deviation {worst:e}"))?;
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[3, 196]));
    let ce = tape.cross_entropy(x, &[0, 98, 195]).unwrap();
    let dev = (tape.value(ce).item().unwrap() - 196f64.ln()).abs();
    ensure(dev <= LN196_TOL, format!("uniform CE off by {dev:e}"))?;
    Ok(format!("1000 batches max |dev| {worst:.1e} <= {LOSS_TOL:e}; |CE - ln 196| = {dev:.1e}"))
}

fn synthetic(spec: &SyntheticSpec, split_seed: u64) -> (Dataset, DatasetSplit) {
    let data = generate_synthetic(spec).unwrap();
    let s = split(&data.samples, DEFAULT_RATIOS, split_seed).unwrap();
    (data, s)
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let (data, s) = synthetic(&SyntheticSpec::default(), 0);
    let cfg = TrainConfig {
        epochs: 10,
        weights: LossWeights::new(1.0, 0.0).unwrap(),
        ..Default::default()
    };
    let trajectory = |mode| -> Vec<Vec<u64>> {
        let net = NetworkSpec::new(EncoderSpec::mlp(64, &[64], 64), mode, 0.25)
            .with_taxonomy(&data.taxonomy)
            .build(0)
            .unwrap();
        let mut snaps = Vec::new();
        train_with_observer(net, &s, &data.taxonomy, &cfg, |_, n| {
            snaps.push(n.model_head().params().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect());
        })
        .unwrap();
        snaps
    };
    let single = trajectory(ArchitectureMode::SingleTask);
    let parallel = trajectory(ArchitectureMode::Parallel);
    ensure(single.len() == 10, "expected 10 epochs")?;
    for (epoch, (a, b)) in single.iter().zip(&parallel).enumerate() {
        ensure(a == b, format!("model head differs after epoch {}", epoch + 1))?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("model head bitwise equal after each of 10 epochs ({} scalars)", single[0].len()))
}

fn centroid_accuracy(data: &Dataset, s: &DatasetSplit) -> f64 {
    let m = data.taxonomy.num_models();
    let dim = data.feature_dim().unwrap();
    let mut c = vec![vec![0.0; dim]; m];
    let mut n = vec![0.0; m];
    for x in &s.train {
        n[x.model_label] += 1.0;
        c[x.model_label].iter_mut().zip(&x.features).for_each(|(a, b)| *a += b);
    }
    c.iter_mut().zip(&n).for_each(|(v, k)| v.iter_mut().for_each(|a| *a /= k));
    let held: Vec<_> = s.val.iter().chain(&s.test).collect();
    let hits = held
        .iter()
        .filter(|x| {
            let d = |v: &Vec<f64>| v.iter().zip(&x.features).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            (0..m).min_by(|&a, &b| d(&c[a]).total_cmp(&d(&c[b]))) == Some(x.model_label)
        })
        .count();
    hits as f64 / held.len() as f64
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let (data, s) = synthetic(&SyntheticSpec::default(), 0);
    let centroid = centroid_accuracy(&data, &s);
    ensure(centroid >= CENTROID_ACC, format!("nearest-centroid oracle only {centroid}"))?;
    let cfg = TrainConfig {
        epochs: 200,
        weights: LossWeights::new(0.9, 0.1).unwrap(),
        ..Default::default()
    };
    let mut accs = Vec::new();
    for mode in ArchitectureMode::ALL {
        let net = NetworkSpec::new(EncoderSpec::mlp(64, &[64], 64), mode, 0.0)
            .with_taxonomy(&data.taxonomy)
            .build(0)
            .unwrap();
        let run = train(net, &s, &data.taxonomy, &cfg).map_err(|e| e.to_string())?;
        let acc = evaluate(&run.best, &s.test, &data.taxonomy).unwrap().model_acc;
        ensure(acc >= CONVERGENCE_ACC, format!("{mode} reached only {acc}"))?;
        accs.push(format!("{mode} {acc:.3}"));
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!("centroid oracle {centroid:.3}; test acc {}", accs.join(", ")))
}

fn criterion_6() -> Outcome {
    let tax = grid_taxonomy(4, 3);
    let ranked = |row: &[f64]| {
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        idx
    };
    for set in 0..1000u64 {
        let mut r = rng(set);
        let n = r.random_range(1..16);
        let grid = |shape: &[usize], r: &mut hiertask::rng::Rng| {
            let mut t = Tensor::zeros(shape);
            t.data_mut().iter_mut().for_each(|v| *v = r.random_range(0..5) as f64);
            t
        };
        let model = grid(&[n, 12], &mut r);
        let make = grid(&[n, 4], &mut r);
        let models: Vec<usize> = (0..n).map(|_| r.random_range(0..12)).collect();
        let makes: Vec<usize> = models.iter().map(|&m| tax.parent(m)).collect();
        let frac = |hits: usize| hits as f64 / n as f64;
        let err = |e: hiertask::Error| e.to_string();

        let acc = model_accuracy(&model, &models).map_err(err)?;
        ensure(acc == frac((0..n).filter(|&i| ranked(model.row(i))[0] == models[i]).count()), format!("model acc, set {set}"))?;
        let make_acc = model_accuracy(&make, &makes).map_err(err)?;
        ensure(make_acc == frac((0..n).filter(|&i| ranked(make.row(i))[0] == makes[i]).count()), format!("make acc, set {set}"))?;
        let derived = derived_make_accuracy(&model, &makes, &tax).map_err(err)?;
        ensure(
            derived == frac((0..n).filter(|&i| tax.parent(ranked(model.row(i))[0]) == makes[i]).count()),
            format!("derived make acc, set {set}"),
        )?;
        ensure(derived >= acc, format!("derived < model acc, set {set}"))?;
        let cons = consistency_rate(&model, Some(&make), &tax).map_err(err)?;
        ensure(
            cons == frac((0..n).filter(|&i| tax.parent(ranked(model.row(i))[0]) == ranked(make.row(i))[0]).count()),
            format!("consistency, set {set}"),
        )?;
        let mut prev = 0.0;
        for k in 1..=12 {
            let top = top_k_accuracy(&model, &models, k).map_err(err)?;
            ensure(
                top == frac((0..n).filter(|&i| ranked(model.row(i))[..k].contains(&models[i])).count()),
                format!("top-{k}, set {set}"),
            )?;
            ensure(top >= prev, format!("top-k not monotone, set {set}"))?;
            prev = top;
        }
        ensure(prev == 1.0, "top-M below 1")?;
    }
    Ok("1000 tie-heavy sets: all metrics equal sort oracles; top-k monotone; derived >= model".into())
}

fn criterion_7() -> Outcome {
    let cfg = ScheduleConfig::default();
    let s = cfg.schedule(1000).map_err(|e| e.to_string())?;
    let lr: Vec<f64> = (0..=1000).map(|t| s.lr_at(t).unwrap()).collect();
    let peak = s.peak_step();
    ensure(lr[0] == cfg.max_lr() / cfg.div_factor, "lr(0) != max_lr/div_factor")?;
    ensure(lr[peak] == cfg.max_lr(), "peak != max_lr")?;
    ensure(lr.iter().all(|&v| v <= cfg.max_lr()), "lr above max")?;
    ensure(lr[1000] < lr[0], "lr(T) not below lr(0)")?;
    ensure(lr[..=peak].windows(2).all(|w| w[0] < w[1]), "up phase not strictly increasing")?;
    ensure(lr[peak..].windows(2).all(|w| w[0] > w[1]), "down phase not strictly decreasing")?;
    ensure(s.lr_at(1001).is_err(), "out-of-range step accepted")?;
    Ok(format!("lr(0)={:e}, peak {:e} at step {peak}, lr(T)={:e}", lr[0], lr[peak], lr[1000]))
}

const SWEEP_27: &str = r#"
[base]
epochs = 10
[base.dataset]
source = "synthetic"
[base.encoder]
family = "mlp"
[axes]
modes = ["single_task", "parallel", "cascaded"]
weights = [[0.9, 0.1], [0.5, 0.5], [0.2, 0.8]]
dropouts = [0.0, 0.25, 0.5]
"#;

fn results_without_wall_ms(path: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    Ok(text.lines().map(|l| l.rsplit_once(',').unwrap().0).collect::<Vec<_>>().join("\n"))
}

fn criterion_8() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sweep = dir.path().join("sweep.toml");
    std::fs::write(&sweep, SWEEP_27).map_err(|e| e.to_string())?;
    let mut csvs = Vec::new();
    for (run, jobs) in [("a", "1"), ("b", "4")] {
        let out = dir.path().join(run);
        let status = binary()
            .args(["sweep", "--config"])
            .arg(&sweep)
            .args(["--jobs", jobs, "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), String::from_utf8_lossy(&status.stderr).to_string())?;
        csvs.push(results_without_wall_ms(&out.join("results.csv"))?);
    }
    let rows = csvs[0].lines().count() - 1;
    ensure(rows == 27, format!("{rows} rows"))?;
    ensure(csvs[0] == csvs[1], "results differ between executions")?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(600), format!("took {elapsed:?}"))?;
    Ok(format!("27-row results byte-identical across two executions (jobs 1 vs 4), wall_ms excluded, {:.1}s", elapsed.as_secs_f64()))
}

fn criterion_9() -> Outcome {
    let tax = grid_taxonomy(3, 2);
    let mut report = Vec::new();
    for (family, enc) in [
        (EncoderFamily::Mlp, EncoderSpec::mlp(16, &[8], 6)),
        (EncoderFamily::TinyCnn, EncoderSpec::tiny_cnn([1, 4, 4], &[2, 3], 6)),
        (EncoderFamily::TinyAttention, EncoderSpec::tiny_attention([1, 4, 4], 2, 4, 6)),
    ] {
        let grad = |mode| {
            let net = NetworkSpec::new(enc.clone(), mode, 0.0).with_taxonomy(&tax).build(11).unwrap();
            let mut shape = vec![4];
            shape.extend(&enc.input_shape);
            let x = uniform(&shape, -1.0, 1.0, &mut rng(12));
            let mut tape = Tape::new();
            let bound = net.bind(&mut tape);
            let xv = tape.constant(x);
            let out = bound.forward(&mut tape, xv, Phase::Train, &mut stream(0, Stream::Dropout)).unwrap();
            let loss = tape.cross_entropy(out.model_logits, &[0, 3, 5, 1]).unwrap();
            tape.backward(loss).unwrap();
            let head = bound.make_head.as_ref().unwrap();
            let g = tape.grad_or_zeros(head.weight);
            g.data().iter().map(|v| v.abs()).fold(0.0, f64::max)
        };
        let cascaded = grad(ArchitectureMode::Cascaded);
        let parallel = grad(ArchitectureMode::Parallel);
        ensure(cascaded > 0.0, format!("{family}: cascaded gradient is zero"))?;
        ensure(parallel == 0.0, format!("{family}: parallel gradient {parallel}"))?;
        report.push(format!("{family} {cascaded:.1e}"));
    }
    Ok(format!("max |dL_model/dW_make|: cascaded {} ; parallel exactly 0", report.join(", ")))
}

fn criterion_10() -> Outcome {
    let started = Instant::now();
    let mean_acc = |mode| -> Result<(f64, Vec<f64>), String> {
        let mut accs = Vec::new();
        for seed in 0..5u64 {
            let spec = SyntheticSpec {
                n_per_model: 10,
                model_separation: 0.5,
                seed,
                ..Default::default()
            };
            let (data, s) = synthetic(&spec, seed);
            let net = NetworkSpec::new(EncoderSpec::mlp(64, &[64], 64), mode, 0.0)
                .with_taxonomy(&data.taxonomy)
                .build(seed)
                .unwrap();
            let cfg = TrainConfig {
                epochs: 200,
                weights: LossWeights::new(0.9, 0.1).unwrap(),
                seed,
                ..Default::default()
            };
            let run = train(net, &s, &data.taxonomy, &cfg).map_err(|e| e.to_string())?;
            accs.push(evaluate(&run.best, &s.test, &data.taxonomy).unwrap().model_acc);
        }
        Ok((accs.iter().sum::<f64>() / accs.len() as f64, accs))
    };
    let (st, _) = mean_acc(ArchitectureMode::SingleTask)?;
    let (par, _) = mean_acc(ArchitectureMode::Parallel)?;
    let detail = format!("single-task mean {st:.4}, parallel [0.9,0.1] mean {par:.4} over 5 seeds");
    ensure((TREND_BAND.0..=TREND_BAND.1).contains(&st), format!("regime invalid: {detail}"))?;
    ensure(par >= st - TREND_MARGIN, format!("trend not met: {detail}"))?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    Ok(format!("{detail} (threshold st - {TREND_MARGIN})"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("parameter and FLOP delta reproduction", criterion_1),
        ("gradient integrity", criterion_2),
        ("loss linearity and ln 196", criterion_3),
        ("parallel/single-task equivalence", criterion_4),
        ("synthetic convergence", criterion_5),
        ("metric oracle equivalence", criterion_6),
        ("one-cycle schedule", criterion_7),
        ("sweep determinism", criterion_8),
        ("cascaded coupling", criterion_9),
        ("directional MTL trend", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let ms = started.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{ms} ms]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {why} [{ms} ms]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
