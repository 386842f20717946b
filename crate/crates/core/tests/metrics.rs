//! Metrics against brute-force oracles written without the library's
//! ranking helpers.

mod common;

use common::*;
use hiertask::data::Taxonomy;
use hiertask::metrics::{
    consistency_rate, derived_make_accuracy, model_accuracy, top_k_accuracy, MetricsReport,
};
use hiertask::Tensor;
use proptest::prelude::*;
use rand::Rng;

/// Argmax by full stable sort: descending value, ascending index.
fn sorted_classes(row: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
    idx
}

fn oracle_top_k(logits: &Tensor, labels: &[usize], k: usize) -> f64 {
    let hits = labels
        .iter()
        .enumerate()
        .filter(|(r, l)| sorted_classes(logits.row(*r))[..k].contains(l))
        .count();
    hits as f64 / labels.len() as f64
}

fn oracle_derived(logits: &Tensor, makes: &[usize], tax: &Taxonomy) -> f64 {
    let hits = makes
        .iter()
        .enumerate()
        .filter(|(r, k)| tax.parent(sorted_classes(logits.row(*r))[0]) == **k)
        .count();
    hits as f64 / makes.len() as f64
}

fn oracle_consistency(model: &Tensor, make: &Tensor, tax: &Taxonomy) -> f64 {
    let n = model.rows();
    let hits = (0..n)
        .filter(|&r| tax.parent(sorted_classes(model.row(r))[0]) == sorted_classes(make.row(r))[0])
        .count();
    hits as f64 / n as f64
}

/// Logits drawn from a small integer grid so ties are common.
fn tied_logits(n: usize, c: usize, r: &mut impl Rng) -> Tensor {
    let mut t = Tensor::zeros(&[n, c]);
    t.data_mut().iter_mut().for_each(|v| *v = r.random_range(0..4) as f64);
    t
}

#[test]
fn thousand_random_prediction_sets_match_oracles() {
    let tax = grid_taxonomy(3, 3);
    for set in 0..1000u64 {
        let mut r = rng(set);
        let n = r.random_range(1..12);
        let model = if set % 2 == 0 { tied_logits(n, 9, &mut r) } else { uniform(&[n, 9], -2.0, 2.0, &mut r) };
        let make = tied_logits(n, 3, &mut r);
        let models = labels(n, 9, &mut r);
        let makes: Vec<usize> = models.iter().map(|&m| tax.parent(m)).collect();

        assert_eq!(model_accuracy(&model, &models).unwrap(), oracle_top_k(&model, &models, 1));
        assert_eq!(model_accuracy(&make, &makes).unwrap(), oracle_top_k(&make, &makes, 1));
        assert_eq!(derived_make_accuracy(&model, &makes, &tax).unwrap(), oracle_derived(&model, &makes, &tax));
        assert_eq!(consistency_rate(&model, Some(&make), &tax).unwrap(), oracle_consistency(&model, &make, &tax));
        let mut prev = 0.0;
        for k in 1..=9 {
            let acc = top_k_accuracy(&model, &models, k).unwrap();
            assert_eq!(acc, oracle_top_k(&model, &models, k), "set {set} k {k}");
            assert!(acc >= prev);
            prev = acc;
        }
        assert_eq!(prev, 1.0);
        assert!(derived_make_accuracy(&model, &makes, &tax).unwrap() >= model_accuracy(&model, &models).unwrap());
    }
}

#[test]
fn top1_is_model_accuracy_bitwise() {
    let mut r = rng(5);
    let logits = uniform(&[40, 6], -1.0, 1.0, &mut r);
    let y = labels(40, 6, &mut r);
    assert_eq!(
        top_k_accuracy(&logits, &y, 1).unwrap().to_bits(),
        model_accuracy(&logits, &y).unwrap().to_bits()
    );
}

#[test]
fn parent_one_hot_make_logits_are_fully_consistent() {
    let tax = grid_taxonomy(4, 2);
    let mut r = rng(9);
    let model = uniform(&[30, 8], -1.0, 1.0, &mut r);
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|i| {
            let parent = tax.parent(sorted_classes(model.row(i))[0]);
            (0..4).map(|k| if k == parent { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    let make = Tensor::from_rows(&rows).unwrap();
    assert_eq!(consistency_rate(&model, Some(&make), &tax).unwrap(), 1.0);
}

#[test]
fn single_make_taxonomy_always_consistent() {
    let tax = grid_taxonomy(1, 5);
    let mut r = rng(3);
    let model = uniform(&[20, 5], -1.0, 1.0, &mut r);
    let make = uniform(&[20, 1], -1.0, 1.0, &mut r);
    assert_eq!(consistency_rate(&model, Some(&make), &tax).unwrap(), 1.0);
}

#[test]
fn report_matches_individual_metrics() {
    let tax = grid_taxonomy(2, 4);
    let mut r = rng(12);
    let model = uniform(&[25, 8], -1.0, 1.0, &mut r);
    let make = uniform(&[25, 2], -1.0, 1.0, &mut r);
    let models = labels(25, 8, &mut r);
    let makes: Vec<usize> = models.iter().map(|&m| tax.parent(m)).collect();
    let rep = MetricsReport::compute(&model, Some(&make), &models, &makes, &tax).unwrap();
    assert_eq!(rep.model_acc, model_accuracy(&model, &models).unwrap());
    assert_eq!(rep.make_acc_direct, Some(model_accuracy(&make, &makes).unwrap()));
    assert_eq!(rep.top(5), Some(top_k_accuracy(&model, &models, 5).unwrap()));
    assert_eq!(rep.n_samples, 25);
}

fn logits_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (1usize..10).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), n),
            prop::collection::vec(0usize..6, n),
        )
    })
}

proptest! {
    #[test]
    fn metrics_invariant_under_positive_affine_maps(
        (rows, y) in logits_strategy(),
        a in 0.1f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let tax = grid_taxonomy(2, 3);
        let x = Tensor::from_rows(&rows).unwrap();
        // a power-of-two scale and integer shift keep ordering exact in floating point
        let a = a.log2().round().exp2();
        let b = b.round();
        let mapped = x.map(|v| a * v + b);
        let makes: Vec<usize> = y.iter().map(|&m| tax.parent(m)).collect();
        prop_assert_eq!(model_accuracy(&x, &y).unwrap(), model_accuracy(&mapped, &y).unwrap());
        prop_assert_eq!(
            derived_make_accuracy(&x, &makes, &tax).unwrap(),
            derived_make_accuracy(&mapped, &makes, &tax).unwrap()
        );
        for k in 1..=6 {
            prop_assert_eq!(top_k_accuracy(&x, &y, k).unwrap(), top_k_accuracy(&mapped, &y, k).unwrap());
        }
    }

    #[test]
    fn metric_values_are_fractions((rows, y) in logits_strategy()) {
        let tax = grid_taxonomy(3, 2);
        let x = Tensor::from_rows(&rows).unwrap();
        let makes: Vec<usize> = y.iter().map(|&m| tax.parent(m)).collect();
        let rep = MetricsReport::compute(&x, None, &y, &makes, &tax).unwrap();
        for v in [rep.model_acc, rep.make_acc_derived].into_iter().chain(rep.top_k.values().copied()) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(rep.make_acc_derived >= rep.model_acc);
        prop_assert!(rep.top(1) <= rep.top(3) && rep.top(3) <= rep.top(5));
    }
}
