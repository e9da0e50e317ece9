//! Randomized properties of coordinates, features and the optimizer.

mod common;

use adagnn_core::crystal::{norm, sub, Lattice};
use adagnn_core::featurize::{rbf, sbf, BasisConfig};
use adagnn_core::graph::{neighbor_images, AngleSet, CutoffConfig};
use adagnn_core::nn::{adam_step, AdamConfig};
use adagnn_core::tensor::{Gradients, Matrix, ParamStore, Tape};
use adagnn_core::{build_graph, featurize_graph, Crystal};
use common::{random_crystal, random_rotation, rng};
use proptest::prelude::*;
use rand::Rng;

fn lattice_strategy() -> impl Strategy<Value = Lattice> {
    prop::array::uniform9(-6.0f64..6.0)
        .prop_map(|v| [[v[0] + 5.0, v[1], v[2]], [v[3], v[4] + 5.0, v[5]], [v[6], v[7], v[8] + 5.0]])
        .prop_filter_map("degenerate", |rows| Lattice::new(rows).ok().filter(|l| l.volume() > 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn frac_cart_round_trip(l in lattice_strategy(), x in prop::array::uniform3(-20.0f64..20.0)) {
        let back = l.frac_to_cart(l.cart_to_frac(x));
        prop_assert!(norm(sub(back, x)) < 1e-10);
    }

    #[test]
    fn sbf_bounded(src in prop::collection::vec(0.0f64..=core::f64::consts::PI, 0..6),
                   dst in prop::collection::vec(0.0f64..=core::f64::consts::PI, 0..6)) {
        let cfg = BasisConfig { n_sbf: 12, ..BasisConfig::default() };
        let f = sbf(&AngleSet { at_src: src, at_dst: dst }, &cfg);
        prop_assert_eq!(f.len(), 24);
        prop_assert!(f.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn rbf_bounded_on_many_distances() {
    let cfg = BasisConfig { n_rbf: 16, ..BasisConfig::default() };
    let mut r = rng(11);
    for _ in 0..100_000 {
        let d = r.random_range(1e-9..=cfg.edge_cutoff);
        for v in rbf(d, &cfg).unwrap() {
            assert!((-0.22..=1.0).contains(&v), "rbf({d}) = {v}");
        }
    }
}

#[test]
fn empty_angle_sets_give_zero_sbf_and_live_rbf() {
    // lone atom with a short angle cutoff: every angle set is empty
    let c = Crystal::new(vec![14], vec![[0.0; 3]], Lattice::orthorhombic(3.0, 3.4, 3.9).unwrap(), None).unwrap();
    let g = build_graph(&c, &CutoffConfig::new(5.0, 2.5).unwrap()).unwrap();
    let basis = BasisConfig { edge_cutoff: 5.0, ..BasisConfig::default() };
    let f = featurize_graph(&g, &basis).unwrap();
    assert!(f.num_edges() > 0);
    for k in 0..f.num_edges() {
        assert!(f.sbf_row(k).iter().all(|&v| v == 0.0));
        assert!(f.rbf_row(k).iter().any(|&v| v != 0.0));
    }
}

/// Pairs each row of `a` with its closest unused row of `b`; returns the worst gap.
fn matched_gap(a: &[Vec<f64>], mut b: Vec<Vec<f64>>) -> f64 {
    let gap = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for x in a {
        let (k, g) = b.iter().enumerate().map(|(k, y)| (k, gap(x, y))).min_by(|p, q| p.1.total_cmp(&q.1)).unwrap();
        worst = worst.max(g);
        b.swap_remove(k);
    }
    worst
}

#[test]
fn features_survive_rigid_motion() {
    let cut = CutoffConfig::new(4.5, 2.6).unwrap();
    let basis = BasisConfig { edge_cutoff: 4.5, ..BasisConfig::default() };
    for seed in 0..10 {
        let c = random_crystal(seed, 6);
        let mut r = rng(seed + 3);
        let moved = c.transformed(&random_rotation(&mut r)).unwrap().translated([r.random_range(-3.0..3.0), 0.7, -1.9]);
        let rows = |c: &Crystal| {
            let f = featurize_graph(&build_graph(c, &cut).unwrap(), &basis).unwrap();
            (0..f.num_edges()).map(|k| [f.rbf_row(k), f.sbf_row(k)].concat()).collect::<Vec<_>>()
        };
        let (a, b) = (rows(&c), rows(&moved));
        assert_eq!(a.len(), b.len());
        let worst = matched_gap(&a, b);
        assert!(worst < 1e-9, "seed {seed}: {worst}");
    }
}

#[test]
fn wrapping_keeps_distance_multiset() {
    for seed in 0..20 {
        let c = random_crystal(seed, 6);
        let w = c.wrap_to_cell();
        for cutoff in [3.0, 5.5] {
            let dists = |c: &Crystal| {
                let mut d: Vec<f64> =
                    neighbor_images(c, cutoff).unwrap().into_iter().flatten().map(|n| n.distance).collect();
                d.sort_by(f64::total_cmp);
                d
            };
            let (a, b) = (dists(&c), dists(&w));
            assert_eq!(a.len(), b.len(), "seed {seed}");
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
        }
    }
}

#[test]
fn mse_is_nonnegative_and_zero_only_at_target() {
    let mut r = rng(2);
    for _ in 0..200 {
        let n = r.random_range(1..6);
        let pred: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let eval = |target: &[f64]| {
            let mut tape = Tape::new();
            let p = tape.input(Matrix::from_vec(n, 1, pred.clone()).unwrap());
            let l = tape.mse(p, target).unwrap();
            tape.value(l).data()[0]
        };
        assert_eq!(eval(&pred), 0.0);
        let mut other = pred.clone();
        other[r.random_range(0..n)] += r.random_range(1e-6..1.0);
        assert!(eval(&other) > 0.0);
    }
}

#[test]
fn adam_with_zero_gradient_does_not_move() {
    let mut store = ParamStore::new();
    let mut r = rng(4);
    for k in 0..3 {
        let v: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        store.add(format!("p{k}"), Matrix::from_vec(2, 3, v).unwrap());
    }
    let before: Vec<Vec<f64>> = store.iter().map(|p| p.value.data().to_vec()).collect();
    let zero = Gradients::zeros_like(&store);
    for _ in 0..10 {
        adam_step(&mut store, &zero, &AdamConfig::default(), 0.1);
    }
    let after: Vec<Vec<f64>> = store.iter().map(|p| p.value.data().to_vec()).collect();
    assert_eq!(before, after);
    assert_eq!(store.step, 10);
}
