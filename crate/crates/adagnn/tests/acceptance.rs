//! The project's acceptance criteria, one test per criterion.
//!
//! Each test prints a single `PASS`/`FAIL` line with its measured numbers
//! and then asserts.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::time::Instant;

use adagnn::bench::{run_sweep, summarize, BenchScenario};
use adagnn_core::crystal::{dot, norm, sub, Crystal};
use adagnn_core::synth::{generate_crystal, GeneratorSpec, LatticeKind};
use adagnn_core::train::{NoClock, TrainData};
use adagnn_core::{CutoffConfig, ModelConfig, ModelState, OptimConfig, PropertyRecord, TrainReport, Trainer};
use common::oracle::{brute_force, compare};
use common::{random_crystal, random_rotation, rng, simple_cubic};
use rand::seq::SliceRandom;
use rand::Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!("acceptance {id} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn criterion_1_invariance_suite() {
    let start = Instant::now();
    let model = ModelState::new(
        ModelConfig { hidden_dim: 16, num_blocks: 2, seed: 1, ..ModelConfig::default() }
            .with_cutoffs(CutoffConfig::paper_mode(8.0).unwrap()),
    )
    .unwrap();
    let mut permutation_exact = true;
    let (mut translation, mut rotation, mut supercell): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for seed in 0..20 {
        let c = random_crystal(seed, 8);
        let y = model.predict(&c).unwrap();
        let mut r = rng(1000 + seed);
        let mut order: Vec<usize> = (0..c.num_atoms()).collect();
        order.shuffle(&mut r);
        permutation_exact &= model.predict(&c.permuted(&order).unwrap()).unwrap().to_bits() == y.to_bits();
        let shift = [r.random_range(-10.0..10.0), r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)];
        translation = translation.max(rel(model.predict(&c.translated(shift)).unwrap(), y));
        let turned = c.transformed(&random_rotation(&mut r)).unwrap();
        rotation = rotation.max(rel(model.predict(&turned).unwrap(), y));
        supercell = supercell.max(rel(model.predict(&c.supercell([2, 1, 1]).unwrap()).unwrap(), y));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = permutation_exact && translation < 1e-9 && rotation < 1e-9 && supercell < 1e-9 && secs < 60.0;
    verdict(
        1,
        "invariances on 20 crystals",
        pass,
        &format!(
            "permutation exact={permutation_exact}, max rel: translation {translation:.1e}, \
             rotation {rotation:.1e}, supercell {supercell:.1e}; {secs:.1}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_neighbor_oracle() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..20 {
        let c = random_crystal(seed, 8);
        for cutoff in [2.0, 4.5, 6.0] {
            if let Err(e) = compare(&c, cutoff) {
                failures.push(format!("seed {seed}: {e}"));
            }
        }
    }
    let mut fixture_counts = Vec::new();
    for a in [1.0, 3.34] {
        let c = simple_cubic(a);
        for (cutoff, expected) in [(1.1 * a, 6), (1.5 * a, 18)] {
            match compare(&c, cutoff) {
                Ok(n) if n == expected => fixture_counts.push(n),
                Ok(n) => {
                    failures.push(format!("simple cubic a={a} cutoff {cutoff}: {n} neighbors, expected {expected}"))
                }
                Err(e) => failures.push(e),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 60.0;
    verdict(
        2,
        "neighbor search equals supercell scan",
        pass,
        &format!("60 random cases, simple cubic counts {fixture_counts:?}; {secs:.2}s; {failures:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_gradient_check() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    for seed in 0..5 {
        for (block, err) in common::gradcheck::run_all(seed) {
            if err > worst {
                worst = err;
                worst_at = format!("{block}, seed {seed}");
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < common::gradcheck::MAX_REL_ERR && secs < 120.0;
    verdict(
        3,
        "finite-difference gradients, 5 seeds",
        pass,
        &format!("max relative error {worst:.2e} ({worst_at}), step {:e}; {secs:.1}s", common::gradcheck::STEP),
    );
    assert!(pass);
}

#[test]
fn criterion_4_dual_scale_efficiency() {
    let start = Instant::now();
    let records = run_sweep(&BenchScenario::default()).unwrap();
    let s = summarize(&records).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ratio = s.angle_ratio.unwrap_or(0.0);
    let gap = s.exponent_gap.unwrap_or(f64::NEG_INFINITY);
    let faster = s.dual.inference_ms_median < s.single.inference_ms_median;
    let pass = s.edge_cutoff == 8.0 && ratio >= 5.0 && faster && gap >= 0.3 && secs < 300.0;
    verdict(
        4,
        "dual-scale efficiency on the default bench",
        pass,
        &format!(
            "angles single/dual = {} / {} = {ratio:.2}; median inference {:.3} ms vs {:.3} ms; \
             exponents dual {:.3} single {:.3} gap {gap:.3}; {secs:.1}s",
            s.single.num_angles,
            s.dual.num_angles,
            s.dual.inference_ms_median,
            s.single.inference_ms_median,
            s.dual_exponent.mean.unwrap_or(f64::NAN),
            s.single_exponent.mean.unwrap_or(f64::NAN),
        ),
    );
    assert!(pass);
}

const OVERFIT_EDGE_CUTOFF: f64 = 5.0;

fn j0(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Target from a supercell scan: mean edge `j0(πd/C_e)` plus 0.1 × mean
/// cosine of every vertex angle, with the partner image of each edge excluded.
fn oracle_target(c: &Crystal, edge_cutoff: f64, angle_cutoff: f64) -> Option<f64> {
    let rows = c.lattice().rows();
    let xs = c.cart_coords();
    let vector = |i: usize, j: usize, o: [i32; 3]| {
        let mut p = xs[j];
        for k in 0..3 {
            p[k] += o[0] as f64 * rows[0][k] + o[1] as f64 * rows[1][k] + o[2] as f64 * rows[2][k];
        }
        sub(p, xs[i])
    };
    let edges = brute_force(c, edge_cutoff);
    let near: Vec<Vec<(usize, [i32; 3])>> = (0..c.num_atoms())
        .map(|i| edges.iter().filter(|e| e.0 .0 == i && e.1 <= angle_cutoff).map(|e| (e.0 .1, e.0 .2)).collect())
        .collect();
    let (mut radial, mut cos_sum, mut n_angles) = (0.0, 0.0, 0usize);
    for &((i, j, o), d) in &edges {
        radial += j0(PI * d / edge_cutoff);
        let u = vector(i, j, o);
        for &(k, ok) in &near[i] {
            if (k, ok) != (j, o) {
                let v = vector(i, k, ok);
                cos_sum += dot(u, v) / (norm(u) * norm(v));
                n_angles += 1;
            }
        }
        let back = [-o[0], -o[1], -o[2]];
        let w = vector(j, i, back);
        for &(k, ok) in &near[j] {
            if (k, ok) != (i, back) {
                let v = vector(j, k, ok);
                cos_sum += dot(w, v) / (norm(w) * norm(v));
                n_angles += 1;
            }
        }
    }
    (n_angles > 0).then(|| radial / edges.len() as f64 + 0.1 * cos_sum / n_angles as f64)
}

/// The same target read off the library's own graph and radial basis.
fn pipeline_target(c: &Crystal, edge_cutoff: f64) -> f64 {
    let cutoffs = CutoffConfig::paper_mode(edge_cutoff).unwrap();
    let g = adagnn_core::build_graph(c, &cutoffs).unwrap();
    let basis = adagnn_core::BasisConfig { n_rbf: 1, edge_cutoff, ..Default::default() };
    let f = adagnn_core::featurize_graph(&g, &basis).unwrap();
    let radial = f.edge_rbf.iter().sum::<f64>() / f.num_edges() as f64;
    let cosines: Vec<f64> =
        g.angle_sets().iter().flat_map(|a| a.at_src.iter().chain(&a.at_dst)).map(|t| t.cos()).collect();
    radial + 0.1 * cosines.iter().sum::<f64>() / cosines.len() as f64
}

fn overfit_dataset() -> Vec<PropertyRecord> {
    let edge = OVERFIT_EDGE_CUTOFF;
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < 50 {
        seed += 1;
        let mut r = rng(seed);
        let spec = GeneratorSpec {
            lattice: LatticeKind::OrthorhombicRandom,
            num_atoms: r.random_range(2..=4),
            lattice_constant: r.random_range(3.0..3.8),
            jitter: 0.3,
            species: vec![3, 8, 12, 14],
            ..GeneratorSpec::default()
        };
        let Ok(c) = generate_crystal(&spec, seed) else { continue };
        if let Some(y) = oracle_target(&c, edge, edge.sqrt()) {
            out.push(PropertyRecord::new(c, y).unwrap());
        }
    }
    out
}

fn overfit_run(data: &[PropertyRecord], use_angles: bool) -> TrainReport {
    let model = ModelConfig { hidden_dim: 32, num_blocks: 2, use_angles, seed: 3, ..ModelConfig::default() }
        .with_cutoffs(CutoffConfig::paper_mode(OVERFIT_EDGE_CUTOFF).unwrap());
    let optim =
        OptimConfig { learning_rate: 1e-3, batch_size: 5, epochs: 200, valid_fraction: 0.0, ..Default::default() };
    let mut trainer = Trainer::new(model, optim).unwrap();
    trainer.run(TrainData { train: data, ..Default::default() }, &mut NoClock, &mut |_| {}).unwrap()
}

#[test]
fn criterion_5_overfit_sanity() {
    let start = Instant::now();
    let data = overfit_dataset();
    let oracle_gap =
        data.iter().map(|r| (pipeline_target(&r.crystal, OVERFIT_EDGE_CUTOFF) - r.target).abs()).fold(0.0, f64::max);
    let ys: Vec<f64> = data.iter().map(|r| r.target).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let std = (ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / ys.len() as f64).sqrt();
    let with_angles = overfit_run(&data, true);
    let without = overfit_run(&data, false);
    let mae = with_angles.final_train_mae().unwrap();
    let mae_ablated = without.final_train_mae().unwrap();
    let first = with_angles.epochs[0].train_mse;
    let at_50 = with_angles.epochs[49].train_mse;
    let secs = start.elapsed().as_secs_f64();
    let pass = oracle_gap < 1e-12 && mae < 0.05 * std && mae_ablated > mae && at_50 < first && secs < 600.0;
    verdict(
        5,
        "overfit 50 synthetic crystals in 200 epochs",
        pass,
        &format!(
            "target std {std:.4e}; train MAE {mae:.4e} ({:.2}% of std); without angles {mae_ablated:.4e}; \
             train MSE epoch 1 {first:.3e} → epoch 50 {at_50:.3e}; oracle vs pipeline target {oracle_gap:.1e}; \
             {secs:.1}s",
            100.0 * mae / std
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_determinism() {
    let data = overfit_dataset();
    let model = ModelConfig { hidden_dim: 16, num_blocks: 2, seed: 11, ..ModelConfig::default() }
        .with_cutoffs(CutoffConfig::paper_mode(OVERFIT_EDGE_CUTOFF).unwrap());
    let optim = OptimConfig { batch_size: 8, epochs: 3, seed: 11, ..Default::default() };
    let run = || {
        let mut t = Trainer::new(model, optim).unwrap();
        let report = t.run(TrainData { train: &data, ..Default::default() }, &mut NoClock, &mut |_| {}).unwrap();
        (report, t.state().clone())
    };
    let (a, state_a) = run();
    let (b, state_b) = run();
    let pass = a.same_metrics(&b) && a == b && state_a == state_b;
    verdict(
        6,
        "identical seeds give identical training",
        pass,
        &format!(
            "{} epochs, final train MSE {:e} vs {:e}; parameters equal: {}",
            a.epochs.len(),
            a.epochs.last().unwrap().train_mse,
            b.epochs.last().unwrap().train_mse,
            state_a == state_b
        ),
    );
    assert!(pass);
}
