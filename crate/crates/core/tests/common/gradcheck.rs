//! Central finite-difference check of every model block.

use adagnn_core::graph::CutoffConfig;
use adagnn_core::model::GraphBatch;
use adagnn_core::tensor::{Matrix, ParamId, Tape, Var};
use adagnn_core::{ModelConfig, ModelState};
use rand::Rng;

pub const STEP: f64 = 1e-5;
pub const MAX_REL_ERR: f64 = 1e-4;
/// Denominator floor: below this magnitude errors are judged absolutely.
pub const GRAD_FLOOR: f64 = 1e-6;

type Build = dyn Fn(&ModelState, &mut Tape, &GraphBatch) -> Var;

fn config(seed: u64) -> ModelConfig {
    ModelConfig { hidden_dim: 6, num_blocks: 2, seed, ..ModelConfig::default() }
        .with_cutoffs(CutoffConfig::new(4.0, 2.5).unwrap())
}

fn batch(model: &ModelState, seed: u64) -> GraphBatch {
    let crystals: Vec<_> = (0..2).map(|k| super::random_crystal(seed * 10 + k, 3)).collect();
    let feats: Vec<_> = crystals.iter().map(|c| model.prepare(c).unwrap()).collect();
    GraphBatch::new(&feats.iter().collect::<Vec<_>>()).unwrap()
}

/// loss = Σ out ⊙ R for a fixed random R.
fn loss_of(model: &ModelState, batch: &GraphBatch, build: &Build, weights: &Matrix) -> f64 {
    let mut tape = Tape::new();
    let out = build(model, &mut tape, batch);
    tape.value(out).data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
}

fn check(seed: u64, build: &Build, params: &[ParamId]) -> f64 {
    let model = ModelState::new(config(seed)).unwrap();
    let batch = batch(&model, seed);
    let mut tape = Tape::new();
    let out = build(&model, &mut tape, &batch);
    let (rows, cols) = tape.value(out).shape();
    let mut r = super::rng(seed + 77);
    let weights = Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
    let w = tape.input(weights.clone());
    let prod = tape.mul(out, w).unwrap();
    let loss = tape.sum(prod);
    let grads = tape.backward(loss, model.store()).unwrap();

    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for &id in params {
        let n = model.store().get(id).value.data().len();
        for k in 0..n {
            let orig = model.store().get(id).value.data()[k];
            probe.store_mut().get_mut(id).value.data_mut()[k] = orig + STEP;
            let up = loss_of(&probe, &batch, build, &weights);
            probe.store_mut().get_mut(id).value.data_mut()[k] = orig - STEP;
            let down = loss_of(&probe, &batch, build, &weights);
            probe.store_mut().get_mut(id).value.data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let analytic = grads.get(id).data()[k];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}

fn group(model: &ModelState, names: &[&str]) -> Vec<ParamId> {
    model.param_groups().into_iter().filter(|(n, _)| names.contains(&n.as_str())).flat_map(|(_, ids)| ids).collect()
}

fn random_input(tape: &mut Tape, rows: usize, cols: usize, seed: u64) -> Var {
    let mut r = super::rng(seed);
    tape.input(Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap())
}

/// Worst relative error per block for one seed.
pub fn run_all(seed: u64) -> Vec<(&'static str, f64)> {
    let model = ModelState::new(config(seed)).unwrap();
    let mut results = Vec::new();

    let node = |m: &ModelState, t: &mut Tape, b: &GraphBatch| m.node_embed(t, b).unwrap();
    let ids = group(&model, &["embed.atom", "embed.group", "embed.node"]);
    results.push(("node embedding", check(seed, &node, &ids)));

    let structure = |m: &ModelState, t: &mut Tape, b: &GraphBatch| m.structure_embed(t, b).unwrap();
    let ids = group(&model, &["structure.rbf", "structure.sbf", "structure.out"]);
    results.push(("structure embedding", check(seed, &structure, &ids)));

    let interaction = move |m: &ModelState, t: &mut Tape, b: &GraphBatch| {
        let h = random_input(t, b.num_atoms(), 6, seed + 1);
        let s = random_input(t, b.num_edges(), 6, seed + 2);
        m.interaction(t, 1, h, s, b).unwrap()
    };
    let ids = group(&model, &["block1"]);
    results.push(("interaction block", check(seed, &interaction, &ids)));

    let readout = move |m: &ModelState, t: &mut Tape, b: &GraphBatch| {
        let h = random_input(t, b.num_atoms(), 6, seed + 3);
        m.readout(t, h, b).unwrap()
    };
    let ids = group(&model, &["readout"]);
    results.push(("readout", check(seed, &readout, &ids)));

    let full = |m: &ModelState, t: &mut Tape, b: &GraphBatch| {
        let y = m.forward(t, b).unwrap();
        let targets = vec![0.3; b.num_crystals()];
        t.mse(y, &targets).unwrap()
    };
    let ids: Vec<ParamId> = model.store().ids().collect();
    results.push(("full model + mse", check(seed, &full, &ids)));
    results
}
