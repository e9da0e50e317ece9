#![allow(dead_code)]

pub mod gradcheck;
pub mod oracle;

use adagnn_core::crystal::{Crystal, Lattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Skewed lattice with every perpendicular width ≥ `min_width`.
pub fn random_lattice(rng: &mut ChaCha8Rng, min_width: f64) -> Lattice {
    loop {
        let mut rows = [[0.0; 3]; 3];
        for (k, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = if c == k { rng.random_range(2.5..5.0) } else { rng.random_range(-1.0..1.0) };
            }
        }
        if let Ok(l) = Lattice::new(rows) {
            if l.perpendicular_widths().iter().all(|&w| w >= min_width) {
                return l;
            }
        }
    }
}

/// Random crystal with 1..=max_atoms atoms, stored partly outside the cell.
pub fn random_crystal(seed: u64, max_atoms: usize) -> Crystal {
    let mut rng = rng(seed);
    let lattice = random_lattice(&mut rng, 2.0);
    let n = rng.random_range(1..=max_atoms);
    loop {
        let numbers: Vec<u8> = (0..n).map(|_| rng.random_range(1..=83)).collect();
        let fracs: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.random_range(-0.5..1.5), rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        if let Ok(c) = Crystal::from_fractional(numbers, &fracs, lattice, None) {
            // keep pairs apart so no distance sits near zero
            let close = adagnn_core::graph::neighbor_images(&c, 0.5).unwrap();
            if close.iter().all(|l| l.is_empty()) {
                return c;
            }
        }
    }
}

pub fn simple_cubic(a: f64) -> Crystal {
    Crystal::new(vec![84], vec![[0.0; 3]], Lattice::cubic(a).unwrap(), None).unwrap()
}

/// Proper rotation from three Euler-like angles.
pub fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let rz = |t: f64| [[t.cos(), -t.sin(), 0.0], [t.sin(), t.cos(), 0.0], [0.0, 0.0, 1.0]];
    let ry = |t: f64| [[t.cos(), 0.0, t.sin()], [0.0, 1.0, 0.0], [-t.sin(), 0.0, t.cos()]];
    matmul3(&rz(a), &matmul3(&ry(b), &rz(c)))
}

pub fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    use std::f64::consts::PI;
    rotation(rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI))
}

pub fn assert_sorted_close(a: &mut [f64], b: &mut [f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: lengths differ");
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() <= tol, "{what}: {x} vs {y}");
    }
}
