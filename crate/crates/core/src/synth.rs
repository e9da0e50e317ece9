//! Seeded synthetic crystals for benchmarks and desk-scale training sets.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crystal::{Crystal, Lattice};
use crate::graph::neighbor_images;
use crate::math::ceil;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeKind {
    Cubic,
    /// Edge lengths drawn from `lattice_constant × U(0.85, 1.15)`.
    OrthorhombicRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub lattice: LatticeKind,
    pub num_atoms: usize,
    /// Cell edge in Å.
    pub lattice_constant: f64,
    /// Uniform displacement bound as a fraction of the grid spacing.
    pub jitter: f64,
    pub min_separation: f64,
    pub max_attempts: usize,
    /// Species assigned to atoms in turn.
    pub species: Vec<u8>,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            lattice: LatticeKind::Cubic,
            num_atoms: 1,
            lattice_constant: 4.0,
            jitter: 0.15,
            min_separation: 0.7,
            max_attempts: 200,
            species: alloc::vec![11, 17],
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_atoms == 0 {
            return Err(Error::InvalidConfig("num_atoms must be ≥ 1".into()));
        }
        if !(self.lattice_constant > 0.0 && self.jitter >= 0.0 && self.min_separation >= 0.0) {
            return Err(Error::InvalidConfig("generator lengths must be positive".into()));
        }
        if self.species.is_empty() || self.max_attempts == 0 {
            return Err(Error::InvalidConfig("need species and at least one attempt".into()));
        }
        Ok(())
    }
}

/// Jittered grid fill with atom 0 moved to the origin.
///
/// Sites are drawn from a `k×k×k` grid (`k = ⌈N^⅓⌉`) and displaced; a draw
/// is rejected when any two images come closer than `min_separation`.
pub fn generate_crystal(spec: &GeneratorSpec, seed: u64) -> Result<Crystal> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.num_atoms;
    let mut k = ceil(libm::cbrt(n as f64)) as usize;
    while k * k * k < n {
        k += 1;
    }
    let numbers: Vec<u8> = (0..n).map(|i| spec.species[i % spec.species.len()]).collect();
    for _ in 0..spec.max_attempts {
        let a = spec.lattice_constant;
        let lattice = match spec.lattice {
            LatticeKind::Cubic => Lattice::cubic(a)?,
            LatticeKind::OrthorhombicRandom => Lattice::orthorhombic(
                a * rng.random_range(0.85..1.15),
                a * rng.random_range(0.85..1.15),
                a * rng.random_range(0.85..1.15),
            )?,
        };
        let mut sites: Vec<[usize; 3]> = (0..k * k * k).map(|s| [s / (k * k), (s / k) % k, s % k]).collect();
        sites.shuffle(&mut rng);
        let spacing = 1.0 / k as f64;
        let mut fracs: Vec<[f64; 3]> = sites[..n]
            .iter()
            .map(|s| {
                s.map(|c| {
                    let jit = if spec.jitter > 0.0 { rng.random_range(-spec.jitter..spec.jitter) } else { 0.0 };
                    (c as f64 + jit) * spacing
                })
            })
            .collect();
        let origin = fracs[0];
        for f in fracs.iter_mut() {
            for d in 0..3 {
                f[d] -= origin[d];
            }
        }
        let Ok(crystal) = Crystal::from_fractional(numbers.clone(), &fracs, lattice, None) else {
            continue;
        };
        if spec.min_separation > 0.0
            && neighbor_images(&crystal, spec.min_separation)?
                .iter()
                .any(|l| l.iter().any(|nb| nb.distance < spec.min_separation))
        {
            continue;
        }
        return Ok(crystal.wrap_to_cell());
    }
    Err(Error::GenerationFailed(spec.max_attempts))
}
