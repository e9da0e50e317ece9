//! Basis expansions of distances and angle sets.
//!
//! Distances use zeroth-order spherical Bessel functions with roots `nπ`:
//! `j0(nπ·d/C_e)` for `n = 1..=n_rbf`, all of which vanish at the cutoff.
//! Each vertex angle contributes zonal harmonics `P_l(cos α)` for
//! `l = 0..n_sbf`, and the per-vertex sets are reduced to fixed size by the
//! configured aggregation (mean by default).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::elements::{self, NUM_GROUPS};
use crate::graph::{AngleSet, CrystalGraph};
use crate::math::{abs, cos, sin};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleAggregation {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub n_rbf: usize,
    pub n_sbf: usize,
    pub edge_cutoff: f64,
    #[serde(default)]
    pub aggregation: AngleAggregation,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { n_rbf: 8, n_sbf: 8, edge_cutoff: crate::graph::DEFAULT_EDGE_CUTOFF, aggregation: AngleAggregation::Mean }
    }
}

impl BasisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rbf == 0 || self.n_sbf == 0 {
            return Err(Error::InvalidConfig("n_rbf and n_sbf must be ≥ 1".into()));
        }
        if !(self.edge_cutoff > 0.0 && self.edge_cutoff.is_finite()) {
            return Err(Error::InvalidConfig("basis edge cutoff must be positive".into()));
        }
        Ok(())
    }

    pub fn sbf_len(&self) -> usize {
        2 * self.n_sbf
    }
}

/// `sin x / x`, with the series near zero.
pub fn spherical_j0(x: f64) -> f64 {
    if abs(x) < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        sin(x) / x
    }
}

pub fn rbf(distance: f64, config: &BasisConfig) -> Result<Vec<f64>> {
    let mut out = vec![0.0; config.n_rbf];
    rbf_into(distance, config.edge_cutoff, &mut out)?;
    Ok(out)
}

fn rbf_into(distance: f64, cutoff: f64, out: &mut [f64]) -> Result<()> {
    if !(distance > 0.0 && distance <= cutoff) {
        return Err(Error::OutOfRange { distance, cutoff });
    }
    let base = PI * distance / cutoff;
    for (n, v) in out.iter_mut().enumerate() {
        *v = spherical_j0((n + 1) as f64 * base);
    }
    // sin(nπ) is ~1e-16 in floating point; pin the root exactly
    if distance == cutoff {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(())
}

/// Legendre polynomials `P_0..P_{len-1}` at `x` by Bonnet's recurrence.
pub fn legendre_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for l in 1..out.len().saturating_sub(1) {
        let lf = l as f64;
        out[l + 1] = ((2.0 * lf + 1.0) * x * out[l] - lf * out[l - 1]) / (lf + 1.0);
    }
}

/// Angular basis of one edge: `[block at src ∥ block at dst]`, each `n_sbf` long.
pub fn sbf(angles: &AngleSet, config: &BasisConfig) -> Vec<f64> {
    let mut out = vec![0.0; config.sbf_len()];
    sbf_into(angles, config, &mut out);
    out
}

fn sbf_into(angles: &AngleSet, config: &BasisConfig, out: &mut [f64]) {
    let n = config.n_sbf;
    let mut scratch = vec![0.0; n];
    for (block, set) in out.chunks_mut(n).zip([&angles.at_src, &angles.at_dst]) {
        block.iter_mut().for_each(|v| *v = 0.0);
        if set.is_empty() {
            continue;
        }
        for &alpha in set.iter() {
            legendre_into(cos(alpha), &mut scratch);
            block.iter_mut().zip(&scratch).for_each(|(b, p)| *b += p);
        }
        if config.aggregation == AngleAggregation::Mean {
            let inv = 1.0 / set.len() as f64;
            block.iter_mut().for_each(|b| *b *= inv);
        }
    }
}

/// Atomic number and periodic-table group of one atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtomIndexPair {
    pub atom_number: u8,
    pub group_number: u8,
}

pub fn atom_groups(atomic_number: u32) -> Result<AtomIndexPair> {
    let group_number = elements::group_of(atomic_number)?;
    debug_assert!((1..=NUM_GROUPS).contains(&group_number));
    Ok(AtomIndexPair { atom_number: atomic_number as u8, group_number })
}

/// Network-ready arrays aligned with the graph's edge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizedGraph {
    pub atom_pairs: Vec<AtomIndexPair>,
    pub edge_src: Vec<usize>,
    pub edge_dst: Vec<usize>,
    pub n_rbf: usize,
    pub n_sbf: usize,
    /// Row-major `[num_edges × n_rbf]`.
    pub edge_rbf: Vec<f64>,
    /// Row-major `[num_edges × 2·n_sbf]`.
    pub edge_sbf: Vec<f64>,
}

impl FeaturizedGraph {
    pub fn num_atoms(&self) -> usize {
        self.atom_pairs.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_src.len()
    }

    pub fn rbf_row(&self, edge: usize) -> &[f64] {
        &self.edge_rbf[edge * self.n_rbf..(edge + 1) * self.n_rbf]
    }

    pub fn sbf_row(&self, edge: usize) -> &[f64] {
        let w = 2 * self.n_sbf;
        &self.edge_sbf[edge * w..(edge + 1) * w]
    }
}

pub fn featurize_graph(graph: &CrystalGraph, config: &BasisConfig) -> Result<FeaturizedGraph> {
    config.validate()?;
    if graph.cutoffs().edge_cutoff != config.edge_cutoff {
        return Err(Error::InvalidConfig(format!(
            "graph edge cutoff {} differs from basis cutoff {}",
            graph.cutoffs().edge_cutoff,
            config.edge_cutoff
        )));
    }
    let atom_pairs =
        graph.crystal().atomic_numbers().iter().map(|&z| atom_groups(z as u32)).collect::<Result<Vec<_>>>()?;
    let edges = graph.edges();
    let (n_rbf, w_sbf) = (config.n_rbf, config.sbf_len());
    let mut edge_rbf = vec![0.0; edges.len() * n_rbf];
    let mut edge_sbf = vec![0.0; edges.len() * w_sbf];
    for (k, (edge, angles)) in edges.iter().zip(graph.angle_sets()).enumerate() {
        rbf_into(edge.distance, config.edge_cutoff, &mut edge_rbf[k * n_rbf..(k + 1) * n_rbf])?;
        sbf_into(angles, config, &mut edge_sbf[k * w_sbf..(k + 1) * w_sbf]);
    }
    Ok(FeaturizedGraph {
        atom_pairs,
        edge_src: edges.iter().map(|e| e.src).collect(),
        edge_dst: edges.iter().map(|e| e.dst).collect(),
        n_rbf,
        n_sbf: config.n_sbf,
        edge_rbf,
        edge_sbf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    fn cfg(cutoff: f64) -> BasisConfig {
        BasisConfig { edge_cutoff: cutoff, ..BasisConfig::default() }
    }

    #[test]
    fn rbf_limits_and_root() {
        let c = cfg(8.0);
        assert!(rbf(1e-9, &c).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(rbf(8.0, &c).unwrap().iter().all(|&v| v == 0.0));
        // sin(π/2)/(π/2)
        assert!((rbf(4.0, &c).unwrap()[0] - 0.636_619_772_367_581_3).abs() < 1e-15);
        assert!(matches!(rbf(0.0, &c), Err(Error::OutOfRange { .. })));
        assert!(matches!(rbf(8.5, &c), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn legendre_closed_forms() {
        let mut p = [0.0; 5];
        for &x in &[-1.0, -0.3, 0.0, 0.5, 1.0] {
            legendre_into(x, &mut p);
            let x2: f64 = x * x;
            assert!((p[2] - (3.0 * x2 - 1.0) / 2.0).abs() < 1e-14);
            assert!((p[3] - (5.0 * x2 * x - 3.0 * x) / 2.0).abs() < 1e-14);
            assert!((p[4] - (35.0 * x2 * x2 - 30.0 * x2 + 3.0) / 8.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sbf_examples() {
        let c = cfg(8.0);
        let right = AngleSet { at_src: vec![FRAC_PI_2; 4], at_dst: vec![] };
        let v = sbf(&right, &c);
        assert_eq!(v[0], 1.0);
        assert!(v[1].abs() < 1e-15);
        assert!(v[8..].iter().all(|&x| x == 0.0));

        let ends = AngleSet { at_src: vec![0.0, PI], at_dst: vec![0.0, PI] };
        let v = sbf(&ends, &c);
        assert!((v[2] - 1.0).abs() < 1e-14);
        assert!((v[10] - 1.0).abs() < 1e-14);

        let sum = BasisConfig { aggregation: AngleAggregation::Sum, ..c };
        assert!((sbf(&right, &sum)[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn group_examples() {
        assert_eq!(atom_groups(11).unwrap().group_number, 1);
        assert_eq!(atom_groups(17).unwrap().group_number, 17);
        assert!(matches!(atom_groups(0), Err(Error::UnknownElement(_))));
    }
}
