//! Dual-scale periodic crystal graphs.
//!
//! Edges connect every cell atom to each periodic image within the edge
//! cutoff. For each edge `i → j` the angle set at `i` holds the angles
//! between the bond and every other angle neighbor of `i` (images within the
//! angle cutoff); the set at `j` is built the same way with `j` as vertex and
//! `j → i` as the reference bond. The bond partner image itself is excluded
//! from each set.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::crystal::{cross, dot, norm, scale, sub, Crystal, Vec3};
use crate::math::{ceil, floor, sqrt};
use crate::{Error, Result};

pub const DEFAULT_EDGE_CUTOFF: f64 = 8.0;

/// Edge and angle cutoffs in Å.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffConfig {
    pub edge_cutoff: f64,
    pub angle_cutoff: f64,
    #[serde(default)]
    pub max_neighbors: Option<usize>,
}

impl Default for CutoffConfig {
    fn default() -> Self {
        Self::paper_mode(DEFAULT_EDGE_CUTOFF).expect("default cutoff is valid")
    }
}

impl CutoffConfig {
    pub fn new(edge_cutoff: f64, angle_cutoff: f64) -> Result<Self> {
        let c = Self { edge_cutoff, angle_cutoff, max_neighbors: None };
        c.validate()?;
        Ok(c)
    }

    /// `C_a = √C_e` with both taken as plain numbers in Å.
    pub fn paper_mode(edge_cutoff: f64) -> Result<Self> {
        Self::new(edge_cutoff, sqrt(edge_cutoff))
    }

    pub fn single_scale(cutoff: f64) -> Result<Self> {
        Self::new(cutoff, cutoff)
    }

    pub fn with_max_neighbors(mut self, cap: Option<usize>) -> Self {
        self.max_neighbors = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (e, a) = (self.edge_cutoff, self.angle_cutoff);
        if !(e.is_finite() && a.is_finite()) {
            return Err(Error::InvalidCutoffs("cutoffs must be finite".into()));
        }
        if !(a > 0.0 && a <= e) {
            return Err(Error::InvalidCutoffs(format!("need 0 < angle cutoff ≤ edge cutoff, got C_a={a}, C_e={e}")));
        }
        if self.max_neighbors == Some(0) {
            return Err(Error::InvalidCutoffs("max_neighbors must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Whether `C_e = C_a²` holds up to float rounding of the square root.
    pub fn satisfies_square_relation(&self) -> bool {
        let sq = self.angle_cutoff * self.angle_cutoff;
        crate::math::abs(sq - self.edge_cutoff) <= 1e-12 * self.edge_cutoff.max(1.0)
    }
}

/// One periodic image of a cell atom seen from a center atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageNeighbor {
    pub atom: usize,
    /// Integer lattice translation applied to `atom`, relative to the stored cartesian coordinates.
    pub offset: [i32; 3],
    pub distance: f64,
    /// `x_atom + offset·L − x_center`
    pub displacement: Vec3,
}

fn neighbor_order(a: &ImageNeighbor, b: &ImageNeighbor) -> Ordering {
    a.distance.total_cmp(&b.distance).then_with(|| a.offset.cmp(&b.offset)).then_with(|| a.atom.cmp(&b.atom))
}

/// All periodic images with `0 < d ≤ cutoff` around every cell atom.
///
/// Each per-atom list is sorted by (distance, offset, atom). The image search
/// range per axis is derived from the perpendicular cell widths and then
/// tightened per atom pair.
pub fn neighbor_images(crystal: &Crystal, cutoff: f64) -> Result<Vec<Vec<ImageNeighbor>>> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::InvalidCutoffs(format!("cutoff must be positive, got {cutoff}")));
    }
    let lattice = crystal.lattice();
    let widths = lattice.perpendicular_widths();
    let reach = widths.map(|w| cutoff / w);
    let fracs = crystal.frac_coords();
    // shift[k] moves the stored coordinate into the unit cell
    let shifts: Vec<[i32; 3]> = fracs.iter().map(|f| f.map(|x| floor(x) as i32)).collect();
    let wrapped: Vec<Vec3> =
        fracs.iter().zip(&shifts).map(|(f, s)| [f[0] - s[0] as f64, f[1] - s[1] as f64, f[2] - s[2] as f64]).collect();
    let coords = crystal.cart_coords();
    let n = crystal.num_atoms();
    let cutoff_sq = cutoff * cutoff;

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut list = Vec::new();
        for j in 0..n {
            let df = sub(wrapped[j], wrapped[i]);
            let mut lo = [0i32; 3];
            let mut hi = [0i32; 3];
            for k in 0..3 {
                lo[k] = ceil(-df[k] - reach[k]) as i32;
                hi[k] = floor(-df[k] + reach[k]) as i32;
            }
            for a in lo[0]..=hi[0] {
                for b in lo[1]..=hi[1] {
                    for c in lo[2]..=hi[2] {
                        // offset in terms of the original (unwrapped) coordinates
                        let offset = [
                            a - shifts[j][0] + shifts[i][0],
                            b - shifts[j][1] + shifts[i][1],
                            c - shifts[j][2] + shifts[i][2],
                        ];
                        if j == i && offset == [0, 0, 0] {
                            continue;
                        }
                        let t = lattice.frac_to_cart(offset.map(f64::from));
                        let disp = [
                            coords[j][0] + t[0] - coords[i][0],
                            coords[j][1] + t[1] - coords[i][1],
                            coords[j][2] + t[2] - coords[i][2],
                        ];
                        let d2 = dot(disp, disp);
                        if d2 <= cutoff_sq && d2 > 0.0 {
                            list.push(ImageNeighbor { atom: j, offset, distance: sqrt(d2), displacement: disp });
                        }
                    }
                }
            }
        }
        list.sort_by(neighbor_order);
        out.push(list);
    }
    Ok(out)
}

/// Angle between two vectors in `[0, π]`.
pub fn angle_between(u: Vec3, v: Vec3) -> Result<f64> {
    let (nu, nv) = (norm(u), norm(v));
    if nu <= 1e-12 || nv <= 1e-12 {
        return Err(Error::ZeroVector);
    }
    Ok(angle_unchecked(u, v))
}

/// `atan2(|u×v|, u·v)`; unlike `acos` of the cosine it stays accurate for
/// (anti)parallel bonds.
#[inline]
fn angle_unchecked(u: Vec3, v: Vec3) -> f64 {
    libm::atan2(norm(cross(u, v)), dot(u, v))
}

/// Directed edge from a cell atom to a periodic image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub offset: [i32; 3],
    pub distance: f64,
    pub unit_vector: Vec3,
}

/// Vertex angles (radians) attached to one edge.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AngleSet {
    pub at_src: Vec<f64>,
    pub at_dst: Vec<f64>,
}

impl AngleSet {
    pub fn len(&self) -> usize {
        self.at_src.len() + self.at_dst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrystalGraph {
    crystal: Crystal,
    edges: Vec<Edge>,
    angle_sets: Vec<AngleSet>,
    angle_neighbor_counts: Vec<usize>,
    cutoffs: CutoffConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub num_atoms: usize,
    pub num_edges: usize,
    pub num_angles: usize,
    pub m_avg: f64,
    pub k_avg: f64,
}

impl CrystalGraph {
    pub fn crystal(&self) -> &Crystal {
        &self.crystal
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn angle_sets(&self) -> &[AngleSet] {
        &self.angle_sets
    }

    pub fn cutoffs(&self) -> &CutoffConfig {
        &self.cutoffs
    }

    pub fn num_atoms(&self) -> usize {
        self.crystal.num_atoms()
    }

    /// Number of angle neighbors (images within the angle cutoff) per cell atom.
    pub fn angle_neighbor_counts(&self) -> &[usize] {
        &self.angle_neighbor_counts
    }

    /// Drop all angle information, keeping edges.
    pub fn without_angles(mut self) -> Self {
        self.angle_sets.iter_mut().for_each(|s| {
            s.at_src.clear();
            s.at_dst.clear();
        });
        self.angle_neighbor_counts.iter_mut().for_each(|k| *k = 0);
        self
    }

    pub fn stats(&self) -> GraphStats {
        graph_stats(self)
    }
}

pub fn graph_stats(graph: &CrystalGraph) -> GraphStats {
    let n = graph.num_atoms();
    let num_angles = graph.angle_sets.iter().map(AngleSet::len).sum();
    let k_total: usize = graph.angle_neighbor_counts.iter().sum();
    GraphStats {
        num_atoms: n,
        num_edges: graph.edges.len(),
        num_angles,
        m_avg: graph.edges.len() as f64 / n as f64,
        k_avg: k_total as f64 / n as f64,
    }
}

/// Build the dual-scale graph. Fails with [`Error::EmptyGraph`] when no atom
/// has any neighbor within the edge cutoff.
pub fn build_graph(crystal: &Crystal, cutoffs: &CutoffConfig) -> Result<CrystalGraph> {
    let graph = assemble(crystal, cutoffs, true)?;
    ensure_edges(graph)
}

/// Like [`build_graph`] but without computing any angles.
pub fn build_graph_without_angles(crystal: &Crystal, cutoffs: &CutoffConfig) -> Result<CrystalGraph> {
    let graph = assemble(crystal, cutoffs, false)?;
    ensure_edges(graph)
}

/// Single-cutoff comparator: angle neighbors use the edge cutoff.
pub fn build_graph_single_scale(crystal: &Crystal, cutoff: f64) -> Result<CrystalGraph> {
    build_graph(crystal, &CutoffConfig::single_scale(cutoff)?)
}

/// Graph construction that accepts crystals without any edges.
pub fn build_graph_allow_empty(crystal: &Crystal, cutoffs: &CutoffConfig) -> Result<CrystalGraph> {
    assemble(crystal, cutoffs, true)
}

fn ensure_edges(graph: CrystalGraph) -> Result<CrystalGraph> {
    if graph.edges.is_empty() {
        Err(Error::EmptyGraph(graph.cutoffs.edge_cutoff))
    } else {
        Ok(graph)
    }
}

fn assemble(crystal: &Crystal, cutoffs: &CutoffConfig, with_angles: bool) -> Result<CrystalGraph> {
    cutoffs.validate()?;
    let mut neighbors = neighbor_images(crystal, cutoffs.edge_cutoff)?;
    if let Some(cap) = cutoffs.max_neighbors {
        neighbors.iter_mut().for_each(|l| l.truncate(cap));
    }
    // lists are distance-sorted, so angle neighbors are a prefix
    let angle_counts: Vec<usize> =
        neighbors.iter().map(|l| l.partition_point(|nb| nb.distance <= cutoffs.angle_cutoff)).collect();

    let mut edges = Vec::new();
    let mut angle_sets = Vec::new();
    for (i, list) in neighbors.iter().enumerate() {
        for nb in list {
            let dist = nb.distance;
            edges.push(Edge {
                src: i,
                dst: nb.atom,
                offset: nb.offset,
                distance: dist,
                unit_vector: scale(nb.displacement, 1.0 / dist),
            });
            if !with_angles {
                angle_sets.push(AngleSet::default());
                continue;
            }
            let at_src = neighbors[i][..angle_counts[i]]
                .iter()
                .filter(|k| !(k.atom == nb.atom && k.offset == nb.offset))
                .map(|k| angle_unchecked(k.displacement, nb.displacement))
                .collect();
            let back = nb.displacement.map(|x| -x);
            let back_offset = nb.offset.map(|x| -x);
            let at_dst = neighbors[nb.atom][..angle_counts[nb.atom]]
                .iter()
                .filter(|k| !(k.atom == i && k.offset == back_offset))
                .map(|k| angle_unchecked(k.displacement, back))
                .collect();
            angle_sets.push(AngleSet { at_src, at_dst });
        }
    }
    let angle_neighbor_counts = if with_angles { angle_counts } else { alloc::vec![0; crystal.num_atoms()] };
    Ok(CrystalGraph { crystal: crystal.clone(), edges, angle_sets, angle_neighbor_counts, cutoffs: *cutoffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::Lattice;
    use alloc::vec;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn simple_cubic(a: f64) -> Crystal {
        Crystal::new(vec![84], vec![[0.0; 3]], Lattice::cubic(a).unwrap(), None).unwrap()
    }

    #[test]
    fn angle_examples() {
        assert_eq!(angle_between([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((angle_between([1.0, 2.0, 3.0], [-1.0, -2.0, -3.0]).unwrap() - PI).abs() < 1e-12);
        assert!((angle_between([1.0, 0.0, 0.0], [1.0, 1.0, 0.0]).unwrap() - FRAC_PI_4).abs() < 1e-12);
        assert!((angle_between([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(angle_between([0.0; 3], [1.0, 0.0, 0.0]), Err(Error::ZeroVector));
    }

    #[test]
    fn simple_cubic_neighbor_shells() {
        let c = simple_cubic(1.0);
        let n = neighbor_images(&c, 1.1).unwrap();
        assert_eq!(n[0].len(), 6);
        assert!(n[0].iter().all(|nb| (nb.distance - 1.0).abs() < 1e-12));
        let n = neighbor_images(&c, 1.5).unwrap();
        assert_eq!(n[0].len(), 18);
        assert_eq!(n[0].iter().filter(|nb| (nb.distance - 2f64.sqrt()).abs() < 1e-12).count(), 12);
        assert!(neighbor_images(&c, 0.5).unwrap()[0].is_empty());
    }

    #[test]
    fn simple_cubic_dual_scale_angles() {
        let c = simple_cubic(1.0);
        let g = build_graph(&c, &CutoffConfig::new(1.1, 1.05).unwrap()).unwrap();
        assert_eq!(g.edges().len(), 6);
        for set in g.angle_sets() {
            for block in [&set.at_src, &set.at_dst] {
                assert_eq!(block.len(), 5);
                let right = block.iter().filter(|&&a| (a - FRAC_PI_2).abs() < 1e-12).count();
                let straight = block.iter().filter(|&&a| (a - PI).abs() < 1e-12).count();
                assert_eq!((right, straight), (4, 1));
            }
        }
        let s = g.stats();
        assert_eq!(s.num_angles, 60);
        assert_eq!(s.m_avg, 6.0);
        assert_eq!(s.k_avg, 6.0);
    }

    #[test]
    fn single_scale_counts() {
        let g = build_graph_single_scale(&simple_cubic(1.0), 1.5).unwrap();
        assert!(g.angle_sets().iter().all(|s| s.at_src.len() == 17 && s.at_dst.len() == 17));
    }

    #[test]
    fn small_angle_cutoff_gives_empty_sets() {
        let g = build_graph(&simple_cubic(1.0), &CutoffConfig::new(1.1, 0.9).unwrap()).unwrap();
        assert!(g.angle_sets().iter().all(AngleSet::is_empty));
        assert_eq!(g.edges().len(), 6);
    }

    #[test]
    fn empty_graph_error_and_lenient_stats() {
        let c = simple_cubic(1.0);
        let cut = CutoffConfig::new(0.5, 0.5).unwrap();
        assert_eq!(build_graph(&c, &cut), Err(Error::EmptyGraph(0.5)));
        let s = build_graph_allow_empty(&c, &cut).unwrap().stats();
        assert_eq!(s, GraphStats { num_atoms: 1, num_edges: 0, num_angles: 0, m_avg: 0.0, k_avg: 0.0 });
    }

    #[test]
    fn cutoff_validation() {
        assert!(CutoffConfig::new(1.0, 2.0).is_err());
        assert!(CutoffConfig::new(1.0, 0.0).is_err());
        assert!(CutoffConfig::new(f64::NAN, 1.0).is_err());
        let p = CutoffConfig::default();
        assert_eq!(p.edge_cutoff, 8.0);
        assert!((p.angle_cutoff - 8f64.sqrt()).abs() < 1e-15);
        assert!(p.satisfies_square_relation());
        assert!(!CutoffConfig::new(8.0, 2.0).unwrap().satisfies_square_relation());
    }

    #[test]
    fn edges_sorted_and_reciprocal() {
        let l = Lattice::new([[3.0, 0.0, 0.0], [0.8, 2.7, 0.0], [0.3, 0.4, 3.1]]).unwrap();
        let c = Crystal::new(vec![11, 17], vec![[0.1, 0.2, 0.3], [1.7, 1.4, 1.2]], l, None).unwrap();
        let g = build_graph(&c, &CutoffConfig::new(4.0, 2.0).unwrap()).unwrap();
        for w in g.edges().windows(2) {
            let key = |e: &Edge| (e.src, e.distance, e.offset);
            let (a, b) = (key(&w[0]), key(&w[1]));
            assert!(a.0 < b.0 || (a.0 == b.0 && (a.1 < b.1 || (a.1 == b.1 && a.2 <= b.2))));
        }
        for e in g.edges() {
            assert!((norm(e.unit_vector) - 1.0).abs() < 1e-10);
            let back = e.offset.map(|x| -x);
            let r = g
                .edges()
                .iter()
                .find(|f| f.src == e.dst && f.dst == e.src && f.offset == back)
                .expect("reciprocal edge");
            assert!((r.distance - e.distance).abs() < 1e-12);
        }
    }

    #[test]
    fn max_neighbors_cap() {
        let c = simple_cubic(1.0);
        let cut = CutoffConfig::new(1.5, 1.5).unwrap().with_max_neighbors(Some(6));
        let g = build_graph(&c, &cut).unwrap();
        assert_eq!(g.edges().len(), 6);
        assert!(g.edges().iter().all(|e| (e.distance - 1.0).abs() < 1e-12));
    }

    #[test]
    fn without_angles_strips_everything() {
        let g = build_graph(&simple_cubic(1.0), &CutoffConfig::new(1.1, 1.05).unwrap()).unwrap().without_angles();
        assert_eq!(g.stats().num_angles, 0);
        let h = build_graph_without_angles(&simple_cubic(1.0), &CutoffConfig::new(1.1, 1.05).unwrap()).unwrap();
        assert_eq!(g, h);
    }
}
