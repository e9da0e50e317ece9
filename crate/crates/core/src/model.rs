//! The message-passing network.
//!
//! * node embedding: `h⁰ = MLP(MLP(onehot Z) ∥ MLP(onehot group))`
//! * structure embedding: `s = MLP(MLP(sbf) ⊙ MLP(rbf))`, or `MLP(MLP(rbf))`
//!   when angles are disabled
//! * interaction block: `e = MLP(h_i ∥ h_j ∥ s_ij)`,
//!   `t_i = Σ_j σ(e) ⊙ e`, `h' = ReLU(h + LayerNorm(t))`
//! * readout: `ŷ = MLP(mean_n h_n)`
//!
//! The same `s` feeds every interaction block.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elements::{MAX_ATOMIC_NUMBER, NUM_GROUPS};
use crate::featurize::{featurize_graph, BasisConfig, FeaturizedGraph};
use crate::graph::{build_graph, build_graph_without_angles, CutoffConfig};
use crate::nn::{LayerNorm, Mlp};
use crate::tensor::{Matrix, ParamId, ParamStore, Tape, Var};
use crate::{Crystal, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub num_blocks: usize,
    pub basis: BasisConfig,
    pub cutoffs: CutoffConfig,
    pub use_angles: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 128,
            num_blocks: 4,
            basis: BasisConfig::default(),
            cutoffs: CutoffConfig::default(),
            use_angles: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Config with the basis cutoff tied to the graph cutoffs.
    pub fn with_cutoffs(mut self, cutoffs: CutoffConfig) -> Self {
        self.cutoffs = cutoffs;
        self.basis.edge_cutoff = cutoffs.edge_cutoff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.num_blocks == 0 {
            return Err(Error::InvalidConfig("hidden_dim and num_blocks must be ≥ 1".into()));
        }
        self.basis.validate()?;
        self.cutoffs.validate()?;
        if self.basis.edge_cutoff != self.cutoffs.edge_cutoff {
            return Err(Error::InvalidConfig(format!(
                "basis edge cutoff {} differs from graph edge cutoff {}",
                self.basis.edge_cutoff, self.cutoffs.edge_cutoff
            )));
        }
        Ok(())
    }
}

/// Several featurized crystals packed into one disjoint graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    atom_onehot: Matrix,
    group_onehot: Matrix,
    rbf: Matrix,
    sbf: Matrix,
    src: Vec<usize>,
    dst: Vec<usize>,
    atom_crystal: Vec<usize>,
    num_crystals: usize,
}

impl GraphBatch {
    pub fn new(graphs: &[&FeaturizedGraph]) -> Result<Self> {
        let first = graphs.first().ok_or_else(|| Error::ShapeMismatch("empty batch".into()))?;
        let (n_rbf, n_sbf) = (first.n_rbf, first.n_sbf);
        if graphs.iter().any(|g| g.n_rbf != n_rbf || g.n_sbf != n_sbf) {
            return Err(Error::ShapeMismatch("mixed basis sizes in batch".into()));
        }
        if let Some(g) = graphs.iter().find(|g| g.num_atoms() == 0) {
            return Err(Error::ShapeMismatch(format!("graph with {} atoms", g.num_atoms())));
        }
        let num_atoms: usize = graphs.iter().map(|g| g.num_atoms()).sum();
        let num_edges: usize = graphs.iter().map(|g| g.num_edges()).sum();
        let mut atom_onehot = Matrix::zeros(num_atoms, MAX_ATOMIC_NUMBER as usize);
        let mut group_onehot = Matrix::zeros(num_atoms, NUM_GROUPS as usize);
        let mut rbf = Vec::with_capacity(num_edges * n_rbf);
        let mut sbf = Vec::with_capacity(num_edges * 2 * n_sbf);
        let (mut src, mut dst) = (Vec::with_capacity(num_edges), Vec::with_capacity(num_edges));
        let mut atom_crystal = Vec::with_capacity(num_atoms);
        let mut base = 0;
        for (c, g) in graphs.iter().enumerate() {
            for (k, pair) in g.atom_pairs.iter().enumerate() {
                let row = base + k;
                atom_onehot.data_mut()[row * MAX_ATOMIC_NUMBER as usize + pair.atom_number as usize - 1] = 1.0;
                group_onehot.data_mut()[row * NUM_GROUPS as usize + pair.group_number as usize - 1] = 1.0;
                atom_crystal.push(c);
            }
            src.extend(g.edge_src.iter().map(|&i| i + base));
            dst.extend(g.edge_dst.iter().map(|&j| j + base));
            rbf.extend_from_slice(&g.edge_rbf);
            sbf.extend_from_slice(&g.edge_sbf);
            base += g.num_atoms();
        }
        Ok(Self {
            atom_onehot,
            group_onehot,
            rbf: Matrix::from_vec(num_edges, n_rbf, rbf)?,
            sbf: Matrix::from_vec(num_edges, 2 * n_sbf, sbf)?,
            src,
            dst,
            atom_crystal,
            num_crystals: graphs.len(),
        })
    }

    pub fn num_atoms(&self) -> usize {
        self.atom_crystal.len()
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    pub fn num_crystals(&self) -> usize {
        self.num_crystals
    }

    /// Replace the angular features, e.g. to probe the angle-free variant.
    pub fn set_sbf(&mut self, sbf: Matrix) -> Result<()> {
        if sbf.shape() != self.sbf.shape() {
            return Err(Error::ShapeMismatch("sbf shape".into()));
        }
        self.sbf = sbf;
        Ok(())
    }

    pub fn sbf(&self) -> &Matrix {
        &self.sbf
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionBlock {
    pub message: Mlp,
    pub norm: LayerNorm,
}

/// All learnable state of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    config: ModelConfig,
    store: ParamStore,
    atom_mlp: Mlp,
    group_mlp: Mlp,
    node_mlp: Mlp,
    rbf_mlp: Mlp,
    sbf_mlp: Mlp,
    structure_mlp: Mlp,
    blocks: Vec<InteractionBlock>,
    readout_mlp: Mlp,
}

impl ModelState {
    /// Fresh randomly initialized network, seeded by `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let h = config.hidden_dim;
        let s = &mut store;
        let atom_mlp = Mlp::two_layer(s, "embed.atom", MAX_ATOMIC_NUMBER as usize, h, h, &mut rng);
        let group_mlp = Mlp::two_layer(s, "embed.group", NUM_GROUPS as usize, h, h, &mut rng);
        let node_mlp = Mlp::two_layer(s, "embed.node", 2 * h, h, h, &mut rng);
        let rbf_mlp = Mlp::two_layer(s, "structure.rbf", config.basis.n_rbf, h, h, &mut rng);
        let sbf_mlp = Mlp::two_layer(s, "structure.sbf", config.basis.sbf_len(), h, h, &mut rng);
        let structure_mlp = Mlp::two_layer(s, "structure.out", h, h, h, &mut rng);
        let blocks = (0..config.num_blocks)
            .map(|l| InteractionBlock {
                message: Mlp::two_layer(s, &format!("block{l}.message"), 3 * h, h, h, &mut rng),
                norm: LayerNorm::new(s, &format!("block{l}.norm"), h),
            })
            .collect();
        let readout_mlp = Mlp::two_layer(s, "readout", h, h, 1, &mut rng);
        Ok(Self { config, store, atom_mlp, group_mlp, node_mlp, rbf_mlp, sbf_mlp, structure_mlp, blocks, readout_mlp })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn blocks(&self) -> &[InteractionBlock] {
        &self.blocks
    }

    /// Parameter ids grouped by network component.
    pub fn param_groups(&self) -> Vec<(String, Vec<ParamId>)> {
        let mut groups = vec![
            (String::from("embed.atom"), self.atom_mlp.params()),
            (String::from("embed.group"), self.group_mlp.params()),
            (String::from("embed.node"), self.node_mlp.params()),
            (String::from("structure.rbf"), self.rbf_mlp.params()),
            (String::from("structure.sbf"), self.sbf_mlp.params()),
            (String::from("structure.out"), self.structure_mlp.params()),
        ];
        for (l, b) in self.blocks.iter().enumerate() {
            let mut ids = b.message.params();
            ids.extend(b.norm.params());
            groups.push((format!("block{l}"), ids));
        }
        groups.push((String::from("readout"), self.readout_mlp.params()));
        groups
    }

    /// Copy parameter values from another state with the same layout.
    pub fn load_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.len() != self.store.len() {
            return Err(Error::ShapeMismatch("parameter count differs".into()));
        }
        for (dst, src) in self.store.iter_mut().zip(other.iter()) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(Error::ShapeMismatch(format!("parameter {} differs", dst.name)));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }

    pub fn node_embed(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<Var> {
        let atoms = tape.input(batch.atom_onehot.clone());
        let groups = tape.input(batch.group_onehot.clone());
        let a = self.atom_mlp.forward(tape, &self.store, atoms)?;
        let g = self.group_mlp.forward(tape, &self.store, groups)?;
        let cat = tape.concat(&[a, g])?;
        self.node_mlp.forward(tape, &self.store, cat)
    }

    pub fn structure_embed(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<Var> {
        let rbf = tape.input(batch.rbf.clone());
        let radial = self.rbf_mlp.forward(tape, &self.store, rbf)?;
        let inner = if self.config.use_angles {
            let sbf = tape.input(batch.sbf.clone());
            let angular = self.sbf_mlp.forward(tape, &self.store, sbf)?;
            tape.mul(angular, radial)?
        } else {
            radial
        };
        self.structure_mlp.forward(tape, &self.store, inner)
    }

    pub fn interaction(&self, tape: &mut Tape, block: usize, h: Var, s: Var, batch: &GraphBatch) -> Result<Var> {
        let params =
            self.blocks.get(block).ok_or_else(|| Error::ShapeMismatch(format!("no interaction block {block}")))?;
        let h_src = tape.gather_rows(h, &batch.src)?;
        let h_dst = tape.gather_rows(h, &batch.dst)?;
        let cat = tape.concat(&[h_src, h_dst, s])?;
        let e = params.message.forward(tape, &self.store, cat)?;
        let gate = tape.sigmoid(e);
        let msg = tape.mul(gate, e)?;
        let t = tape.scatter_add_rows(msg, &batch.src, batch.num_atoms())?;
        let normed = params.norm.forward(tape, &self.store, t)?;
        let res = tape.add(h, normed)?;
        Ok(tape.relu(res))
    }

    /// Mean-pool atoms per crystal, then regress; returns `B×1`.
    pub fn readout(&self, tape: &mut Tape, h: Var, batch: &GraphBatch) -> Result<Var> {
        let pooled = tape.segment_mean(h, &batch.atom_crystal, batch.num_crystals)?;
        self.readout_mlp.forward(tape, &self.store, pooled)
    }

    pub fn forward(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<Var> {
        let mut h = self.node_embed(tape, batch)?;
        let s = self.structure_embed(tape, batch)?;
        for l in 0..self.blocks.len() {
            h = self.interaction(tape, l, h, s, batch)?;
        }
        self.readout(tape, h, batch)
    }

    pub fn predict_batch(&self, batch: &GraphBatch) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let y = self.forward(&mut tape, batch)?;
        tape.check_finite()?;
        Ok(tape.value(y).data().to_vec())
    }

    /// Graph construction and featurization with this model's cutoffs and basis.
    ///
    /// Atoms are put in a canonical order first, which makes every downstream
    /// floating-point sum independent of the input atom order.
    pub fn prepare(&self, crystal: &Crystal) -> Result<FeaturizedGraph> {
        let crystal = canonical_order(crystal)?;
        let graph = if self.config.use_angles {
            build_graph(&crystal, &self.config.cutoffs)?
        } else {
            build_graph_without_angles(&crystal, &self.config.cutoffs)?
        };
        featurize_graph(&graph, &self.config.basis)
    }

    pub fn predict(&self, crystal: &Crystal) -> Result<f64> {
        let features = self.prepare(crystal)?;
        let batch = GraphBatch::new(&[&features])?;
        Ok(self.predict_batch(&batch)?[0])
    }
}

/// Sort atoms by atomic number, then by wrapped fractional coordinates.
pub fn canonical_order(crystal: &Crystal) -> Result<Crystal> {
    let keys: Vec<(u8, [f64; 3])> =
        crystal.atomic_numbers().iter().zip(crystal.wrap_to_cell().frac_coords()).map(|(&z, f)| (z, f)).collect();
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| {
        let (za, fa) = keys[a];
        let (zb, fb) = keys[b];
        za.cmp(&zb)
            .then_with(|| fa[0].total_cmp(&fb[0]))
            .then_with(|| fa[1].total_cmp(&fb[1]))
            .then_with(|| fa[2].total_cmp(&fb[2]))
    });
    crystal.permuted(&order)
}
