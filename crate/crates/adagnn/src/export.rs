//! JSON dump of a crystal graph and its features.

use adagnn_core::crystal::Vec3;
use adagnn_core::featurize::{BasisConfig, FeaturizedGraph};
use adagnn_core::graph::{CrystalGraph, CutoffConfig, GraphStats};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub src: usize,
    pub dst: usize,
    pub offset: [i32; 3],
    pub distance: f64,
    pub unit_vector: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSetJson {
    pub at_src: Vec<f64>,
    pub at_dst: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub id: Option<String>,
    pub cutoffs: CutoffConfig,
    pub basis: BasisConfig,
    pub stats: GraphStats,
    pub edges: Vec<EdgeJson>,
    pub angles: Vec<AngleSetJson>,
    pub features: FeaturizedGraph,
}

impl GraphDocument {
    pub fn new(graph: &CrystalGraph, basis: BasisConfig, features: FeaturizedGraph) -> Self {
        Self {
            id: graph.crystal().id().map(str::to_string),
            cutoffs: *graph.cutoffs(),
            basis,
            stats: graph.stats(),
            edges: graph
                .edges()
                .iter()
                .map(|e| EdgeJson {
                    src: e.src,
                    dst: e.dst,
                    offset: e.offset,
                    distance: e.distance,
                    unit_vector: e.unit_vector,
                })
                .collect(),
            angles: graph
                .angle_sets()
                .iter()
                .map(|a| AngleSetJson { at_src: a.at_src.clone(), at_dst: a.at_dst.clone() })
                .collect(),
            features,
        }
    }
}
