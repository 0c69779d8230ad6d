//! A matching instance: both graphs' incidence structure plus all affinity blocks.

use nalgebra::DMatrix;

use crate::affinity::{build_layer_affinities, KernelConfig, LayerAffinities};
use crate::error::{Error, Result};
use crate::model::{
    build_edge_incidence, build_inter_edge_incidence, build_layer_incidence, EdgeIncidence, IncidenceBundle,
    MultiLayerGraph,
};

#[derive(Clone, Debug, PartialEq)]
pub struct MatchingProblem {
    pub n_layers: usize,
    pub intra1: EdgeIncidence,
    pub intra2: EdgeIncidence,
    pub inter1: EdgeIncidence,
    pub inter2: EdgeIncidence,
    pub affinities: LayerAffinities,
    /// `ground_truth[i] = Some(a)` when vertex `i` of graph 1 corresponds to `a` in graph 2.
    pub ground_truth: Option<Vec<Option<usize>>>,
}

impl MatchingProblem {
    pub fn new(
        intra1: EdgeIncidence,
        intra2: EdgeIncidence,
        inter1: EdgeIncidence,
        inter2: EdgeIncidence,
        affinities: LayerAffinities,
        ground_truth: Option<Vec<Option<usize>>>,
    ) -> Result<Self> {
        let p = Self {
            n_layers: affinities.n_layers(),
            intra1,
            intra2,
            inter1,
            inter2,
            affinities,
            ground_truth,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_graphs(g1: &MultiLayerGraph, g2: &MultiLayerGraph, cfg: &KernelConfig) -> Result<Self> {
        if g1.n_layers() != g2.n_layers() {
            return Err(Error::Dimension(format!(
                "graphs have {} and {} layers",
                g1.n_layers(),
                g2.n_layers()
            )));
        }
        let inc = IncidenceBundle {
            intra1: build_edge_incidence(g1),
            intra2: build_edge_incidence(g2),
            inter1: build_inter_edge_incidence(g1),
            inter2: build_inter_edge_incidence(g2),
            layers: build_layer_incidence(g1.n_layers())?,
        };
        let affinities = build_layer_affinities(g1, g2, &inc, cfg)?;
        Self::new(inc.intra1, inc.intra2, inc.inter1, inc.inter2, affinities, None)
    }

    pub fn n1(&self) -> usize {
        self.intra1.n_vertices()
    }

    pub fn n2(&self) -> usize {
        self.intra2.n_vertices()
    }

    pub fn incidences(&self) -> IncidenceBundle {
        IncidenceBundle {
            intra1: self.intra1.clone(),
            intra2: self.intra2.clone(),
            inter1: self.inter1.clone(),
            inter2: self.inter2.clone(),
            layers: build_layer_incidence(self.n_layers).expect("validated layer count"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::InvalidParameter("problem needs at least one layer".into()));
        }
        if self.inter1.n_vertices() != self.n1() || self.inter2.n_vertices() != self.n2() {
            return Err(Error::Dimension(
                "inter-layer incidence vertex count differs from intra".into(),
            ));
        }
        self.affinities.validate(&self.incidences())?;
        if let Some(gt) = &self.ground_truth {
            if gt.len() != self.n1() {
                return Err(Error::Dimension(format!(
                    "ground truth has {} entries for {} vertices",
                    gt.len(),
                    self.n1()
                )));
            }
            if gt.iter().flatten().any(|&a| a >= self.n2()) {
                return Err(Error::Dimension("ground truth index out of range".into()));
            }
        }
        Ok(())
    }
}

/// Records the original sizes of a padded problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DummyMap {
    pub n1: usize,
    pub n2: usize,
}

impl DummyMap {
    pub fn padded_size(&self) -> usize {
        self.n1.max(self.n2)
    }

    pub fn is_identity(&self) -> bool {
        self.n1 == self.n2
    }

    /// Drop dummy rows and columns from a padded `n × n` matrix.
    pub fn strip(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x.view((0, 0), (self.n1, self.n2)).into_owned()
    }
}

/// Add isolated zero-affinity vertices to the smaller graph so assignments are square.
pub fn pad_with_dummies(problem: &MatchingProblem) -> (MatchingProblem, DummyMap) {
    let map = DummyMap {
        n1: problem.n1(),
        n2: problem.n2(),
    };
    if map.is_identity() {
        return (problem.clone(), map);
    }
    let n = map.padded_size();
    let unary = problem
        .affinities
        .unary
        .iter()
        .map(|b| {
            let mut padded = DMatrix::zeros(n, n);
            padded.view_mut((0, 0), b.shape()).copy_from(b);
            padded
        })
        .collect();
    let padded = MatchingProblem {
        n_layers: problem.n_layers,
        intra1: problem.intra1.with_vertex_count(n),
        intra2: problem.intra2.with_vertex_count(n),
        inter1: problem.inter1.with_vertex_count(n),
        inter2: problem.inter2.with_vertex_count(n),
        affinities: LayerAffinities {
            unary,
            intra: problem.affinities.intra.clone(),
            inter: problem.affinities.inter.clone(),
        },
        ground_truth: problem.ground_truth.as_ref().map(|gt| {
            let mut gt = gt.clone();
            gt.resize(n, None);
            gt
        }),
    };
    (padded, map)
}
