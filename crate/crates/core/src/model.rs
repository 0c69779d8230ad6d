//! Multi-layer graphs, assignment matrices and the incidence matrices that
//! encode edge and layer structure.
//!
//! Vectorization is column-major throughout: `vec(X)[i + a * n1] = X[(i, a)]`.
//! Layer blocks of `L_C ⊗ vec(X)` are ordered by layer index, and ordered
//! layer pairs `(α, β)`, `α ≠ β`, are enumerated lexicographically.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attribute value attached to a vertex or an edge in one layer.
pub type Attribute = Vec<f64>;

/// Which vertex pairs are linked across layers.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum InterLayerEdges {
    /// Every vertex is coupled with its own copy in the other layers.
    #[default]
    SelfLoops,
    /// Explicit directed pairs `(i, j)`; `i == j` is allowed here.
    Pairs(Vec<(usize, usize)>),
}

/// A graph whose layers share one directed edge topology and differ only in
/// their attribute values.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiLayerGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    inter_edges: InterLayerEdges,
    /// `vertex_attrs[layer][vertex]`
    vertex_attrs: Vec<Vec<Attribute>>,
    /// `edge_attrs[layer][edge]`
    edge_attrs: Vec<Vec<Attribute>>,
}

impl MultiLayerGraph {
    pub fn new(
        n_vertices: usize,
        edges: Vec<(usize, usize)>,
        vertex_attrs: Vec<Vec<Attribute>>,
        edge_attrs: Vec<Vec<Attribute>>,
    ) -> Result<Self> {
        let n_layers = vertex_attrs.len();
        if n_layers == 0 {
            return Err(Error::InvalidGraph("a graph needs at least one layer".into()));
        }
        if edge_attrs.len() != n_layers {
            return Err(Error::InvalidGraph(format!(
                "{} vertex-attribute layers but {} edge-attribute layers",
                n_layers,
                edge_attrs.len()
            )));
        }
        validate_pairs(n_vertices, &edges, false)?;
        for (layer, (va, ea)) in vertex_attrs.iter().zip(&edge_attrs).enumerate() {
            if va.len() != n_vertices {
                return Err(Error::InvalidGraph(format!(
                    "layer {layer}: {} vertex attributes for {n_vertices} vertices",
                    va.len()
                )));
            }
            if ea.len() != edges.len() {
                return Err(Error::InvalidGraph(format!(
                    "layer {layer}: {} edge attributes for {} edges",
                    ea.len(),
                    edges.len()
                )));
            }
        }
        Ok(Self {
            n_vertices,
            edges,
            inter_edges: InterLayerEdges::SelfLoops,
            vertex_attrs,
            edge_attrs,
        })
    }

    pub fn with_inter_edges(mut self, inter: InterLayerEdges) -> Result<Self> {
        if let InterLayerEdges::Pairs(pairs) = &inter {
            validate_pairs(self.n_vertices, pairs, true)?;
        }
        self.inter_edges = inter;
        Ok(self)
    }

    /// All ordered pairs `(i, j)`, `i ≠ j`, in lexicographic order.
    pub fn complete_edges(n_vertices: usize) -> Vec<(usize, usize)> {
        (0..n_vertices)
            .flat_map(|i| (0..n_vertices).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_layers(&self) -> usize {
        self.vertex_attrs.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn inter_edges(&self) -> &InterLayerEdges {
        &self.inter_edges
    }

    pub fn vertex_attr(&self, layer: usize, vertex: usize) -> &[f64] {
        &self.vertex_attrs[layer][vertex]
    }

    pub fn edge_attr(&self, layer: usize, edge: usize) -> &[f64] {
        &self.edge_attrs[layer][edge]
    }
}

fn validate_pairs(n_vertices: usize, pairs: &[(usize, usize)], allow_loops: bool) -> Result<()> {
    let mut seen = HashSet::with_capacity(pairs.len());
    for &(i, j) in pairs {
        if i >= n_vertices || j >= n_vertices {
            return Err(Error::InvalidGraph(format!(
                "edge ({i},{j}) out of range for {n_vertices} vertices"
            )));
        }
        if i == j && !allow_loops {
            return Err(Error::InvalidGraph(format!("self-loop ({i},{i}) in intra-layer edges")));
        }
        if !seen.insert((i, j)) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({i},{j})")));
        }
    }
    Ok(())
}

/// Start/end incidence of a directed edge list, kept in column-index form.
///
/// Column `m` of `G` has its single 1 at row `starts[m]`, column `m` of `H`
/// at row `ends[m]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeIncidence {
    n_vertices: usize,
    starts: Vec<usize>,
    ends: Vec<usize>,
}

impl EdgeIncidence {
    pub fn from_pairs(n_vertices: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n_vertices || j >= n_vertices) {
            return Err(Error::InvalidGraph(format!(
                "edge ({i},{j}) out of range for {n_vertices} vertices"
            )));
        }
        Ok(Self {
            n_vertices,
            starts: pairs.iter().map(|p| p.0).collect(),
            ends: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn self_loops(n_vertices: usize) -> Self {
        Self {
            n_vertices,
            starts: (0..n_vertices).collect(),
            ends: (0..n_vertices).collect(),
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.starts.len()
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn ends(&self) -> &[usize] {
        &self.ends
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.starts.iter().copied().zip(self.ends.iter().copied()).collect()
    }

    /// The start incidence matrix `G` (`n_vertices × n_edges`).
    pub fn start_matrix(&self) -> DMatrix<f64> {
        one_hot_columns(self.n_vertices, &self.starts)
    }

    /// The end incidence matrix `H` (`n_vertices × n_edges`).
    pub fn end_matrix(&self) -> DMatrix<f64> {
        one_hot_columns(self.n_vertices, &self.ends)
    }

    /// Same edges on a vertex set enlarged to `n_vertices`; the new vertices are isolated.
    pub fn with_vertex_count(&self, n_vertices: usize) -> Self {
        assert!(n_vertices >= self.n_vertices);
        Self {
            n_vertices,
            ..self.clone()
        }
    }
}

fn one_hot_columns(rows: usize, hot: &[usize]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, hot.len());
    for (col, &row) in hot.iter().enumerate() {
        m[(row, col)] = 1.0;
    }
    m
}

/// Intra-layer edge incidence `(G, H)` of a graph, columns in edge-list order.
pub fn build_edge_incidence(graph: &MultiLayerGraph) -> EdgeIncidence {
    // validated at graph construction
    EdgeIncidence::from_pairs(graph.n_vertices, &graph.edges).expect("graph edges are validated")
}

/// Inter-layer edge incidence; self-loops give `G_t = H_t = I`.
pub fn build_inter_edge_incidence(graph: &MultiLayerGraph) -> EdgeIncidence {
    match &graph.inter_edges {
        InterLayerEdges::SelfLoops => EdgeIncidence::self_loops(graph.n_vertices),
        InterLayerEdges::Pairs(pairs) => {
            EdgeIncidence::from_pairs(graph.n_vertices, pairs).expect("inter edges are validated")
        }
    }
}

/// Layer incidence matrices for `n_layers` layers.
///
/// Intra-layer blocks couple each layer with itself (`L_Gi = L_Hi = I`);
/// inter-layer blocks are the ordered pairs `(α, β)`, `α ≠ β`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerIncidence {
    n_layers: usize,
    pairs: Vec<(usize, usize)>,
}

impl LayerIncidence {
    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    /// Ordered inter-layer pairs in block order.
    pub fn inter_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn n_inter_blocks(&self) -> usize {
        self.pairs.len()
    }

    pub fn intra_start(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n_layers, self.n_layers)
    }

    pub fn intra_end(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n_layers, self.n_layers)
    }

    pub fn inter_start(&self) -> DMatrix<f64> {
        let starts: Vec<usize> = self.pairs.iter().map(|p| p.0).collect();
        one_hot_columns(self.n_layers, &starts)
    }

    pub fn inter_end(&self) -> DMatrix<f64> {
        let ends: Vec<usize> = self.pairs.iter().map(|p| p.1).collect();
        one_hot_columns(self.n_layers, &ends)
    }
}

pub fn build_layer_incidence(n_layers: usize) -> Result<LayerIncidence> {
    if n_layers == 0 {
        return Err(Error::InvalidParameter("n_layers must be at least 1".into()));
    }
    let pairs = (0..n_layers)
        .flat_map(|a| (0..n_layers).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    Ok(LayerIncidence { n_layers, pairs })
}

/// Every incidence matrix needed to assemble the supra-adjacency matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceBundle {
    pub intra1: EdgeIncidence,
    pub intra2: EdgeIncidence,
    pub inter1: EdgeIncidence,
    pub inter2: EdgeIncidence,
    pub layers: LayerIncidence,
}

impl IncidenceBundle {
    pub fn n1(&self) -> usize {
        self.intra1.n_vertices()
    }

    pub fn n2(&self) -> usize {
        self.intra2.n_vertices()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentMode {
    Continuous,
    Binary,
}

const SUM_TOL: f64 = 1e-9;

/// An `n1 × n2` correspondence matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    matrix: DMatrix<f64>,
    mode: AssignmentMode,
}

impl Assignment {
    /// A doubly substochastic matrix: entries in `[0, 1]`, row and column sums at most 1.
    pub fn continuous(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("assignment"));
        }
        if matrix.iter().any(|&v| !(-SUM_TOL..=1.0 + SUM_TOL).contains(&v)) {
            return Err(Error::InvalidParameter("assignment entries must lie in [0,1]".into()));
        }
        check_sums(&matrix)?;
        Ok(Self {
            matrix,
            mode: AssignmentMode::Continuous,
        })
    }

    /// A partial permutation matrix.
    pub fn binary(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidParameter(
                "binary assignment entries must be 0 or 1".into(),
            ));
        }
        check_sums(&matrix)?;
        Ok(Self {
            matrix,
            mode: AssignmentMode::Binary,
        })
    }

    /// Binary assignment from `matching[i] = Some(a)`.
    pub fn from_matching(n1: usize, n2: usize, matching: &[Option<usize>]) -> Result<Self> {
        if matching.len() != n1 {
            return Err(Error::Dimension(format!(
                "matching has {} rows, expected {n1}",
                matching.len()
            )));
        }
        let mut m = DMatrix::zeros(n1, n2);
        for (i, a) in matching.iter().enumerate() {
            if let Some(a) = *a {
                if a >= n2 {
                    return Err(Error::Dimension(format!("column {a} out of range for {n2}")));
                }
                m[(i, a)] = 1.0;
            }
        }
        Self::binary(m)
    }

    pub fn from_permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let matching: Vec<Option<usize>> = perm.iter().map(|&a| Some(a)).collect();
        Self::from_matching(n, n, &matching).expect("a permutation is a valid binary assignment")
    }

    /// The barycenter of the Birkhoff polytope, every entry `1/n`.
    pub fn uniform(n: usize) -> Self {
        Self {
            matrix: DMatrix::from_element(n, n, 1.0 / n as f64),
            mode: AssignmentMode::Continuous,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn mode(&self) -> AssignmentMode {
        self.mode
    }

    pub fn n1(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n2(&self) -> usize {
        self.matrix.ncols()
    }

    /// Row-wise matched column (`None` for unmatched rows). Meaningful in binary mode.
    pub fn matching(&self) -> Vec<Option<usize>> {
        (0..self.n1())
            .map(|i| (0..self.n2()).find(|&a| self.matrix[(i, a)] > 0.5))
            .collect()
    }

    /// True when every row has its maximum entry within `tol` of 1.
    pub fn is_vertex(&self, tol: f64) -> bool {
        self.matrix.row_iter().all(|r| r.max() >= 1.0 - tol)
    }
}

fn check_sums(m: &DMatrix<f64>) -> Result<()> {
    for (i, r) in m.row_iter().enumerate() {
        if r.sum() > 1.0 + SUM_TOL {
            return Err(Error::InvalidParameter(format!("row {i} sums to {}", r.sum())));
        }
    }
    for (a, c) in m.column_iter().enumerate() {
        if c.sum() > 1.0 + SUM_TOL {
            return Err(Error::InvalidParameter(format!("column {a} sums to {}", c.sum())));
        }
    }
    Ok(())
}

/// Per-layer confidence weights `L_C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerConfidence(Vec<f64>);

impl LayerConfidence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "layer confidence needs at least one layer".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer confidence"));
        }
        Ok(Self(values))
    }

    pub fn uniform(n_layers: usize) -> Self {
        Self(vec![1.0 / n_layers as f64; n_layers])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|v| v * s).collect())
    }
}
