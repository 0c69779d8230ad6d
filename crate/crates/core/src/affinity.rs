//! Unary, intra-layer and inter-layer affinity blocks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IncidenceBundle, MultiLayerGraph};

/// Per-layer affinity blocks.
///
/// `unary[α]` is `N1 × N2`, `intra[α]` is `M1i × M2i`, and `inter[k]` is
/// `M1t × M2t` for the `k`-th ordered layer pair.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerAffinities {
    pub unary: Vec<DMatrix<f64>>,
    pub intra: Vec<DMatrix<f64>>,
    pub inter: Vec<DMatrix<f64>>,
}

impl LayerAffinities {
    pub fn n_layers(&self) -> usize {
        self.intra.len()
    }

    /// Check block counts, shapes and entry signs against an incidence bundle.
    pub fn validate(&self, inc: &IncidenceBundle) -> Result<()> {
        let nl = inc.layers.n_layers();
        if self.unary.len() != nl || self.intra.len() != nl {
            return Err(Error::Dimension(format!(
                "expected {nl} unary and intra blocks, got {} and {}",
                self.unary.len(),
                self.intra.len()
            )));
        }
        if self.inter.len() != inc.layers.n_inter_blocks() {
            return Err(Error::Dimension(format!(
                "expected {} inter-layer blocks, got {}",
                inc.layers.n_inter_blocks(),
                self.inter.len()
            )));
        }
        let shapes = [
            (&self.unary, (inc.n1(), inc.n2()), "unary"),
            (&self.intra, (inc.intra1.n_edges(), inc.intra2.n_edges()), "intra"),
            (&self.inter, (inc.inter1.n_edges(), inc.inter2.n_edges()), "inter"),
        ];
        for (blocks, shape, what) in shapes {
            for (k, b) in blocks.iter().enumerate() {
                if b.shape() != shape {
                    return Err(Error::Dimension(format!(
                        "{what} block {k} is {:?}, expected {shape:?}",
                        b.shape()
                    )));
                }
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("affinity block"));
                }
                if b.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "{what} block {k} has negative entries"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `K_p = [K_p^{1;1} … K_p^{L;L}]`.
    pub fn unary_concat(&self, rows: usize) -> DMatrix<f64> {
        hconcat(&self.unary, rows)
    }

    /// `K_qi = [K_qi^{1;1} … K_qi^{L;L}]`.
    pub fn intra_concat(&self, rows: usize) -> DMatrix<f64> {
        hconcat(&self.intra, rows)
    }

    /// `K_qt`, blocks in lexicographic layer-pair order.
    pub fn inter_concat(&self, rows: usize) -> DMatrix<f64> {
        hconcat(&self.inter, rows)
    }
}

fn hconcat(blocks: &[DMatrix<f64>], rows: usize) -> DMatrix<f64> {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        out.view_mut((0, offset), b.shape()).copy_from(b);
        offset += b.ncols();
    }
    out
}

/// `exp(−|(1−ω) + ω(r1−r2)| / σ²)`.
pub fn synthetic_edge_affinity(r1: f64, r2: f64, omega: f64, sigma_sq: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_sq must be positive, got {sigma_sq}"
        )));
    }
    Ok(kernel(r1 - r2, omega, sigma_sq))
}

fn kernel(diff: f64, omega: f64, sigma_sq: f64) -> f64 {
    (-((1.0 - omega) + omega * diff).abs() / sigma_sq).exp()
}

/// Kernel on attribute vectors. Scalars use the signed difference, longer
/// vectors the Euclidean norm of the difference.
pub fn attribute_affinity(a: &[f64], b: &[f64], omega: f64, sigma_sq: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let diff = if a.len() == 1 {
        a[0] - b[0]
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    kernel(diff, omega, sigma_sq)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryMode {
    /// All unary blocks are zero.
    #[default]
    Zero,
    /// Unary blocks from vertex attributes through the same kernel.
    Kernel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub sigma_sq: f64,
    /// Per-layer `ω`.
    pub omegas: Vec<f64>,
    pub unary: UnaryMode,
    /// Constant value of every inter-layer affinity entry.
    pub inter_coupling: f64,
    /// Max-normalize each unary and intra-layer block.
    pub normalize: bool,
}

impl KernelConfig {
    pub fn new(omegas: Vec<f64>) -> Self {
        Self {
            sigma_sq: 0.3,
            omegas,
            unary: UnaryMode::Zero,
            inter_coupling: 1.0,
            normalize: true,
        }
    }
}

pub fn build_layer_affinities(
    g1: &MultiLayerGraph,
    g2: &MultiLayerGraph,
    inc: &IncidenceBundle,
    cfg: &KernelConfig,
) -> Result<LayerAffinities> {
    let nl = g1.n_layers();
    if g2.n_layers() != nl || inc.layers.n_layers() != nl {
        return Err(Error::Dimension(format!(
            "layer counts differ: {} vs {} (incidence {})",
            nl,
            g2.n_layers(),
            inc.layers.n_layers()
        )));
    }
    if cfg.omegas.len() != nl {
        return Err(Error::Dimension(format!("{} omegas for {nl} layers", cfg.omegas.len())));
    }
    if !(cfg.sigma_sq > 0.0) {
        return Err(Error::InvalidParameter("sigma_sq must be positive".into()));
    }
    if !(cfg.inter_coupling >= 0.0 && cfg.inter_coupling.is_finite()) {
        return Err(Error::InvalidParameter(
            "inter_coupling must be finite and non-negative".into(),
        ));
    }
    let (n1, n2) = (g1.n_vertices(), g2.n_vertices());
    let (m1, m2) = (g1.edges().len(), g2.edges().len());

    let mut unary = Vec::with_capacity(nl);
    let mut intra = Vec::with_capacity(nl);
    for (layer, &omega) in cfg.omegas.iter().enumerate() {
        let kp = match cfg.unary {
            UnaryMode::Zero => DMatrix::zeros(n1, n2),
            UnaryMode::Kernel => DMatrix::from_fn(n1, n2, |i, a| {
                attribute_affinity(g1.vertex_attr(layer, i), g2.vertex_attr(layer, a), omega, cfg.sigma_sq)
            }),
        };
        let kq = DMatrix::from_fn(m1, m2, |e1, e2| {
            attribute_affinity(g1.edge_attr(layer, e1), g2.edge_attr(layer, e2), omega, cfg.sigma_sq)
        });
        if cfg.normalize {
            unary.push(normalize_layer(&kp).block);
            intra.push(normalize_layer(&kq).block);
        } else {
            unary.push(kp);
            intra.push(kq);
        }
    }
    let inter = (0..inc.layers.n_inter_blocks())
        .map(|_| DMatrix::from_element(inc.inter1.n_edges(), inc.inter2.n_edges(), cfg.inter_coupling))
        .collect();
    let aff = LayerAffinities { unary, intra, inter };
    aff.validate(inc)?;
    Ok(aff)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedBlock {
    pub block: DMatrix<f64>,
    /// Set when the input had no positive entry and was returned unchanged.
    pub all_zero: bool,
}

/// Divide a non-negative block by its maximum entry.
pub fn normalize_layer(block: &DMatrix<f64>) -> NormalizedBlock {
    let max = block.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        NormalizedBlock {
            block: block / max,
            all_zero: false,
        }
    } else {
        NormalizedBlock {
            block: block.clone(),
            all_zero: true,
        }
    }
}

/// Single-layer affinity obtained by summing the per-layer blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedAffinity {
    pub unary: DMatrix<f64>,
    pub intra: DMatrix<f64>,
}

pub fn integrate_layers(aff: &LayerAffinities) -> Result<IntegratedAffinity> {
    let first_u = aff
        .unary
        .first()
        .ok_or_else(|| Error::Dimension("no layers to integrate".into()))?;
    let first_q = aff
        .intra
        .first()
        .ok_or_else(|| Error::Dimension("no layers to integrate".into()))?;
    let mut unary = DMatrix::zeros(first_u.nrows(), first_u.ncols());
    let mut intra = DMatrix::zeros(first_q.nrows(), first_q.ncols());
    for (u, q) in aff.unary.iter().zip(&aff.intra) {
        if u.shape() != unary.shape() || q.shape() != intra.shape() {
            return Err(Error::Dimension("layer blocks differ in shape".into()));
        }
        unary += u;
        intra += q;
    }
    Ok(IntegratedAffinity { unary, intra })
}

/// Restrict to one layer, for single-attribute baselines.
pub fn single_layer(aff: &LayerAffinities, layer: usize) -> IntegratedAffinity {
    IntegratedAffinity {
        unary: aff.unary[layer].clone(),
        intra: aff.intra[layer].clone(),
    }
}
