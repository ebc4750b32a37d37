//! Pointwise bands for order-statistic CDFs.
//!
//! `P(X_{k:n} <= x)` equals the probability that at least `k` of the
//! indicators `1{X_i <= x}` fire, so at each grid point `x` the marginal CDF
//! values `p_i(x)` and joint CDF values `p_ij(x)` define a Bernoulli tree
//! model, and the tail-probability machinery delivers the band. Each grid
//! point is independent; no coupling across `x` is claimed or enforced, and
//! the upper/lower curves are not asserted monotone in `x`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundsError};
use crate::ci::{self, CiError};
use crate::lp::SolverConfig;
use crate::par;
use crate::tree::{build_tree, TreeError, TreeModel, TreeTopology, PROB_TOL};

/// Built-in bivariate generators for Bernoulli indicator pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopulaKind {
    Independence,
    Comonotone,
    AntiComonotone,
}

impl CopulaKind {
    pub fn parse(s: &str) -> Option<CopulaKind> {
        match s {
            "independence" => Some(CopulaKind::Independence),
            "comonotone" => Some(CopulaKind::Comonotone),
            "anti-comonotone" | "anticomonotone" => Some(CopulaKind::AntiComonotone),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CopulaKind::Independence => "independence",
            CopulaKind::Comonotone => "comonotone",
            CopulaKind::AntiComonotone => "anti-comonotone",
        }
    }
}

/// Joint success probability of two Bernoulli marginals under the copula.
pub fn copula_bivariate(kind: CopulaKind, pi: f64, pj: f64) -> f64 {
    match kind {
        CopulaKind::Independence => pi * pj,
        CopulaKind::Comonotone => pi.min(pj),
        CopulaKind::AntiComonotone => (pi + pj - 1.0).max(0.0),
    }
}

/// Standard normal CDF evaluated at `(x - mu) / sigma`.
pub fn gaussian_marginal_cdf(mu: f64, sigma: f64, x: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let z = (x - mu) / sigma;
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Error)]
pub enum OrderStatsError {
    #[error("invalid CDF grid: {0}")]
    InvalidGrid(String),
    #[error("threshold model invalid at x = {x}: {source}")]
    AtPoint { x: f64, source: TreeError },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Ci(#[from] CiError),
}

/// Per-edge bivariate CDF data: explicit grids or a copula applied to the
/// marginals.
#[derive(Debug, Clone)]
pub enum BivariateSpec {
    /// One value per grid point per edge, aligned with the topology's edges.
    Grids(Vec<Vec<f64>>),
    Copula(CopulaKind),
}

/// Marginal and bivariate CDF values over a threshold grid.
#[derive(Debug, Clone)]
pub struct CdfGrid {
    xs: Vec<f64>,
    /// `marginals[node_pos][grid_pos]`, node order as in the topology.
    marginals: Vec<Vec<f64>>,
    bivariates: BivariateSpec,
}

impl CdfGrid {
    /// Validates monotonicity, ranges, array lengths and per-point Fréchet
    /// consistency for explicit bivariate grids.
    pub fn new(
        topology: &TreeTopology,
        xs: Vec<f64>,
        marginals: Vec<Vec<f64>>,
        bivariates: BivariateSpec,
    ) -> Result<CdfGrid, OrderStatsError> {
        let bad = |msg: String| Err(OrderStatsError::InvalidGrid(msg));
        if xs.is_empty() {
            return bad("empty grid".into());
        }
        if xs.iter().any(|v| !v.is_finite()) {
            return bad("grid values must be finite".into());
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return bad("grid must be strictly increasing".into());
        }
        if marginals.len() != topology.nodes.len() {
            return bad(format!(
                "{} marginal arrays for {} nodes",
                marginals.len(),
                topology.nodes.len()
            ));
        }
        for (pos, m) in marginals.iter().enumerate() {
            if m.len() != xs.len() {
                return bad(format!(
                    "marginal array for node {} has length {}, grid has {}",
                    topology.nodes[pos],
                    m.len(),
                    xs.len()
                ));
            }
            if m.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return bad(format!(
                    "marginal of node {} outside [0,1]",
                    topology.nodes[pos]
                ));
            }
            if m.windows(2).any(|w| w[0] > w[1] + PROB_TOL) {
                return bad(format!(
                    "marginal CDF of node {} is decreasing",
                    topology.nodes[pos]
                ));
            }
        }
        if let BivariateSpec::Grids(gs) = &bivariates {
            if gs.len() != topology.edges.len() {
                return bad(format!(
                    "{} bivariate arrays for {} edges",
                    gs.len(),
                    topology.edges.len()
                ));
            }
            for (e, g) in gs.iter().enumerate() {
                if g.len() != xs.len() {
                    return bad(format!("bivariate array {e} length mismatch"));
                }
            }
        }
        Ok(CdfGrid {
            xs,
            marginals,
            bivariates,
        })
    }

    /// Marginals from a Gaussian family and bivariates from a copula.
    pub fn gaussian(
        topology: &TreeTopology,
        means: &[f64],
        sigma: f64,
        xs: Vec<f64>,
        copula: CopulaKind,
    ) -> Result<CdfGrid, OrderStatsError> {
        if means.len() != topology.nodes.len() {
            return Err(OrderStatsError::InvalidGrid(format!(
                "{} means for {} nodes",
                means.len(),
                topology.nodes.len()
            )));
        }
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(OrderStatsError::InvalidGrid(
                "sigma must be positive".into(),
            ));
        }
        let marginals: Vec<Vec<f64>> = means
            .iter()
            .map(|&mu| {
                xs.iter()
                    .map(|&x| gaussian_marginal_cdf(mu, sigma, x))
                    .collect()
            })
            .collect();
        CdfGrid::new(topology, xs, marginals, BivariateSpec::Copula(copula))
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn marginals_at(&self, grid_pos: usize) -> Vec<f64> {
        self.marginals.iter().map(|m| m[grid_pos]).collect()
    }

    fn bivariate_at(&self, edge_pos: usize, grid_pos: usize, pi: f64, pj: f64) -> f64 {
        match &self.bivariates {
            BivariateSpec::Grids(gs) => gs[edge_pos][grid_pos],
            BivariateSpec::Copula(kind) => copula_bivariate(*kind, pi, pj),
        }
    }
}

/// The Bernoulli tree model induced by thresholding at grid point `grid_pos`.
pub fn threshold_model(
    topology: &TreeTopology,
    grid: &CdfGrid,
    grid_pos: usize,
) -> Result<TreeModel, TreeError> {
    let pos_of: BTreeMap<i64, usize> = topology
        .nodes
        .iter()
        .enumerate()
        .map(|(pos, &id)| (id, pos))
        .collect();
    let nodes: Vec<(i64, f64)> = topology
        .nodes
        .iter()
        .map(|&id| (id, grid.marginals[pos_of[&id]][grid_pos]))
        .collect();
    let edges: Vec<(i64, i64, f64)> = topology
        .edges
        .iter()
        .enumerate()
        .map(|(e, &(a, b))| {
            let pi = grid.marginals[pos_of[&a]][grid_pos];
            let pj = grid.marginals[pos_of[&b]][grid_pos];
            (a, b, grid.bivariate_at(e, grid_pos, pi, pj))
        })
        .collect();
    build_tree(&nodes, &edges, topology.root, topology.ordering.as_ref())
}

/// One grid point of the band.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub x: f64,
    pub upper: f64,
    pub lower: f64,
    pub ci: f64,
    pub uv_upper: f64,
    pub uv_lower: f64,
}

/// `P(X_{k:n} <= x)` bands over the grid.
#[derive(Debug, Clone)]
pub struct OrderStatCurves {
    pub k: usize,
    pub points: Vec<CurvePoint>,
}

/// Sweeps the grid, computing the tree band, the conditionally independent
/// curve and the univariate-only band at every point. Points are evaluated
/// in parallel when the `parallel` feature is on.
pub fn sweep(
    topology: &TreeTopology,
    grid: &CdfGrid,
    k: usize,
) -> Result<OrderStatCurves, OrderStatsError> {
    sweep_with(topology, grid, k, &SolverConfig::default())
}

pub fn sweep_with(
    topology: &TreeTopology,
    grid: &CdfGrid,
    k: usize,
    cfg: &SolverConfig,
) -> Result<OrderStatCurves, OrderStatsError> {
    let points = par::try_map_range(grid.xs.len(), |gi| -> Result<CurvePoint, OrderStatsError> {
        let x = grid.xs[gi];
        let model = threshold_model(topology, grid, gi)
            .map_err(|source| OrderStatsError::AtPoint { x, source })?;
        let upper = bounds::upper_bound_with(&model, k, cfg)?.value;
        let lower = bounds::lower_bound_with(&model, k, cfg)?.value;
        let ci_v = ci::ci_tail(&model, k).map_err(OrderStatsError::Ci)?;
        let ps = grid.marginals_at(gi);
        Ok(CurvePoint {
            x,
            upper,
            lower,
            ci: ci_v,
            uv_upper: bounds::univariate_upper(&ps, k),
            uv_lower: bounds::univariate_lower(&ps, k),
        })
    })?;
    Ok(OrderStatCurves { k, points })
}

// ---------------------------------------------------------------------------
// JSON interchange format
// ---------------------------------------------------------------------------

/// Grid JSON: `x` plus per-node marginal arrays, and either per-edge
/// bivariate arrays keyed `"parent-child"` or a copula name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdfGridJson {
    pub x: Vec<f64>,
    pub marginals: BTreeMap<String, Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bivariates: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub copula: Option<String>,
}

impl CdfGridJson {
    pub fn build(&self, topology: &TreeTopology) -> Result<CdfGrid, OrderStatsError> {
        let bad = |msg: String| OrderStatsError::InvalidGrid(msg);
        let mut marginals = Vec::with_capacity(topology.nodes.len());
        for &id in &topology.nodes {
            let m = self
                .marginals
                .get(&id.to_string())
                .ok_or_else(|| bad(format!("missing marginals for node {id}")))?;
            marginals.push(m.clone());
        }
        let bivariates = match (&self.bivariates, &self.copula) {
            (Some(_), Some(_)) => {
                return Err(bad("give either bivariates or a copula, not both".into()))
            }
            (None, None) => return Err(bad("missing bivariates or copula".into())),
            (None, Some(name)) => BivariateSpec::Copula(
                CopulaKind::parse(name).ok_or_else(|| bad(format!("unknown copula {name}")))?,
            ),
            (Some(map), None) => {
                let mut grids = Vec::with_capacity(topology.edges.len());
                for &(a, b) in &topology.edges {
                    let g = map
                        .get(&format!("{a}-{b}"))
                        .or_else(|| map.get(&format!("{b}-{a}")))
                        .ok_or_else(|| bad(format!("missing bivariates for edge {a}-{b}")))?;
                    grids.push(g.clone());
                }
                BivariateSpec::Grids(grids)
            }
        };
        CdfGrid::new(topology, self.x.clone(), marginals, bivariates)
    }
}

pub fn grid_from_json_str(s: &str, topology: &TreeTopology) -> Result<CdfGrid, OrderStatsError> {
    let doc: CdfGridJson =
        serde_json::from_str(s).map_err(|e| OrderStatsError::InvalidGrid(e.to_string()))?;
    doc.build(topology)
}
