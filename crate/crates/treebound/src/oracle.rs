//! Exponential-size exact references for small instances.
//!
//! These are the ground truth the compact formulations are tested against:
//! the full `2^n`-variable linear program over joint distributions (valid for
//! arbitrary graphs, cycles included), brute-force knapsack enumeration, and
//! enumeration of the conditionally independent product distribution. All are
//! capped at `n <= 20`.

use thiserror::Error;

use crate::bounds::Direction;
use crate::knapsack::KnapsackInstance;
use crate::lp::{LPProblem, LpError, Relation, SolveStatus, VarId, NONNEG};
use crate::par;
use crate::tree::{TreeError, TreeModel, PROB_TOL};

/// Hard cap on the exponential references.
pub const SIZE_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance with n={n} exceeds the exponential-reference cap of {SIZE_CAP}")]
    SizeCap { n: usize },
    #[error(transparent)]
    Model(#[from] TreeError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("degenerate conditioning: {0}")]
    DegenerateConditioning(String),
}

/// Marginal/bivariate data on an arbitrary graph (cycles allowed).
///
/// Only pairwise Fréchet consistency is validated; whether a joint
/// distribution exists at all is exactly what [`oracle_bound`] decides.
#[derive(Debug, Clone)]
pub struct GeneralMarginalModel {
    ext_ids: Vec<i64>,
    p: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
}

impl GeneralMarginalModel {
    pub fn new(nodes: &[(i64, f64)], edges: &[(i64, i64, f64)]) -> Result<Self, TreeError> {
        if nodes.is_empty() {
            return Err(TreeError::Empty);
        }
        let mut ext_ids: Vec<i64> = nodes.iter().map(|&(id, _)| id).collect();
        ext_ids.sort_unstable();
        for w in ext_ids.windows(2) {
            if w[0] == w[1] {
                return Err(TreeError::DuplicateNode(w[0]));
            }
        }
        let idx_of = |id: i64| -> Result<usize, TreeError> {
            ext_ids
                .binary_search(&id)
                .map_err(|_| TreeError::UnknownNode(id))
        };
        let mut p = vec![0.0; ext_ids.len()];
        for &(id, prob) in nodes {
            if !prob.is_finite() || !(-PROB_TOL..=1.0 + PROB_TOL).contains(&prob) {
                return Err(TreeError::ProbabilityOutOfRange {
                    what: format!("node {id}"),
                    value: prob,
                });
            }
            p[idx_of(id)?] = prob.clamp(0.0, 1.0);
        }
        let mut recs = Vec::with_capacity(edges.len());
        let mut seen: Vec<(usize, usize)> = Vec::new();
        for &(a, b, p11) in edges {
            let (ia, ib) = (idx_of(a)?, idx_of(b)?);
            let key = (ia.min(ib), ia.max(ib));
            if ia == ib || seen.contains(&key) {
                return Err(TreeError::DuplicateEdge(a, b));
            }
            seen.push(key);
            let lo = (p[ia] + p[ib] - 1.0).max(0.0);
            let hi = p[ia].min(p[ib]);
            if !p11.is_finite() || p11 < lo - PROB_TOL || p11 > hi + PROB_TOL {
                return Err(TreeError::FrechetViolation {
                    parent: a,
                    child: b,
                    p11,
                    pi: p[ia],
                    pj: p[ib],
                    lo,
                    hi,
                });
            }
            recs.push((ia, ib, p11.clamp(0.0, 1.0)));
        }
        Ok(GeneralMarginalModel {
            ext_ids,
            p,
            edges: recs,
        })
    }

    pub fn from_tree(t: &TreeModel) -> Self {
        GeneralMarginalModel {
            ext_ids: (0..t.n()).map(|i| t.external_id(i)).collect(),
            p: (0..t.n()).map(|i| t.p(i)).collect(),
            edges: t
                .edges()
                .iter()
                .map(|e| (e.parent, e.child, e.table.p11))
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn external_id(&self, i: usize) -> i64 {
        self.ext_ids[i]
    }
}

/// A full joint distribution over `{0,1}^n`, indexed by bit mask.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    pub n: usize,
    pub probs: Vec<f64>,
}

impl JointDistribution {
    pub fn total(&self) -> f64 {
        par::compensated_sum_range(self.probs.len(), |c| self.probs[c])
    }

    pub fn marginal(&self, i: usize) -> f64 {
        par::compensated_sum_range(self.probs.len(), |c| {
            if c & (1 << i) != 0 {
                self.probs[c]
            } else {
                0.0
            }
        })
    }

    pub fn joint(&self, i: usize, j: usize) -> f64 {
        let mask = (1usize << i) | (1 << j);
        par::compensated_sum_range(self.probs.len(), |c| {
            if c & mask == mask {
                self.probs[c]
            } else {
                0.0
            }
        })
    }

    /// Probability mass of each cardinality `0..=n`.
    pub fn cardinality_pmf(&self) -> Vec<f64> {
        let mut pmf = vec![0.0; self.n + 1];
        for (c, &v) in self.probs.iter().enumerate() {
            pmf[c.count_ones() as usize] += v;
        }
        pmf
    }
}

/// What the exponential LP optimizes.
#[derive(Debug, Clone)]
pub enum OracleObjective {
    Tail {
        k: usize,
        direction: Direction,
    },
    /// `sum_s w_s P(S = s)`, maximized or minimized.
    Weights {
        w: Vec<f64>,
        direction: Direction,
    },
}

/// Outcome of the exponential LP: exact value plus a witness distribution, or
/// proof that no joint distribution matches the data.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub status: SolveStatus,
    pub value: f64,
    pub witness: Option<JointDistribution>,
}

/// Solves the `2^n`-variable moment LP exactly.
pub fn oracle_bound(
    m: &GeneralMarginalModel,
    objective: &OracleObjective,
) -> Result<OracleOutcome, OracleError> {
    let n = m.n();
    if n > SIZE_CAP {
        return Err(OracleError::SizeCap { n });
    }
    let size = 1usize << n;
    let (weights, direction) = match objective {
        OracleObjective::Tail { k, direction } => {
            let w: Vec<f64> = (0..=n).map(|s| if s >= *k { 1.0 } else { 0.0 }).collect();
            (w, *direction)
        }
        OracleObjective::Weights { w, direction } => {
            assert_eq!(w.len(), n + 1, "need one weight per cardinality 0..=n");
            (w.clone(), *direction)
        }
    };

    let mut lp = match direction {
        Direction::Upper => LPProblem::maximize(),
        Direction::Lower => LPProblem::minimize(),
    };
    let theta: Vec<VarId> = (0..size)
        .map(|c| lp.add_var(weights[c.count_ones() as usize], NONNEG))
        .collect();

    for i in 0..n {
        let coeffs: Vec<(VarId, f64)> = (0..size)
            .filter(|c| c & (1usize << i) != 0)
            .map(|c| (theta[c], 1.0))
            .collect();
        lp.add_row(Relation::Eq, m.p[i], &coeffs);
    }
    for &(i, j, p11) in &m.edges {
        let mask = (1usize << i) | (1usize << j);
        let coeffs: Vec<(VarId, f64)> = (0..size)
            .filter(|c| c & mask == mask)
            .map(|c| (theta[c], 1.0))
            .collect();
        lp.add_row(Relation::Eq, p11, &coeffs);
    }
    let all: Vec<(VarId, f64)> = theta.iter().map(|&v| (v, 1.0)).collect();
    lp.add_row(Relation::Eq, 1.0, &all);

    let sol = lp.solve()?;
    match sol.status {
        SolveStatus::Optimal => Ok(OracleOutcome {
            status: SolveStatus::Optimal,
            value: sol.objective,
            witness: Some(JointDistribution {
                n,
                probs: theta.iter().map(|&v| sol.value(v).max(0.0)).collect(),
            }),
        }),
        status => Ok(OracleOutcome {
            status,
            value: f64::NAN,
            witness: None,
        }),
    }
}

/// Exact knapsack minimum by enumerating every selection with at least `k`
/// nodes.
pub fn qkp_enumerate(inst: &KnapsackInstance) -> Result<f64, OracleError> {
    let tree = inst.tree;
    let n = tree.n();
    if n > SIZE_CAP {
        return Err(OracleError::SizeCap { n });
    }
    let edges: Vec<(usize, usize, f64)> = tree
        .edges()
        .iter()
        .zip(&inst.beta)
        .map(|(e, &b)| (e.parent, e.child, b))
        .collect();
    let alpha = &inst.alpha;
    let k = inst.k;
    if k > n {
        // Empty feasible set.
        return Ok(f64::INFINITY);
    }
    let best = par::min_by_value_range(1usize << n, |c| {
        if (c.count_ones() as usize) < k {
            return f64::INFINITY;
        }
        let mut cost = 0.0;
        let mut bits = c;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            cost += alpha[i];
            bits &= bits - 1;
        }
        for &(a, b, beta) in &edges {
            if c & (1 << a) != 0 && c & (1 << b) != 0 {
                cost += beta;
            }
        }
        cost
    });
    Ok(best.map(|(_, v)| v).unwrap_or(f64::INFINITY))
}

/// Per-edge conditional tables `P(c_child = yc | c_parent = yp)` with the
/// zero-mass convention: a conditional on a zero-probability parent state is
/// 0 when its joint cell is also (numerically) zero, and an error otherwise.
fn conditional_tables(t: &TreeModel) -> Result<Vec<[[f64; 2]; 2]>, OracleError> {
    let mut out = Vec::with_capacity(t.edges().len());
    for e in t.edges() {
        let mut tab = [[0.0f64; 2]; 2];
        for (yp, row) in tab.iter_mut().enumerate() {
            let pp = t.p_value(e.parent, yp == 1);
            for (yc, cell) in row.iter_mut().enumerate() {
                let joint = e.table.cell(yp == 1, yc == 1);
                if pp == 0.0 {
                    if joint > PROB_TOL {
                        return Err(OracleError::DegenerateConditioning(format!(
                            "edge ({},{}): joint mass {joint} on a zero-probability \
                             parent state",
                            t.external_id(e.parent),
                            t.external_id(e.child)
                        )));
                    }
                    *cell = 0.0;
                } else {
                    *cell = joint / pp;
                }
            }
        }
        out.push(tab);
    }
    Ok(out)
}

/// `P(sum c_i >= k)` under the conditionally independent tree distribution,
/// by direct enumeration of the product form over all `2^n` outcomes.
pub fn ci_enumerate(t: &TreeModel, k: usize) -> Result<f64, OracleError> {
    let n = t.n();
    if n > SIZE_CAP {
        return Err(OracleError::SizeCap { n });
    }
    if k == 0 {
        return Ok(1.0);
    }
    if k > n {
        return Ok(0.0);
    }
    let cond = conditional_tables(t)?;
    let root = t.root();
    let edges: Vec<(usize, usize)> = t.edges().iter().map(|e| (e.parent, e.child)).collect();
    let sum = par::compensated_sum_range(1usize << n, |c| {
        if (c.count_ones() as usize) < k {
            return 0.0;
        }
        let bit = |i: usize| (c >> i) & 1;
        let mut prob = t.p_value(root, bit(root) == 1);
        for (idx, &(par, child)) in edges.iter().enumerate() {
            if prob == 0.0 {
                return 0.0;
            }
            prob *= cond[idx][bit(par)][bit(child)];
        }
        prob
    });
    Ok(sum)
}
