//! Tight tail-probability bounds over all distributions consistent with a
//! tree model, plus univariate-only and weighted-sum variants.
//!
//! `upper_bound` assembles the compact dual LP: a separation block that keeps
//! `lambda + sum alpha_i c_i + sum beta_ij c_i c_j` nonnegative over the whole
//! cube (exact on trees via the Boolean-quadric relaxation), a knapsack block
//! that keeps it at least 1 on all selections of cardinality `>= k`, and the
//! objective `lambda + sum alpha_i p_i + sum beta_ij p_ij`. The LP's optimal
//! variables form a [`DualCertificate`] that is re-verified row by row before
//! a result is returned, so no answer rests on solver internals alone.
//!
//! Lower bounds come from complementation (`L(k) = 1 - U'(n-k+1)` on the
//! complemented model), weighted-sum bounds from a per-cardinality variant of
//! the same LP, and `partition_bound` combines an independent block of
//! variables with a dependent tree block through Poisson-binomial weights.

use thiserror::Error;

use crate::knapsack::{emit_knapsack_block, KnapsackBlock, LinkSpec, RootLink};
use crate::lp::{
    LPProblem, LPSolution, LpError, Relation, SolveStatus, SolverConfig, VarId, FREE, NONNEG,
};
use crate::tree::TreeModel;

/// Which side of the feasible set a bound looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Upper,
    Lower,
}

/// Transform applied before the LP was solved, recorded so a certificate can
/// be traced back to the problem it proves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    None,
    /// Solved on the complemented model at threshold `solved_k`.
    Complemented {
        solved_k: usize,
    },
    /// Weighted minimization solved as `w_max - max` with flipped weights.
    WeightFlipped {
        w_max: f64,
    },
}

/// The dual variables proving a bound value.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub lambda: f64,
    /// Per node, internal order.
    pub alpha: Vec<f64>,
    /// Per edge, canonical order; likewise `delta`, `eta`, `gamma`, `chi`.
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub eta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub chi: Vec<f64>,
    /// Per node.
    pub tau: Vec<f64>,
    /// Threshold mode: one entry. Weighted mode: one per cardinality.
    pub z: Vec<f64>,
    /// Knapsack block states in layout order.
    pub x: Vec<f64>,
}

impl DualCertificate {
    fn zeros(t: &TreeModel, lambda: f64, z: Vec<f64>, x_len: usize) -> Self {
        let e = t.edges().len();
        DualCertificate {
            lambda,
            alpha: vec![0.0; t.n()],
            beta: vec![0.0; e],
            delta: vec![0.0; e],
            eta: vec![0.0; e],
            gamma: vec![0.0; e],
            chi: vec![0.0; e],
            tau: vec![0.0; t.n()],
            z,
            x: vec![0.0; x_len],
        }
    }

    /// `lambda + sum alpha_i p_i + sum beta_e p11_e` on the given model.
    pub fn objective(&self, t: &TreeModel) -> f64 {
        let mut v = self.lambda;
        for i in 0..t.n() {
            v += self.alpha[i] * t.p(i);
        }
        for (e, b) in t.edges().iter().zip(&self.beta) {
            v += b * e.table.p11;
        }
        v
    }
}

/// Solver telemetry attached to every bound.
#[derive(Debug, Clone, Copy)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub lp_rows: usize,
    pub lp_cols: usize,
}

impl SolverDiagnostics {
    fn trivial() -> Self {
        SolverDiagnostics {
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            lp_rows: 0,
            lp_cols: 0,
        }
    }
}

/// A bound value with its proof and provenance.
#[derive(Debug, Clone)]
pub struct BoundResult {
    pub value: f64,
    /// Threshold for tail bounds; `None` for weighted-sum bounds.
    pub k: Option<usize>,
    pub direction: Direction,
    pub certificate: DualCertificate,
    pub transform: Transform,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error(transparent)]
    Solver(#[from] LpError),
    #[error(transparent)]
    Ci(#[from] crate::ci::CiError),
    #[error("bound LP finished {0:?} on a consistent tree model")]
    UnexpectedStatus(SolveStatus),
    #[error("bound value {value} lies outside [0,1] beyond tolerance")]
    ValueOutOfRange { value: f64 },
    #[error("certificate rejected: {0}")]
    CertificateRejected(String),
    #[error("negative weight w[{index}] = {value}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weight vector has length {got}, need n+1 = {want}")]
    WeightLength { got: usize, want: usize },
}

const CERT_TOL: f64 = 1e-7;

/// Handles into the assembled bound LP.
struct BoundLp {
    lp: LPProblem,
    lambda: VarId,
    alpha: Vec<VarId>,
    beta: Vec<VarId>,
    delta: Vec<VarId>,
    eta: Vec<VarId>,
    gamma: Vec<VarId>,
    chi: Vec<VarId>,
    tau: Vec<VarId>,
    block: KnapsackBlock,
}

/// Builds the compact dual LP. `targets` holds the right-hand sides of the
/// `lambda + z >= .` rows: a single entry (threshold mode) or one per
/// cardinality (weighted mode).
fn build_bound_lp(t: &TreeModel, link: LinkSpec, targets: &[f64]) -> BoundLp {
    let n = t.n();
    let ne = t.edges().len();
    let mut lp = LPProblem::minimize();

    let lambda = lp.add_named_var("lambda", 1.0, FREE);
    let alpha: Vec<VarId> = (0..n)
        .map(|i| lp.add_named_var(format!("alpha_{}", t.external_id(i)), t.p(i), FREE))
        .collect();
    let beta: Vec<VarId> = t
        .edges()
        .iter()
        .map(|e| {
            lp.add_named_var(
                format!(
                    "beta_{}_{}",
                    t.external_id(e.parent),
                    t.external_id(e.child)
                ),
                e.table.p11,
                FREE,
            )
        })
        .collect();
    let delta: Vec<VarId> = (0..ne).map(|_| lp.add_var(0.0, NONNEG)).collect();
    let eta: Vec<VarId> = (0..ne).map(|_| lp.add_var(0.0, NONNEG)).collect();
    let gamma: Vec<VarId> = (0..ne).map(|_| lp.add_var(0.0, NONNEG)).collect();
    let chi: Vec<VarId> = (0..ne).map(|_| lp.add_var(0.0, NONNEG)).collect();
    let tau: Vec<VarId> = (0..n).map(|_| lp.add_var(0.0, NONNEG)).collect();

    // Cube-nonnegativity block.
    {
        let mut coeffs = vec![(lambda, 1.0)];
        for e in 0..ne {
            coeffs.push((delta[e], -1.0));
            coeffs.push((chi[e], -1.0));
        }
        for i in 0..n {
            coeffs.push((tau[i], -1.0));
        }
        lp.add_row(Relation::Ge, 0.0, &coeffs);
    }
    for i in 0..n {
        let mut coeffs = vec![(tau[i], 1.0), (alpha[i], 1.0)];
        for (e, edge) in t.edges().iter().enumerate() {
            if edge.parent == i {
                coeffs.push((delta[e], 1.0));
                coeffs.push((eta[e], -1.0));
            } else if edge.child == i {
                coeffs.push((delta[e], 1.0));
                coeffs.push((gamma[e], -1.0));
            }
        }
        lp.add_row(Relation::Ge, 0.0, &coeffs);
    }
    for e in 0..ne {
        lp.add_row(
            Relation::Ge,
            0.0,
            &[
                (eta[e], 1.0),
                (gamma[e], 1.0),
                (delta[e], -1.0),
                (chi[e], 1.0),
                (beta[e], 1.0),
            ],
        );
    }

    let block = emit_knapsack_block(&mut lp, t, &alpha, &beta, link);

    match &block.link {
        RootLink::Threshold { z, .. } => {
            debug_assert_eq!(targets.len(), 1);
            lp.add_row(Relation::Ge, targets[0], &[(lambda, 1.0), (*z, 1.0)]);
        }
        RootLink::PerCardinality { z } => {
            debug_assert_eq!(targets.len(), z.len());
            for (zt, &w) in z.iter().zip(targets) {
                lp.add_row(Relation::Ge, w, &[(lambda, 1.0), (*zt, 1.0)]);
            }
        }
    }

    BoundLp {
        lp,
        lambda,
        alpha,
        beta,
        delta,
        eta,
        gamma,
        chi,
        tau,
        block,
    }
}

impl BoundLp {
    fn extract(&self, sol: &LPSolution) -> DualCertificate {
        let v = |id: VarId| sol.value(id);
        DualCertificate {
            lambda: v(self.lambda),
            alpha: self.alpha.iter().map(|&a| v(a)).collect(),
            beta: self.beta.iter().map(|&a| v(a)).collect(),
            delta: self.delta.iter().map(|&a| v(a)).collect(),
            eta: self.eta.iter().map(|&a| v(a)).collect(),
            gamma: self.gamma.iter().map(|&a| v(a)).collect(),
            chi: self.chi.iter().map(|&a| v(a)).collect(),
            tau: self.tau.iter().map(|&a| v(a)).collect(),
            z: match &self.block.link {
                RootLink::Threshold { z, .. } => vec![v(*z)],
                RootLink::PerCardinality { z } => z.iter().map(|&a| v(a)).collect(),
            },
            x: self.block.x.iter().map(|&a| v(a)).collect(),
        }
    }

    /// Inverse of `extract`: a full primal vector in this LP's variable order.
    fn assemble(&self, cert: &DualCertificate) -> Vec<f64> {
        let mut x = vec![0.0; self.lp.num_vars()];
        x[self.lambda.index()] = cert.lambda;
        for (id, v) in self.alpha.iter().zip(&cert.alpha) {
            x[id.index()] = *v;
        }
        for (id, v) in self.beta.iter().zip(&cert.beta) {
            x[id.index()] = *v;
        }
        for (id, v) in self.delta.iter().zip(&cert.delta) {
            x[id.index()] = *v;
        }
        for (id, v) in self.eta.iter().zip(&cert.eta) {
            x[id.index()] = *v;
        }
        for (id, v) in self.gamma.iter().zip(&cert.gamma) {
            x[id.index()] = *v;
        }
        for (id, v) in self.chi.iter().zip(&cert.chi) {
            x[id.index()] = *v;
        }
        for (id, v) in self.tau.iter().zip(&cert.tau) {
            x[id.index()] = *v;
        }
        match &self.block.link {
            RootLink::Threshold { z, .. } => x[z.index()] = cert.z[0],
            RootLink::PerCardinality { z } => {
                for (id, v) in z.iter().zip(&cert.z) {
                    x[id.index()] = *v;
                }
            }
        }
        for (id, v) in self.block.x.iter().zip(&cert.x) {
            x[id.index()] = *v;
        }
        x
    }
}

/// Re-checks a certificate against a freshly emitted LP: every row, every
/// sign constraint and the objective identity, within `CERT_TOL`. Nothing is
/// taken from the solver run that produced it.
fn verify_against_lp(
    t: &TreeModel,
    link: LinkSpec,
    targets: &[f64],
    cert: &DualCertificate,
    claimed_objective: f64,
) -> Result<(), BoundsError> {
    let built = build_bound_lp(t, link, targets);
    let x = built.assemble(cert);
    let viol = built.lp.primal_violation(&x);
    if viol > CERT_TOL {
        return Err(BoundsError::CertificateRejected(format!(
            "max scaled row violation {viol:.3e}"
        )));
    }
    let obj = cert.objective(t);
    if (obj - claimed_objective).abs() > CERT_TOL * (1.0 + claimed_objective.abs()) {
        return Err(BoundsError::CertificateRejected(format!(
            "certificate objective {obj} differs from claimed value {claimed_objective}"
        )));
    }
    Ok(())
}

/// Independent feasibility check for a threshold-mode certificate.
pub fn verify_certificate(
    t: &TreeModel,
    k: usize,
    cert: &DualCertificate,
    claimed_objective: f64,
) -> Result<(), BoundsError> {
    verify_against_lp(
        t,
        LinkSpec::Threshold { k },
        &[1.0],
        cert,
        claimed_objective,
    )
}

fn diagnostics_of(lp: &LPProblem, sol: &LPSolution) -> SolverDiagnostics {
    SolverDiagnostics {
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        lp_rows: lp.num_rows(),
        lp_cols: lp.num_vars(),
    }
}

/// Tight upper bound `U(k)` on `P(S >= k)` over every distribution matching
/// the tree data. `k = 0` and `k > n` short-circuit to 1 and 0.
pub fn upper_bound(t: &TreeModel, k: usize) -> Result<BoundResult, BoundsError> {
    upper_bound_with(t, k, &SolverConfig::default())
}

pub fn upper_bound_with(
    t: &TreeModel,
    k: usize,
    cfg: &SolverConfig,
) -> Result<BoundResult, BoundsError> {
    let n = t.n();
    if k > n {
        let cert = DualCertificate::zeros(t, 0.0, vec![0.0], 0);
        return Ok(BoundResult {
            value: 0.0,
            k: Some(k),
            direction: Direction::Upper,
            certificate: cert,
            transform: Transform::None,
            diagnostics: SolverDiagnostics::trivial(),
        });
    }
    let built = build_bound_lp(t, LinkSpec::Threshold { k }, &[1.0]);
    if k == 0 {
        // P(S >= 0) = 1, certified by lambda = 1 alone.
        let cert = DualCertificate::zeros(t, 1.0, vec![0.0], built.block.x.len());
        verify_against_lp(t, LinkSpec::Threshold { k }, &[1.0], &cert, 1.0)?;
        return Ok(BoundResult {
            value: 1.0,
            k: Some(0),
            direction: Direction::Upper,
            certificate: cert,
            transform: Transform::None,
            diagnostics: SolverDiagnostics::trivial(),
        });
    }

    let sol = built.lp.solve_via_dual(cfg)?;
    if sol.status != SolveStatus::Optimal {
        return Err(BoundsError::UnexpectedStatus(sol.status));
    }
    if !(-CERT_TOL..=1.0 + CERT_TOL).contains(&sol.objective) {
        return Err(BoundsError::ValueOutOfRange {
            value: sol.objective,
        });
    }
    let cert = built.extract(&sol);
    verify_against_lp(t, LinkSpec::Threshold { k }, &[1.0], &cert, sol.objective)?;
    Ok(BoundResult {
        value: sol.objective.clamp(0.0, 1.0),
        k: Some(k),
        direction: Direction::Upper,
        certificate: cert,
        transform: Transform::None,
        diagnostics: diagnostics_of(&built.lp, &sol),
    })
}

/// Tight lower bound `L(k)`, via `1 - U'(n-k+1)` on the complemented model.
pub fn lower_bound(t: &TreeModel, k: usize) -> Result<BoundResult, BoundsError> {
    lower_bound_with(t, k, &SolverConfig::default())
}

pub fn lower_bound_with(
    t: &TreeModel,
    k: usize,
    cfg: &SolverConfig,
) -> Result<BoundResult, BoundsError> {
    let n = t.n();
    if k == 0 {
        let cert = DualCertificate::zeros(t, 0.0, vec![0.0], 0);
        return Ok(BoundResult {
            value: 1.0,
            k: Some(0),
            direction: Direction::Lower,
            certificate: cert,
            transform: Transform::None,
            diagnostics: SolverDiagnostics::trivial(),
        });
    }
    if k > n {
        let cert = DualCertificate::zeros(t, 0.0, vec![0.0], 0);
        return Ok(BoundResult {
            value: 0.0,
            k: Some(k),
            direction: Direction::Lower,
            certificate: cert,
            transform: Transform::None,
            diagnostics: SolverDiagnostics::trivial(),
        });
    }
    let solved_k = n - k + 1;
    let complement = t.complement();
    let upper = upper_bound_with(&complement, solved_k, cfg)?;
    Ok(BoundResult {
        value: (1.0 - upper.value).clamp(0.0, 1.0),
        k: Some(k),
        direction: Direction::Lower,
        certificate: upper.certificate,
        transform: Transform::Complemented { solved_k },
        diagnostics: upper.diagnostics,
    })
}

/// Tight upper bound from univariate information alone:
/// `min_t sum of the n-t smallest p / (k - t)`, capped at 1.
pub fn univariate_upper(p: &[f64], k: usize) -> f64 {
    let n = p.len();
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let mut sorted = p.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut prefix = vec![0.0f64; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let mut best = f64::INFINITY;
    for t in 0..k {
        best = best.min(prefix[n - t] / (k - t) as f64);
    }
    best.min(1.0)
}

/// Univariate lower bound: the upper bound applied to the complemented
/// probabilities at threshold `n - k + 1`.
pub fn univariate_lower(p: &[f64], k: usize) -> f64 {
    let n = p.len();
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let q: Vec<f64> = p.iter().map(|&v| 1.0 - v).collect();
    1.0 - univariate_upper(&q, n - k + 1)
}

/// PMF of a sum of independent Bernoulli variables, by convolution.
pub fn poisson_binomial_pmf(p: &[f64]) -> Vec<f64> {
    let mut pmf = vec![1.0f64];
    for &pi in p {
        let mut next = vec![0.0; pmf.len() + 1];
        for (t, &v) in pmf.iter().enumerate() {
            next[t] += v * (1.0 - pi);
            next[t + 1] += v * pi;
        }
        pmf = next;
    }
    pmf
}

/// `P(sum of independent Bernoulli(p_i) >= m)`; `m <= 0` gives 1, `m > n`
/// gives 0.
pub fn poisson_binomial_tail(p: &[f64], m: i64) -> f64 {
    if m <= 0 {
        return 1.0;
    }
    if m > p.len() as i64 {
        return 0.0;
    }
    let pmf = poisson_binomial_pmf(p);
    pmf[m as usize..].iter().sum()
}

fn validate_weights(t: &TreeModel, w: &[f64]) -> Result<(), BoundsError> {
    if w.len() != t.n() + 1 {
        return Err(BoundsError::WeightLength {
            got: w.len(),
            want: t.n() + 1,
        });
    }
    for (index, &value) in w.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(BoundsError::NegativeWeight { index, value });
        }
    }
    Ok(())
}

/// Tight bound on `sum_s w_s P(S = s)` with nonnegative weights.
///
/// The maximization is the per-cardinality LP directly; the minimization uses
/// `min = w_max - max` with the flipped (still nonnegative) weights
/// `w_max - w_s`, valid because the cardinality masses sum to one.
pub fn weighted_bound(
    t: &TreeModel,
    w: &[f64],
    direction: Direction,
) -> Result<BoundResult, BoundsError> {
    weighted_bound_with(t, w, direction, &SolverConfig::default())
}

pub fn weighted_bound_with(
    t: &TreeModel,
    w: &[f64],
    direction: Direction,
    cfg: &SolverConfig,
) -> Result<BoundResult, BoundsError> {
    validate_weights(t, w)?;
    match direction {
        Direction::Upper => weighted_max(t, w, cfg, Transform::None),
        Direction::Lower => {
            let w_max = w.iter().cloned().fold(0.0f64, f64::max);
            let flipped: Vec<f64> = w.iter().map(|&v| w_max - v).collect();
            let mut res = weighted_max(t, &flipped, cfg, Transform::WeightFlipped { w_max })?;
            res.value = w_max - res.value;
            res.direction = Direction::Lower;
            Ok(res)
        }
    }
}

fn weighted_max(
    t: &TreeModel,
    w: &[f64],
    cfg: &SolverConfig,
    transform: Transform,
) -> Result<BoundResult, BoundsError> {
    let built = build_bound_lp(t, LinkSpec::PerCardinality, w);
    let sol = built.lp.solve_via_dual(cfg)?;
    if sol.status != SolveStatus::Optimal {
        return Err(BoundsError::UnexpectedStatus(sol.status));
    }
    let w_max = w.iter().cloned().fold(0.0f64, f64::max);
    if !(-CERT_TOL..=w_max + CERT_TOL * (1.0 + w_max)).contains(&sol.objective) {
        return Err(BoundsError::ValueOutOfRange {
            value: sol.objective,
        });
    }
    let cert = built.extract(&sol);
    verify_against_lp(t, LinkSpec::PerCardinality, w, &cert, sol.objective)?;
    Ok(BoundResult {
        value: sol.objective.clamp(0.0, w_max),
        k: None,
        direction: Direction::Upper,
        certificate: cert,
        transform,
        diagnostics: diagnostics_of(&built.lp, &sol),
    })
}

/// Bound on `P(sum_{A union B} c_i >= k)` when the `A` variables are mutually
/// independent (and independent of the tree-structured `B` block): the `A`
/// block contributes Poisson-binomial tail weights `w_s = P(S_A >= k - s)`.
pub fn partition_bound(
    a_probs: &[f64],
    t_b: &TreeModel,
    k: usize,
    direction: Direction,
) -> Result<BoundResult, BoundsError> {
    let w: Vec<f64> = (0..=t_b.n())
        .map(|s| poisson_binomial_tail(a_probs, k as i64 - s as i64))
        .collect();
    weighted_bound(t_b, &w, direction)
}

/// Closed-form tight upper bound at `k = 1`: `min(1, sum p_i - sum p_ij)`.
pub fn hunter_worsley(t: &TreeModel) -> f64 {
    let mut v = 0.0;
    for i in 0..t.n() {
        v += t.p(i);
    }
    for e in t.edges() {
        v -= e.table.p11;
    }
    v.min(1.0)
}

/// `L_uv <= L <= P_ci <= U <= U_uv` within `tol`.
pub fn band_nesting_ok(l_uv: f64, l: f64, p_ci: f64, u: f64, u_uv: f64, tol: f64) -> bool {
    l_uv <= l + tol && l <= p_ci + tol && p_ci <= u + tol && u <= u_uv + tol
}

/// One row of a full bound table.
#[derive(Debug, Clone, Copy)]
pub struct BoundTableRow {
    pub k: usize,
    pub upper: f64,
    pub lower: f64,
    pub ci: f64,
    pub uv_upper: f64,
    pub uv_lower: f64,
}

/// All five quantities for each threshold in `ks`; thresholds are evaluated
/// in parallel when the `parallel` feature is on.
pub fn bound_table(
    t: &TreeModel,
    ks: &[usize],
    cfg: &SolverConfig,
) -> Result<Vec<BoundTableRow>, BoundsError> {
    let p: Vec<f64> = (0..t.n()).map(|i| t.p(i)).collect();
    crate::par::try_map_range(ks.len(), |pos| {
        let k = ks[pos];
        Ok(BoundTableRow {
            k,
            upper: upper_bound_with(t, k, cfg)?.value,
            lower: lower_bound_with(t, k, cfg)?.value,
            ci: crate::ci::ci_tail(t, k)?,
            uv_upper: univariate_upper(&p, k),
            uv_lower: univariate_lower(&p, k),
        })
    })
}
