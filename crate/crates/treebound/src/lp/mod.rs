//! Generic sparse linear programs and an embedded solver.
//!
//! The representation is deliberately small: variables with optional bounds,
//! sparse rows with a relation and a right-hand side, and a minimize/maximize
//! sense. [`LPProblem::solve`] runs a two-phase bounded-variable revised
//! simplex; every `Optimal` answer is re-verified against
//! the stated residual tolerances before it is returned, and a solve that
//! cannot meet them reports [`LpError::NumericalFailure`] rather than a
//! silently inaccurate optimum.
//!
//! [`LPProblem::dual`] builds the exact LP dual for problems whose variables
//! are free or one-sided at zero. [`LPProblem::solve_via_dual`] exploits it to
//! solve in whichever orientation has the smaller basis; callers get a
//! solution expressed in terms of the original problem either way.

mod simplex;

use std::fmt::Write as _;

use thiserror::Error;

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Row relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

/// Handle to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle to a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowId(pub(crate) usize);

impl RowId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

/// Bounds shorthand used when declaring variables.
pub const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);
pub const NONNEG: (f64, f64) = (0.0, f64::INFINITY);
pub const NONPOS: (f64, f64) = (f64::NEG_INFINITY, 0.0);

/// A sparse linear program. Immutable once handed to the solver.
#[derive(Debug, Clone)]
pub struct LPProblem {
    sense: Sense,
    obj: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    names: Vec<Option<String>>,
    rows: Vec<Row>,
}

/// Solver tolerances; centralized so callers can tighten them.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Feasibility and optimality tolerance (relative to row scale).
    pub feas_tol: f64,
    /// Minimum magnitude accepted for a pivot element.
    pub pivot_tol: f64,
    /// Hard iteration cap; 0 picks one from the problem size.
    pub max_iterations: usize,
    /// Basis inverse is recomputed from scratch this often.
    pub refactor_interval: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feas_tol: 1e-7,
            pivot_tol: 1e-9,
            max_iterations: 0,
            refactor_interval: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Primal/dual solution of an [`LPProblem`].
///
/// `objective`, `primal` and `dual` are meaningful only when `status` is
/// `Optimal`. Dual sign convention: for a minimize problem, `>=` rows have
/// nonnegative duals and `<=` rows nonpositive ones; maximize flips both.
#[derive(Debug, Clone)]
pub struct LPSolution {
    pub status: SolveStatus,
    pub objective: f64,
    primal: Vec<f64>,
    dual: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl LPSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.primal[v.0]
    }

    pub fn dual_value(&self, r: RowId) -> f64 {
        self.dual[r.0]
    }

    pub fn primal(&self) -> &[f64] {
        &self.primal
    }

    pub fn duals(&self) -> &[f64] {
        &self.dual
    }

    /// Objective of the dual solution: `b'y` plus reduced-cost contributions
    /// of variables sitting at finite bounds. Equals the primal objective at
    /// a verified optimum.
    pub fn dual_objective(&self, p: &LPProblem) -> f64 {
        let mut obj: f64 = p.rows.iter().zip(&self.dual).map(|(r, y)| r.rhs * y).sum();
        let rc = p.reduced_costs(&self.dual);
        for j in 0..p.num_vars() {
            let x = self.primal[j];
            let near = |b: f64| b.is_finite() && (x - b).abs() <= 1e-6 * (1.0 + x.abs());
            if near(p.lower[j]) {
                obj += rc[j] * p.lower[j];
            } else if near(p.upper[j]) {
                obj += rc[j] * p.upper[j];
            }
        }
        obj
    }
}

#[derive(Debug, Clone, Error)]
pub enum LpError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("dual form unsupported: {0}")]
    UnsupportedBounds(String),
}

impl LPProblem {
    pub fn new(sense: Sense) -> Self {
        LPProblem {
            sense,
            obj: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            names: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn minimize() -> Self {
        Self::new(Sense::Minimize)
    }

    pub fn maximize() -> Self {
        Self::new(Sense::Maximize)
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Declares a variable with objective coefficient `obj` and `(lower,
    /// upper)` bounds (use [`FREE`], [`NONNEG`], [`NONPOS`]).
    pub fn add_var(&mut self, obj: f64, bounds: (f64, f64)) -> VarId {
        debug_assert!(bounds.0 <= bounds.1);
        self.obj.push(obj);
        self.lower.push(bounds.0);
        self.upper.push(bounds.1);
        self.names.push(None);
        VarId(self.obj.len() - 1)
    }

    pub fn add_named_var(
        &mut self,
        name: impl Into<String>,
        obj: f64,
        bounds: (f64, f64),
    ) -> VarId {
        let v = self.add_var(obj, bounds);
        self.names[v.0] = Some(name.into());
        v
    }

    pub fn set_objective_coeff(&mut self, v: VarId, obj: f64) {
        self.obj[v.0] = obj;
    }

    /// Adds a sparse row; duplicate variable references are merged and zero
    /// coefficients dropped.
    pub fn add_row(&mut self, rel: Relation, rhs: f64, coeffs: &[(VarId, f64)]) -> RowId {
        let mut merged: Vec<(usize, f64)> = coeffs.iter().map(|&(v, c)| (v.0, c)).collect();
        merged.sort_unstable_by_key(|&(j, _)| j);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(merged.len());
        for (j, c) in merged {
            debug_assert!(
                j < self.obj.len(),
                "coefficient references undeclared variable"
            );
            match out.last_mut() {
                Some(last) if last.0 == j => last.1 += c,
                _ => out.push((j, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.rows.push(Row {
            coeffs: out,
            rel,
            rhs,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn bounds(&self, v: VarId) -> (f64, f64) {
        (self.lower[v.0], self.upper[v.0])
    }

    /// Row coefficients (by variable index), relation and right-hand side.
    pub fn row(&self, r: RowId) -> (&[(usize, f64)], Relation, f64) {
        let row = &self.rows[r.0];
        (&row.coeffs, row.rel, row.rhs)
    }

    pub fn row_ids(&self) -> impl Iterator<Item = RowId> {
        (0..self.rows.len()).map(RowId)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    fn var_name(&self, j: usize) -> String {
        self.names[j].clone().unwrap_or_else(|| format!("x{j}"))
    }

    /// Reduced costs `c - A'y` for given row duals.
    pub(crate) fn reduced_costs(&self, y: &[f64]) -> Vec<f64> {
        let mut rc = self.obj.clone();
        for (i, row) in self.rows.iter().enumerate() {
            let yi = y[i];
            if yi != 0.0 {
                for &(j, a) in &row.coeffs {
                    rc[j] -= yi * a;
                }
            }
        }
        rc
    }

    /// Solves with default tolerances.
    pub fn solve(&self) -> Result<LPSolution, LpError> {
        self.solve_with(&SolverConfig::default())
    }

    /// Solves with the embedded simplex; retries once with conservative
    /// pivoting if the first pass misses the residual targets.
    pub fn solve_with(&self, cfg: &SolverConfig) -> Result<LPSolution, LpError> {
        for conservative in [false, true] {
            let res = simplex::run(self, cfg, conservative).map_err(LpError::NumericalFailure)?;
            match res.status {
                SolveStatus::Optimal => {
                    let (pr, dr) = self.residuals(&res.x, &res.y, cfg.feas_tol);
                    if pr <= cfg.feas_tol && dr <= cfg.feas_tol {
                        return Ok(LPSolution {
                            status: SolveStatus::Optimal,
                            objective: self.objective_value(&res.x),
                            primal: res.x,
                            dual: res.y,
                            iterations: res.iterations,
                            primal_residual: pr,
                            dual_residual: dr,
                        });
                    }
                    if conservative {
                        return Err(LpError::NumericalFailure(format!(
                            "residual targets missed: primal {pr:.3e}, dual {dr:.3e}"
                        )));
                    }
                }
                status => {
                    return Ok(LPSolution {
                        status,
                        objective: f64::NAN,
                        primal: res.x,
                        dual: res.y,
                        iterations: res.iterations,
                        primal_residual: f64::NAN,
                        dual_residual: f64::NAN,
                    })
                }
            }
        }
        unreachable!()
    }

    /// Solves through the dual when that orientation has fewer rows, mapping
    /// the answer back to this problem. Falls back to a direct solve whenever
    /// the mapping is unsupported or inconclusive.
    pub fn solve_via_dual(&self, cfg: &SolverConfig) -> Result<LPSolution, LpError> {
        let dual = match self.dual() {
            Ok(d) => d,
            Err(_) => return self.solve_with(cfg),
        };
        let ds = dual.solve_with(cfg)?;
        match ds.status {
            SolveStatus::Optimal => {
                let primal = ds.dual.clone();
                let y = ds.primal.clone();
                let (pr, dr) = self.residuals(&primal, &y, cfg.feas_tol);
                if pr <= cfg.feas_tol && dr <= cfg.feas_tol {
                    Ok(LPSolution {
                        status: SolveStatus::Optimal,
                        objective: self.objective_value(&primal),
                        primal,
                        dual: y,
                        iterations: ds.iterations,
                        primal_residual: pr,
                        dual_residual: dr,
                    })
                } else {
                    self.solve_with(cfg)
                }
            }
            // An unbounded dual certifies primal infeasibility; an infeasible
            // dual leaves primal infeasible/unbounded ambiguous.
            SolveStatus::Unbounded => Ok(LPSolution {
                status: SolveStatus::Infeasible,
                objective: f64::NAN,
                primal: vec![0.0; self.num_vars()],
                dual: vec![0.0; self.num_rows()],
                iterations: ds.iterations,
                primal_residual: f64::NAN,
                dual_residual: f64::NAN,
            }),
            SolveStatus::Infeasible => self.solve_with(cfg),
        }
    }

    /// Maximum scaled violation of rows and variable bounds by `x`.
    pub fn primal_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let mut act = 0.0;
            let mut scale = 1.0 + row.rhs.abs();
            for &(j, a) in &row.coeffs {
                let term = a * x[j];
                act += term;
                scale += term.abs();
            }
            let viol = match row.rel {
                Relation::Le => (act - row.rhs).max(0.0),
                Relation::Ge => (row.rhs - act).max(0.0),
                Relation::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol / scale);
        }
        for j in 0..self.num_vars() {
            let viol = (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0);
            worst = worst.max(viol / (1.0 + x[j].abs()));
        }
        worst
    }

    /// Maximum scaled primal and dual residuals of a candidate solution.
    ///
    /// Primal: relation violations and bound violations, scaled by row
    /// activity. Dual: reduced-cost sign conditions and complementary
    /// slackness, scaled likewise.
    pub fn residuals(&self, x: &[f64], y: &[f64], tol: f64) -> (f64, f64) {
        let mut primal = 0.0f64;
        for row in &self.rows {
            let mut act = 0.0;
            let mut scale = 1.0 + row.rhs.abs();
            for &(j, a) in &row.coeffs {
                let term = a * x[j];
                act += term;
                scale += term.abs();
            }
            let viol = match row.rel {
                Relation::Le => (act - row.rhs).max(0.0),
                Relation::Ge => (row.rhs - act).max(0.0),
                Relation::Eq => (act - row.rhs).abs(),
            };
            primal = primal.max(viol / scale);
        }
        for j in 0..self.num_vars() {
            let scale = 1.0 + x[j].abs();
            let viol = (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0);
            primal = primal.max(viol / scale);
        }

        // Dual feasibility in the internal minimize convention.
        let flip = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut dual = 0.0f64;
        for (row, &yv) in self.rows.iter().zip(y) {
            let yv = flip * yv;
            let bad = match row.rel {
                Relation::Ge => (-yv).max(0.0),
                Relation::Le => yv.max(0.0),
                Relation::Eq => 0.0,
            };
            dual = dual.max(bad / (1.0 + yv.abs()));
            // Complementary slackness: a slack row must carry a zero dual.
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let slack = (act - row.rhs).abs();
            let scale = 1.0 + row.rhs.abs() + act.abs();
            if slack / scale > tol {
                dual = dual.max(yv.abs() / (1.0 + yv.abs()));
            }
        }
        let rc = self.reduced_costs(y);
        for j in 0..self.num_vars() {
            let r = flip * rc[j];
            let scale = 1.0 + self.obj[j].abs() + r.abs();
            let at_lower = self.lower[j].is_finite()
                && (x[j] - self.lower[j]).abs() <= tol * (1.0 + x[j].abs());
            let at_upper = self.upper[j].is_finite()
                && (x[j] - self.upper[j]).abs() <= tol * (1.0 + x[j].abs());
            let bad = if at_lower && at_upper {
                0.0
            } else if at_lower {
                (-r).max(0.0)
            } else if at_upper {
                r.max(0.0)
            } else {
                r.abs()
            };
            dual = dual.max(bad / scale);
        }
        (primal, dual)
    }

    /// Exact LP dual.
    ///
    /// Supported variable bounds: free, `>= 0`, `<= 0`. The dual has one
    /// variable per row of `self` and one row per variable; at an optimum the
    /// dual's row duals equal the primal values of `self` and vice versa.
    pub fn dual(&self) -> Result<LPProblem, LpError> {
        #[derive(Clone, Copy)]
        enum VKind {
            Free,
            NonNeg,
            NonPos,
        }
        let mut kinds = Vec::with_capacity(self.num_vars());
        for j in 0..self.num_vars() {
            let k = match (self.lower[j], self.upper[j]) {
                (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => VKind::Free,
                (0.0, u) if u == f64::INFINITY => VKind::NonNeg,
                (l, 0.0) if l == f64::NEG_INFINITY => VKind::NonPos,
                (l, u) => {
                    return Err(LpError::UnsupportedBounds(format!(
                        "variable {} has bounds [{l}, {u}]",
                        self.var_name(j)
                    )))
                }
            };
            kinds.push(k);
        }

        let min = self.sense == Sense::Minimize;
        let mut d = LPProblem::new(if min {
            Sense::Maximize
        } else {
            Sense::Minimize
        });
        for row in &self.rows {
            let bounds = match (row.rel, min) {
                (Relation::Ge, true) | (Relation::Le, false) => NONNEG,
                (Relation::Le, true) | (Relation::Ge, false) => NONPOS,
                (Relation::Eq, _) => FREE,
            };
            d.add_var(row.rhs, bounds);
        }
        // Transpose the coefficient matrix.
        let mut cols: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); self.num_vars()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                cols[j].push((VarId(i), a));
            }
        }
        for (j, coeffs) in cols.iter().enumerate() {
            let rel = match (kinds[j], min) {
                (VKind::Free, _) => Relation::Eq,
                (VKind::NonNeg, true) | (VKind::NonPos, false) => Relation::Le,
                (VKind::NonPos, true) | (VKind::NonNeg, false) => Relation::Ge,
            };
            d.add_row(rel, self.obj[j], coeffs);
        }
        Ok(d)
    }

    /// Renders the problem in a human-readable LP text format, one constraint
    /// per line, for external cross-checks.
    pub fn to_lp_format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}",
            match self.sense {
                Sense::Minimize => "Minimize",
                Sense::Maximize => "Maximize",
            }
        );
        let mut obj_line = String::from(" obj:");
        for (j, &c) in self.obj.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(obj_line, " {:+} {}", c, self.var_name(j));
            }
        }
        let _ = writeln!(s, "{obj_line}");
        let _ = writeln!(s, "Subject To");
        for (i, row) in self.rows.iter().enumerate() {
            let mut line = format!(" r{i}:");
            for &(j, a) in &row.coeffs {
                let _ = write!(line, " {:+} {}", a, self.var_name(j));
            }
            let _ = writeln!(s, "{line} {} {}", row.rel.symbol(), row.rhs);
        }
        let _ = writeln!(s, "Bounds");
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            let name = self.var_name(j);
            if l == f64::NEG_INFINITY && u == f64::INFINITY {
                let _ = writeln!(s, " {name} free");
            } else {
                let _ = writeln!(s, " {l} <= {name} <= {u}");
            }
        }
        s.push_str("End\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn min_x_at_least_two() {
        let mut p = LPProblem::minimize();
        let x = p.add_var(1.0, FREE);
        p.add_row(Relation::Ge, 2.0, &[(x, 1.0)]);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!((s.value(x) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_interval() {
        let mut p = LPProblem::minimize();
        let x = p.add_var(0.0, FREE);
        p.add_row(Relation::Ge, 1.0, &[(x, 1.0)]);
        p.add_row(Relation::Le, 0.0, &[(x, 1.0)]);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction() {
        let mut p = LPProblem::minimize();
        let x = p.add_var(-1.0, NONNEG);
        p.add_row(Relation::Ge, 0.0, &[(x, 1.0)]);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Unbounded);
    }

    #[test]
    fn bounded_box_with_equality() {
        // max 3x + 2y s.t. x + y = 4, x <= 3, y <= 3, x,y >= 0.
        let mut p = LPProblem::maximize();
        let x = p.add_var(3.0, (0.0, 3.0));
        let y = p.add_var(2.0, (0.0, 3.0));
        p.add_row(Relation::Eq, 4.0, &[(x, 1.0), (y, 1.0)]);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 11.0).abs() < 1e-9);
        assert!((s.value(x) - 3.0).abs() < 1e-9);
        assert!((s.value(y) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_rows_and_duplicates() {
        let mut p = LPProblem::minimize();
        let x = p.add_var(1.0, NONNEG);
        // 2x >= 4 written with duplicate references.
        p.add_row(Relation::Ge, 4.0, &[(x, 1.0), (x, 1.0)]);
        // Empty row that is trivially true.
        p.add_row(Relation::Le, 5.0, &[]);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn empty_row_infeasible() {
        let mut p = LPProblem::minimize();
        let _ = p.add_var(1.0, NONNEG);
        p.add_row(Relation::Ge, 3.0, &[]);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn repeat_solves_are_identical() {
        let mut p = LPProblem::minimize();
        let x = p.add_var(1.0, FREE);
        let y = p.add_var(2.0, NONNEG);
        p.add_row(Relation::Ge, 2.0, &[(x, 1.0), (y, 1.0)]);
        p.add_row(Relation::Ge, -1.0, &[(x, -1.0), (y, 3.0)]);
        let a = p.solve().unwrap();
        let b = p.solve().unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.primal, b.primal);
        assert_eq!(a.dual, b.dual);
    }

    #[test]
    fn dual_of_simple_problem() {
        let mut p = LPProblem::minimize();
        let x = p.add_var(1.0, FREE);
        p.add_row(Relation::Ge, 2.0, &[(x, 1.0)]);
        let d = p.dual().unwrap();
        assert_eq!(d.sense(), Sense::Maximize);
        let s = d.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
        // Dual of the dual's row recovers the primal value.
        assert!((s.duals()[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn solve_via_dual_matches_direct() {
        let mut p = LPProblem::minimize();
        let x = p.add_var(1.0, NONNEG);
        let y = p.add_var(1.5, NONNEG);
        let z = p.add_var(-0.5, NONPOS);
        p.add_row(Relation::Ge, 2.0, &[(x, 1.0), (y, 1.0), (z, 1.0)]);
        p.add_row(Relation::Le, 5.0, &[(x, 2.0), (y, -1.0)]);
        p.add_row(Relation::Eq, 0.5, &[(y, 1.0), (z, -1.0)]);
        let a = p.solve().unwrap();
        let b = p.solve_via_dual(&SolverConfig::default()).unwrap();
        assert_eq!(a.status, SolveStatus::Optimal);
        assert_eq!(b.status, SolveStatus::Optimal);
        assert!((a.objective - b.objective).abs() < 1e-7);
        for j in 0..p.num_vars() {
            assert!((a.primal[j] - b.primal[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn lp_format_dump() {
        let mut p = LPProblem::minimize();
        let x = p.add_named_var("x", 1.0, FREE);
        p.add_row(Relation::Ge, 2.0, &[(x, 1.0)]);
        let txt = p.to_lp_format();
        assert!(txt.contains("Minimize"));
        assert!(txt.contains("+1 x >= 2"));
        assert!(txt.contains("x free"));
    }

    /// A classically cycling-prone degenerate instance; must terminate at
    /// the known optimum regardless of the pricing rule's first choices.
    #[test]
    fn degenerate_cycling_instance() {
        let mut p = LPProblem::minimize();
        let x1 = p.add_var(-0.75, NONNEG);
        let x2 = p.add_var(150.0, NONNEG);
        let x3 = p.add_var(-0.02, NONNEG);
        let x4 = p.add_var(6.0, NONNEG);
        p.add_row(
            Relation::Le,
            0.0,
            &[(x1, 0.25), (x2, -60.0), (x3, -0.04), (x4, 9.0)],
        );
        p.add_row(
            Relation::Le,
            0.0,
            &[(x1, 0.5), (x2, -90.0), (x3, -0.02), (x4, 3.0)],
        );
        p.add_row(Relation::Le, 1.0, &[(x3, 1.0)]);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - (-0.05)).abs() < 1e-9, "got {}", s.objective);
    }

    /// Maximize-sense problems report duals in the maximize convention and
    /// satisfy strong duality too.
    #[test]
    fn maximize_sense_duality() {
        // max 2x + 3y s.t. x + y <= 4, x - y >= -2, x, y >= 0.
        let mut p = LPProblem::maximize();
        let x = p.add_var(2.0, NONNEG);
        let y = p.add_var(3.0, NONNEG);
        let r1 = p.add_row(Relation::Le, 4.0, &[(x, 1.0), (y, 1.0)]);
        let r2 = p.add_row(Relation::Ge, -2.0, &[(x, 1.0), (y, -1.0)]);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        // Optimum at x = 1, y = 3.
        assert!((s.objective - 11.0).abs() < 1e-9);
        assert!(s.dual_value(r1) >= -1e-9, "Le dual in max sense");
        assert!(s.dual_value(r2) <= 1e-9, "Ge dual in max sense");
        let gap = (s.objective - s.dual_objective(&p)).abs();
        assert!(gap < 1e-7, "duality gap {gap}");

        let via = p.solve_via_dual(&SolverConfig::default()).unwrap();
        assert!((via.objective - s.objective).abs() < 1e-7);
    }

    /// Random feasible-by-construction bounded LPs: the solver must find an
    /// objective no worse than the seeded feasible point, primal and dual
    /// objectives must agree, and solving through the dual must match.
    fn random_lp(seed: u64, n_vars: usize, n_rows: usize) -> (LPProblem, Vec<f64>) {
        let mut rng = crate::gen::SplitMix64::new(seed);
        let mut p = LPProblem::minimize();
        let mut point = Vec::new();
        let mut vars = Vec::new();
        for _ in 0..n_vars {
            let c = rng.next_f64() * 4.0 - 2.0;
            let v = p.add_var(c, NONNEG);
            vars.push(v);
            point.push(rng.next_f64() * 2.0);
        }
        for _ in 0..n_rows {
            let mut coeffs = Vec::new();
            let mut act = 0.0;
            for (j, &v) in vars.iter().enumerate() {
                if rng.next_f64() < 0.6 {
                    let a = rng.next_f64() * 2.0 - 1.0;
                    coeffs.push((v, a));
                    act += a * point[j];
                }
            }
            // Relation chosen to keep the seeded point feasible.
            if rng.next_f64() < 0.5 {
                p.add_row(Relation::Le, act + rng.next_f64(), &coeffs);
            } else {
                p.add_row(Relation::Ge, act - rng.next_f64(), &coeffs);
            }
        }
        // A bounding box keeps the LP from being unbounded.
        for &v in &vars {
            p.add_row(Relation::Le, 10.0, &[(v, 1.0)]);
        }
        (p, point)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn strong_duality_and_dual_route(seed in 0u64..10_000, nv in 1usize..12, nr in 1usize..16) {
            let (p, point) = random_lp(seed, nv, nr);
            let s = p.solve().unwrap();
            prop_assert_eq!(s.status, SolveStatus::Optimal);
            let feasible_obj = p.objective_value(&point);
            prop_assert!(s.objective <= feasible_obj + 1e-7);
            let gap = (s.objective - s.dual_objective(&p)).abs();
            prop_assert!(gap <= 1e-7 * (1.0 + s.objective.abs()));

            let via = p.solve_via_dual(&SolverConfig::default()).unwrap();
            prop_assert_eq!(via.status, SolveStatus::Optimal);
            prop_assert!((via.objective - s.objective).abs() <= 1e-7 * (1.0 + s.objective.abs()));
        }
    }
}
