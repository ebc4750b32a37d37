//! Two-phase bounded-variable revised simplex with a dense basis inverse.
//!
//! Columns are the problem's structural variables followed by one slack per
//! row; artificial columns are appended only for rows whose slack cannot
//! start basic-feasible. The basis inverse is kept explicitly (row-major) and
//! updated by Gauss-Jordan pivots, with periodic refactorization from
//! scratch. Pricing is Dantzig's rule, switching to Bland's rule after a run
//! of degenerate pivots so cycling terminates; ties are broken
//! deterministically, so repeated solves are bit-identical.

use super::{LPProblem, Relation, Sense, SolveStatus, SolverConfig};

pub(crate) struct RawSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VStat {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

const TIE_TOL: f64 = 1e-10;
const DEGEN_STEP: f64 = 1e-11;
const DEGEN_SWITCH: usize = 200;

struct Tableau {
    m: usize,
    n_struct: usize,
    /// Structural + slack columns.
    n_real: usize,
    col_ptr: Vec<usize>,
    col_rows: Vec<u32>,
    col_vals: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Phase-2 costs in the internal minimize convention.
    cost: Vec<f64>,
    b: Vec<f64>,

    stat: Vec<VStat>,
    x: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    /// Per-row artificial coefficient sign; 0.0 when the row has none.
    art_sign: Vec<f64>,

    // Scratch buffers reused across iterations.
    w: Vec<f64>,
    y: Vec<f64>,
    pivot_row: Vec<f64>,

    iterations: usize,
    pivots_since_refactor: usize,
}

pub(crate) fn run(
    p: &LPProblem,
    cfg: &SolverConfig,
    conservative: bool,
) -> Result<RawSolution, String> {
    let mut t = Tableau::new(p);
    let max_iters = if cfg.max_iterations > 0 {
        cfg.max_iterations
    } else {
        10_000 + 50 * (t.m + t.n_real)
    };
    let refactor = if conservative {
        cfg.refactor_interval.clamp(1, 100)
    } else {
        cfg.refactor_interval.max(1)
    };

    let have_artificials = t.basis.iter().any(|&j| j >= t.n_real);
    if have_artificials {
        let exit = t.iterate(true, cfg, conservative, max_iters, refactor)?;
        if exit == LoopExit::IterationLimit {
            return Err("iteration limit reached in phase 1".into());
        }
        let b_scale = 1.0 + t.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let infeas: f64 = (t.n_real..t.n_real + t.m)
            .filter(|&j| t.stat[j] == VStat::Basic)
            .map(|j| t.x[j].max(0.0))
            .sum();
        if infeas > cfg.feas_tol * b_scale {
            return Ok(RawSolution {
                status: SolveStatus::Infeasible,
                x: t.x[..t.n_struct].to_vec(),
                y: vec![0.0; t.m],
                iterations: t.iterations,
            });
        }
        t.drive_out_artificials(cfg)?;
        t.refactorize()?;
    }

    let exit = t.iterate(false, cfg, conservative, max_iters, refactor)?;
    match exit {
        LoopExit::Optimal => {
            // A final clean factorization keeps the reported values tight.
            t.refactorize()?;
            let y = t.duals(p.sense());
            Ok(RawSolution {
                status: SolveStatus::Optimal,
                x: t.x[..t.n_struct].to_vec(),
                y,
                iterations: t.iterations,
            })
        }
        LoopExit::Unbounded => Ok(RawSolution {
            status: SolveStatus::Unbounded,
            x: t.x[..t.n_struct].to_vec(),
            y: vec![0.0; t.m],
            iterations: t.iterations,
        }),
        LoopExit::IterationLimit => Err("iteration limit reached in phase 2".into()),
    }
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum LoopExit {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn new(p: &LPProblem) -> Tableau {
        let m = p.num_rows();
        let n_struct = p.num_vars();
        let n_real = n_struct + m;
        let flip = match p.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };

        // Column-major storage, built by transposing the rows.
        let mut counts = vec![0usize; n_real];
        for row in &p.rows {
            for &(j, _) in &row.coeffs {
                counts[j] += 1;
            }
        }
        for s in n_struct..n_real {
            counts[s] = 1;
        }
        let mut col_ptr = vec![0usize; n_real + 1];
        for j in 0..n_real {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n_real];
        let mut col_rows = vec![0u32; nnz];
        let mut col_vals = vec![0.0f64; nnz];
        let mut fill = col_ptr.clone();
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                col_rows[fill[j]] = i as u32;
                col_vals[fill[j]] = a;
                fill[j] += 1;
            }
        }
        for (i, _) in p.rows.iter().enumerate() {
            let j = n_struct + i;
            col_rows[fill[j]] = i as u32;
            col_vals[fill[j]] = 1.0;
            fill[j] += 1;
        }

        let mut lower = Vec::with_capacity(n_real + m);
        let mut upper = Vec::with_capacity(n_real + m);
        let mut cost = vec![0.0f64; n_real];
        for j in 0..n_struct {
            lower.push(p.lower[j]);
            upper.push(p.upper[j]);
            cost[j] = flip * p.obj[j];
        }
        for row in &p.rows {
            let (l, u) = match row.rel {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
        }
        // Artificial bounds, appended lazily below but sized now.
        lower.extend(std::iter::repeat_n(0.0, m));
        upper.extend(std::iter::repeat_n(0.0, m));

        let b: Vec<f64> = p.rows.iter().map(|r| r.rhs).collect();

        let mut t = Tableau {
            m,
            n_struct,
            n_real,
            col_ptr,
            col_rows,
            col_vals,
            lower,
            upper,
            cost,
            b,
            stat: vec![VStat::AtLower; n_real + m],
            x: vec![0.0; n_real + m],
            basis: vec![0; m],
            binv: vec![0.0; m * m],
            art_sign: vec![0.0; m],
            w: vec![0.0; m],
            y: vec![0.0; m],
            pivot_row: vec![0.0; m],
            iterations: 0,
            pivots_since_refactor: 0,
        };

        // Nonbasic starting point: nearest finite bound, or zero when free.
        for j in 0..n_struct {
            if t.lower[j].is_finite() {
                t.stat[j] = VStat::AtLower;
                t.x[j] = t.lower[j];
            } else if t.upper[j].is_finite() {
                t.stat[j] = VStat::AtUpper;
                t.x[j] = t.upper[j];
            } else {
                t.stat[j] = VStat::Free;
                t.x[j] = 0.0;
            }
        }

        // Row residuals at the starting point decide slack vs artificial.
        let mut r = t.b.clone();
        for j in 0..n_struct {
            if t.x[j] != 0.0 {
                for k in t.col_ptr[j]..t.col_ptr[j + 1] {
                    r[t.col_rows[k] as usize] -= t.col_vals[k] * t.x[j];
                }
            }
        }
        for i in 0..m {
            let s = n_struct + i;
            let ok = r[i] >= t.lower[s] - 1e-12 && r[i] <= t.upper[s] + 1e-12;
            if ok {
                t.basis[i] = s;
                t.stat[s] = VStat::Basic;
                t.x[s] = r[i];
                t.binv[i * m + i] = 1.0;
            } else {
                let a = t.n_real + i;
                let sign = if r[i] >= 0.0 { 1.0 } else { -1.0 };
                t.art_sign[i] = sign;
                t.upper[a] = f64::INFINITY;
                t.basis[i] = a;
                t.stat[a] = VStat::Basic;
                t.x[a] = r[i].abs();
                t.binv[i * m + i] = sign;
                // Slack stays nonbasic at its bound nearest the residual.
                t.stat[s] = if t.upper[s] == 0.0 && t.lower[s].is_infinite() {
                    VStat::AtUpper
                } else {
                    VStat::AtLower
                };
                t.x[s] = 0.0;
            }
        }
        t
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n_real
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn cur_cost(&self, phase1: bool, j: usize) -> f64 {
        if phase1 {
            if self.is_artificial(j) {
                1.0
            } else {
                0.0
            }
        } else if self.is_artificial(j) {
            0.0
        } else {
            self.cost[j]
        }
    }

    /// `w = B^-1 A_j`, accumulated column-wise over the nonzeros of `A_j`.
    fn ftran(&mut self, j: usize) {
        let m = self.m;
        if m == 0 {
            return;
        }
        self.w.iter_mut().for_each(|v| *v = 0.0);
        if self.is_artificial(j) {
            let r = j - self.n_real;
            let v = self.art_sign[r];
            for (i, chunk) in self.binv.chunks_exact(m).enumerate() {
                self.w[i] += v * chunk[r];
            }
        } else {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let r = self.col_rows[k] as usize;
                let v = self.col_vals[k];
                for (i, chunk) in self.binv.chunks_exact(m).enumerate() {
                    self.w[i] += v * chunk[r];
                }
            }
        }
    }

    /// `y = (B^-1)' c_B` for the current phase costs.
    fn btran(&mut self, phase1: bool) {
        let m = self.m;
        if m == 0 {
            return;
        }
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..m {
            let cb = self.cur_cost(phase1, self.basis[r]);
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yv, &bv) in self.y.iter_mut().zip(row) {
                    *yv += cb * bv;
                }
            }
        }
    }

    fn reduced_cost(&self, phase1: bool, j: usize) -> f64 {
        let mut d = self.cur_cost(phase1, j);
        for k in self.col_ptr[j]..self.col_ptr[j + 1] {
            d -= self.y[self.col_rows[k] as usize] * self.col_vals[k];
        }
        d
    }

    /// Entering column under Dantzig (most improving) or Bland (lowest
    /// index) pricing; artificials and fixed columns are never priced.
    fn price(&self, phase1: bool, opt_tol: f64, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n_real {
            if self.stat[j] == VStat::Basic || self.is_fixed(j) {
                continue;
            }
            let d = self.reduced_cost(phase1, j);
            let dir = match self.stat[j] {
                VStat::AtLower if d < -opt_tol => 1.0,
                VStat::AtUpper if d > opt_tol => -1.0,
                VStat::Free if d < -opt_tol => 1.0,
                VStat::Free if d > opt_tol => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            match best {
                Some((_, _, mag)) if d.abs() <= mag => {}
                _ => best = Some((j, dir, d.abs())),
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// One simplex phase. Returns on optimality, unboundedness or the
    /// iteration cap.
    fn iterate(
        &mut self,
        phase1: bool,
        cfg: &SolverConfig,
        conservative: bool,
        max_iters: usize,
        refactor: usize,
    ) -> Result<LoopExit, String> {
        let opt_tol = (cfg.feas_tol * 1e-2).max(1e-9);
        let mut bland = conservative;
        let mut degen_streak = 0usize;
        loop {
            if self.iterations >= max_iters {
                return Ok(LoopExit::IterationLimit);
            }
            self.iterations += 1;
            if self.pivots_since_refactor >= refactor {
                self.refactorize()?;
            }

            self.btran(phase1);
            let Some((q, dir)) = self.price(phase1, opt_tol, bland) else {
                return Ok(LoopExit::Optimal);
            };
            self.ftran(q);

            // Ratio test: smallest step that hits a basic variable's bound or
            // the entering variable's own opposite bound.
            let own_range = self.upper[q] - self.lower[q];
            let mut theta = if own_range.is_finite() {
                own_range
            } else {
                f64::INFINITY
            };
            let mut blocking: Option<(usize, VStat)> = None;
            for r in 0..self.m {
                let g = dir * self.w[r];
                let jb = self.basis[r];
                let (bound, to) = if g > cfg.pivot_tol {
                    (self.lower[jb], VStat::AtLower)
                } else if g < -cfg.pivot_tol {
                    (self.upper[jb], VStat::AtUpper)
                } else {
                    continue;
                };
                if !bound.is_finite() {
                    continue;
                }
                let t = ((self.x[jb] - bound) / g).max(0.0);
                if t < theta - TIE_TOL {
                    theta = t;
                    blocking = Some((r, to));
                } else if t <= theta + TIE_TOL {
                    let replace = match blocking {
                        None => t < theta,
                        Some((rb, _)) => {
                            if bland {
                                self.basis[r] < self.basis[rb]
                            } else {
                                self.w[r].abs() > self.w[rb].abs()
                            }
                        }
                    };
                    if replace {
                        theta = theta.min(t);
                        blocking = Some((r, to));
                    }
                }
            }

            if !theta.is_finite() {
                if phase1 {
                    return Err("phase 1 reported an unbounded direction".into());
                }
                return Ok(LoopExit::Unbounded);
            }

            if theta <= DEGEN_STEP {
                degen_streak += 1;
                if degen_streak > DEGEN_SWITCH {
                    bland = true;
                }
            } else {
                degen_streak = 0;
                if !conservative {
                    bland = false;
                }
            }

            // Apply the step.
            let delta = dir * theta;
            if delta != 0.0 {
                for r in 0..self.m {
                    if self.w[r] != 0.0 {
                        let jb = self.basis[r];
                        self.x[jb] -= delta * self.w[r];
                    }
                }
                self.x[q] += delta;
            }

            match blocking {
                // The entering variable flipped to its opposite bound.
                None => {
                    self.stat[q] = match self.stat[q] {
                        VStat::AtLower => {
                            self.x[q] = self.upper[q];
                            VStat::AtUpper
                        }
                        VStat::AtUpper => {
                            self.x[q] = self.lower[q];
                            VStat::AtLower
                        }
                        other => other,
                    };
                }
                Some((r, to)) => {
                    let leaving = self.basis[r];
                    self.stat[leaving] = to;
                    self.x[leaving] = match to {
                        VStat::AtLower => self.lower[leaving],
                        VStat::AtUpper => self.upper[leaving],
                        _ => unreachable!(),
                    };
                    if self.is_artificial(leaving) {
                        // Never let a driven-out artificial re-enter.
                        self.upper[leaving] = 0.0;
                        self.stat[leaving] = VStat::AtLower;
                        self.x[leaving] = 0.0;
                    }
                    self.basis[r] = q;
                    self.stat[q] = VStat::Basic;
                    self.pivot_update(r)?;
                }
            }
        }
    }

    /// Gauss-Jordan update of the inverse after `basis[r]` changed; `self.w`
    /// still holds `B^-1 A_q` for the entering column.
    fn pivot_update(&mut self, r: usize) -> Result<(), String> {
        let m = self.m;
        let piv = self.w[r];
        if piv.abs() < 1e-13 {
            return Err("pivot element vanished".into());
        }
        let inv = 1.0 / piv;
        self.pivot_row
            .copy_from_slice(&self.binv[r * m..(r + 1) * m]);
        for v in &mut self.pivot_row {
            *v *= inv;
        }
        for i in 0..m {
            let f = self.w[i];
            let row = &mut self.binv[i * m..(i + 1) * m];
            if i == r {
                row.copy_from_slice(&self.pivot_row);
            } else if f != 0.0 {
                for (rv, pv) in row.iter_mut().zip(&self.pivot_row) {
                    *rv -= f * pv;
                }
            }
        }
        self.pivots_since_refactor += 1;
        Ok(())
    }

    /// Pivot remaining basic artificials onto real columns; rows where no
    /// real pivot exists are redundant and keep their artificial fixed at 0.
    fn drive_out_artificials(&mut self, cfg: &SolverConfig) -> Result<(), String> {
        let m = self.m;
        for r in 0..m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            self.pivot_row
                .copy_from_slice(&self.binv[r * m..(r + 1) * m]);
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_real {
                if self.stat[j] == VStat::Basic || self.is_fixed(j) {
                    continue;
                }
                let mut piv = 0.0;
                for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                    piv += self.pivot_row[self.col_rows[k] as usize] * self.col_vals[k];
                }
                if piv.abs() > cfg.pivot_tol * 10.0 {
                    match best {
                        Some((_, mag)) if piv.abs() <= mag => {}
                        _ => best = Some((j, piv.abs())),
                    }
                }
            }
            let art = self.basis[r];
            if let Some((j, _)) = best {
                self.ftran(j);
                self.basis[r] = j;
                self.stat[j] = VStat::Basic;
                self.pivot_update(r)?;
            }
            // Either way the artificial is finished.
            self.upper[art] = 0.0;
            if self.basis[r] != art {
                self.stat[art] = VStat::AtLower;
                self.x[art] = 0.0;
            }
        }
        Ok(())
    }

    /// Rebuilds `binv` from the basis columns and refreshes basic values.
    fn refactorize(&mut self) -> Result<(), String> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        let mut a = vec![0.0f64; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            if self.is_artificial(j) {
                let r = j - self.n_real;
                a[r * m + pos] = self.art_sign[r];
            } else {
                for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                    a[self.col_rows[k] as usize * m + pos] = self.col_vals[k];
                }
            }
        }
        let mut inv = vec![0.0f64; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let mut p = k;
            let mut pmag = a[k * m + k].abs();
            for i in k + 1..m {
                let mag = a[i * m + k].abs();
                if mag > pmag {
                    p = i;
                    pmag = mag;
                }
            }
            if pmag < 1e-12 {
                return Err("singular basis during refactorization".into());
            }
            if p != k {
                for c in 0..m {
                    a.swap(p * m + c, k * m + c);
                    inv.swap(p * m + c, k * m + c);
                }
            }
            let piv = a[k * m + k];
            let s = 1.0 / piv;
            for c in 0..m {
                a[k * m + c] *= s;
                inv[k * m + c] *= s;
            }
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = a[i * m + k];
                if f != 0.0 {
                    for c in 0..m {
                        a[i * m + c] -= f * a[k * m + c];
                        inv[i * m + c] -= f * inv[k * m + c];
                    }
                }
            }
        }
        self.binv = inv;
        self.pivots_since_refactor = 0;

        // Refresh basic values from the nonbasic point.
        let mut t = self.b.clone();
        for j in 0..self.n_real + self.m {
            if self.stat[j] != VStat::Basic && self.x[j] != 0.0 {
                let xv = self.x[j];
                if self.is_artificial(j) {
                    let r = j - self.n_real;
                    t[r] -= self.art_sign[r] * xv;
                } else {
                    for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                        t[self.col_rows[k] as usize] -= self.col_vals[k] * xv;
                    }
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let v: f64 = row.iter().zip(&t).map(|(b, tv)| b * tv).sum();
            self.x[self.basis[r]] = v;
        }
        Ok(())
    }

    /// Row duals in the problem's own sense convention.
    fn duals(&mut self, sense: Sense) -> Vec<f64> {
        self.btran(false);
        let flip = match sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        self.y.iter().map(|&v| flip * v).collect()
    }
}

#[cfg(test)]
mod tests {
    use crate::lp::{LPProblem, Relation, SolveStatus, FREE, NONNEG};

    #[test]
    fn two_phase_with_equalities() {
        // min x + y s.t. x + 2y = 3, x - y >= 0, x,y >= 0 -> x = y = 1.
        let mut p = LPProblem::minimize();
        let x = p.add_var(1.0, NONNEG);
        let y = p.add_var(1.0, NONNEG);
        p.add_row(Relation::Eq, 3.0, &[(x, 1.0), (y, 2.0)]);
        p.add_row(Relation::Ge, 0.0, &[(x, 1.0), (y, -1.0)]);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn free_variables_enter_and_stay() {
        // min |x| style problem via two free vars.
        let mut p = LPProblem::minimize();
        let x = p.add_var(1.0, FREE);
        let y = p.add_var(2.0, FREE);
        p.add_row(Relation::Eq, 1.0, &[(x, 1.0), (y, 1.0)]);
        p.add_row(Relation::Ge, -3.0, &[(y, 1.0)]);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - (1.0 * 4.0 + 2.0 * -3.0)).abs() < 1e-9);
    }

    #[test]
    fn no_rows_bounded_and_unbounded() {
        let mut p = LPProblem::minimize();
        let x = p.add_var(1.0, NONNEG);
        let _ = x;
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, 0.0);

        let mut p = LPProblem::minimize();
        let _ = p.add_var(1.0, FREE);
        let s = p.solve().unwrap();
        assert_eq!(s.status, SolveStatus::Unbounded);
    }
}
