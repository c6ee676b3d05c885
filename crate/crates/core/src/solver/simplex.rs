//! Bounded-variable primal simplex with a two-phase start.
//!
//! Rows `lb <= a.x <= ub` become equalities `a.x - s = 0` with the row
//! bounds moved onto the slack `s`. Phase 1 drives artificial variables
//! (added only on rows whose initial activity violates the slack
//! bounds) to zero; phase 2 optimizes the real objective. The dense
//! tableau is refactorized from the original matrix periodically and
//! before extraction, and pricing falls back from Dantzig to Bland's
//! rule after a stall threshold so degenerate models terminate.

use crate::error::{Error, Result};
use crate::solver::model::Model;

const INF: f64 = f64::INFINITY;
const EPS_PRICE: f64 = 1e-9;
const EPS_COEF: f64 = 1e-11;
const EPS_TIE: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-6;
const REFACTOR_EVERY: u64 = 64;

#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Values of the model's structural variables.
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Result<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Ok(s),
            LpOutcome::Infeasible => Err(Error::Solver("LP reported infeasible".into())),
            LpOutcome::Unbounded => Err(Error::Solver("LP reported unbounded".into())),
        }
    }
}

/// Solves the LP relaxation of `model` (binary flags are ignored).
pub fn solve_lp(model: &Model) -> Result<LpOutcome> {
    for v in &model.vars {
        if v.lb > v.ub {
            return Ok(LpOutcome::Infeasible);
        }
    }
    for r in &model.rows {
        if r.lb > r.ub {
            return Ok(LpOutcome::Infeasible);
        }
    }
    let mut s = Simplex::build(model);
    if s.n_art > 0 {
        s.set_phase1_costs();
        match s.optimize()? {
            Stop::Optimal => {}
            // Phase 1 minimizes a sum of nonnegative variables.
            Stop::Unbounded => return Err(Error::Solver("phase 1 unbounded".into())),
        }
        if s.phase_objective() > 1e-7 {
            return Ok(LpOutcome::Infeasible);
        }
        s.pin_artificials();
    }
    s.set_phase2_costs(model);
    match s.optimize()? {
        Stop::Optimal => {}
        Stop::Unbounded => return Ok(LpOutcome::Unbounded),
    }
    s.refactor()?;
    s.check_solution(model)?;
    let values: Vec<f64> = s.vals[..model.n_vars()].to_vec();
    let objective = model.objective_value(&values);
    Ok(LpOutcome::Optimal(LpSolution { values, objective }))
}

enum Stop {
    Optimal,
    Unbounded,
}

enum Step {
    Flip(f64),
    Pivot { row: usize, delta: f64, hits_upper: bool },
    Unbounded,
}

const NOT_BASIC: usize = usize::MAX;

struct Simplex {
    m: usize,
    ncols: usize,
    n_art: usize,
    /// Original equality matrix, row-major m x ncols.
    a: Vec<f64>,
    /// Current tableau B^-1 A, row-major.
    t: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    zrow: Vec<f64>,
    vals: Vec<f64>,
    basis: Vec<usize>,
    /// Column -> basis row, or NOT_BASIC.
    pos: Vec<usize>,
    at_upper: Vec<bool>,
    iters: u64,
}

impl Simplex {
    fn build(model: &Model) -> Simplex {
        let n = model.n_vars();
        let m = model.n_rows();

        let mut lb: Vec<f64> = model.vars.iter().map(|v| v.lb).collect();
        let mut ub: Vec<f64> = model.vars.iter().map(|v| v.ub).collect();
        let mut vals = vec![0.0; n];
        let mut at_upper = vec![false; n];
        for j in 0..n {
            if lb[j].is_finite() {
                vals[j] = lb[j];
            } else if ub[j].is_finite() {
                vals[j] = ub[j];
                at_upper[j] = true;
            }
        }

        // Row activities at the initial point decide which rows need an
        // artificial and the sign of its coefficient.
        let mut activities = vec![0.0; m];
        for (i, row) in model.rows.iter().enumerate() {
            activities[i] = row.coeffs.iter().map(|&(v, c)| c * vals[v]).sum();
        }
        let mut art_rows: Vec<(usize, f64)> = Vec::new();
        let mut slack_basic = vec![true; m];
        let mut slack_val = vec![0.0; m];
        let mut slack_at_upper = vec![false; m];
        for (i, row) in model.rows.iter().enumerate() {
            if activities[i] < row.lb {
                slack_basic[i] = false;
                slack_val[i] = row.lb;
                let r = activities[i] - row.lb;
                art_rows.push((i, -r.signum()));
            } else if activities[i] > row.ub {
                slack_basic[i] = false;
                slack_val[i] = row.ub;
                slack_at_upper[i] = true;
                let r = activities[i] - row.ub;
                art_rows.push((i, -r.signum()));
            } else {
                slack_val[i] = activities[i];
            }
        }
        let n_art = art_rows.len();
        let ncols = n + m + n_art;

        let mut a = vec![0.0; m * ncols];
        for (i, row) in model.rows.iter().enumerate() {
            for &(v, c) in &row.coeffs {
                a[i * ncols + v] += c;
            }
            a[i * ncols + n + i] = -1.0;
        }
        for (k, &(i, g)) in art_rows.iter().enumerate() {
            a[i * ncols + n + m + k] = g;
        }

        lb.extend(model.rows.iter().map(|r| r.lb));
        ub.extend(model.rows.iter().map(|r| r.ub));
        lb.extend(std::iter::repeat(0.0).take(n_art));
        ub.extend(std::iter::repeat(INF).take(n_art));
        vals.extend_from_slice(&slack_val);
        vals.extend(std::iter::repeat(0.0).take(n_art));
        at_upper.extend_from_slice(&slack_at_upper);
        at_upper.extend(std::iter::repeat(false).take(n_art));

        let mut basis = vec![0; m];
        let mut pos = vec![NOT_BASIC; ncols];
        let mut art_iter = art_rows.iter().enumerate();
        for i in 0..m {
            basis[i] = if slack_basic[i] {
                n + i
            } else {
                let (k, _) = art_iter
                    .by_ref()
                    .find(|(_, (row, _))| *row == i)
                    .expect("artificial recorded for infeasible row");
                n + m + k
            };
            pos[basis[i]] = i;
        }

        // Normalize each row by its basic coefficient; basis columns are
        // unit columns already, so no cross-elimination is needed here.
        let mut t = a.clone();
        for i in 0..m {
            let p = t[i * ncols + basis[i]];
            debug_assert!(p.abs() > 0.5);
            if p != 1.0 {
                for j in 0..ncols {
                    t[i * ncols + j] /= p;
                }
            }
        }
        // Artificial basic values close the initial residuals exactly.
        let mut s = Simplex {
            m,
            ncols,
            n_art,
            a,
            t,
            lb,
            ub,
            cost: vec![0.0; ncols],
            zrow: vec![0.0; ncols],
            vals,
            basis,
            pos,
            at_upper,
            iters: 0,
        };
        s.recompute_basic_vals();
        s
    }

    fn set_phase1_costs(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        let start = self.ncols - self.n_art;
        for j in start..self.ncols {
            self.cost[j] = 1.0;
        }
        self.recompute_zrow();
    }

    fn phase_objective(&self) -> f64 {
        self.cost.iter().zip(&self.vals).map(|(c, v)| c * v).sum()
    }

    fn pin_artificials(&mut self) {
        let start = self.ncols - self.n_art;
        for j in start..self.ncols {
            self.lb[j] = 0.0;
            self.ub[j] = 0.0;
            if self.pos[j] != NOT_BASIC {
                self.vals[j] = 0.0;
            }
        }
    }

    fn set_phase2_costs(&mut self, model: &Model) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        self.cost[..model.n_vars()].copy_from_slice(&model.objective);
        self.recompute_zrow();
    }

    fn recompute_zrow(&mut self) {
        self.zrow.copy_from_slice(&self.cost);
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let row = r * self.ncols;
                for j in 0..self.ncols {
                    self.zrow[j] -= cb * self.t[row + j];
                }
            }
        }
        for r in 0..self.m {
            self.zrow[self.basis[r]] = 0.0;
        }
    }

    fn recompute_basic_vals(&mut self) {
        for r in 0..self.m {
            let row = r * self.ncols;
            let mut sum = 0.0;
            for j in 0..self.ncols {
                if self.pos[j] == NOT_BASIC && self.vals[j] != 0.0 {
                    sum += self.t[row + j] * self.vals[j];
                }
            }
            self.vals[self.basis[r]] = -sum;
        }
    }

    fn optimize(&mut self) -> Result<Stop> {
        let bland_after = 1_000 + 10 * (self.m as u64 + self.ncols as u64);
        let max_iters = 50_000 + 200 * (self.m as u64 + self.ncols as u64);
        let mut local: u64 = 0;
        loop {
            if local > 0 && local % REFACTOR_EVERY == 0 {
                self.refactor()?;
            }
            let bland = local > bland_after;
            let Some((enter, sigma)) = self.choose_entering(bland) else {
                return Ok(Stop::Optimal);
            };
            match self.ratio_test(enter, sigma, bland) {
                Step::Unbounded => return Ok(Stop::Unbounded),
                Step::Flip(delta) => self.apply_flip(enter, sigma, delta),
                Step::Pivot { row, delta, hits_upper } => {
                    self.apply_pivot(enter, sigma, row, delta, hits_upper)
                }
            }
            local += 1;
            self.iters += 1;
            if local > max_iters {
                return Err(Error::Solver(format!(
                    "simplex exceeded {max_iters} iterations; model is numerically degenerate"
                )));
            }
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            if self.pos[j] != NOT_BASIC || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.zrow[j];
            let free = self.lb[j] == -INF && self.ub[j] == INF;
            let can_up = free || !self.at_upper[j];
            let can_down = free || self.at_upper[j];
            let (sigma, score) = if can_up && d < -EPS_PRICE {
                (1.0, -d)
            } else if can_down && d > EPS_PRICE {
                (-1.0, d)
            } else {
                continue;
            };
            if bland {
                return Some((j, sigma));
            }
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((j, sigma, score));
            }
        }
        best.map(|(j, sigma, _)| (j, sigma))
    }

    fn ratio_test(&self, enter: usize, sigma: f64, bland: bool) -> Step {
        let flip_cap = self.ub[enter] - self.lb[enter];
        let mut min_cap = INF;
        let mut caps: Vec<(usize, f64, f64, bool)> = Vec::new();
        for r in 0..self.m {
            let coef = self.t[r * self.ncols + enter];
            if coef.abs() <= EPS_COEF {
                continue;
            }
            let b = self.basis[r];
            let rate = -sigma * coef;
            let (cap, hits_upper) = if rate > 0.0 {
                if self.ub[b] == INF {
                    continue;
                }
                (((self.ub[b] - self.vals[b]) / rate).max(0.0), true)
            } else {
                if self.lb[b] == -INF {
                    continue;
                }
                (((self.vals[b] - self.lb[b]) / -rate).max(0.0), false)
            };
            if cap < min_cap {
                min_cap = cap;
            }
            caps.push((r, cap, coef.abs(), hits_upper));
        }

        if flip_cap <= min_cap {
            return if flip_cap.is_finite() {
                Step::Flip(flip_cap)
            } else {
                Step::Unbounded
            };
        }
        self.select_leaving(&caps, min_cap, bland)
    }

    fn select_leaving(&self, caps: &[(usize, f64, f64, bool)], min_cap: f64, bland: bool) -> Step {
        let mut chosen: Option<(usize, f64, bool)> = None;
        for &(r, cap, coef_abs, hits_upper) in caps {
            if cap > min_cap + EPS_TIE {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((cr, ccoef, _)) => {
                    if bland {
                        self.basis[r] < self.basis[cr]
                    } else if (coef_abs - ccoef).abs() > 1e-12 {
                        coef_abs > ccoef
                    } else {
                        self.basis[r] < self.basis[cr]
                    }
                }
            };
            if better {
                chosen = Some((r, coef_abs, hits_upper));
            }
        }
        let (row, _, hits_upper) = chosen.expect("ratio test found a finite cap");
        Step::Pivot {
            row,
            delta: min_cap,
            hits_upper,
        }
    }

    fn apply_flip(&mut self, enter: usize, sigma: f64, delta: f64) {
        for r in 0..self.m {
            let coef = self.t[r * self.ncols + enter];
            if coef != 0.0 {
                self.vals[self.basis[r]] -= sigma * delta * coef;
            }
        }
        self.vals[enter] = if sigma > 0.0 { self.ub[enter] } else { self.lb[enter] };
        self.at_upper[enter] = sigma > 0.0;
    }

    fn apply_pivot(&mut self, enter: usize, sigma: f64, prow: usize, delta: f64, hits_upper: bool) {
        for r in 0..self.m {
            let coef = self.t[r * self.ncols + enter];
            if coef != 0.0 {
                self.vals[self.basis[r]] -= sigma * delta * coef;
            }
        }
        self.vals[enter] += sigma * delta;

        let leave = self.basis[prow];
        self.vals[leave] = if hits_upper { self.ub[leave] } else { self.lb[leave] };
        self.at_upper[leave] = hits_upper;

        let base = prow * self.ncols;
        let p = self.t[base + enter];
        let inv = 1.0 / p;
        for j in 0..self.ncols {
            self.t[base + j] *= inv;
        }
        self.t[base + enter] = 1.0;
        for r in 0..self.m {
            if r == prow {
                continue;
            }
            let f = self.t[r * self.ncols + enter];
            if f != 0.0 {
                let row = r * self.ncols;
                for j in 0..self.ncols {
                    self.t[row + j] -= f * self.t[base + j];
                }
                self.t[row + enter] = 0.0;
            }
        }
        let f = self.zrow[enter];
        if f != 0.0 {
            for j in 0..self.ncols {
                self.zrow[j] -= f * self.t[base + j];
            }
            self.zrow[enter] = 0.0;
        }

        self.pos[leave] = NOT_BASIC;
        self.pos[enter] = prow;
        self.basis[prow] = enter;
    }

    /// Rebuilds the tableau from the original matrix for the current
    /// basis, then refreshes basic values and reduced costs.
    fn refactor(&mut self) -> Result<()> {
        self.t.copy_from_slice(&self.a);
        let cols = self.basis.clone();
        let mut used = vec![false; self.m];
        let mut new_basis = vec![0usize; self.m];
        for &c in &cols {
            let mut best_r = NOT_BASIC;
            let mut best = 0.0;
            for r in 0..self.m {
                if used[r] {
                    continue;
                }
                let v = self.t[r * self.ncols + c].abs();
                if v > best {
                    best = v;
                    best_r = r;
                }
            }
            if best < 1e-9 {
                return Err(Error::Solver("singular basis during refactorization".into()));
            }
            let base = best_r * self.ncols;
            let inv = 1.0 / self.t[base + c];
            for j in 0..self.ncols {
                self.t[base + j] *= inv;
            }
            self.t[base + c] = 1.0;
            for r in 0..self.m {
                if r == best_r {
                    continue;
                }
                let f = self.t[r * self.ncols + c];
                if f != 0.0 {
                    let row = r * self.ncols;
                    for j in 0..self.ncols {
                        self.t[row + j] -= f * self.t[base + j];
                    }
                    self.t[row + c] = 0.0;
                }
            }
            used[best_r] = true;
            new_basis[best_r] = c;
        }
        self.basis = new_basis;
        self.pos.iter_mut().for_each(|p| *p = NOT_BASIC);
        for r in 0..self.m {
            self.pos[self.basis[r]] = r;
        }
        self.recompute_basic_vals();
        self.recompute_zrow();
        Ok(())
    }

    /// Bound and equality residual checks on the final point.
    fn check_solution(&self, model: &Model) -> Result<()> {
        for j in 0..self.ncols {
            if self.vals[j] < self.lb[j] - FEAS_TOL || self.vals[j] > self.ub[j] + FEAS_TOL {
                return Err(Error::Solver(format!(
                    "solution leaves bounds at column {j}: {} not in [{}, {}]",
                    self.vals[j], self.lb[j], self.ub[j]
                )));
            }
        }
        for (i, row) in model.rows.iter().enumerate() {
            let act: f64 = row.coeffs.iter().map(|&(v, c)| c * self.vals[v]).sum();
            let scale = 1.0_f64.max(row.lb.abs().min(row.ub.abs()));
            if act < row.lb - FEAS_TOL * scale || act > row.ub + FEAS_TOL * scale {
                return Err(Error::Solver(format!(
                    "row {}{} violated: activity {act} not in [{}, {}]",
                    row.name.0, row.name.1, row.lb, row.ub
                )));
            }
            let _ = i;
        }
        Ok(())
    }
}
