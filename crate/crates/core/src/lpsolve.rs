//! Bounded-variable revised simplex for `min cᵀx + offset` subject to
//! `Ax = b`, `l ≤ x ≤ u`.
//!
//! Two phases with one artificial per row. The basis inverse is kept
//! explicitly, updated by elementary row operations and rebuilt from an LU
//! factorization at a fixed pivot interval.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{DenseMatrix, LuFactors};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    /// Constant added to the objective.
    pub offset: f64,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with bounds `[lo, hi]` (either may be infinite).
    pub fn add_var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        assert!(!cost.is_nan() && !lo.is_nan() && !hi.is_nan(), "NaN in variable data");
        self.cost.push(cost);
        self.lo.push(lo);
        self.hi.push(hi);
        self.cost.len() - 1
    }

    /// Adds the equality `Σ coef·x_var = rhs`. Repeated variables accumulate.
    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, rhs: f64) -> usize {
        assert!(rhs.is_finite(), "row right-hand side must be finite");
        assert!(terms.iter().all(|&(j, a)| j < self.cost.len() && a.is_finite()));
        self.rows.push(terms);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn set_rhs(&mut self, row: usize, rhs: f64) {
        assert!(rhs.is_finite());
        self.rhs[row] = rhs;
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.lo[var] = lo;
        self.hi[var] = hi;
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lo[var], self.hi[var])
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// `cᵀx + offset`.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.offset + self.cost.iter().zip(x).map(|(c, x)| c * x).sum::<f64>()
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().zip(&self.rhs).map(|(r, b)| {
            (r.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - b).abs()
        });
        let bounds = (0..self.n_vars()).map(|j| (self.lo[j] - x[j]).max(x[j] - self.hi[j]).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// Row multipliers `y` with `c − Aᵀy` the reduced costs; `y_i` is the
    /// objective's sensitivity to `b_i`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    /// Includes the problem's offset.
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    /// `bᵀy + Σ_j min over [l_j, u_j] of d_j·x_j`, plus the offset. Equals
    /// the primal objective at an optimal basis.
    pub fn dual_objective(&self, problem: &LpProblem) -> f64 {
        let by: f64 = problem.rhs.iter().zip(&self.duals).map(|(b, y)| b * y).sum();
        let bound_terms: f64 = self
            .reduced_costs
            .iter()
            .enumerate()
            .map(|(j, &d)| {
                if d > 0.0 {
                    d * problem.lo[j]
                } else if d < 0.0 {
                    d * problem.hi[j]
                } else {
                    0.0
                }
            })
            .sum();
        problem.offset + by + bound_terms
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub max_iter: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            refactor_every: 50,
            bland_after: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum At {
    Lower,
    Upper,
    Free,
    Basic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PhaseEnd {
    Optimal,
    Unbounded,
    Limit,
}

struct Simplex<'a> {
    opts: LpOptions,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    b: &'a [f64],
    x: Vec<f64>,
    at: Vec<At>,
    basis: Vec<usize>,
    binv: DenseMatrix,
    since_refactor: usize,
    degenerate_run: usize,
    bland: bool,
    iterations: usize,
}

impl Simplex<'_> {
    fn duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&k| self.cost[k]).collect();
        self.binv.tr_mul_vec(&cb)
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|&(r, a)| y[r] * a).sum::<f64>()
    }

    /// Rebuilds `B⁻¹` and the basic values. False if the basis is singular.
    fn refactor(&mut self) -> bool {
        let mut bmat = DenseMatrix::zeros(self.m, self.m);
        for (i, &k) in self.basis.iter().enumerate() {
            for &(r, a) in &self.cols[k] {
                bmat[(r, i)] += a;
            }
        }
        let Ok(lu) = LuFactors::factorize(bmat) else {
            return false;
        };
        self.binv = lu.inverse();
        let mut r: Vec<f64> = self.b.to_vec();
        for j in 0..self.cols.len() {
            if self.at[j] != At::Basic && self.x[j] != 0.0 {
                for &(row, a) in &self.cols[j] {
                    r[row] -= a * self.x[j];
                }
            }
        }
        let xb = self.binv.mul_vec(&r);
        for (i, &k) in self.basis.iter().enumerate() {
            self.x[k] = xb[i];
        }
        self.since_refactor = 0;
        true
    }

    fn choose_entering(&self, y: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols.len() {
            if self.at[j] == At::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost(j, y);
            let tol = self.opts.optimality_tol * self.cost[j].abs().max(1.0);
            let dir = match self.at[j] {
                At::Lower if d < -tol => 1.0,
                At::Upper if d > tol => -1.0,
                At::Free if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            let score = d.abs();
            if self.bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn pivot_column(&self, j: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; self.m];
        for &(r, a) in &self.cols[j] {
            for (i, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[(i, r)] * a;
            }
        }
        alpha
    }

    fn run_phase(&mut self) -> PhaseEnd {
        self.degenerate_run = 0;
        self.bland = false;
        loop {
            if self.iterations >= self.opts.max_iter {
                return PhaseEnd::Limit;
            }
            if self.since_refactor >= self.opts.refactor_every && !self.refactor() {
                return PhaseEnd::Limit;
            }
            let y = self.duals();
            let Some((j, dir)) = self.choose_entering(&y) else {
                return PhaseEnd::Optimal;
            };
            self.iterations += 1;
            let alpha = self.pivot_column(j);

            // ratio test
            let mut step = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_key = (f64::INFINITY, 0.0f64, usize::MAX);
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() < self.opts.pivot_tol {
                    continue;
                }
                let k = self.basis[i];
                let rate = -dir * a;
                let (limit, to_upper) = if rate < 0.0 {
                    if self.lo[k] == f64::NEG_INFINITY {
                        continue;
                    }
                    (((self.x[k] - self.lo[k]) / -rate).max(0.0), false)
                } else {
                    if self.hi[k] == f64::INFINITY {
                        continue;
                    }
                    (((self.hi[k] - self.x[k]) / rate).max(0.0), true)
                };
                let key = (limit, -a.abs(), k);
                let better = if limit < leave_key.0 - 1e-12 {
                    true
                } else if limit <= leave_key.0 + 1e-12 {
                    if self.bland {
                        k < leave_key.2
                    } else {
                        -a.abs() < leave_key.1
                    }
                } else {
                    false
                };
                if better {
                    leave_key = key;
                    step = limit;
                    leave = Some((i, to_upper));
                }
            }
            let span = self.hi[j] - self.lo[j];
            let flip = span.is_finite() && span <= step;
            if flip {
                step = span;
            }
            if step == f64::INFINITY {
                return PhaseEnd::Unbounded;
            }

            if step <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run >= self.opts.bland_after {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }

            self.x[j] += dir * step;
            for (i, &a) in alpha.iter().enumerate() {
                let k = self.basis[i];
                self.x[k] -= dir * step * a;
            }
            if flip {
                let (x, at) = if dir > 0.0 { (self.hi[j], At::Upper) } else { (self.lo[j], At::Lower) };
                self.x[j] = x;
                self.at[j] = at;
                continue;
            }
            let (r, to_upper) = leave.expect("finite step has a blocking row");
            let k = self.basis[r];
            if to_upper {
                self.x[k] = self.hi[k];
                self.at[k] = At::Upper;
            } else {
                self.x[k] = self.lo[k];
                self.at[k] = At::Lower;
            }
            self.basis[r] = j;
            self.at[j] = At::Basic;

            let piv = alpha[r];
            {
                let row_r = self.binv.row_mut(r);
                row_r.iter_mut().for_each(|v| *v /= piv);
            }
            let row_r: Vec<f64> = self.binv.row(r).to_vec();
            for (i, &a) in alpha.iter().enumerate() {
                if i != r && a != 0.0 {
                    for (v, &w) in self.binv.row_mut(i).iter_mut().zip(&row_r) {
                        *v -= a * w;
                    }
                }
            }
            self.since_refactor += 1;
        }
    }
}

fn initial_value(lo: f64, hi: f64) -> (f64, At) {
    if lo.is_finite() {
        (lo, At::Lower)
    } else if hi.is_finite() {
        (hi, At::Upper)
    } else {
        (0.0, At::Free)
    }
}

/// Solves `problem`. Never panics on numerical trouble; a basis that cannot
/// be refactorized ends with `IterationLimit` and the current iterate.
pub fn solve(problem: &LpProblem, options: &LpOptions) -> LpSolution {
    let n = problem.n_vars();
    let m = problem.n_rows();
    let fail = |status, x: Vec<f64>, iterations| LpSolution {
        status,
        objective: problem.objective_at(&x),
        x,
        duals: vec![0.0; m],
        reduced_costs: vec![0.0; n],
        iterations,
    };
    if (0..n).any(|j| problem.lo[j] > problem.hi[j]) {
        return fail(LpStatus::Infeasible, vec![0.0; n], 0);
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
    for (i, row) in problem.rows.iter().enumerate() {
        for &(j, a) in row {
            match cols[j].last_mut() {
                Some((r, v)) if *r == i => *v += a,
                _ => cols[j].push((i, a)),
            }
        }
    }
    let mut x = vec![0.0; n + m];
    let mut at = vec![At::Basic; n + m];
    for j in 0..n {
        (x[j], at[j]) = initial_value(problem.lo[j], problem.hi[j]);
    }
    let mut resid = problem.rhs.clone();
    for j in 0..n {
        for &(r, a) in &cols[j] {
            resid[r] -= a * x[j];
        }
    }
    let mut binv = DenseMatrix::zeros(m, m);
    for i in 0..m {
        let s = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
        cols[n + i].push((i, s));
        x[n + i] = resid[i].abs();
        binv[(i, i)] = s;
    }
    let mut lo = problem.lo.clone();
    let mut hi = problem.hi.clone();
    lo.extend(core::iter::repeat_n(0.0, m));
    hi.extend(core::iter::repeat_n(f64::INFINITY, m));
    let mut cost = vec![0.0; n];
    cost.extend(core::iter::repeat_n(1.0, m));

    let mut s = Simplex {
        opts: *options,
        m,
        cols,
        cost,
        lo,
        hi,
        b: &problem.rhs,
        x,
        at,
        basis: (n..n + m).collect(),
        binv,
        since_refactor: 0,
        degenerate_run: 0,
        bland: false,
        iterations: 0,
    };

    let bmax = problem.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if m > 0 {
        let end = s.run_phase();
        if end == PhaseEnd::Limit || !s.refactor() {
            return fail(LpStatus::IterationLimit, s.x[..n].to_vec(), s.iterations);
        }
        let artificial: f64 = s.x[n..].iter().map(|v| v.abs()).sum();
        if artificial > options.feasibility_tol * (1.0 + bmax) * crate::num::sqrt(m as f64) {
            return fail(LpStatus::Infeasible, s.x[..n].to_vec(), s.iterations);
        }
    }
    for i in 0..m {
        s.hi[n + i] = 0.0;
        if s.at[n + i] != At::Basic {
            s.x[n + i] = 0.0;
            s.at[n + i] = At::Lower;
        }
    }
    s.cost = problem.cost.clone();
    s.cost.extend(core::iter::repeat_n(0.0, m));
    let end = s.run_phase();
    if m > 0 && !s.refactor() {
        return fail(LpStatus::IterationLimit, s.x[..n].to_vec(), s.iterations);
    }
    let status = match end {
        PhaseEnd::Optimal => LpStatus::Optimal,
        PhaseEnd::Unbounded => LpStatus::Unbounded,
        PhaseEnd::Limit => LpStatus::IterationLimit,
    };
    let y = s.duals();
    let reduced_costs = (0..n)
        .map(|j| if s.at[j] == At::Basic { 0.0 } else { s.reduced_cost(j, &y) })
        .collect();
    let xs = s.x[..n].to_vec();
    LpSolution {
        status,
        objective: problem.objective_at(&xs),
        x: xs,
        duals: y,
        reduced_costs,
        iterations: s.iterations,
    }
}
