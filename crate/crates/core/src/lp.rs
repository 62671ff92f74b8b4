//! Dense two-phase simplex for problems in standard equality form
//!
//! ```text
//! minimize    c·γ
//! subject to  A γ = b,   γ ≥ 0
//! ```
//!
//! The tableau is stored densely but pivots only touch the nonzero entries of
//! the pivot row, which keeps slack-heavy problems (such as the quantile
//! regression programs built in [`crate::model`]) cheap to solve. Rows that
//! already own a unit column with a nonnegative right-hand side are seeded
//! into the starting basis; artificials are added only for the rest.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Reduced-cost and ratio-test tolerance.
pub const PIVOT_TOL: f64 = 1e-9;

/// Errors raised before or during a solve.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFiniteInput(&'static str),
    #[error("iteration limit of {limit} pivots exceeded")]
    IterationLimitExceeded { limit: usize },
}

/// Equality-constrained linear program over nonnegative variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    /// Cost vector, one entry per variable.
    pub cost: Vec<f64>,
    /// Constraint matrix, `k × m`.
    pub a_eq: DMatrix<f64>,
    /// Right-hand side, length `k`.
    pub b_eq: Vec<f64>,
}

impl LpProblem {
    pub fn new(cost: Vec<f64>, a_eq: DMatrix<f64>, b_eq: Vec<f64>) -> Result<Self, LpError> {
        let problem = Self { cost, a_eq, b_eq };
        problem.validate()?;
        Ok(problem)
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b_eq.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let (k, m) = self.a_eq.shape();
        if self.cost.len() != m {
            return Err(LpError::DimensionMismatch(format!(
                "cost has {} entries but constraint matrix has {} columns",
                self.cost.len(),
                m
            )));
        }
        if self.b_eq.len() != k {
            return Err(LpError::DimensionMismatch(format!(
                "rhs has {} entries but constraint matrix has {} rows",
                self.b_eq.len(),
                k
            )));
        }
        if k > m {
            return Err(LpError::DimensionMismatch(format!(
                "{k} constraints exceed {m} variables"
            )));
        }
        if self.cost.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFiniteInput("cost"));
        }
        if self.a_eq.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFiniteInput("constraint matrix"));
        }
        if self.b_eq.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFiniteInput("rhs"));
        }
        Ok(())
    }

    /// `‖Aγ − b‖∞` for a candidate point.
    pub fn residual_norm(&self, gamma: &[f64]) -> f64 {
        let x = DVector::from_column_slice(gamma);
        let r = &self.a_eq * x;
        r.iter()
            .zip(&self.b_eq)
            .map(|(lhs, rhs)| (lhs - rhs).abs())
            .fold(0.0, f64::max)
    }

    pub fn objective_at(&self, gamma: &[f64]) -> f64 {
        self.cost.iter().zip(gamma).map(|(c, g)| c * g).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Final iterate. Optimal vertex when `status` is `Optimal`.
    pub gamma: Vec<f64>,
    /// `c·γ` at the returned point; `-inf` when unbounded.
    pub objective: f64,
    /// Basic columns of the final tableau, one per retained constraint row.
    pub basis: Vec<usize>,
    /// Constraint rows dropped as linearly dependent.
    pub dropped_rows: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solve `problem` with the two-phase simplex method.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    let mut sols = solve_lp_costs(problem, std::slice::from_ref(&problem.cost))?;
    Ok(sols.pop().expect("one cost vector in, one solution out"))
}

/// Solve a sequence of problems that share `a_eq` and `b_eq` and differ only
/// in their cost vectors; `problem.cost` itself is not used. Phase one runs
/// once and every later solve restarts phase two from the previous optimal
/// basis, which stays primal feasible.
pub fn solve_lp_costs(problem: &LpProblem, costs: &[Vec<f64>]) -> Result<Vec<LpSolution>, LpError> {
    problem.validate()?;
    let (k, m) = problem.a_eq.shape();
    for c in costs {
        if c.len() != m {
            return Err(LpError::DimensionMismatch(format!(
                "cost has {} entries, A has {m} columns",
                c.len()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFiniteInput("cost"));
        }
    }
    let limit = 50 * (k + m);
    let stall_limit = 10 * (k + m);
    let scale = 1.0 + problem.b_eq.iter().fold(0.0_f64, |a, b| a.max(b.abs()));

    let mut tab = Tableau::from_problem(problem);
    let mut iterations = 0;

    if tab.num_artificial > 0 {
        let phase_one_cost: Vec<f64> = (0..tab.ncols)
            .map(|j| if j >= m { 1.0 } else { 0.0 })
            .collect();
        tab.set_cost(&phase_one_cost);
        let outcome = tab.run(limit, stall_limit, &mut iterations, tab.ncols)?;
        debug_assert!(outcome != Outcome::Unbounded, "phase one is bounded below");
        if tab.objective_value() > PIVOT_TOL * scale {
            let gamma = tab.extract(m);
            return Ok(costs
                .iter()
                .map(|c| LpSolution {
                    status: LpStatus::Infeasible,
                    objective: c.iter().zip(&gamma).map(|(a, b)| a * b).sum(),
                    gamma: gamma.clone(),
                    basis: tab.basis.clone(),
                    dropped_rows: Vec::new(),
                    iterations,
                })
                .collect());
        }
        tab.expel_artificials(m);
    }

    let mut out = Vec::with_capacity(costs.len());
    let mut full = vec![0.0; tab.ncols];
    for c in costs {
        full[..m].copy_from_slice(c);
        tab.set_cost(&full);
        let outcome = tab.run(limit, stall_limit, &mut iterations, m)?;
        let mut gamma = tab.extract(m);
        let solution = if outcome == Outcome::Unbounded {
            LpSolution {
                status: LpStatus::Unbounded,
                gamma,
                objective: f64::NEG_INFINITY,
                basis: tab.basis.clone(),
                dropped_rows: tab.dropped.clone(),
                iterations,
            }
        } else {
            if problem.residual_norm(&gamma) > 1e-10 * scale {
                refine_basic_solution(problem, &tab.basis, &tab.row_origin, &mut gamma);
            }
            LpSolution {
                status: LpStatus::Optimal,
                objective: c.iter().zip(&gamma).map(|(a, b)| a * b).sum(),
                gamma,
                basis: tab.basis.clone(),
                dropped_rows: tab.dropped.clone(),
                iterations,
            }
        };
        out.push(solution);
        iterations = 0;
    }
    Ok(out)
}

/// Recompute the basic variables from the original data by a direct solve.
fn refine_basic_solution(
    problem: &LpProblem,
    basis: &[usize],
    row_origin: &[usize],
    gamma: &mut [f64],
) {
    let r = basis.len();
    let b_mat = DMatrix::from_fn(r, r, |i, j| problem.a_eq[(row_origin[i], basis[j])]);
    let rhs = DVector::from_iterator(r, row_origin.iter().map(|&i| problem.b_eq[i]));
    if let Some(x) = b_mat.lu().solve(&rhs) {
        if x.iter().all(|v| v.is_finite()) {
            for (&col, &val) in basis.iter().zip(x.iter()) {
                gamma[col] = if val < 0.0 && val > -PIVOT_TOL {
                    0.0
                } else {
                    val
                };
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    /// Row-major constraint block, `rows × ncols`.
    data: Vec<f64>,
    rhs: Vec<f64>,
    /// Reduced costs, length `ncols`.
    reduced: Vec<f64>,
    /// Negated objective value of the current basis.
    neg_obj: f64,
    basis: Vec<usize>,
    /// Original constraint index of each tableau row.
    row_origin: Vec<usize>,
    dropped: Vec<usize>,
    ncols: usize,
    num_artificial: usize,
    // scratch for the pivot row
    nz_idx: Vec<usize>,
    nz_val: Vec<f64>,
}

impl Tableau {
    fn from_problem(problem: &LpProblem) -> Self {
        let (k, m) = problem.a_eq.shape();
        let mut rows: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..m).map(|j| problem.a_eq[(i, j)]).collect())
            .collect();
        let mut rhs = problem.b_eq.clone();
        for (row, b) in rows.iter_mut().zip(rhs.iter_mut()) {
            if *b < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
                *b = -*b;
            }
        }

        // Crash basis from columns with a single positive entry.
        let mut basis: Vec<Option<usize>> = vec![None; k];
        for j in 0..m {
            let mut hit = None;
            let mut count = 0;
            for (i, row) in rows.iter().enumerate() {
                if row[j] != 0.0 {
                    count += 1;
                    hit = Some(i);
                    if count > 1 {
                        break;
                    }
                }
            }
            if count != 1 {
                continue;
            }
            let i = hit.unwrap();
            if basis[i].is_none() && rows[i][j] > 0.0 {
                let pivot = rows[i][j];
                if pivot != 1.0 {
                    rows[i].iter_mut().for_each(|v| *v /= pivot);
                    rhs[i] /= pivot;
                    rows[i][j] = 1.0;
                }
                basis[i] = Some(j);
            }
        }

        let num_artificial = basis.iter().filter(|b| b.is_none()).count();
        let ncols = m + num_artificial;
        let mut data = vec![0.0; k * ncols];
        let mut next_art = m;
        let mut final_basis = Vec::with_capacity(k);
        for (i, row) in rows.iter().enumerate() {
            data[i * ncols..i * ncols + m].copy_from_slice(row);
            match basis[i] {
                Some(j) => final_basis.push(j),
                None => {
                    data[i * ncols + next_art] = 1.0;
                    final_basis.push(next_art);
                    next_art += 1;
                }
            }
        }

        Self {
            data,
            rhs,
            reduced: vec![0.0; ncols],
            neg_obj: 0.0,
            basis: final_basis,
            row_origin: (0..k).collect(),
            dropped: Vec::new(),
            ncols,
            num_artificial,
            nz_idx: Vec::with_capacity(ncols),
            nz_val: Vec::with_capacity(ncols),
        }
    }

    fn rows(&self) -> usize {
        self.rhs.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    fn set_cost(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        self.neg_obj = 0.0;
        for i in 0..self.rows() {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.data[i * self.ncols..(i + 1) * self.ncols];
            for (d, a) in self.reduced.iter_mut().zip(row) {
                *d -= cb * a;
            }
            self.neg_obj -= cb * self.rhs[i];
        }
        for &b in &self.basis {
            self.reduced[b] = 0.0;
        }
    }

    fn objective_value(&self) -> f64 {
        -self.neg_obj
    }

    /// Pivot loop. Columns at or beyond `col_limit` never enter.
    fn run(
        &mut self,
        limit: usize,
        stall_limit: usize,
        iterations: &mut usize,
        col_limit: usize,
    ) -> Result<Outcome, LpError> {
        let mut bland = false;
        let mut stalled = 0usize;
        let mut best = self.objective_value();
        loop {
            let entering = if bland {
                (0..col_limit).find(|&j| self.reduced[j] < -PIVOT_TOL)
            } else {
                let mut pick = None;
                let mut most = -PIVOT_TOL;
                for j in 0..col_limit {
                    if self.reduced[j] < most {
                        most = self.reduced[j];
                        pick = Some(j);
                    }
                }
                pick
            };
            let Some(e) = entering else {
                return Ok(Outcome::Optimal);
            };

            let Some(r) = self.ratio_test(e, bland) else {
                return Ok(Outcome::Unbounded);
            };

            if *iterations >= limit {
                return Err(LpError::IterationLimitExceeded { limit });
            }
            self.pivot(r, e);
            *iterations += 1;

            let obj = self.objective_value();
            if obj < best - PIVOT_TOL * (1.0 + best.abs()) {
                best = obj;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= stall_limit {
                    bland = true;
                }
            }
        }
    }

    fn ratio_test(&self, e: usize, bland: bool) -> Option<usize> {
        let mut pick: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        let mut best_piv = 0.0;
        for i in 0..self.rows() {
            let a = self.data[i * self.ncols + e];
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs[i].max(0.0) / a;
            let better = match pick {
                None => true,
                Some(p) => {
                    if ratio < best_ratio - PIVOT_TOL {
                        true
                    } else if ratio <= best_ratio + PIVOT_TOL {
                        if bland {
                            self.basis[i] < self.basis[p]
                        } else {
                            a > best_piv
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                pick = Some(i);
                best_ratio = ratio;
                best_piv = a;
            }
        }
        pick
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let nc = self.ncols;
        let inv = 1.0 / self.data[r * nc + e];
        self.nz_idx.clear();
        self.nz_val.clear();
        {
            let row = &mut self.data[r * nc..(r + 1) * nc];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    self.nz_idx.push(j);
                    self.nz_val.push(*v);
                }
            }
            row[e] = 1.0;
        }
        self.rhs[r] *= inv;
        let pivot_rhs = self.rhs[r];

        for i in 0..self.rows() {
            if i == r {
                continue;
            }
            let f = self.data[i * nc + e];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * nc..(i + 1) * nc];
            for (&j, &v) in self.nz_idx.iter().zip(&self.nz_val) {
                row[j] -= f * v;
            }
            row[e] = 0.0;
            self.rhs[i] -= f * pivot_rhs;
        }

        let f = self.reduced[e];
        if f != 0.0 {
            for (&j, &v) in self.nz_idx.iter().zip(&self.nz_val) {
                self.reduced[j] -= f * v;
            }
            self.reduced[e] = 0.0;
            self.neg_obj -= f * pivot_rhs;
        }
        self.basis[r] = e;
    }

    /// After a successful phase one, pivot basic artificials out on any real
    /// column; rows where that is impossible are linearly dependent and dropped.
    fn expel_artificials(&mut self, m: usize) {
        let mut i = 0;
        while i < self.rows() {
            if self.basis[i] < m {
                i += 1;
                continue;
            }
            let row = self.row(i);
            let mut best = None;
            let mut best_abs = PIVOT_TOL;
            for (j, v) in row[..m].iter().enumerate() {
                if v.abs() > best_abs {
                    best_abs = v.abs();
                    best = Some(j);
                }
            }
            match best {
                Some(j) => {
                    self.pivot(i, j);
                    i += 1;
                }
                None => self.remove_row(i),
            }
        }
    }

    fn remove_row(&mut self, i: usize) {
        let nc = self.ncols;
        self.data.drain(i * nc..(i + 1) * nc);
        self.rhs.remove(i);
        self.basis.remove(i);
        self.dropped.push(self.row_origin.remove(i));
    }

    fn extract(&self, m: usize) -> Vec<f64> {
        let mut gamma = vec![0.0; m];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < m {
                let v = self.rhs[i];
                gamma[b] = if v < 0.0 && v > -PIVOT_TOL { 0.0 } else { v };
            }
        }
        gamma
    }
}
