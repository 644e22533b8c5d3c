//! A small dense simplex solver for box-constrained linear programs:
//!
//! ```text
//! minimize    cᵀ x
//! subject to  A x = b,   lo <= x <= hi
//! ```
//!
//! Nonbasic variables rest on one of their bounds; Bland's rule (lowest
//! eligible index entering, lowest basic index on ratio ties) prevents
//! cycling. Callers must supply a starting basis whose columns form an
//! identity — the grid formulation in the parent module always has one, so
//! no phase-1 is ever needed. Every variable is boxed, which rules out
//! unbounded rays by construction.
//!
//! The implementation favours auditability over speed: a full dense tableau,
//! reduced costs recomputed from it each iteration, and a final residual
//! and optimality check against the original column data.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("column {col}: bounds [{lo}, {hi}] are empty or not finite")]
    BadBounds { col: usize, lo: f64, hi: f64 },
    #[error("column {col}: entry references row {row} of {rows}")]
    BadRow { col: usize, row: usize, rows: usize },
    #[error("starting basis must list one column per row forming an identity (row {0})")]
    BadBasis(usize),
    #[error("starting point is infeasible: column {col} = {value} outside [{lo}, {hi}]")]
    InfeasibleStart {
        col: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("solution violates bounds: column {col} = {value} outside [{lo}, {hi}]")]
    BoundsViolated {
        col: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("no optimum within {0} iterations")]
    IterationLimit(usize),
    #[error("solution residual {residual} exceeds tolerance {tol}")]
    Residual { residual: f64, tol: f64 },
    #[error("optimality check failed: column {col} has reduced cost {red_cost}")]
    NotOptimal { col: usize, red_cost: f64 },
}

/// A box-constrained equality-form linear program under construction.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    n_rows: usize,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Sparse original columns: (row, coefficient) pairs.
    cols: Vec<Vec<(usize, f64)>>,
}

/// An optimal basic solution.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Optimal variable values, snapped to their bounds where they land
    /// within 1e-9 of one.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub objective: f64,
    /// Simplex iterations used (pivots plus bound flips).
    pub iterations: usize,
}

const RED_COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const SNAP_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-7;

impl LinearProgram {
    pub fn new(n_rows: usize) -> Self {
        LinearProgram {
            n_rows,
            rhs: vec![0.0; n_rows],
            cost: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
            cols: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn set_rhs(&mut self, row: usize, b: f64) {
        self.rhs[row] = b;
    }

    /// Adds a variable with the given cost, bounds and column entries;
    /// returns its index.
    pub fn add_column(
        &mut self,
        cost: f64,
        lo: f64,
        hi: f64,
        entries: &[(usize, f64)],
    ) -> Result<usize, LpError> {
        let col = self.cols.len();
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(LpError::BadBounds { col, lo, hi });
        }
        for &(row, _) in entries {
            if row >= self.n_rows {
                return Err(LpError::BadRow {
                    col,
                    row,
                    rows: self.n_rows,
                });
            }
        }
        self.cost.push(cost);
        self.lo.push(lo);
        self.hi.push(hi);
        self.cols.push(entries.to_vec());
        Ok(col)
    }

    /// Changes the cost of an existing column (for re-solving the same
    /// constraints under a different objective).
    pub fn set_cost(&mut self, col: usize, cost: f64) {
        self.cost[col] = cost;
    }

    /// Solves the program starting from `basis`, one column index per row.
    /// The basis columns must form an identity (column `basis[r]` has a
    /// single entry `+1` in row `r`) and the implied starting point — basics
    /// at the rhs, nonbasics at their lower bound — must satisfy the bounds.
    pub fn solve(&self, basis: &[usize]) -> Result<LpSolution, LpError> {
        let m = self.n_rows;
        let n = self.cols.len();
        if basis.len() != m {
            return Err(LpError::BadBasis(basis.len().min(m)));
        }
        for (r, &j) in basis.iter().enumerate() {
            let ok = j < n
                && self.cols[j].len() == 1
                && self.cols[j][0].0 == r
                && (self.cols[j][0].1 - 1.0).abs() < 1e-12;
            if !ok {
                return Err(LpError::BadBasis(r));
            }
        }

        // dense tableau rows: B^{-1} A, starting from B = I
        let mut t = vec![vec![0.0f64; n]; m];
        for (j, col) in self.cols.iter().enumerate() {
            for &(r, a) in col {
                t[r][j] = a;
            }
        }
        let mut rhs = self.rhs.clone();
        let mut basis = basis.to_vec();
        let mut in_basis = vec![false; n];
        for &j in &basis {
            in_basis[j] = true;
        }
        // nonbasic variables start at their lower bound
        let mut at_upper = vec![false; n];
        let mut x = self.lo.clone();
        for r in 0..m {
            x[basis[r]] = self.basic_value(&t, &rhs, &x, &in_basis, r);
        }
        for (r, &j) in basis.iter().enumerate() {
            let slack = 1e-9 * (1.0 + rhs[r].abs());
            if x[j] < self.lo[j] - slack || x[j] > self.hi[j] + slack {
                return Err(LpError::InfeasibleStart {
                    col: j,
                    value: x[j],
                    lo: self.lo[j],
                    hi: self.hi[j],
                });
            }
        }

        let limit = 5000 + 200 * (m + n);
        let mut iterations = 0usize;
        loop {
            iterations += 1;
            if iterations > limit {
                return Err(LpError::IterationLimit(limit));
            }

            // Bland: first eligible column by index
            let mut entering = None;
            for j in 0..n {
                if in_basis[j] || self.hi[j] - self.lo[j] <= 0.0 {
                    continue;
                }
                let z = self.reduced_cost(&t, &basis, j);
                if (!at_upper[j] && z < -RED_COST_TOL) || (at_upper[j] && z > RED_COST_TOL) {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                break; // optimal
            };
            let dir = if at_upper[j] { -1.0 } else { 1.0 };

            // Ratio test: how far x_j can move before something hits a
            // bound. The entering variable's own bound counts as a
            // candidate (a flip); ties break towards the lowest variable
            // index, Bland-style.
            let mut t_max = self.hi[j] - self.lo[j];
            let mut leaving: Option<(usize, bool)> = None; // (row, to_upper)
            for (r, row) in t.iter().enumerate() {
                let rate = -dir * row[j]; // movement of the basic in row r
                let b = basis[r];
                let (ratio, to_upper) = if rate > PIVOT_TOL {
                    ((self.hi[b] - x[b]).max(0.0) / rate, true)
                } else if rate < -PIVOT_TOL {
                    ((x[b] - self.lo[b]).max(0.0) / -rate, false)
                } else {
                    continue;
                };
                let current = match leaving {
                    None => j,
                    Some((lr, _)) => basis[lr],
                };
                if ratio < t_max - 1e-15 || (ratio <= t_max + 1e-15 && b < current) {
                    t_max = ratio.min(t_max);
                    leaving = Some((r, to_upper));
                }
            }

            // move the entering variable and every basic accordingly
            x[j] += dir * t_max;
            for (r, row) in t.iter().enumerate() {
                x[basis[r]] -= dir * row[j] * t_max;
            }

            match leaving {
                None => {
                    // bound flip: x_j reached its other bound
                    at_upper[j] = !at_upper[j];
                    x[j] = if at_upper[j] { self.hi[j] } else { self.lo[j] };
                }
                Some((r, to_upper)) => {
                    let out = basis[r];
                    x[out] = if to_upper { self.hi[out] } else { self.lo[out] };
                    at_upper[out] = to_upper;
                    in_basis[out] = false;
                    in_basis[j] = true;
                    basis[r] = j;
                    Self::pivot(&mut t, &mut rhs, r, j);
                }
            }
        }

        // refresh basic values from the tableau to shed incremental drift
        for r in 0..m {
            x[basis[r]] = self.basic_value(&t, &rhs, &x, &in_basis, r);
        }
        for (j, v) in x.iter_mut().enumerate() {
            if (*v - self.lo[j]).abs() <= SNAP_TOL {
                *v = self.lo[j];
            } else if (*v - self.hi[j]).abs() <= SNAP_TOL {
                *v = self.hi[j];
            }
        }

        self.certify(&t, &basis, &at_upper, &in_basis, &x)?;
        let objective = x.iter().zip(&self.cost).map(|(v, c)| v * c).sum();
        Ok(LpSolution {
            x,
            objective,
            iterations,
        })
    }

    /// Value of the basic variable in row `r` given the nonbasic values.
    fn basic_value(
        &self,
        t: &[Vec<f64>],
        rhs: &[f64],
        x: &[f64],
        in_basis: &[bool],
        r: usize,
    ) -> f64 {
        let mut v = rhs[r];
        for (j, &coef) in t[r].iter().enumerate() {
            if !in_basis[j] && coef != 0.0 && x[j] != 0.0 {
                v -= coef * x[j];
            }
        }
        v
    }

    fn reduced_cost(&self, t: &[Vec<f64>], basis: &[usize], j: usize) -> f64 {
        let mut z = self.cost[j];
        for (r, row) in t.iter().enumerate() {
            let cb = self.cost[basis[r]];
            if cb != 0.0 {
                z -= cb * row[j];
            }
        }
        z
    }

    fn pivot(t: &mut [Vec<f64>], rhs: &mut [f64], r: usize, j: usize) {
        let piv = t[r][j];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        rhs[r] /= piv;
        let pivot_row = t[r].clone();
        let pivot_rhs = rhs[r];
        for (rr, row) in t.iter_mut().enumerate() {
            if rr == r {
                continue;
            }
            let f = row[j];
            if f == 0.0 {
                continue;
            }
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            rhs[rr] -= f * pivot_rhs;
        }
    }

    /// Verifies the returned point: bounds, equality residuals against the
    /// *original* columns, and sign of every reduced cost.
    fn certify(
        &self,
        t: &[Vec<f64>],
        basis: &[usize],
        at_upper: &[bool],
        in_basis: &[bool],
        x: &[f64],
    ) -> Result<(), LpError> {
        let scale = 1.0 + self.rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let tol = RESIDUAL_TOL * scale;
        for (j, &v) in x.iter().enumerate() {
            let slack = RESIDUAL_TOL * (1.0 + self.lo[j].abs().max(self.hi[j].abs()));
            if v < self.lo[j] - slack || v > self.hi[j] + slack {
                return Err(LpError::BoundsViolated {
                    col: j,
                    value: v,
                    lo: self.lo[j],
                    hi: self.hi[j],
                });
            }
        }
        let mut residual = vec![0.0f64; self.n_rows];
        for (j, col) in self.cols.iter().enumerate() {
            for &(r, a) in col {
                residual[r] += a * x[j];
            }
        }
        for (r, need) in self.rhs.iter().enumerate() {
            let miss = (residual[r] - need).abs();
            if miss > tol {
                return Err(LpError::Residual {
                    residual: miss,
                    tol,
                });
            }
        }
        for j in 0..self.cols.len() {
            if in_basis[j] || self.hi[j] - self.lo[j] <= 0.0 {
                continue;
            }
            let z = self.reduced_cost(t, basis, j);
            let bad = (!at_upper[j] && z < -1e-6) || (at_upper[j] && z > 1e-6);
            if bad {
                return Err(LpError::NotOptimal {
                    col: j,
                    red_cost: z,
                });
            }
        }
        Ok(())
    }
}
