//! Dense two-phase simplex for `min c^T x, A x = b, x >= 0`.
//!
//! Entering columns follow the most negative reduced cost, falling back to
//! Bland's rule after a run of degenerate pivots. The leaving row uses a
//! two-pass Harris ratio test that prefers the largest pivot element.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-12;
/// Pivot elements below this fraction of the column's largest entry are skipped.
const PIVOT_RTOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
/// Primal infeasibility tolerated by the Harris ratio test.
const HARRIS_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: DVector<f64>, objective: f64 },
    Infeasible { residual: f64 },
    Unbounded,
}

struct Tableau {
    /// rows `0..m` are constraints, row `m` the reduced costs; last column the RHS
    t: DMatrix<f64>,
    basis: Vec<usize>,
    /// the system `[A | b]` the tableau is rebuilt from
    orig: DMatrix<f64>,
    /// costs per column, zero for the RHS
    cost: DVector<f64>,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.t.nrows() - 1
    }

    fn rhs_col(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.t[(r, c)];
        let row = self.t.row(r) / piv;
        self.t.set_row(r, &row);
        for i in 0..self.t.nrows() {
            if i != r {
                let f = self.t[(i, c)];
                if f != 0.0 {
                    let updated = self.t.row(i) - &row * f;
                    self.t.set_row(i, &updated);
                }
            }
        }
        self.basis[r] = c;
        self.refresh();
    }

    /// Recomputes the tableau as `B^-1 [A | b]` from the current basis, so that
    /// rounding does not accumulate across pivots. Keeps the updated tableau
    /// if the basis matrix is numerically singular.
    fn refresh(&mut self) {
        let m = self.rows();
        let basis_cols = self.orig.select_columns(&self.basis);
        let Some(mut x) = basis_cols.lu().solve(&self.orig) else { return };
        if !x.iter().all(|v| v.is_finite()) {
            return;
        }
        // basic columns are unit vectors by definition
        for (k, &j) in self.basis.iter().enumerate() {
            x.column_mut(j).fill(0.0);
            x[(k, j)] = 1.0;
        }
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| self.cost[j]));
        let mut reduced = self.cost.transpose() - cb.transpose() * &x;
        for &j in &self.basis {
            reduced[j] = 0.0;
        }
        self.t.view_mut((0, 0), (m, x.ncols())).copy_from(&x);
        self.t.set_row(m, &reduced);
    }

    /// Leaving row for entering column `e`. The first pass bounds the step with
    /// the basic values relaxed by `HARRIS_TOL`; the second picks, among rows
    /// within that bound, the largest pivot element, ties to the smallest basic
    /// index. With `bland` set the plain minimum ratio is used instead.
    fn leaving_row(&self, e: usize, bland: bool) -> Option<usize> {
        let m = self.rows();
        let rhs = self.rhs_col();
        let col_max = (0..m).map(|i| self.t[(i, e)].abs()).fold(0.0, f64::max);
        let floor = PIVOT_TOL.max(PIVOT_RTOL * col_max);
        let rows: Vec<usize> = (0..m).filter(|&i| self.t[(i, e)] > floor).collect();
        let value = |i: usize| self.t[(i, rhs)].max(0.0);
        if bland {
            let ratio = rows.iter().map(|&i| value(i) / self.t[(i, e)]).fold(f64::INFINITY, f64::min);
            return rows
                .iter()
                .copied()
                .filter(|&i| value(i) / self.t[(i, e)] <= ratio)
                .min_by_key(|&i| self.basis[i]);
        }
        let bound = rows
            .iter()
            .map(|&i| (value(i) + HARRIS_TOL) / self.t[(i, e)])
            .fold(f64::INFINITY, f64::min);
        rows.iter().copied().filter(|&i| value(i) / self.t[(i, e)] <= bound).max_by(|&a, &b| {
            self.t[(a, e)].total_cmp(&self.t[(b, e)]).then(self.basis[b].cmp(&self.basis[a]))
        })
    }

    /// Minimizes over columns `< ncols_allowed`. Improving columns whose
    /// positive entries are all too small to pivot on are passed over.
    /// Returns false if unbounded.
    fn optimize(&mut self, ncols_allowed: usize) -> bool {
        let m = self.rows();
        let rhs = self.rhs_col();
        let mut degenerate = 0;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut candidates: Vec<usize> = (0..ncols_allowed).filter(|&j| self.t[(m, j)] < -COST_TOL).collect();
            if !bland {
                candidates.sort_by(|&a, &b| self.t[(m, a)].total_cmp(&self.t[(m, b)]).then(a.cmp(&b)));
            }
            let mut pivoted = false;
            for e in candidates {
                match self.leaving_row(e, bland) {
                    Some(r) => {
                        let before = self.t[(m, rhs)];
                        self.pivot(r, e);
                        if self.t[(m, rhs)] == before || (self.t[(m, rhs)] - before).abs() <= 1e-15 * before.abs() {
                            degenerate += 1;
                        } else {
                            degenerate = 0;
                        }
                        pivoted = true;
                        break;
                    }
                    None if (0..m).all(|i| self.t[(i, e)] <= PIVOT_TOL) => return false,
                    None => {}
                }
            }
            if !pivoted {
                return true;
            }
        }
        true
    }
}

/// Solves the standard-form LP. `feas_tol` bounds the phase-one objective.
pub fn solve_standard_form(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, feas_tol: f64) -> LpOutcome {
    let (m, n) = a.shape();
    // phase one: artificials a_i with b >= 0
    let mut t = DMatrix::zeros(m + 1, n + m + 1);
    for i in 0..m {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = s * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = s * b[i];
    }
    // reduced costs of phase one: -sum of constraint rows
    for j in 0..n {
        t[(m, j)] = -(0..m).map(|i| t[(i, j)]).sum::<f64>();
    }
    t[(m, n + m)] = -(0..m).map(|i| t[(i, n + m)]).sum::<f64>();
    let mut cost = DVector::zeros(n + m + 1);
    cost.rows_mut(n, m).fill(1.0);
    let orig = t.rows(0, m).into_owned();
    let mut tab = Tableau {
        t,
        basis: (n..n + m).collect(),
        orig,
        cost,
    };
    tab.optimize(n + m);
    let residual = (0..m)
        .filter(|&r| tab.basis[r] >= n)
        .map(|r| tab.t[(r, n + m)].abs())
        .sum::<f64>();
    if residual > feas_tol {
        return LpOutcome::Infeasible { residual };
    }
    // drive artificials out of the basis; rows where that is impossible are redundant
    let mut redundant = Vec::new();
    for r in 0..m {
        if tab.basis[r] >= n {
            let best = (0..n).max_by(|&a, &b| tab.t[(r, a)].abs().total_cmp(&tab.t[(r, b)].abs()));
            match best.filter(|&j| tab.t[(r, j)].abs() > 1e-9) {
                Some(j) => tab.pivot(r, j),
                None => redundant.push(r),
            }
        }
    }
    // phase two on the original costs, artificial columns frozen out
    let keep: Vec<usize> = (0..m).filter(|r| !redundant.contains(r)).collect();
    let mut t2 = DMatrix::zeros(keep.len() + 1, n + 1);
    let mut basis = Vec::with_capacity(keep.len());
    for (k, &r) in keep.iter().enumerate() {
        for j in 0..n {
            t2[(k, j)] = tab.t[(r, j)];
        }
        t2[(k, n)] = tab.t[(r, n + m)];
        basis.push(tab.basis[r]);
    }
    for j in 0..n {
        t2[(keep.len(), j)] = c[j];
    }
    for (k, &bj) in basis.iter().enumerate() {
        let f = t2[(keep.len(), bj)];
        if f != 0.0 {
            let row = t2.row(k) * f;
            let updated = t2.row(keep.len()) - row;
            t2.set_row(keep.len(), &updated);
        }
    }
    let mut cost2 = DVector::zeros(n + 1);
    cost2.rows_mut(0, n).copy_from(c);
    // a redundant row's artificial marks an original row that depends on the
    // others; the rest of the original system is what phase two refreshes from
    let dropped: Vec<usize> = redundant.iter().map(|&r| tab.basis[r] - n).collect();
    let rows: Vec<usize> = (0..m).filter(|i| !dropped.contains(i)).collect();
    let mut orig2 = DMatrix::zeros(rows.len(), n + 1);
    for (k, &i) in rows.iter().enumerate() {
        for j in 0..n {
            orig2[(k, j)] = tab.orig[(i, j)];
        }
        orig2[(k, n)] = tab.orig[(i, n + m)];
    }
    let mut tab2 = Tableau {
        t: t2,
        basis,
        orig: orig2,
        cost: cost2,
    };
    tab2.refresh();
    if !tab2.optimize(n) {
        return LpOutcome::Unbounded;
    }
    let mut x = DVector::zeros(n);
    let rhs = tab2.rhs_col();
    for (k, &bj) in tab2.basis.iter().enumerate() {
        x[bj] = tab2.t[(k, rhs)].max(0.0);
    }
    let objective = c.dot(&x);
    LpOutcome::Optimal { x, objective }
}
