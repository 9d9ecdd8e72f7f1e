//! Grid-discretized reference solutions.
//!
//! The atom parameter is restricted to `m` equispaced nodes and the resulting
//! finite problem is solved by methods unrelated to the conditional-gradient
//! solver: greedy coordinate-wise soft-thresholding for the penalized problem, and a dense simplex
//! for the exact-data problem `min ||c||_1 s.t. K c + B beta = y`. Restricting
//! the atoms can only raise the optimum, so oracle objectives are upper bounds.

mod simplex;

use nalgebra::{DMatrix, DVector};

use crate::atoms::{Sign, WeightedAtom};
use crate::error::{Error, Result};
use crate::model::Problem;
use crate::solver::{nonneg_qp, GridImages, SparseSolution};

pub use simplex::{solve_standard_form, LpOutcome};

/// Dense simplex scale guard.
pub const EXACT_MAX_N: usize = 20;
pub const EXACT_MAX_M: usize = 4096;
/// Cap on cyclic sweeps over the support after each greedy update.
const SUPPORT_SWEEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMode {
    Lasso { lambda: f64 },
    ExactConstraint,
}

/// Atom images on a parameter grid together with the null images.
#[derive(Debug, Clone)]
pub struct GridProblem {
    pub grid: GridImages,
    pub null_images: DMatrix<f64>,
    pub mode: OracleMode,
}

impl GridProblem {
    pub fn new(problem: &Problem, m: usize, mode: OracleMode) -> Result<Self> {
        if m < 2 {
            return Err(Error::GridTooSmall(m));
        }
        Ok(GridProblem {
            grid: GridImages::new(problem, m),
            null_images: problem.null_images().clone(),
            mode,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub nodes: Vec<f64>,
    /// Signed weight per node.
    pub weights: Vec<f64>,
    pub null_coeffs: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl OracleResult {
    /// Nodes carrying at least `rel` of the total absolute weight.
    pub fn support(&self, rel: f64) -> Vec<(f64, f64)> {
        let total: f64 = self.weights.iter().map(|c| c.abs()).sum();
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, c)| c.abs() > rel * total && **c != 0.0)
            .map(|(x, c)| (*x, *c))
            .collect()
    }

    /// The nonzero grid weights as a sparse solution.
    pub fn to_solution(&self) -> SparseSolution {
        SparseSolution {
            atoms: self
                .nodes
                .iter()
                .zip(&self.weights)
                .filter(|(_, c)| **c != 0.0)
                .map(|(x, c)| WeightedAtom::new(*x, Sign::of(*c), c.abs()))
                .collect(),
            null_coeffs: self.null_coeffs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Relative duality gap at which to stop.
    pub tol: f64,
    /// Greedy coordinate updates.
    pub max_iters: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-12,
            max_iters: 200_000,
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn null_fit(problem: &Problem, columns: &DMatrix<f64>, c: &DVector<f64>) -> Vec<f64> {
    if problem.kind().null_dim() == 0 {
        return Vec::new();
    }
    let r = problem.data() - columns * c;
    problem.fit_null(&r).iter().copied().collect()
}

/// `min ||c||_1 + lambda/2 ||K c + B beta - y||^2` on an `m`-node grid.
pub fn grid_solve_lasso(problem: &Problem, m: usize, opts: &LassoOptions) -> Result<OracleResult> {
    let lambda = problem.lambda();
    let gp = GridProblem::new(problem, m, OracleMode::Lasso { lambda })?;
    Ok(lasso_on_grid(problem, &gp, opts, None))
}

/// Greedy proximal coordinate descent (coordinate-wise soft-thresholding).
///
/// Each outer step updates the coordinate whose exact minimization decreases
/// the objective most, then sweeps the current support cyclically. `beta` is
/// eliminated exactly by working with images and data projected off
/// `span(B)`. Coordinate steps are exact minimizations, so the objective never
/// increases and a warm start is never worsened. Stops when the duality gap
/// of the scaled residual is below `tol * (1 + |J|)`.
pub fn lasso_on_grid(problem: &Problem, gp: &GridProblem, opts: &LassoOptions, init: Option<&[f64]>) -> OracleResult {
    let lambda = match gp.mode {
        OracleMode::Lasso { lambda } => lambda,
        OracleMode::ExactConstraint => problem.lambda(),
    };
    let m = gp.len();
    let mut kp = gp.grid.images.clone();
    for j in 0..m {
        let col = problem.project(&kp.column(j).into_owned());
        kp.set_column(j, &col);
    }
    let yp = problem.project(&problem.data());
    let col_sq: Vec<f64> = (0..m).map(|j| kp.column(j).norm_squared()).collect();
    let objective = |c: &DVector<f64>| {
        let r = &yp - &kp * c;
        (c.lp_norm(1) + 0.5 * lambda * r.norm_squared(), r)
    };
    // exact minimizer along coordinate j and the decrease it buys
    let coordinate = |xj: f64, rho_j: f64, j: usize| -> (f64, f64) {
        if col_sq[j] == 0.0 {
            return (0.0, xj.abs());
        }
        let a = lambda * col_sq[j];
        let b = lambda * (rho_j + col_sq[j] * xj);
        let t = soft_threshold(b, 1.0) / a;
        let h = |u: f64| u.abs() + 0.5 * a * u * u - b * u;
        (t, h(xj) - h(t))
    };

    let mut x = match init {
        Some(c) => DVector::from_column_slice(c),
        None => DVector::zeros(m),
    };
    let (mut fx, mut r) = objective(&x);
    let mut best = (x.clone(), fx);
    let mut converged = false;
    let mut iterations = 0;
    let qp_tol = 1e-13 * (1.0 + lambda * yp.norm());

    while iterations < opts.max_iters {
        let g = kp.tr_mul(&r);
        let scale = (lambda * g.amax()).max(1.0);
        let w = &r * (lambda / scale);
        let dual = w.dot(&yp) - w.norm_squared() / (2.0 * lambda);
        if fx - dual <= opts.tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        iterations += 1;

        let (mut jbest, mut tbest, mut dbest) = (0, x[0], f64::NEG_INFINITY);
        for j in 0..m {
            let (t, d) = coordinate(x[j], g[j], j);
            if d > dbest {
                (jbest, tbest, dbest) = (j, t, d);
            }
        }
        if dbest <= 0.0 {
            // no coordinate improves in floating point
            break;
        }
        r.axpy(-(tbest - x[jbest]), &kp.column(jbest), 1.0);
        x[jbest] = tbest;

        let support: Vec<usize> = (0..m).filter(|&j| x[j] != 0.0).collect();
        if let Some(z) = support_solve(&kp, &yp, lambda, &x, &support, qp_tol) {
            let (fz, rz) = objective(&z);
            if fz < fx {
                x = z;
                r = rz;
            }
        }
        for _ in 0..SUPPORT_SWEEPS {
            let mut gained = 0.0;
            for &j in &support {
                let (t, d) = coordinate(x[j], kp.column(j).dot(&r), j);
                if d > 0.0 {
                    r.axpy(-(t - x[j]), &kp.column(j), 1.0);
                    x[j] = t;
                    gained += d;
                }
            }
            if gained <= 1e-15 * (1.0 + fx.abs()) {
                break;
            }
        }

        // recompute to keep the residual free of accumulated drift
        let (fz, rz) = objective(&x);
        r = rz;
        fx = fz;
        if fz < best.1 {
            best = (x.clone(), fz);
        }
    }

    let (x, fx) = best;
    let null_coeffs = null_fit(problem, &gp.grid.images, &x);
    OracleResult {
        nodes: gp.grid.nodes.clone(),
        weights: x.iter().copied().collect(),
        null_coeffs,
        objective: fx,
        converged,
        iterations,
    }
}

/// Exact minimizer over the current support with the current signs held
/// fixed. Weights whose sign would flip go to zero; coordinate steps can
/// bring them back with the other sign.
fn support_solve(
    kp: &DMatrix<f64>,
    yp: &DVector<f64>,
    lambda: f64,
    x: &DVector<f64>,
    support: &[usize],
    tol: f64,
) -> Option<DVector<f64>> {
    if support.is_empty() {
        return None;
    }
    let mut cols = kp.select_columns(support);
    for (k, &j) in support.iter().enumerate() {
        if x[j] < 0.0 {
            cols.column_mut(k).neg_mut();
        }
    }
    let g0: Vec<f64> = support.iter().map(|&j| x[j].abs()).collect();
    let out = nonneg_qp(&cols, yp, lambda, &g0, None, tol, 50 * support.len() + 100);
    let mut z = x.clone();
    for (k, &j) in support.iter().enumerate() {
        z[j] = out.gamma[k] * x[j].signum();
    }
    Some(z)
}

/// Solves on nested grids `m_1 < m_2 < ...` (each `m_{i+1} = 2 m_i - 1`),
/// warm-starting every grid from the previous solution.
pub fn nested_lasso_sweep(problem: &Problem, sizes: &[usize], opts: &LassoOptions) -> Result<Vec<OracleResult>> {
    let lambda = problem.lambda();
    let mut out: Vec<OracleResult> = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let gp = GridProblem::new(problem, m, OracleMode::Lasso { lambda })?;
        let init = out.last().map(|prev| {
            let ratio = (m - 1) / (prev.nodes.len() - 1);
            let mut c = vec![0.0; m];
            if ratio * (prev.nodes.len() - 1) == m - 1 {
                for (j, w) in prev.weights.iter().enumerate() {
                    c[j * ratio] = *w;
                }
            }
            c
        });
        out.push(lasso_on_grid(problem, &gp, opts, init.as_deref()));
    }
    Ok(out)
}

/// `min sum |c_j| s.t. K c + B beta = y` by the dense simplex.
pub fn grid_solve_exact(problem: &Problem, m: usize) -> Result<OracleResult> {
    let n = problem.n();
    if m < 2 {
        return Err(Error::GridTooSmall(m));
    }
    if n > EXACT_MAX_N || m > EXACT_MAX_M {
        return Err(Error::ScaleGuard { n, m });
    }
    let gp = GridProblem::new(problem, m, OracleMode::ExactConstraint)?;
    let k = problem.kind().null_dim();
    let cols = 2 * m + 2 * k;
    let mut a = DMatrix::zeros(n, cols);
    for j in 0..m {
        for i in 0..n {
            let v = gp.grid.images[(i, j)];
            a[(i, j)] = v;
            a[(i, m + j)] = -v;
        }
    }
    for j in 0..k {
        for i in 0..n {
            let v = gp.null_images[(i, j)];
            a[(i, 2 * m + j)] = v;
            a[(i, 2 * m + k + j)] = -v;
        }
    }
    let mut cost = DVector::zeros(cols);
    cost.rows_mut(0, 2 * m).fill(1.0);
    let y = problem.data();
    let feas_tol = 1e-9 * (1.0 + y.norm());
    match solve_standard_form(&a, &y, &cost, feas_tol) {
        LpOutcome::Optimal { x, objective } => {
            let weights: Vec<f64> = (0..m).map(|j| x[j] - x[m + j]).collect();
            let null_coeffs: Vec<f64> = (0..k).map(|j| x[2 * m + j] - x[2 * m + k + j]).collect();
            Ok(OracleResult {
                nodes: gp.grid.nodes,
                weights,
                null_coeffs,
                objective,
                converged: true,
                iterations: 0,
            })
        }
        LpOutcome::Infeasible { residual } => Err(Error::Infeasible(residual)),
        LpOutcome::Unbounded => Err(Error::Infeasible(f64::INFINITY)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareTolerances {
    pub objective_rel: f64,
    /// Support distance allowed, in grid steps.
    pub support_steps: f64,
    /// Oracle nodes lighter than this fraction of the total weight are ignored.
    pub support_rel: f64,
}

impl Default for CompareTolerances {
    fn default() -> Self {
        CompareTolerances {
            objective_rel: 1e-4,
            support_steps: 2.0,
            support_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub solver_objective: f64,
    pub oracle_objective: f64,
    /// `|J_solver - J_oracle| / (1 + J_oracle)`
    pub objective_rel_diff: f64,
    pub hausdorff: f64,
    pub grid_step: f64,
    pub objective_ok: bool,
    pub support_ok: bool,
}

impl ComparisonReport {
    pub fn pass(&self) -> bool {
        self.objective_ok && self.support_ok
    }
}

fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let directed = |from: &[f64], to: &[f64]| {
        from.iter()
            .map(|x| to.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

pub fn compare(
    problem: &Problem,
    solver_solution: &SparseSolution,
    solver_objective: f64,
    oracle: &OracleResult,
    tol: &CompareTolerances,
) -> ComparisonReport {
    let objective_rel_diff = (solver_objective - oracle.objective).abs() / (1.0 + oracle.objective.abs());
    let solver_params: Vec<f64> = solver_solution.atoms.iter().map(|a| a.atom.param).collect();
    let oracle_params: Vec<f64> = oracle.support(tol.support_rel).iter().map(|s| s.0).collect();
    let h = hausdorff(&solver_params, &oracle_params);
    let m = oracle.nodes.len();
    let grid_step = if m > 1 {
        (oracle.nodes[m - 1] - oracle.nodes[0]) / (m - 1) as f64
    } else {
        problem.domain().len()
    };
    ComparisonReport {
        solver_objective,
        oracle_objective: oracle.objective,
        objective_rel_diff,
        hausdorff: h,
        grid_step,
        objective_ok: objective_rel_diff <= tol.objective_rel,
        support_ok: h <= tol.support_steps * grid_step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Domain, Kernel};
    use crate::model::{Fidelity, Kind, ProblemSpec};

    fn single(y: f64, lambda: f64) -> Problem {
        Problem::new(ProblemSpec {
            kind: Kind::Measures,
            domain: Domain::new(0.0, 1.0).unwrap(),
            kernels: vec![Kernel::SineBump],
            data: vec![y],
            fidelity: Fidelity::Quadratic { lambda },
        })
        .unwrap()
    }

    #[test]
    fn zero_data() {
        let p = single(0.0, 10.0);
        let r = grid_solve_lasso(&p, 65, &LassoOptions::default()).unwrap();
        assert_eq!(r.objective, 0.0);
        assert!(r.weights.iter().all(|&c| c == 0.0));
        let r = grid_solve_exact(&p, 65).unwrap();
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn single_kernel_lasso() {
        let p = single(2.0, 1e6);
        let r = grid_solve_lasso(&p, 1001, &LassoOptions::default()).unwrap();
        // gamma = y - 1/lambda, J = gamma + 1/(2 lambda)
        let expected = 2.0 - 1e-6 + 0.5e-6;
        assert!((r.objective - expected).abs() < 1e-6, "{} {} {}", r.objective, r.iterations, r.converged);
    }

    #[test]
    fn single_kernel_exact() {
        let p = single(1.0, 1.0);
        let r = grid_solve_exact(&p, 1001).unwrap();
        let kmax = GridImages::new(&p, 1001).images.amax();
        assert!((r.objective - 1.0 / kmax).abs() < 1e-12);
        assert!((r.objective - 1.0).abs() < 1e-12);
        let support = r.support(0.0);
        assert_eq!(support.len(), 1);
        assert!((support[0].0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let p = single(1.0, 1.0);
        assert!(matches!(grid_solve_lasso(&p, 1, &LassoOptions::default()), Err(Error::GridTooSmall(1))));
        assert!(matches!(grid_solve_exact(&p, 5000), Err(Error::ScaleGuard { .. })));
    }

    #[test]
    fn exact_mode_reports_infeasibility() {
        // constant-free data cannot be matched by two identical kernels with different data
        let p = Problem::new(ProblemSpec {
            kind: Kind::Measures,
            domain: Domain::new(0.0, 1.0).unwrap(),
            kernels: vec![Kernel::SineBump, Kernel::SineBump],
            data: vec![1.0, 2.0],
            fidelity: Fidelity::Quadratic { lambda: 1.0 },
        })
        .unwrap();
        assert!(matches!(grid_solve_exact(&p, 65), Err(Error::Infeasible(_))));
    }

    #[test]
    fn identical_results_compare_clean() {
        let p = single(2.0, 1e6);
        let r = grid_solve_lasso(&p, 1025, &LassoOptions::default()).unwrap();
        let sol = r.to_solution();
        let cmp = compare(&p, &sol, r.objective, &r, &CompareTolerances::default());
        assert_eq!(cmp.objective_rel_diff, 0.0);
        assert!(cmp.pass());
    }
}
