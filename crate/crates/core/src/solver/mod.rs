//! Fully-corrective conditional gradient over extremal atoms.
//!
//! Each iteration asks the oracle for the atom most correlated with the
//! current dual vector `w = lambda P(y - Au)`, adds it, and re-optimizes all
//! weights. The loop stops on a small duality gap with the certificate bound
//! `sup |<w, A atom>| <= 1` met to the same tolerance. The final active set
//! is then reduced to at most `dim H_N` atoms by Carathéodory pruning.

mod lmo;
mod prune;
mod subproblem;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::atoms::{self, Atom, WeightedAtom, MERGE_TOL};
use crate::certificate::{self, CertificateReport, CertifyOptions};
use crate::error::Result;
use crate::model::Problem;

pub use lmo::{grid_peaks, lmo, lmo_on_grid, refine_max, refine_peak, GridImages, LMO_PEAKS};
pub use prune::{caratheodory_prune, reduce_support, SATURATION_TOL};
pub use subproblem::{nonneg_qp, QpOutcome};

/// `u = psi + sum gamma_i u_i` with `psi = sum_j beta_j psi_j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseSolution {
    pub atoms: Vec<WeightedAtom>,
    pub null_coeffs: Vec<f64>,
}

impl SparseSolution {
    pub fn empty(null_dim: usize) -> Self {
        SparseSolution {
            atoms: Vec::new(),
            null_coeffs: vec![0.0; null_dim],
        }
    }

    /// Regularizer value `sum gamma_i`.
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn p(&self) -> usize {
        self.atoms.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stop when the gap is below `gap_tol * (1 + |J|)`.
    pub gap_tol: f64,
    pub max_iters: usize,
    pub lmo_grid: usize,
    pub refine_iters: usize,
    pub prune_tol: f64,
    pub subproblem_tol: f64,
    pub cert_grid_factor: usize,
    pub cert_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-7,
            max_iters: 500,
            lmo_grid: 1024,
            refine_iters: 40,
            prune_tol: 1e-10,
            subproblem_tol: 1e-12,
            cert_grid_factor: 10,
            cert_tol: 1e-6,
        }
    }
}

impl SolverOptions {
    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            grid_factor: self.cert_grid_factor,
            lmo_grid: self.lmo_grid,
            tol: self.cert_tol,
            refine_iters: self.refine_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub objective: f64,
    pub gap: f64,
    pub atoms: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub p: usize,
    pub dim_hn: usize,
    pub converged: bool,
    pub certified: bool,
    /// Objective before pruning, for auditing the reduction.
    pub objective_before_prune: f64,
    pub atoms_before_prune: usize,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub solution: SparseSolution,
    pub certificate: CertificateReport,
    pub report: SolverReport,
}

/// Dual candidate `P lambda (y - A u)`, a representative of the quotient.
pub fn dual_candidate(problem: &Problem, solution: &SparseSolution) -> DVector<f64> {
    let au = problem.forward(solution);
    problem.project(&(-problem.fidelity_gradient(&au)))
}

/// `J(u) + F*(-v)` with `v = w / s` and `s = max(1, sup, active correlations)`.
///
/// Evaluated as `sum gamma_i (1 - <v, a_i>) - <v, B beta> + ||lambda r - v||^2 / (2 lambda)`
/// with `r = y - A u`, which is the same quantity without the cancellation
/// between the primal and dual values.
fn gap_terms(
    lambda: f64,
    gamma: &[f64],
    images: &DMatrix<f64>,
    null_part: &DVector<f64>,
    residual: &DVector<f64>,
    w: &DVector<f64>,
    sup: f64,
) -> f64 {
    let corr = images.tr_mul(w);
    let s = corr.iter().fold(sup.max(1.0), |m, &c| m.max(c));
    let v = w / s;
    let mass: f64 = gamma.iter().zip(corr.iter()).map(|(g, c)| g * (1.0 - c / s)).sum();
    mass - v.dot(null_part) + (residual * lambda - &v).norm_squared() / (2.0 * lambda)
}

fn solution_gap(problem: &Problem, solution: &SparseSolution, w: &DVector<f64>, sup: f64) -> f64 {
    let atoms: Vec<Atom> = solution.atoms.iter().map(|a| a.atom).collect();
    let gamma: Vec<f64> = solution.atoms.iter().map(|a| a.weight).collect();
    let parts = problem.measurement_parts(&atoms);
    let null_part = if solution.null_coeffs.is_empty() {
        DVector::zeros(problem.n())
    } else {
        &parts.b * DVector::from_column_slice(&solution.null_coeffs)
    };
    let residual = problem.data() - problem.forward(solution);
    gap_terms(problem.lambda(), &gamma, &parts.k, &null_part, &residual, w, sup)
}

/// `J(u) + F*(-w / max(1, M))` with `M` the oracle's correlation supremum.
pub fn duality_gap(
    problem: &Problem,
    solution: &SparseSolution,
    w: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<f64> {
    problem.objective(solution)?;
    let (_, sup) = lmo(problem, w, opts.lmo_grid, opts.refine_iters);
    Ok(solution_gap(problem, solution, w, sup))
}

/// Projected atom images and data used by the weight subproblem.
struct Projected {
    kp: DMatrix<f64>,
    yp: DVector<f64>,
}

impl Projected {
    fn new(problem: &Problem) -> Self {
        Projected {
            kp: DMatrix::zeros(problem.n(), 0),
            yp: problem.project(&problem.data()),
        }
    }

    fn push(&mut self, problem: &Problem, atom: &Atom) {
        let col = problem.project(&(atoms::unsigned_image(problem, atom.param) * atom.sign.value()));
        let c = self.kp.ncols();
        self.kp = self.kp.clone().insert_column(c, 0.0);
        self.kp.set_column(c, &col);
    }

    fn remove(&mut self, keep: &[bool]) {
        let idx: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
        self.kp = self.kp.select_columns(&idx);
    }

    fn residual(&self, gamma: &[f64]) -> DVector<f64> {
        &self.yp - &self.kp * DVector::from_column_slice(gamma)
    }
}

/// Result of re-optimizing the weights of a fixed atom set.
#[derive(Debug, Clone)]
pub struct SubproblemResult {
    /// Surviving atoms with their weights (entries at or below `prune_tol` removed).
    pub solution: SparseSolution,
    pub converged: bool,
}

/// Minimizes `sum gamma + F(K gamma + B beta)` over `gamma >= 0`, `beta` free.
pub fn fully_corrective_subproblem(problem: &Problem, atoms_in: &[Atom], opts: &SolverOptions) -> SubproblemResult {
    let mut proj = Projected::new(problem);
    let mut atoms: Vec<Atom> = atoms_in.to_vec();
    for a in &atoms {
        proj.push(problem, a);
    }
    let mut gamma = vec![0.0; atoms.len()];
    let converged = reoptimize(problem, &mut proj, &mut atoms, &mut gamma, None, opts);
    SubproblemResult {
        solution: assemble(problem, &atoms, &gamma),
        converged,
    }
}

fn qp_tol(problem: &Problem, opts: &SolverOptions) -> f64 {
    opts.subproblem_tol * (1.0 + problem.lambda() * problem.data().norm())
}

/// Runs the active-set solve, then drops weights at or below `prune_tol` and
/// re-solves until none remain.
fn reoptimize(
    problem: &Problem,
    proj: &mut Projected,
    atoms: &mut Vec<Atom>,
    gamma: &mut Vec<f64>,
    force: Option<usize>,
    opts: &SolverOptions,
) -> bool {
    let tol = qp_tol(problem, opts);
    let max_iters = 50 * (atoms.len() + 10);
    let mut force = force;
    loop {
        let out = nonneg_qp(&proj.kp, &proj.yp, problem.lambda(), gamma, force.take(), tol, max_iters);
        *gamma = out.gamma;
        let keep: Vec<bool> = gamma.iter().map(|&g| g > opts.prune_tol).collect();
        let dropped_positive = gamma.iter().zip(&keep).any(|(&g, &k)| !k && g > 0.0);
        if keep.iter().any(|k| !k) {
            proj.remove(&keep);
            let mut i = 0;
            atoms.retain(|_| {
                i += 1;
                keep[i - 1]
            });
            let mut i = 0;
            gamma.retain(|_| {
                i += 1;
                keep[i - 1]
            });
        }
        if !dropped_positive || !out.converged {
            return out.converged;
        }
    }
}

/// Same-sign atoms closer than this (relative to the domain) are merged
/// before sliding.
const CLUSTER_WIDTH: f64 = 1e-3;
const SLIDE_ITERS: usize = 30;

struct Trial {
    proj: Projected,
    atoms: Vec<Atom>,
    gamma: Vec<f64>,
    objective: f64,
}

fn fc_trial(problem: &Problem, atoms: Vec<Atom>, gamma: Vec<f64>, opts: &SolverOptions) -> Trial {
    let mut proj = Projected::new(problem);
    for a in &atoms {
        proj.push(problem, a);
    }
    let (mut atoms, mut gamma) = (atoms, gamma);
    reoptimize(problem, &mut proj, &mut atoms, &mut gamma, None, opts);
    let r = proj.residual(&gamma);
    let objective = gamma.iter().sum::<f64>() + 0.5 * problem.lambda() * r.norm_squared();
    Trial { proj, atoms, gamma, objective }
}

/// Merges chains of same-sign atoms with gaps below `CLUSTER_WIDTH` into
/// one atom at their weighted mean.
fn merge_clusters(problem: &Problem, atoms: &[Atom], gamma: &[f64]) -> (Vec<Atom>, Vec<f64>) {
    let width = CLUSTER_WIDTH * problem.domain().len();
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&a, &b| atoms[a].param.total_cmp(&atoms[b].param));
    let mut out_atoms: Vec<Atom> = Vec::new();
    let mut out_gamma: Vec<f64> = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for i in order {
        let a = atoms[i];
        match last {
            Some((k, prev)) if out_atoms[k].sign == a.sign && a.param - prev <= width => {
                let g = out_gamma[k] + gamma[i];
                if g > 0.0 {
                    out_atoms[k].param = (out_atoms[k].param * out_gamma[k] + a.param * gamma[i]) / g;
                }
                out_gamma[k] = g;
            }
            _ => {
                out_atoms.push(a);
                out_gamma.push(gamma[i]);
            }
        }
        last = Some((out_atoms.len() - 1, a.param));
    }
    (out_atoms, out_gamma)
}

/// `d phi / d x_i = -gamma_i sign_i <w, a'(x_i)>` for the reduced objective
/// `phi(x) = min_gamma J`.
fn slide_gradient(problem: &Problem, t: &Trial) -> DVector<f64> {
    let w = t.proj.residual(&t.gamma) * problem.lambda();
    DVector::from_iterator(
        t.atoms.len(),
        t.atoms
            .iter()
            .zip(&t.gamma)
            .map(|(a, g)| -g * a.sign.value() * atoms::correlation_derivative(problem, &w, a.param)),
    )
}

fn moved(problem: &Problem, t: &Trial, x: &DVector<f64>, opts: &SolverOptions) -> Trial {
    let dom = problem.domain();
    let atoms = t
        .atoms
        .iter()
        .zip(x.iter())
        .map(|(a, &xi)| Atom::new(dom.clamp(xi), a.sign))
        .collect();
    fc_trial(problem, atoms, t.gamma.clone(), opts)
}

/// Joint damped Newton descent on the atom positions, with the weights
/// re-optimized at every point. The Hessian is a forward difference of the
/// gradient; without a positive definite Hessian the step follows the
/// gradient. Near the stationary point, where objective changes drown in
/// rounding, steps that shrink the gradient are accepted too.
fn slide(problem: &Problem, mut t: Trial, opts: &SolverOptions) -> Trial {
    let len = problem.domain().len();
    let h = 1e-7 * len;
    let max_step = 10.0 * CLUSTER_WIDTH * len;
    for _ in 0..SLIDE_ITERS {
        let p = t.atoms.len();
        let g = slide_gradient(problem, &t);
        let gnorm = g.amax();
        if p == 0 || gnorm == 0.0 {
            break;
        }
        let x = DVector::from_iterator(p, t.atoms.iter().map(|a| a.param));
        let mut hess = DMatrix::zeros(p, p);
        let mut smooth = true;
        for k in 0..p {
            let step = if x[k] + h < problem.domain().hi { h } else { -h };
            let mut xk = x.clone();
            xk[k] += step;
            let tk = moved(problem, &t, &xk, opts);
            if tk.atoms.len() != p {
                smooth = false;
                break;
            }
            hess.set_column(k, &((slide_gradient(problem, &tk) - &g) / step));
        }
        let newton = if smooth {
            let sym = (&hess + hess.transpose()) * 0.5;
            sym.cholesky().map(|c| -c.solve(&g))
        } else {
            None
        };
        let mut d = newton.unwrap_or_else(|| -&g * (max_step / gnorm));
        let dn = d.amax();
        if dn > max_step {
            d *= max_step / dn;
        }
        let slack = 4.0 * f64::EPSILON * (1.0 + t.objective.abs());
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let cand = moved(problem, &t, &(&x + &d * alpha), opts);
            let lower = cand.objective < t.objective;
            let flatter = cand.objective <= t.objective + slack
                && cand.atoms.len() == p
                && slide_gradient(problem, &cand).amax() < gnorm;
            if lower || flatter {
                next = Some(cand);
                break;
            }
            alpha *= 0.5;
        }
        match next {
            Some(c) => t = c,
            None => break,
        }
        if (&d * alpha).amax() <= 4.0 * f64::EPSILON * len {
            break;
        }
    }
    t
}

fn assemble(problem: &Problem, atoms: &[Atom], gamma: &[f64]) -> SparseSolution {
    let mut sol = SparseSolution {
        atoms: atoms
            .iter()
            .zip(gamma)
            .map(|(a, &g)| WeightedAtom { atom: *a, weight: g })
            .collect(),
        null_coeffs: Vec::new(),
    };
    sol.null_coeffs = fit_null_coeffs(problem, &sol);
    sol
}

/// `beta` minimizing `||K gamma + B beta - y||` for the current atoms.
pub fn fit_null_coeffs(problem: &Problem, solution: &SparseSolution) -> Vec<f64> {
    let k = problem.kind().null_dim();
    if k == 0 {
        return Vec::new();
    }
    let atoms_only = SparseSolution {
        atoms: solution.atoms.clone(),
        null_coeffs: vec![0.0; k],
    };
    let r = problem.data() - problem.forward(&atoms_only);
    problem.fit_null(&r).iter().copied().collect()
}

/// Runs the conditional-gradient loop, prunes, and certifies.
pub fn solve(problem: &Problem, opts: &SolverOptions) -> SolveOutput {
    let start = Instant::now();
    let lambda = problem.lambda();
    let dom = *problem.domain();
    let grid = GridImages::new(problem, opts.lmo_grid);
    let mut proj = Projected::new(problem);
    let mut atoms: Vec<Atom> = Vec::new();
    let mut gamma: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let r = proj.residual(&gamma);
        let w = &r * lambda;
        let objective = gamma.iter().sum::<f64>() + 0.5 * lambda * r.norm_squared();
        let (atom, sup) = lmo_on_grid(problem, &grid, &w, opts.refine_iters);
        let gap = gap_terms(lambda, &gamma, &proj.kp, &DVector::zeros(problem.n()), &r, &w, sup);
        trace.push(TraceEntry {
            objective,
            gap,
            atoms: atoms.len(),
        });
        if gap <= opts.gap_tol * (1.0 + objective.abs()) && sup <= 1.0 + opts.gap_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            warnings.push(format!("stopped after {iterations} iterations without meeting the gap tolerance"));
            break;
        }
        let tol = MERGE_TOL * dom.len();
        if atoms
            .iter()
            .any(|a| a.sign == atom.sign && (a.param - atom.param).abs() <= tol)
        {
            warnings.push(format!(
                "oracle returned an atom already in the active set (sup {sup}); stopping"
            ));
            break;
        }
        iterations += 1;
        atoms.push(atom);
        gamma.push(0.0);
        proj.push(problem, &atom);
        let force = Some(atoms.len() - 1);
        if !reoptimize(problem, &mut proj, &mut atoms, &mut gamma, force, opts) {
            warnings.push("weight subproblem hit its iteration cap".into());
        }
    }

    if converged {
        // polish: merge near-duplicates and slide, keeping the result only if
        // it is no worse and still meets the stopping test
        let r = proj.residual(&gamma);
        let current = gamma.iter().sum::<f64>() + 0.5 * lambda * r.norm_squared();
        let (merged_atoms, merged_gamma) = merge_clusters(problem, &atoms, &gamma);
        let t = slide(problem, fc_trial(problem, merged_atoms, merged_gamma, opts), opts);
        let r = t.proj.residual(&t.gamma);
        let w = &r * lambda;
        let (_, sup) = lmo_on_grid(problem, &grid, &w, opts.refine_iters);
        let gap = gap_terms(lambda, &t.gamma, &t.proj.kp, &DVector::zeros(problem.n()), &r, &w, sup);
        if t.objective <= current && gap <= opts.gap_tol * (1.0 + t.objective.abs()) && sup <= 1.0 + opts.gap_tol {
            trace.push(TraceEntry {
                objective: t.objective,
                gap,
                atoms: t.atoms.len(),
            });
            atoms = t.atoms;
            gamma = t.gamma;
        }
    }

    let mut solution = assemble(problem, &atoms, &gamma);
    solution.atoms = atoms::merge_atoms(&dom, &solution.atoms);
    solution.null_coeffs = fit_null_coeffs(problem, &solution);
    let objective_before_prune = problem.objective(&solution).unwrap_or(f64::NAN);
    let atoms_before_prune = solution.p();
    let w = dual_candidate(problem, &solution);
    let dim_hn = problem.dim_quotient();
    if solution.p() > dim_hn {
        match caratheodory_prune(problem, &solution, &w) {
            Ok(pruned) => solution = pruned,
            Err(e) => {
                warnings.push(format!(
                    "certificate-based pruning unavailable ({e}); reducing to at most dim H_N + 1 atoms"
                ));
                match reduce_support(problem, &solution, dim_hn + 1, false) {
                    Ok(pruned) => solution = pruned,
                    Err(e) => warnings.push(format!("support reduction failed: {e}")),
                }
            }
        }
    }
    let w = dual_candidate(problem, &solution);
    let certificate = certificate::certify(problem, &solution, &w, &opts.certify_options());
    let objective = problem.objective(&solution).unwrap_or(f64::NAN);
    let gap = solution_gap(problem, &solution, &w, certificate.certificate.sup_value);
    let certified = converged && certificate.passed();
    let report = SolverReport {
        objective,
        gap,
        iterations,
        p: solution.p(),
        dim_hn,
        converged,
        certified,
        objective_before_prune,
        atoms_before_prune,
        trace,
        warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    SolveOutput {
        solution,
        certificate,
        report,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::Sign;
    use crate::kernel::{Domain, Kernel};
    use crate::model::{Fidelity, Kind, ProblemSpec};

    fn spec(kind: Kind, kernels: Vec<Kernel>, data: Vec<f64>, lambda: f64) -> ProblemSpec {
        ProblemSpec {
            kind,
            domain: Domain::new(0.0, 1.0).unwrap(),
            kernels,
            data,
            fidelity: Fidelity::Quadratic { lambda },
        }
    }

    #[test]
    fn zero_data_is_solved_by_zero() {
        let p = Problem::new(spec(Kind::Tv1d, vec![Kernel::SineBump, Kernel::FourierCos { freq: 1.0 }], vec![0.0, 0.0], 10.0)).unwrap();
        let out = solve(&p, &SolverOptions::default());
        assert_eq!(out.report.p, 0);
        assert_eq!(out.report.gap, 0.0);
        assert!(out.report.certified);
        assert_eq!(out.solution.null_coeffs, vec![0.0]);
    }

    #[test]
    fn single_spike_analytic() {
        let p = Problem::new(spec(Kind::Measures, vec![Kernel::SineBump], vec![2.0], 1e6)).unwrap();
        let out = solve(&p, &SolverOptions::default());
        assert!(out.report.certified, "{:?}", out.report);
        assert_eq!(out.solution.p(), 1);
        let a = out.solution.atoms[0];
        assert!((a.atom.param - 0.5).abs() < 1e-8);
        assert_eq!(a.atom.sign, Sign::Plus);
        assert!((a.weight - 1.999999).abs() < 1e-9);
        assert!(out.report.gap <= 1e-9);
    }

    #[test]
    fn subproblem_examples() {
        // no atoms: beta is the least-squares null fit
        let p = Problem::new(spec(Kind::Tv1d, vec![Kernel::Cell { a: 0.0, b: 0.5 }, Kernel::Cell { a: 0.5, b: 1.0 }], vec![1.0, 2.0], 10.0)).unwrap();
        let out = fully_corrective_subproblem(&p, &[], &SolverOptions::default());
        assert!(out.solution.atoms.is_empty());
        assert!((out.solution.null_coeffs[0] - 3.0).abs() < 1e-12);

        let p = Problem::new(spec(Kind::Measures, vec![Kernel::SineBump], vec![2.0], 1e6)).unwrap();
        let out = fully_corrective_subproblem(&p, &[Atom::new(0.5, Sign::Plus)], &SolverOptions::default());
        assert!((out.solution.atoms[0].weight - 1.999999).abs() < 1e-12);

        let p = Problem::new(spec(Kind::Measures, vec![Kernel::SineBump], vec![0.0], 1e6)).unwrap();
        let out = fully_corrective_subproblem(&p, &[Atom::new(0.5, Sign::Plus)], &SolverOptions::default());
        assert!(out.solution.atoms.is_empty());
    }

    #[test]
    fn gap_with_zero_dual_is_objective() {
        let p = Problem::new(spec(Kind::Measures, vec![Kernel::SineBump], vec![1.5], 3.0)).unwrap();
        let sol = SparseSolution {
            atoms: vec![WeightedAtom::new(0.4, Sign::Plus, 0.7)],
            null_coeffs: vec![],
        };
        let g = duality_gap(&p, &sol, &DVector::zeros(1), &SolverOptions::default()).unwrap();
        assert!((g - p.objective(&sol).unwrap()).abs() <= 1e-14);
    }

    #[test]
    fn objective_trace_is_monotone() {
        let p = Problem::new(spec(
            Kind::Tv1d,
            (0..6).map(|i| Kernel::Gaussian { center: 0.1 + 0.16 * i as f64, width: 0.08 }).collect(),
            vec![0.1, 0.15, 0.3, 0.05, -0.1, -0.12],
            100.0,
        ))
        .unwrap();
        let out = solve(&p, &SolverOptions::default());
        for w in out.report.trace.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12 * (1.0 + w[0].objective));
        }
        assert!(out.report.p <= out.report.dim_hn);
        assert!(out.report.certified, "{:?}", out.report.warnings);
    }
}
