//! Dual certificates: checks that `w` proves global optimality of a solution.
//!
//! For a quadratic fidelity the optimality conditions reduce to four
//! computable checks, reported separately:
//!
//! * C1: `sup_theta |<w, A atom(theta)>| <= 1 + tol` (grid plus local refinement),
//! * C2: every active atom has signed correlation within `tol` of one,
//! * C3: `w` is orthogonal to the null images `A psi_j`,
//! * C4: `w` matches `P lambda (y - A u)`.

use nalgebra::DVector;

use crate::atoms;
use crate::model::Problem;
use crate::solver::{grid_peaks, refine_peak, GridImages, SparseSolution};

/// Null-orthogonality threshold for C3.
pub const NULL_TOL: f64 = 1e-8;
/// Number of grid local maxima refined for C1.
pub const REFINED_CANDIDATES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub grid_factor: usize,
    pub lmo_grid: usize,
    pub tol: f64,
    pub refine_iters: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            grid_factor: 10,
            lmo_grid: 1024,
            tol: 1e-6,
            refine_iters: 40,
        }
    }
}

impl CertifyOptions {
    pub fn grid_size(&self) -> usize {
        (self.grid_factor * self.lmo_grid).max(2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub w: DVector<f64>,
    pub sup_value: f64,
    pub sup_location: f64,
    pub active_correlations: Vec<f64>,
    pub null_residuals: Vec<f64>,
    pub fidelity_link_residual: f64,
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub certificate: Certificate,
    pub tol: f64,
    pub c1_bounded: bool,
    pub c2_saturated: bool,
    pub c3_null_orthogonal: bool,
    pub c4_fidelity_link: bool,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.c1_bounded && self.c2_saturated && self.c3_null_orthogonal && self.c4_fidelity_link
    }

    /// Largest `|corr - 1|` over the active atoms (0 when there are none).
    pub fn max_saturation_deviation(&self) -> f64 {
        self.certificate
            .active_correlations
            .iter()
            .map(|c| (c - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_null_residual(&self) -> f64 {
        self.certificate.null_residuals.iter().map(|r| r.abs()).fold(0.0, f64::max)
    }
}

/// Supremum of `|<w, A atom(theta)>|` over a grid, with the largest local
/// maxima refined. Returns `(value, location)`.
pub fn certificate_sup(problem: &Problem, grid: &GridImages, w: &DVector<f64>, refine_iters: usize) -> (f64, f64) {
    let corr = grid.correlations(w);
    let mut best = (0.0, grid.nodes[0]);
    for j in 0..corr.len() {
        if corr[j].abs() > best.0 {
            best = (corr[j].abs(), grid.nodes[j]);
        }
    }
    for j in grid_peaks(&corr, REFINED_CANDIDATES) {
        let (atom, v) = refine_peak(problem, grid, w, &corr, j, refine_iters);
        if v > best.0 {
            best = (v, atom.param);
        }
    }
    best
}

/// `(theta, <w, A atom(theta)>)` samples for plotting.
pub fn certificate_curve(problem: &Problem, w: &DVector<f64>, m: usize) -> Vec<(f64, f64)> {
    let grid = GridImages::new(problem, m);
    let corr = grid.correlations(w);
    grid.nodes.iter().copied().zip(corr.iter().copied()).collect()
}

pub fn certify(problem: &Problem, solution: &SparseSolution, w: &DVector<f64>, opts: &CertifyOptions) -> CertificateReport {
    let grid = GridImages::new(problem, opts.grid_size());
    certify_on_grid(problem, solution, w, &grid, opts)
}

pub fn certify_on_grid(
    problem: &Problem,
    solution: &SparseSolution,
    w: &DVector<f64>,
    grid: &GridImages,
    opts: &CertifyOptions,
) -> CertificateReport {
    let (sup_value, sup_location) = certificate_sup(problem, grid, w, opts.refine_iters);
    let active_correlations: Vec<f64> = solution
        .atoms
        .iter()
        .map(|a| a.atom.sign.value() * atoms::correlation(problem, w, a.atom.param))
        .collect();
    let null_residuals: Vec<f64> = problem.null_images().tr_mul(w).iter().copied().collect();
    let link = problem.project(&(-problem.fidelity_gradient(&problem.forward(solution))));
    let fidelity_link_residual = (w - link).norm();

    let tol = opts.tol;
    let lambda = problem.lambda();
    let y_norm = problem.data().norm();
    let c1_bounded = sup_value <= 1.0 + tol;
    let c2_saturated = active_correlations.iter().all(|c| (c - 1.0).abs() <= tol);
    let c3_null_orthogonal = null_residuals.iter().all(|r| r.abs() <= NULL_TOL);
    let c4_fidelity_link = fidelity_link_residual <= tol * lambda * (1.0 + y_norm);
    CertificateReport {
        certificate: Certificate {
            w: w.clone(),
            sup_value,
            sup_location,
            active_correlations,
            null_residuals,
            fidelity_link_residual,
            grid_size: grid.len(),
        },
        tol,
        c1_bounded,
        c2_saturated,
        c3_null_orthogonal,
        c4_fidelity_link,
    }
}
