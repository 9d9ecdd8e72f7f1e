//! Carathéodory pruning of an optimal atomic combination.
//!
//! Moving the weights along a direction `c` with `P K c = 0` keeps the
//! projected measurements, hence the fidelity, unchanged; `sum c = 0` keeps
//! the total mass. Such a direction exists as soon as `p > dim H_N`: when all
//! atoms saturate the certificate, `1^T = w^T P K` lies in the row space of
//! `P K`, so the mass condition is implied once `p = dim H_N + 1`.

use nalgebra::{DMatrix, DVector};

use crate::atoms::{self, WeightedAtom};
use crate::error::{Error, Result};
use crate::linalg::full_right_svd;
use crate::model::Problem;

use super::{fit_null_coeffs, SparseSolution};

/// Atoms must have signed correlation within this distance of one.
pub const SATURATION_TOL: f64 = 1e-6;

/// Reduces to at most `dim H_N` atoms using the certificate hyperplane.
pub fn caratheodory_prune(problem: &Problem, solution: &SparseSolution, w: &DVector<f64>) -> Result<SparseSolution> {
    let merged = SparseSolution {
        atoms: atoms::merge_atoms(problem.domain(), &solution.atoms),
        null_coeffs: solution.null_coeffs.clone(),
    };
    let d = problem.dim_quotient();
    if merged.p() <= d {
        if merged.p() == solution.p() {
            return Ok(solution.clone());
        }
        let mut out = merged;
        out.null_coeffs = fit_null_coeffs(problem, &out);
        return Ok(out);
    }
    let w = problem.project(w);
    for (index, a) in merged.atoms.iter().enumerate() {
        let correlation = a.atom.sign.value() * atoms::correlation(problem, &w, a.atom.param);
        if (correlation - 1.0).abs() > SATURATION_TOL {
            return Err(Error::NonSaturatedAtoms { index, correlation });
        }
    }
    reduce_support(problem, &merged, d, true)
}

/// Moves weights along kernel directions until at most `target` atoms remain.
///
/// With `saturated = false` only directions that also preserve the total mass
/// are used, which is plain Carathéodory and guarantees `dim H_N + 1`.
pub fn reduce_support(
    problem: &Problem,
    solution: &SparseSolution,
    target: usize,
    saturated: bool,
) -> Result<SparseSolution> {
    let d = problem.dim_quotient();
    let basis = problem.quotient_basis();
    let mut kept: Vec<WeightedAtom> = solution.atoms.clone();
    let images: Vec<DVector<f64>> = kept
        .iter()
        .map(|a| basis.tr_mul(&(atoms::unsigned_image(problem, a.atom.param) * a.atom.sign.value())))
        .collect();
    let mut images = images;

    while kept.len() > target {
        let p = kept.len();
        let with_mass = p >= d + 2 || !saturated;
        let rows = d + usize::from(with_mass);
        let mut m = DMatrix::zeros(rows, p);
        for (c, img) in images.iter().enumerate() {
            m.view_mut((0, c), (d, 1)).copy_from(img);
            if with_mass {
                m[(d, c)] = 1.0;
            }
        }
        if rows >= p {
            // no guaranteed kernel; only reachable with target < d + 1 without saturation
            return Err(Error::NumericalRankAmbiguity { residual: f64::NAN });
        }
        let (sv, v) = full_right_svd(&m);
        let mut c: DVector<f64> = v.column(p - 1).into_owned();
        let residual = (&m * &c).norm();
        let scale = sv.first().cloned().unwrap_or(0.0).max(1.0);
        if residual > 1e-9 * scale {
            return Err(Error::NumericalRankAmbiguity { residual });
        }
        let sum = c.sum();
        if sum > 1e-14 {
            c = -c;
        } else if sum.abs() <= 1e-14 {
            let imax = c.iamax();
            if c[imax] < 0.0 {
                c = -c;
            }
        }
        let mut t = f64::INFINITY;
        let mut hit = None;
        for i in 0..p {
            if c[i] < 0.0 {
                let ti = kept[i].weight / -c[i];
                if ti < t {
                    t = ti;
                    hit = Some(i);
                }
            }
        }
        let hit = hit.ok_or(Error::NumericalRankAmbiguity { residual })?;
        for i in 0..p {
            kept[i].weight += t * c[i];
        }
        kept[hit].weight = 0.0;
        let mut i = 0;
        images.retain(|_| {
            i += 1;
            kept[i - 1].weight > 0.0
        });
        kept.retain(|a| a.weight > 0.0);
    }
    let mut out = SparseSolution {
        atoms: kept,
        null_coeffs: Vec::new(),
    };
    out.null_coeffs = fit_null_coeffs(problem, &out);
    Ok(out)
}
