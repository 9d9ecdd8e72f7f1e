//! Unit step atoms for one-dimensional total variation.
//!
//! The atom `(t, sign)` is `sign * 1_{(t, hi)}`. The other boundary-touching
//! interval `(lo, t)` equals the negated step modulo constants, so one scalar
//! parameter and a sign cover all extremal points of the quotient unit ball.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::Problem;
use crate::solver::SparseSolution;

use super::Atom;

pub type StepAtom = Atom;

pub(crate) fn image(problem: &Problem, t: f64) -> DVector<f64> {
    DVector::from_iterator(problem.n(), problem.tables().iter().map(|tb| tb.moment(0, t)))
}

pub fn measure_atom(problem: &Problem, atom: &StepAtom) -> Result<DVector<f64>> {
    super::measure_atom(problem, atom)
}

/// `g(t) = sum_i w_i int_t^hi k_i`
pub fn correlation(problem: &Problem, w: &DVector<f64>, t: f64) -> f64 {
    problem
        .tables()
        .iter()
        .zip(w.iter())
        .map(|(tb, wi)| wi * tb.moment(0, t))
        .sum()
}

/// `g'(t) = -sum_i w_i k_i(t)`
pub fn correlation_derivative(problem: &Problem, w: &DVector<f64>, t: f64) -> f64 {
    let dom = problem.domain();
    -problem
        .spec()
        .kernels
        .iter()
        .zip(w.iter())
        .map(|(k, wi)| wi * k.value(t, dom))
        .sum::<f64>()
}

/// `beta + sum gamma_i sign_i 1_{(t_i, hi)}(s)`
pub fn reconstruct(solution: &SparseSolution, s: f64) -> Result<f64> {
    let mut v = solution.null_coeffs.first().copied().unwrap_or(0.0);
    for wa in &solution.atoms {
        let t = wa.atom.param;
        if (s - t).abs() <= 1e-12 {
            return Err(Error::JumpPointQuery(s));
        }
        if s > t {
            v += wa.atom.sign.value() * wa.weight;
        }
    }
    Ok(v)
}
