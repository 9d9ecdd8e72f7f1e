//! Signed Dirac atoms for the Radon norm: `(A sigma delta_x)_i = sigma k_i(x)`.

use nalgebra::DVector;

use crate::error::Result;
use crate::model::Problem;

use super::Atom;

pub type DiracAtom = Atom;

pub(crate) fn image(problem: &Problem, x: f64) -> DVector<f64> {
    let dom = problem.domain();
    DVector::from_iterator(
        problem.n(),
        problem.spec().kernels.iter().map(|k| k.value(x, dom)),
    )
}

pub fn measure_atom(problem: &Problem, atom: &DiracAtom) -> Result<DVector<f64>> {
    super::measure_atom(problem, atom)
}

/// `sum_i w_i k_i(x)`
pub fn correlation(problem: &Problem, w: &DVector<f64>, x: f64) -> f64 {
    let dom = problem.domain();
    problem
        .spec()
        .kernels
        .iter()
        .zip(w.iter())
        .map(|(k, wi)| wi * k.value(x, dom))
        .sum()
}

/// `sum_i w_i k_i'(x)`
pub fn correlation_derivative(problem: &Problem, w: &DVector<f64>, x: f64) -> f64 {
    let dom = problem.domain();
    problem
        .spec()
        .kernels
        .iter()
        .zip(w.iter())
        .map(|(k, wi)| wi * k.derivative(x, dom))
        .sum()
}
