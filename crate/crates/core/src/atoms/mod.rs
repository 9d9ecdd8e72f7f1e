//! Extremal atoms of the regularizer unit ball, one family per problem kind.
//!
//! An atom is a parameter (spike location, jump location or knot) and a sign.
//! Every atom has unit regularizer value by construction, so a combination of
//! atoms at pairwise-distinct parameters has regularizer value equal to the
//! sum of its weights.

pub mod measures;
pub mod splines;
pub mod tv1d;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Domain;
use crate::model::{Kind, Problem};
use crate::solver::SparseSolution;

/// Parameters closer than this fraction of the domain length are merged.
pub const MERGE_TOL: f64 = 1e-8;
/// Net weights at or below this are dropped after cancellation.
pub const CANCEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// Sign of `v`, with zero mapped to `Plus`.
    pub fn of(v: f64) -> Sign {
        if v < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sign must be 1 or -1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub param: f64,
    pub sign: Sign,
}

impl Atom {
    pub fn new(param: f64, sign: Sign) -> Self {
        Atom { param, sign }
    }

    pub fn negated(self) -> Self {
        Atom {
            sign: self.sign.flip(),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedAtom {
    pub atom: Atom,
    pub weight: f64,
}

impl WeightedAtom {
    pub fn new(param: f64, sign: Sign, weight: f64) -> Self {
        WeightedAtom {
            atom: Atom { param, sign },
            weight,
        }
    }
}

pub fn check_atom(dom: &Domain, atom: &Atom) -> Result<()> {
    if dom.contains_with_margin(atom.param) {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            param: atom.param,
            lo: dom.lo,
            hi: dom.hi,
        })
    }
}

/// Image under `A` of the positive atom at `param`.
pub fn unsigned_image(problem: &Problem, param: f64) -> DVector<f64> {
    match problem.kind() {
        Kind::Measures => measures::image(problem, param),
        Kind::Tv1d => tv1d::image(problem, param),
        Kind::Spline { order } => splines::image(problem, order, param),
    }
}

/// `A` applied to a signed atom.
pub fn measure_atom(problem: &Problem, atom: &Atom) -> Result<DVector<f64>> {
    check_atom(problem.domain(), atom)?;
    Ok(unsigned_image(problem, atom.param) * atom.sign.value())
}

/// `<w, A(atom(theta))>` for the positive atom at `theta`.
pub fn correlation(problem: &Problem, w: &DVector<f64>, theta: f64) -> f64 {
    match problem.kind() {
        Kind::Measures => measures::correlation(problem, w, theta),
        Kind::Tv1d => tv1d::correlation(problem, w, theta),
        Kind::Spline { order } => splines::correlation(problem, order, w, theta),
    }
}

/// Derivative of [`correlation`] in `theta`, from closed forms.
pub fn correlation_derivative(problem: &Problem, w: &DVector<f64>, theta: f64) -> f64 {
    match problem.kind() {
        Kind::Measures => measures::correlation_derivative(problem, w, theta),
        Kind::Tv1d => tv1d::correlation_derivative(problem, w, theta),
        Kind::Spline { order } => splines::correlation_derivative(problem, order, w, theta),
    }
}

/// Pointwise value of the reconstruction `psi + sum gamma_i u_i`.
pub fn reconstruct(problem: &Problem, solution: &SparseSolution, s: f64) -> Result<f64> {
    match problem.kind() {
        Kind::Measures => Err(Error::Unsupported(
            "measures have no pointwise reconstruction".into(),
        )),
        Kind::Tv1d => tv1d::reconstruct(solution, s),
        Kind::Spline { order } => Ok(splines::reconstruct(order, solution, s)),
    }
}

/// Merges atoms whose parameters lie within `MERGE_TOL * (hi - lo)`.
///
/// Signed weights in a cluster are summed; the survivor keeps the parameter
/// of the heaviest member and the sign of the net weight. Clusters whose net
/// weight is at most `CANCEL_TOL` disappear. Output is sorted by parameter.
pub fn merge_atoms(dom: &Domain, list: &[WeightedAtom]) -> Vec<WeightedAtom> {
    let tol = MERGE_TOL * dom.len();
    let mut sorted: Vec<WeightedAtom> = list.to_vec();
    sorted.sort_by(|a, b| a.atom.param.total_cmp(&b.atom.param));
    let mut out = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let anchor = sorted[i].atom.param;
        let mut j = i;
        let mut net = 0.0;
        let mut heaviest = i;
        while j < sorted.len() && sorted[j].atom.param - anchor <= tol {
            net += sorted[j].atom.sign.value() * sorted[j].weight;
            if sorted[j].weight > sorted[heaviest].weight {
                heaviest = j;
            }
            j += 1;
        }
        if net.abs() > CANCEL_TOL {
            out.push(WeightedAtom::new(
                sorted[heaviest].atom.param,
                Sign::of(net),
                net.abs(),
            ));
        }
        i = j;
    }
    out
}

/// First pair of atoms with parameters within the merge tolerance.
pub fn find_duplicate(dom: &Domain, atoms: &[WeightedAtom]) -> Option<(usize, usize)> {
    let tol = MERGE_TOL * dom.len();
    let mut idx: Vec<usize> = (0..atoms.len()).collect();
    idx.sort_by(|&a, &b| atoms[a].atom.param.total_cmp(&atoms[b].atom.param));
    idx.windows(2)
        .find(|w| atoms[w[1]].atom.param - atoms[w[0]].atom.param <= tol)
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}
