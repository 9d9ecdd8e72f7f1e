//! Green's-function atoms for `L = D^q` on an interval.
//!
//! `G_x(s) = (s - x)_+^(q-1) / (q-1)!` solves `D^q G_x = delta_x`; the null
//! space of `L` is spanned by `1, s, ..., s^(q-1)`. A weighted sum of atoms is
//! the convolution of `G` with a spike measure, so no separate solution
//! operator is needed.

use nalgebra::DVector;

use crate::error::Result;
use crate::kernel::factorial;
use crate::model::Problem;
use crate::solver::SparseSolution;

use super::Atom;

pub type GreenAtom = Atom;

pub(crate) fn image(problem: &Problem, order: usize, x: f64) -> DVector<f64> {
    DVector::from_iterator(
        problem.n(),
        problem.tables().iter().map(|tb| tb.truncated_power(order, x)),
    )
}

pub fn measure_atom(problem: &Problem, atom: &GreenAtom) -> Result<DVector<f64>> {
    super::measure_atom(problem, atom)
}

/// `sum_i w_i int_x^hi k_i(s) (s - x)^(q-1) / (q-1)! ds`
pub fn correlation(problem: &Problem, order: usize, w: &DVector<f64>, x: f64) -> f64 {
    problem
        .tables()
        .iter()
        .zip(w.iter())
        .map(|(tb, wi)| wi * tb.truncated_power(order, x))
        .sum()
}

/// Differentiating under the integral lowers the order by one; for `q = 1`
/// it is `-sum_i w_i k_i(x)`.
pub fn correlation_derivative(problem: &Problem, order: usize, w: &DVector<f64>, x: f64) -> f64 {
    if order == 1 {
        return super::tv1d::correlation_derivative(problem, w, x);
    }
    -correlation(problem, order - 1, w, x)
}

/// The truncated power `(s - x)_+^(q-1) / (q-1)!`, with `(.)_+^0` the
/// indicator of `s > x`.
pub fn green(order: usize, x: f64, s: f64) -> f64 {
    if s <= x {
        return 0.0;
    }
    (s - x).powi(order as i32 - 1) / factorial(order - 1)
}

/// `sum_j beta_j s^j + sum_i gamma_i sign_i G_{x_i}(s)`
pub fn reconstruct(order: usize, solution: &SparseSolution, s: f64) -> f64 {
    let poly: f64 = solution
        .null_coeffs
        .iter()
        .enumerate()
        .map(|(j, b)| b * s.powi(j as i32))
        .sum();
    let spline: f64 = solution
        .atoms
        .iter()
        .map(|a| a.atom.sign.value() * a.weight * green(order, a.atom.param, s))
        .sum();
    poly + spline
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{Sign, WeightedAtom};
    use crate::kernel::{Domain, Kernel};
    use crate::model::{Fidelity, Kind, ProblemSpec};
    use proptest::prelude::*;

    fn problem(order: usize, kernels: Vec<Kernel>) -> Problem {
        let n = kernels.len();
        Problem::new(ProblemSpec {
            kind: Kind::Spline { order },
            domain: Domain::new(0.0, 1.0).unwrap(),
            kernels,
            data: vec![0.0; n],
            fidelity: Fidelity::Quadratic { lambda: 1.0 },
        })
        .unwrap()
    }

    fn unit_cell() -> Kernel {
        Kernel::Cell { a: 0.0, b: 1.0 }
    }

    #[test]
    fn ramp_images() {
        let p1 = problem(1, vec![unit_cell()]);
        let v = measure_atom(&p1, &Atom::new(0.25, Sign::Plus)).unwrap();
        assert!((v[0] - 0.75).abs() < 1e-15);

        let p2 = problem(2, vec![unit_cell()]);
        // the margin keeps x off the boundary; the pairing at lo itself is 1/2
        assert!((image(&p2, 2, 0.0)[0] - 0.5).abs() < 1e-15);
        let v = measure_atom(&p2, &Atom::new(0.5, Sign::Plus)).unwrap();
        assert!((v[0] - 0.125).abs() < 1e-15);
        let direct = crate::quadrature::adaptive_simpson(&|s: f64| s - 0.5, 0.5, 1.0, 1e-14, 1).unwrap();
        assert!((v[0] - direct).abs() < 1e-15);
    }

    #[test]
    fn ramp_correlation_closed_form() {
        let p = problem(2, vec![unit_cell()]);
        let w = DVector::from_vec(vec![1.0]);
        for &x in &[0.1, 0.4, 0.8] {
            assert!((correlation(&p, 2, &w, x) - (1.0 - x).powi(2) / 2.0).abs() < 1e-15);
            assert!((correlation_derivative(&p, 2, &w, x) + (1.0 - x)).abs() < 1e-15);
        }
        assert_eq!(correlation(&p, 2, &DVector::zeros(1), 0.3), 0.0);
    }

    #[test]
    fn reconstruction_examples() {
        let line = SparseSolution { atoms: vec![], null_coeffs: vec![1.0, 2.0] };
        assert_eq!(reconstruct(2, &line, 0.3), 1.0 + 2.0 * 0.3);
        let ramp = SparseSolution {
            atoms: vec![WeightedAtom::new(0.5, Sign::Plus, 2.0)],
            null_coeffs: vec![0.0, 0.0],
        };
        assert!((reconstruct(2, &ramp, 0.75) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn first_order_matches_steps() {
        let sol = SparseSolution {
            atoms: vec![
                WeightedAtom::new(0.3, Sign::Plus, 1.0),
                WeightedAtom::new(0.6, Sign::Minus, 2.0),
            ],
            null_coeffs: vec![5.0],
        };
        for j in 0..50 {
            let s = 0.01 + 0.0197 * j as f64;
            let a = reconstruct(1, &sol, s);
            let b = super::super::tv1d::reconstruct(&sol, s).unwrap();
            assert_eq!(a, b);
        }
        let kernels = vec![Kernel::Gaussian { center: 0.4, width: 0.2 }, Kernel::FourierCos { freq: 1.0 }];
        let p = problem(1, kernels.clone());
        let mut spec = p.spec().clone();
        spec.kind = Kind::Tv1d;
        let q = Problem::new(spec).unwrap();
        let w = DVector::from_vec(vec![0.7, -1.3]);
        for j in 0..20 {
            let x = 0.02 + 0.048 * j as f64;
            assert_eq!(correlation(&p, 1, &w, x), super::super::tv1d::correlation(&q, &w, x));
        }
        assert_eq!(p.null_images(), q.null_images());
    }

    #[test]
    fn between_knots_is_polynomial() {
        let q = 3;
        let sol = SparseSolution {
            atoms: vec![
                WeightedAtom::new(0.25, Sign::Plus, 1.0),
                WeightedAtom::new(0.7, Sign::Minus, 0.5),
            ],
            null_coeffs: vec![0.1, -0.4, 0.3],
        };
        let cuts = [0.0, 0.25, 0.7, 1.0];
        for w in cuts.windows(2) {
            // q-th differences of a degree q-1 polynomial vanish
            let h = (w[1] - w[0]) / (q as f64 + 2.0);
            let v: Vec<f64> = (0..=q).map(|j| reconstruct(q, &sol, w[0] + h * (j as f64 + 0.5))).collect();
            let diff = v[3] - 3.0 * v[2] + 3.0 * v[1] - v[0];
            assert!(diff.abs() < 1e-12);
        }
    }

    #[test]
    fn total_mass_from_finite_differences() {
        let q = 2;
        let sol = SparseSolution {
            atoms: vec![
                WeightedAtom::new(0.3, Sign::Plus, 1.25),
                WeightedAtom::new(0.55, Sign::Minus, 0.5),
                WeightedAtom::new(0.8, Sign::Plus, 2.0),
            ],
            null_coeffs: vec![0.2, 1.0],
        };
        let h = 1e-4;
        let grid: Vec<f64> = (0..=(1.0 / h) as usize).map(|j| j as f64 * h + 0.5 * h).collect();
        let mut total = 0.0;
        for w in grid.windows(3) {
            let d = reconstruct(q, &sol, w[2]) - 2.0 * reconstruct(q, &sol, w[1]) + reconstruct(q, &sol, w[0]);
            total += (d / h).abs();
        }
        let mass: f64 = sol.atoms.iter().map(|a| a.weight).sum();
        assert!((total - mass).abs() <= 1e-3 * mass, "{total} vs {mass}");
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(
            w in prop::collection::vec(-3.0f64..3.0, 3),
            x in 0.01f64..0.99,
            order in 1usize..4,
        ) {
            let p = problem(order, vec![
                Kernel::Gaussian { center: 0.6, width: 0.15 },
                Kernel::FourierSin { freq: 2.0 },
                Kernel::Cell { a: 0.2, b: 0.7 },
            ]);
            let w = DVector::from_vec(w);
            let h = 1e-6;
            let fd = (correlation(&p, order, &w, x + h) - correlation(&p, order, &w, x - h)) / (2.0 * h);
            prop_assert!((fd - correlation_derivative(&p, order, &w, x)).abs() < 1e-6);
        }
    }
}
