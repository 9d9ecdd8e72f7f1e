use nalgebra::DVector;

use exsparse::model::{Fidelity, Kind, Problem, ProblemSpec};
use exsparse::solver::{caratheodory_prune, solve};
use exsparse::{Domain, Error, Kernel, Sign, SolverOptions, SparseSolution, WeightedAtom};

fn fourier_problem(data: Vec<f64>) -> Problem {
    Problem::new(ProblemSpec {
        kind: Kind::Measures,
        domain: Domain::new(0.0, 1.0).unwrap(),
        kernels: (1..=3).map(|f| Kernel::FourierSin { freq: f as f64 }).collect(),
        data,
        fidelity: Fidelity::Quadratic { lambda: 10.0 },
    })
    .unwrap()
}

/// Five atoms where `sin(6 pi t) = +-1`; all saturate `w = e_3`.
fn saturated_five() -> SparseSolution {
    let weights = [0.3, 0.7, 0.2, 0.5, 0.4];
    let atoms = (0..5)
        .map(|k| {
            let x = (1.0 + 2.0 * k as f64) / 12.0;
            let sign = if k % 2 == 0 { Sign::Plus } else { Sign::Minus };
            WeightedAtom::new(x, sign, weights[k])
        })
        .collect();
    SparseSolution {
        atoms,
        null_coeffs: vec![],
    }
}

#[test]
fn constructed_instance_prunes_to_quotient_dimension() {
    let p = fourier_problem(vec![0.4, -0.2, 1.1]);
    let sol = saturated_five();
    let w = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let pruned = caratheodory_prune(&p, &sol, &w).unwrap();
    assert!(pruned.p() <= 3, "{}", pruned.p());
    assert!((p.forward(&pruned) - p.forward(&sol)).norm() <= 1e-10);
    assert!((pruned.mass() - sol.mass()).abs() <= 1e-10);
    assert!((p.objective(&pruned).unwrap() - p.objective(&sol).unwrap()).abs() <= 1e-9);
    assert!(pruned.atoms.iter().all(|a| a.weight > 0.0));
    // deterministic vertex choice
    assert_eq!(caratheodory_prune(&p, &sol, &w).unwrap(), pruned);
}

#[test]
fn small_supports_are_unchanged() {
    let p = fourier_problem(vec![0.0; 3]);
    let mut sol = saturated_five();
    sol.atoms.truncate(3);
    let w = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    assert_eq!(caratheodory_prune(&p, &sol, &w).unwrap(), sol);
}

#[test]
fn duplicates_are_merged_first() {
    let p = fourier_problem(vec![0.0; 3]);
    let x = 1.0 / 12.0;
    let sol = SparseSolution {
        atoms: vec![WeightedAtom::new(x, Sign::Plus, 0.5), WeightedAtom::new(x, Sign::Plus, 0.25)],
        null_coeffs: vec![],
    };
    let w = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let pruned = caratheodory_prune(&p, &sol, &w).unwrap();
    assert_eq!(pruned.p(), 1);
    assert_eq!(pruned.atoms[0].weight, 0.75);
}

#[test]
fn unsaturated_atoms_are_refused() {
    let p = fourier_problem(vec![0.0; 3]);
    let mut sol = saturated_five();
    sol.atoms[2].atom.param = 0.4;
    let w = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    assert!(matches!(caratheodory_prune(&p, &sol, &w), Err(Error::NonSaturatedAtoms { index: 2, .. })));
}

#[test]
fn solver_output_respects_the_bound() {
    for seed in 0..40 {
        for kind in [Kind::Measures, Kind::Tv1d, Kind::Spline { order: 2 }, Kind::Spline { order: 3 }] {
            let p = Problem::new(exsparse::generate::random_spec(kind, seed).unwrap()).unwrap();
            let out = solve(&p, &SolverOptions::default());
            assert!(out.report.certified, "{kind:?} seed {seed}");
            assert!(out.solution.p() <= p.dim_quotient());
            assert!(out.report.objective - out.report.objective_before_prune <= 1e-9);
        }
    }
}
