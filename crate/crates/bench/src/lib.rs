//! Fixtures shared by the criterion benches.

use exsparse::generate::{demo_instance, random_instance, Demo};
use exsparse::{Kind, Problem};

/// Seeded random problems of each kind with `n` measurements.
pub fn random_problems(n: usize, count: u64) -> Vec<(Kind, Problem)> {
    let kinds = [Kind::Measures, Kind::Tv1d, Kind::Spline { order: 2 }];
    kinds
        .into_iter()
        .flat_map(|kind| {
            (0..count).map(move |seed| {
                let spec = random_instance(kind, n, seed).expect("generated specs are valid").spec;
                (kind, Problem::new(spec).expect("generated specs build"))
            })
        })
        .collect()
}

pub fn demo_problem(demo: Demo) -> Problem {
    Problem::new(demo_instance(demo, 7).expect("demo specs are valid").spec).expect("demo specs build")
}
