//! Seeded random instances and the named demos.
//!
//! All randomness comes from xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`), which is specified bit-for-bit and
//! therefore reproduces across platforms.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::atoms::{Sign, WeightedAtom};
use crate::error::{Error, Result};
use crate::kernel::{Domain, Kernel};
use crate::model::{Fidelity, Kind, Problem, ProblemSpec};
use crate::solver::SparseSolution;

pub type Prng = Xoshiro256PlusPlus;

pub fn prng(seed: u64) -> Prng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Ground truth used to synthesize the data of a generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub spec: ProblemSpec,
    pub truth: SparseSolution,
}

fn unit_domain() -> Domain {
    Domain { lo: 0.0, hi: 1.0 }
}

fn measures_kernel(rng: &mut Prng) -> Kernel {
    let u: f64 = rng.gen();
    if u < 0.6 {
        Kernel::Gaussian {
            center: rng.gen_range(0.3..0.7),
            width: rng.gen_range(0.03..0.045),
        }
    } else if u < 0.85 {
        Kernel::FourierSin {
            freq: rng.gen_range(1..=3) as f64,
        }
    } else {
        Kernel::SineBump
    }
}

fn general_kernel(rng: &mut Prng) -> Kernel {
    let u: f64 = rng.gen();
    if u < 0.45 {
        Kernel::Gaussian {
            center: rng.gen_range(0.1..0.9),
            width: rng.gen_range(0.05..0.2),
        }
    } else if u < 0.65 {
        let a: f64 = rng.gen_range(0.0..0.7);
        let len: f64 = rng.gen_range(0.15..0.5);
        Kernel::Cell { a, b: (a + len).min(1.0) }
    } else if u < 0.8 {
        Kernel::FourierCos {
            freq: rng.gen_range(1..=3) as f64,
        }
    } else if u < 0.92 {
        Kernel::FourierSin {
            freq: rng.gen_range(1..=3) as f64,
        }
    } else {
        Kernel::SineBump
    }
}

fn random_truth(rng: &mut Prng, null_dim: usize, atoms: usize) -> SparseSolution {
    let atoms = (0..atoms)
        .map(|_| {
            let sign = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
            WeightedAtom::new(rng.gen_range(0.2..0.8), sign, rng.gen_range(0.5..2.0))
        })
        .collect();
    let null_coeffs = (0..null_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SparseSolution { atoms, null_coeffs }
}

fn synthesize(
    rng: &mut Prng,
    kind: Kind,
    kernels: Vec<Kernel>,
    lambda: f64,
    truth: SparseSolution,
    noise: f64,
) -> Result<Instance> {
    let n = kernels.len();
    let mut spec = ProblemSpec {
        kind,
        domain: unit_domain(),
        kernels,
        data: vec![0.0; n],
        fidelity: Fidelity::Quadratic { lambda },
    };
    let clean = Problem::new(spec.clone())?.forward(&truth);
    spec.data = clean.iter().map(|v| v + noise * rng.gen_range(-1.0..1.0)).collect();
    Ok(Instance { spec, truth })
}

const SPLINE_LAMBDA: f64 = 1e4;

/// A random instance with `n` measurements.
///
/// Kernels are drawn from the shipped families (only those vanishing at the
/// endpoints for measures), the truth has one to three atoms, data carry
/// uniform noise of amplitude 0.01 and `lambda` lies in `[30, 300]`. Spline
/// instances use noise 0.001 and `lambda` in `[1e4, 1e5]`.
pub fn random_instance(kind: Kind, n: usize, seed: u64) -> Result<Instance> {
    if n == 0 {
        return Err(Error::MalformedSpec("at least one kernel is required".into()));
    }
    let mut rng = prng(seed);
    let kernels: Vec<Kernel> = (0..n)
        .map(|_| match kind {
            Kind::Measures => measures_kernel(&mut rng),
            _ => general_kernel(&mut rng),
        })
        .collect();
    // spline images are small once polynomials are projected out
    let (base, noise) = match kind {
        Kind::Spline { .. } => (SPLINE_LAMBDA, 0.001),
        _ => (30.0, 0.01),
    };
    let lambda = base * 10f64.powf(rng.gen_range(0.0..1.0));
    let atoms = rng.gen_range(1..=3);
    let truth = random_truth(&mut rng, kind.null_dim(), atoms);
    synthesize(&mut rng, kind, kernels, lambda, truth, noise)
}

/// `random_instance` with `n` drawn from `3..=8`.
pub fn random_spec(kind: Kind, seed: u64) -> Result<ProblemSpec> {
    let n = prng(seed ^ 0x9e37_79b9_7f4a_7c15).gen_range(3..=8);
    Ok(random_instance(kind, n, seed)?.spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demo {
    Spikes,
    Staircase,
    Spline,
}

impl Demo {
    pub const ALL: [Demo; 3] = [Demo::Spikes, Demo::Staircase, Demo::Spline];

    pub fn name(&self) -> &'static str {
        match self {
            Demo::Spikes => "spikes",
            Demo::Staircase => "staircase",
            Demo::Spline => "spline",
        }
    }
}

impl fmt::Display for Demo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Demo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Demo::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("unknown demo '{s}' (expected spikes, staircase or spline)")))
    }
}

fn gaussian_bank(rng: &mut Prng, n: usize, lo: f64, hi: f64, width: (f64, f64)) -> Vec<Kernel> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| Kernel::Gaussian {
            center: lo + step * i as f64 + rng.gen_range(-0.2..0.2) * step,
            width: rng.gen_range(width.0..width.1),
        })
        .collect()
}

/// The seeded instance behind a demo.
///
/// `spikes`: eight narrow Gaussians observing two or three Diracs.
/// `staircase`: six Gaussians observing a two-jump step function.
/// `spline`: seven Gaussians observing a linear spline with two knots (`q = 2`).
pub fn demo_instance(demo: Demo, seed: u64) -> Result<Instance> {
    let mut rng = prng(seed);
    match demo {
        Demo::Spikes => {
            let kernels = gaussian_bank(&mut rng, 8, 0.3, 0.7, (0.03, 0.045));
            let atoms = rng.gen_range(2..=3);
            let mut truth = random_truth(&mut rng, 0, atoms);
            for a in &mut truth.atoms {
                a.atom.param = rng.gen_range(0.35..0.65);
            }
            synthesize(&mut rng, Kind::Measures, kernels, 200.0, truth, 0.005)
        }
        Demo::Staircase => {
            let kernels = gaussian_bank(&mut rng, 6, 0.1, 0.9, (0.08, 0.15));
            let truth = SparseSolution {
                atoms: vec![
                    WeightedAtom::new(rng.gen_range(0.25..0.4), Sign::Plus, rng.gen_range(0.8..1.5)),
                    WeightedAtom::new(rng.gen_range(0.6..0.75), Sign::Minus, rng.gen_range(0.5..1.2)),
                ],
                null_coeffs: vec![rng.gen_range(-0.5..0.5)],
            };
            synthesize(&mut rng, Kind::Tv1d, kernels, 100.0, truth, 0.005)
        }
        Demo::Spline => {
            let kernels = gaussian_bank(&mut rng, 7, 0.1, 0.9, (0.08, 0.15));
            let truth = SparseSolution {
                atoms: vec![
                    WeightedAtom::new(rng.gen_range(0.3..0.45), Sign::Plus, rng.gen_range(1.0..3.0)),
                    WeightedAtom::new(rng.gen_range(0.55..0.7), Sign::Minus, rng.gen_range(1.0..3.0)),
                ],
                null_coeffs: vec![rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0)],
            };
            synthesize(&mut rng, Kind::Spline { order: 2 }, kernels, SPLINE_LAMBDA, truth, 0.001)
        }
    }
}
