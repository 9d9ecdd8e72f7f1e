//! Linear minimization oracle over the atoms: maximize `|<w, A atom(theta)>|`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::atoms::{self, Atom, Sign};
use crate::model::Problem;

/// Grid peaks refined by the oracle. Several are needed: a peak whose grid
/// samples are slightly lower can still have the larger true maximum.
pub const LMO_PEAKS: usize = 10;

/// Atom images at the nodes of an equispaced parameter grid.
#[derive(Debug, Clone)]
pub struct GridImages {
    pub nodes: Vec<f64>,
    /// `N x m`, column `j` is the image of the positive atom at `nodes[j]`.
    pub images: DMatrix<f64>,
}

impl GridImages {
    pub fn new(problem: &Problem, m: usize) -> Self {
        let nodes = problem.domain().grid(m);
        let cols: Vec<DVector<f64>> = nodes
            .par_iter()
            .map(|&x| atoms::unsigned_image(problem, x))
            .collect();
        let images = if cols.is_empty() {
            DMatrix::zeros(problem.n(), 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        GridImages { nodes, images }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn correlations(&self, w: &DVector<f64>) -> DVector<f64> {
        self.images.tr_mul(w)
    }
}

/// Maximizes `sign * correlation` on `[a, b]` starting from `x0`.
///
/// When the derivative brackets a root, a secant iteration on the closed-form
/// derivative is safeguarded by bisection; otherwise golden-section search on
/// the value is used. Never returns a value below the one at `x0`.
pub fn refine_max(
    problem: &Problem,
    w: &DVector<f64>,
    sign: Sign,
    a: f64,
    b: f64,
    x0: f64,
    iters: usize,
) -> (f64, f64) {
    let s = sign.value();
    let f = |x: f64| s * atoms::correlation(problem, w, x);
    let df = |x: f64| s * atoms::correlation_derivative(problem, w, x);
    let start = (x0, f(x0));
    if !(a < b) || iters == 0 {
        return start;
    }
    let (da, db) = (df(a), df(b));
    let candidate = if da > 0.0 && db < 0.0 {
        let (mut lo, mut hi) = (a, b);
        let (mut xp, mut dp) = (a, da);
        let mut x = x0.clamp(a, b);
        let mut d = df(x);
        for _ in 0..iters {
            if d == 0.0 {
                break;
            }
            if d > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                break;
            }
            let slope = (d - dp) / (x - xp);
            let mut next = if slope < 0.0 && slope.is_finite() { x - d / slope } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            xp = x;
            dp = d;
            x = next;
            d = df(x);
        }
        (x, f(x))
    } else {
        golden_max(&f, a, b, iters)
    };
    if candidate.1 > start.1 {
        candidate
    } else {
        start
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    // include the endpoints so boundary maxima are found exactly
    [(a, f(a)), (c, fc), (d, fd), (b, f(b))]
        .into_iter()
        .fold((a, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// Local maxima of `|corr|` over the grid, largest first (ties by position),
/// at most `count` of them.
pub fn grid_peaks(corr: &DVector<f64>, count: usize) -> Vec<usize> {
    let m = corr.len();
    let abs = |j: usize| corr[j].abs();
    let mut peaks: Vec<usize> = (0..m)
        .filter(|&j| {
            let left = j == 0 || abs(j) >= abs(j - 1);
            let right = j + 1 == m || abs(j) >= abs(j + 1);
            left && right && abs(j) > 0.0
        })
        .collect();
    peaks.sort_by(|&a, &b| abs(b).total_cmp(&abs(a)).then(a.cmp(&b)));
    peaks.truncate(count);
    peaks
}

/// Refines the grid peak at node `j` within its two neighbouring cells.
pub fn refine_peak(
    problem: &Problem,
    grid: &GridImages,
    w: &DVector<f64>,
    corr: &DVector<f64>,
    j: usize,
    iters: usize,
) -> (Atom, f64) {
    let sign = Sign::of(corr[j]);
    let a = grid.nodes[j.saturating_sub(1)];
    let b = grid.nodes[(j + 1).min(grid.len() - 1)];
    let (x, v) = refine_max(problem, w, sign, a, b, grid.nodes[j], iters);
    if v > corr[j].abs() {
        (Atom::new(x, sign), v)
    } else {
        (Atom::new(grid.nodes[j], sign), corr[j].abs())
    }
}

/// Grid scan followed by local refinement of the `LMO_PEAKS` largest grid
/// peaks.
///
/// Returns the atom and `M`, its signed correlation (`>= 0`). Among equal
/// maxima the smallest parameter wins. `w = 0` yields the first node with
/// `M = 0`.
pub fn lmo_on_grid(problem: &Problem, grid: &GridImages, w: &DVector<f64>, refine_iters: usize) -> (Atom, f64) {
    let corr = grid.correlations(w);
    let peaks = grid_peaks(&corr, LMO_PEAKS);
    let mut best = (Atom::new(grid.nodes[0], Sign::Plus), 0.0);
    for j in peaks {
        let cand = refine_peak(problem, grid, w, &corr, j, refine_iters);
        if cand.1 > best.1 || (cand.1 == best.1 && cand.0.param < best.0.param) {
            best = cand;
        }
    }
    best
}

/// Convenience form that builds the grid on the fly.
pub fn lmo(problem: &Problem, w: &DVector<f64>, grid_size: usize, refine_iters: usize) -> (Atom, f64) {
    let grid = GridImages::new(problem, grid_size);
    lmo_on_grid(problem, &grid, w, refine_iters)
}
