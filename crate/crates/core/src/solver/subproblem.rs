//! Weight re-optimization over a fixed atom set.
//!
//! With `beta` eliminated by least squares the subproblem is
//!
//! ```text
//! min_{gamma >= 0}  sum(gamma) + lambda/2 || Kp gamma - yp ||^2
//! ```
//!
//! where `Kp`, `yp` are the atom images and data projected off `span(B)`.
//! It is solved by a primal active-set method in the style of Lawson and
//! Hanson. On the passive set the minimizer comes from an SVD; when the
//! passive columns are dependent and the linear term has a component in
//! their null space, the objective decreases without bound along that
//! direction inside the subspace, so the method walks along it until a
//! weight reaches zero.

use nalgebra::{DMatrix, DVector};

use crate::linalg;


/// Relative singular-value cutoff for the passive-set solve.
const RANK_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct QpOutcome {
    pub gamma: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

enum Step {
    Minimizer(DVector<f64>),
    Ray(DVector<f64>),
}

fn passive_step(kp: &DMatrix<f64>, yp: &DVector<f64>, lambda: f64, idx: &[usize], gamma: &[f64]) -> Step {
    let n = kp.nrows();
    let p = idx.len();
    let cols = kp.select_columns(idx);
    let rows = n.max(p);
    let mut padded = DMatrix::zeros(rows, p);
    padded.view_mut((0, 0), (n, p)).copy_from(&cols);
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, n).copy_from(yp);

    let svd = linalg::svd(&padded);
    let smax = svd.s.first().cloned().unwrap_or(0.0);
    let cut = RANK_RTOL * smax;
    let ones = DVector::from_element(p, 1.0);

    // null-space part of the all-ones vector
    let mut null_ones = ones.clone();
    for k in 0..p {
        if smax > 0.0 && svd.s[k] > cut {
            let v = svd.v.column(k);
            null_ones -= v * v.dot(&ones);
        }
    }
    if null_ones.norm() > 1e-9 * (p as f64).sqrt() {
        return Step::Ray(-null_ones);
    }

    let current = DVector::from_iterator(p, idx.iter().map(|&i| gamma[i]));
    let mut z = current.clone();
    for k in 0..p {
        let s = svd.s[k];
        if smax == 0.0 || s <= cut {
            continue;
        }
        let v = svd.v.column(k);
        let coef = svd.u.column(k).dot(&rhs) / s - v.dot(&ones) / (lambda * s * s);
        // replace the row-space component of the current point
        z += v * (coef - v.dot(&current));
    }
    Step::Minimizer(z)
}

/// Active-set solve started from `gamma0`. `force` names an index that
/// enters the passive set immediately (a freshly inserted atom).
pub fn nonneg_qp(
    kp: &DMatrix<f64>,
    yp: &DVector<f64>,
    lambda: f64,
    gamma0: &[f64],
    force: Option<usize>,
    tol: f64,
    max_iters: usize,
) -> QpOutcome {
    let p = kp.ncols();
    let mut gamma: Vec<f64> = gamma0.iter().map(|&g| g.max(0.0)).collect();
    let mut passive: Vec<bool> = gamma.iter().map(|&g| g > 0.0).collect();
    if let Some(f) = force {
        passive[f] = true;
    }
    let mut iterations = 0;
    loop {
        // make gamma optimal on the passive set with strictly positive entries
        loop {
            let idx: Vec<usize> = (0..p).filter(|&i| passive[i]).collect();
            if idx.is_empty() {
                break;
            }
            iterations += 1;
            if iterations > max_iters {
                return QpOutcome { gamma, converged: false, iterations };
            }
            let (dir, full) = match passive_step(kp, yp, lambda, &idx, &gamma) {
                Step::Minimizer(z) => {
                    if z.iter().all(|&v| v > 0.0) {
                        for (k, &i) in idx.iter().enumerate() {
                            gamma[i] = z[k];
                        }
                        break;
                    }
                    let d = DVector::from_iterator(idx.len(), idx.iter().enumerate().map(|(k, &i)| z[k] - gamma[i]));
                    (d, true)
                }
                Step::Ray(d) => (d, false),
            };
            let mut alpha = if full { 1.0 } else { f64::INFINITY };
            let mut hit = None;
            for (k, &i) in idx.iter().enumerate() {
                if dir[k] < 0.0 {
                    let a = gamma[i] / -dir[k];
                    if a < alpha {
                        alpha = a;
                        hit = Some(i);
                    }
                }
            }
            if hit.is_none() && !full {
                // a ray with no decreasing coordinate cannot occur for a bounded objective
                return QpOutcome { gamma, converged: false, iterations };
            }
            for (k, &i) in idx.iter().enumerate() {
                gamma[i] += alpha * dir[k];
            }
            if let Some(h) = hit {
                gamma[h] = 0.0;
            }
            for &i in &idx {
                if gamma[i] <= 0.0 {
                    gamma[i] = 0.0;
                    passive[i] = false;
                }
            }
        }

        let g = DVector::from_column_slice(&gamma);
        let w = (yp - kp * &g) * lambda;
        let grad = DVector::from_element(p, 1.0) - kp.transpose() * w;
        let entering = (0..p)
            .filter(|&i| !passive[i])
            .min_by(|&a, &b| grad[a].total_cmp(&grad[b]));
        match entering {
            Some(j) if grad[j] < -tol => passive[j] = true,
            _ => return QpOutcome { gamma, converged: true, iterations },
        }
    }
}
