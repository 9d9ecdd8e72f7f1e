//! Small dense linear-algebra helpers. Matrices are `nalgebra` types; the
//! singular value decomposition is computed by `faer`.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

/// Full SVD `m = U diag(s) V^T` with square `U`, `V` and `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> Svd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Svd {
            u: DMatrix::identity(rows, rows),
            s: Vec::new(),
            v: DMatrix::identity(cols, cols),
        };
    }
    let fm = Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let dec = fm.svd().expect("SVD of a finite matrix converges");
    let sv = dec.S().column_vector();
    let k = rows.min(cols);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let col_of = |c: usize| if c < k { order[c] } else { c };
    let (fu, fv) = (dec.U(), dec.V());
    Svd {
        u: DMatrix::from_fn(rows, rows, |i, c| fu[(i, col_of(c))]),
        s: order.iter().map(|&i| sv[i]).collect(),
        v: DMatrix::from_fn(cols, cols, |i, c| fv[(i, col_of(c))]),
    }
}

/// Singular values (descending, padded with zeros to `cols`) and the full set
/// of right singular vectors as columns of a square matrix.
pub fn full_right_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let cols = m.ncols();
    if cols == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let mut d = svd(m);
    d.s.resize(cols, 0.0);
    (d.s, d.v)
}

/// Singular values (descending) and the full set of left singular vectors.
pub fn full_left_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (sv, u) = full_right_svd(&m.transpose());
    (sv, u)
}

/// Rank cutoff `max(rows, cols) * eps * sigma_max`.
pub fn rank_cutoff(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0;
    }
    let sv = svd(m).s;
    let smax = sv.first().cloned().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let cut = rank_cutoff(rows, cols, smax);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Orthonormal bases of `range(m)` and its orthogonal complement in `R^rows`.
pub fn range_and_complement(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return (DMatrix::zeros(rows, 0), DMatrix::identity(rows, rows));
    }
    let (sv, u) = full_left_svd(m);
    let smax = sv.first().cloned().unwrap_or(0.0);
    let rank = if smax == 0.0 {
        0
    } else {
        let cut = rank_cutoff(rows, cols, smax);
        sv.iter().filter(|&&s| s > cut).count()
    };
    let range = u.columns(0, rank).into_owned();
    let complement = u.columns(rank, rows - rank).into_owned();
    (range, complement)
}

/// Minimum-norm least-squares solution of `m x = rhs`.
pub fn lstsq(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DVector::zeros(0);
    }
    let d = svd(m);
    let smax = d.s.first().cloned().unwrap_or(0.0);
    let cut = rank_cutoff(rows, cols, smax);
    let mut x = DVector::zeros(cols);
    for (k, &s) in d.s.iter().enumerate() {
        if s > cut && s > 0.0 {
            x += d.v.column(k) * (d.u.column(k).dot(rhs) / s);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_matrix_has_null_vectors() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, 3.0]);
        let (sv, v) = full_right_svd(&m);
        assert_eq!(sv.len(), 4);
        assert_eq!(v.shape(), (4, 4));
        for c in 2..4 {
            let r = &m * v.column(c);
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn complement_is_orthogonal_to_range() {
        let b = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 2.0]);
        let (r, c) = range_and_complement(&b);
        assert_eq!(r.ncols(), 1);
        assert_eq!(c.ncols(), 2);
        assert!((c.transpose() * &b).norm() < 1e-12);
        assert_eq!(numerical_rank(&b), 1);
    }

    #[test]
    fn factorization_survives_tiny_entries() {
        // entries spanning 1e-18..1 once tripped an iterative SVD
        let m = DMatrix::from_column_slice(
            3,
            3,
            &[
                -2.151927177185455e-18,
                -1.4426783852908689e-13,
                -1.0,
                -0.8680667569486468,
                -0.9956525709962095,
                -4.132046008748582e-14,
                -0.8561676648531289,
                -0.9935232862581704,
                -3.5079358733702226e-14,
            ],
        );
        let d = svd(&m);
        let rec = &d.u * DMatrix::from_diagonal(&DVector::from_vec(d.s.clone())) * d.v.transpose();
        assert!((rec - &m).norm() < 1e-14);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn lstsq_matches_normal_equations() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let x = lstsq(&b, &y);
        let g = b.transpose() * (&b * &x - &y);
        assert!(g.norm() < 1e-12);
    }
}
