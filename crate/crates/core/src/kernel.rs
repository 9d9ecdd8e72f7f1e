//! Measurement kernels and their integrals against truncated powers.
//!
//! Every measurement is a pairing `(Au)_i = <k_i, u>`. Dirac atoms need point
//! values of `k_i`; step and Green atoms need the truncated moments
//! `M_r(x) = int_x^hi k(s) (s - lo)^r ds`, which are served from a cumulative
//! table built once per kernel (closed forms where they exist).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, simpson_estimate};

/// Absolute tolerance for kernel integrals over the whole domain.
pub const QUAD_TOL: f64 = 1e-10;
/// Default number of table panels across the domain.
pub const DEFAULT_PANELS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::MalformedSpec(format!(
                "domain must satisfy lo < hi (got [{lo}, {hi}])"
            )));
        }
        Ok(Domain { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    /// Distance kept from both endpoints, since the domain is open.
    pub fn margin(&self) -> f64 {
        1e-9 * self.len()
    }

    pub fn contains_with_margin(&self, x: f64) -> bool {
        x >= self.lo + self.margin() && x <= self.hi - self.margin()
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo + self.margin(), self.hi - self.margin())
    }

    /// `m` equispaced parameters from `lo + margin` to `hi - margin`.
    /// Grids with `m = 2^j + 1` nest into the grid with `2m - 1` nodes.
    pub fn grid(&self, m: usize) -> Vec<f64> {
        let a = self.lo + self.margin();
        let b = self.hi - self.margin();
        if m == 1 {
            return vec![0.5 * (a + b)];
        }
        let step = (b - a) / (m - 1) as f64;
        (0..m)
            .map(|j| if j + 1 == m { b } else { a + j as f64 * step })
            .collect()
    }
}

/// Kernel descriptor as it appears in problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    /// `exp(-(t - center)^2 / (2 width^2))`
    Gaussian { center: f64, width: f64 },
    /// `cos(2 pi freq u)` with `u` the unit-normalized coordinate.
    FourierCos { freq: f64 },
    /// `sin(2 pi freq u)` with `u` the unit-normalized coordinate.
    FourierSin { freq: f64 },
    /// Indicator of `(a, b)`.
    Cell { a: f64, b: f64 },
    /// `sin(pi u)`
    SineBump,
}

impl Kernel {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedSpec(msg));
        match *self {
            Kernel::Gaussian { center, width } => {
                if !center.is_finite() || !(width.is_finite() && width > 0.0) {
                    return bad(format!("gaussian kernel needs finite center and width > 0 (got {center}, {width})"));
                }
            }
            Kernel::FourierCos { freq } | Kernel::FourierSin { freq } => {
                if !(freq.is_finite() && freq >= 0.0) {
                    return bad(format!("fourier kernel needs freq >= 0 (got {freq})"));
                }
            }
            Kernel::Cell { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad(format!("cell kernel needs a < b (got {a}, {b})"));
                }
            }
            Kernel::SineBump => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Gaussian { .. } => "gaussian",
            Kernel::FourierCos { .. } => "fourier_cos",
            Kernel::FourierSin { .. } => "fourier_sin",
            Kernel::Cell { .. } => "cell",
            Kernel::SineBump => "sine_bump",
        }
    }

    pub fn value(&self, t: f64, dom: &Domain) -> f64 {
        match *self {
            Kernel::Gaussian { center, width } => {
                let z = (t - center) / width;
                (-0.5 * z * z).exp()
            }
            Kernel::FourierCos { freq } => (2.0 * PI * freq * (t - dom.lo) / dom.len()).cos(),
            Kernel::FourierSin { freq } => (2.0 * PI * freq * (t - dom.lo) / dom.len()).sin(),
            Kernel::Cell { a, b } => {
                if t > a && t < b {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::SineBump => (PI * (t - dom.lo) / dom.len()).sin(),
        }
    }

    /// Closed-form derivative in `t` (zero almost everywhere for cells).
    pub fn derivative(&self, t: f64, dom: &Domain) -> f64 {
        match *self {
            Kernel::Gaussian { center, width } => {
                let z = (t - center) / width;
                -z / width * (-0.5 * z * z).exp()
            }
            Kernel::FourierCos { freq } => {
                let w = 2.0 * PI * freq / dom.len();
                -w * (w * (t - dom.lo)).sin()
            }
            Kernel::FourierSin { freq } => {
                let w = 2.0 * PI * freq / dom.len();
                w * (w * (t - dom.lo)).cos()
            }
            Kernel::Cell { .. } => 0.0,
            Kernel::SineBump => {
                let w = PI / dom.len();
                w * (w * (t - dom.lo)).cos()
            }
        }
    }

    /// Closed form of `int_x^hi k(s) (s - lo)^r ds`, when one is implemented.
    fn closed_moment(&self, r: usize, x: f64, dom: &Domain) -> Option<f64> {
        let u = x - dom.lo;
        match *self {
            Kernel::Cell { a, b } => {
                let a = a.max(dom.lo);
                let b = b.min(dom.hi);
                if x >= b || a >= b {
                    return Some(0.0);
                }
                let from = x.max(a) - dom.lo;
                let p = (r + 1) as i32;
                Some(((b - dom.lo).powi(p) - from.powi(p)) / p as f64)
            }
            Kernel::FourierCos { freq } if r == 0 => {
                if freq == 0.0 {
                    return Some(dom.hi - x);
                }
                let w = 2.0 * PI * freq / dom.len();
                Some(((w * dom.len()).sin() - (w * u).sin()) / w)
            }
            Kernel::FourierSin { freq } if r == 0 => {
                if freq == 0.0 {
                    return Some(0.0);
                }
                let w = 2.0 * PI * freq / dom.len();
                Some(((w * u).cos() - (w * dom.len()).cos()) / w)
            }
            Kernel::SineBump if r == 0 => {
                let w = PI / dom.len();
                Some(((w * u).cos() + 1.0) / w)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum MomentSource {
    Closed,
    /// `cum[j] = int_{node_j}^{hi} k(s) (s - lo)^r ds`
    Table(Vec<f64>),
}

/// Truncated moments of one kernel for orders `0..orders`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    kernel: Kernel,
    dom: Domain,
    panels: usize,
    step: f64,
    piece_tol: f64,
    sources: Vec<MomentSource>,
}

impl MomentTable {
    pub fn new(kernel: &Kernel, dom: Domain, orders: usize, panels: usize) -> Result<Self> {
        let panels = panels.max(1);
        let step = dom.len() / panels as f64;
        let piece_tol = QUAD_TOL / panels as f64;
        let mut sources = Vec::with_capacity(orders);
        for r in 0..orders {
            if kernel.closed_moment(r, dom.lo, &dom).is_some() {
                sources.push(MomentSource::Closed);
                continue;
            }
            let f = |s: f64| kernel.value(s, &dom) * (s - dom.lo).powi(r as i32);
            let mut cum = vec![0.0; panels + 1];
            for j in (0..panels).rev() {
                let a = dom.lo + j as f64 * step;
                let b = if j + 1 == panels { dom.hi } else { dom.lo + (j + 1) as f64 * step };
                cum[j] = cum[j + 1] + adaptive_simpson(&f, a, b, piece_tol, 1)?;
            }
            sources.push(MomentSource::Table(cum));
        }
        Ok(MomentTable {
            kernel: kernel.clone(),
            dom,
            panels,
            step,
            piece_tol,
            sources,
        })
    }

    pub fn orders(&self) -> usize {
        self.sources.len()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// `int_x^hi k(s) (s - lo)^r ds`; `x` is clamped into `[lo, hi]`.
    pub fn moment(&self, r: usize, x: f64) -> f64 {
        let dom = &self.dom;
        let x = x.clamp(dom.lo, dom.hi);
        match &self.sources[r] {
            MomentSource::Closed => self
                .kernel
                .closed_moment(r, x, dom)
                .expect("closed form exists for this order"),
            MomentSource::Table(cum) => {
                let j = (((x - dom.lo) / self.step).floor() as usize).min(self.panels);
                if j == self.panels {
                    return 0.0;
                }
                let right = if j + 1 == self.panels {
                    dom.hi
                } else {
                    dom.lo + (j + 1) as f64 * self.step
                };
                let kernel = &self.kernel;
                let f = |s: f64| kernel.value(s, dom) * (s - dom.lo).powi(r as i32);
                simpson_estimate(&f, x, right, self.piece_tol) + cum[j + 1]
            }
        }
    }

    /// `int_x^hi k(s) (s - x)^(q-1) / (q-1)! ds` for `q >= 1`, assembled from
    /// the shifted moments by binomial expansion.
    pub fn truncated_power(&self, q: usize, x: f64) -> f64 {
        debug_assert!(q >= 1 && q <= self.orders());
        let d = -(x - self.dom.lo);
        let mut total = 0.0;
        for r in 0..q {
            let e = q - 1 - r;
            let coeff = d.powi(e as i32) / (factorial(e) * factorial(r));
            total += coeff * self.moment(r, x);
        }
        total
    }

    /// `int_lo^hi k(s) s^j ds`.
    pub fn monomial_integral(&self, j: usize) -> f64 {
        let lo = self.dom.lo;
        (0..=j)
            .map(|r| binomial(j, r) * lo.powi((j - r) as i32) * self.moment(r, lo))
            .sum()
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Domain {
        Domain::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn serde_tags_match_descriptor_format() {
        let k: Kernel =
            serde_json::from_str(r#"{"type":"gaussian","center":0.5,"width":0.1}"#).unwrap();
        assert_eq!(k, Kernel::Gaussian { center: 0.5, width: 0.1 });
        let k: Kernel = serde_json::from_str(r#"{"type":"sine_bump"}"#).unwrap();
        assert_eq!(k, Kernel::SineBump);
        let k: Kernel = serde_json::from_str(r#"{"type":"fourier_cos","freq":2}"#).unwrap();
        assert_eq!(k, Kernel::FourierCos { freq: 2.0 });
        assert!(serde_json::from_str::<Kernel>(r#"{"type":"cell","a":0,"b":1,"c":2}"#).is_err());
    }

    #[test]
    fn derivatives_match_central_differences() {
        let dom = Domain::new(-1.0, 2.0).unwrap();
        let kernels = [
            Kernel::Gaussian { center: 0.3, width: 0.2 },
            Kernel::FourierCos { freq: 2.0 },
            Kernel::FourierSin { freq: 3.0 },
            Kernel::SineBump,
        ];
        let h = 1e-6;
        for k in &kernels {
            for i in 0..20 {
                let t = -0.9 + 0.14 * i as f64;
                let fd = (k.value(t + h, &dom) - k.value(t - h, &dom)) / (2.0 * h);
                assert!((fd - k.derivative(t, &dom)).abs() < 1e-6, "{k:?} at {t}");
            }
        }
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        let dom = Domain::new(-0.5, 1.5).unwrap();
        let kernels = [
            Kernel::FourierCos { freq: 1.5 },
            Kernel::FourierSin { freq: 2.0 },
            Kernel::SineBump,
            Kernel::Cell { a: 0.1, b: 0.8 },
        ];
        for k in &kernels {
            for r in 0..3 {
                for &x in &[-0.4, 0.0, 0.35, 0.9, 1.45] {
                    let Some(closed) = k.closed_moment(r, x, &dom) else { continue };
                    let f = |s: f64| k.value(s, &dom) * (s - dom.lo).powi(r as i32);
                    // panel edges at the cell ends keep Simpson exact there
                    let quad = if let Kernel::Cell { a, b } = k {
                        let from = x.max(*a);
                        let inside = |s: f64| (s - dom.lo).powi(r as i32);
                        if from >= *b { 0.0 } else { adaptive_simpson(&inside, from, *b, 1e-12, 8).unwrap() }
                    } else {
                        adaptive_simpson(&f, x, dom.hi, 1e-12, 64).unwrap()
                    };
                    assert!((closed - quad).abs() < 1e-10, "{k:?} r={r} x={x}: {closed} vs {quad}");
                }
            }
        }
    }

    #[test]
    fn cosine_step_pairing() {
        let t = MomentTable::new(&Kernel::FourierCos { freq: 1.0 }, unit(), 1, DEFAULT_PANELS).unwrap();
        let v = t.moment(0, 0.25);
        assert!((v + 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert!((v + 0.15915494).abs() < 1e-8);
    }

    #[test]
    fn table_moments_match_direct_quadrature() {
        let dom = unit();
        let k = Kernel::Gaussian { center: 0.4, width: 0.07 };
        let t = MomentTable::new(&k, dom, 3, DEFAULT_PANELS).unwrap();
        for r in 0..3 {
            for &x in &[0.0, 0.123456, 0.4, 0.77, 0.999] {
                let f = |s: f64| k.value(s, &dom) * s.powi(r as i32);
                let direct = adaptive_simpson(&f, x, 1.0, 1e-13, 256).unwrap();
                assert!((t.moment(r, x) - direct).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn truncated_power_ramp() {
        let t = MomentTable::new(&Kernel::Cell { a: 0.0, b: 1.0 }, unit(), 2, DEFAULT_PANELS).unwrap();
        assert!((t.truncated_power(1, 0.25) - 0.75).abs() < 1e-15);
        assert!((t.truncated_power(2, 0.0) - 0.5).abs() < 1e-15);
        assert!((t.truncated_power(2, 0.5) - 0.125).abs() < 1e-15);
        assert!((t.monomial_integral(1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn truncated_power_against_direct_integral() {
        let dom = Domain::new(1.0, 3.0).unwrap();
        let k = Kernel::Gaussian { center: 2.2, width: 0.3 };
        let t = MomentTable::new(&k, dom, 4, DEFAULT_PANELS).unwrap();
        for q in 1..=4usize {
            for &x in &[1.1, 1.9, 2.5] {
                let f = |s: f64| k.value(s, &dom) * (s - x).powi(q as i32 - 1) / factorial(q - 1);
                let direct = adaptive_simpson(&f, x, dom.hi, 1e-13, 128).unwrap();
                assert!((t.truncated_power(q, x) - direct).abs() < 1e-10, "q={q} x={x}");
            }
        }
    }

    #[test]
    fn nested_grids_share_nodes() {
        let dom = Domain::new(-2.0, 5.0).unwrap();
        let coarse = dom.grid(65);
        let fine = dom.grid(129);
        for (j, x) in coarse.iter().enumerate() {
            assert!((fine[2 * j] - x).abs() <= 1e-15 * 7.0);
        }
        assert_eq!(coarse[0], dom.lo + dom.margin());
        assert_eq!(*coarse.last().unwrap(), dom.hi - dom.margin());
    }
}
