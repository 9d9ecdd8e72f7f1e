//! Problem definition: measurement operator, quadratic fidelity and the
//! regularizer's null space, plus the quotient dimension that bounds sparsity.

use nalgebra::{DMatrix, DVector};

use crate::atoms::{self, Atom};
use crate::error::{Error, Result};
use crate::kernel::{Domain, Kernel, MomentTable, DEFAULT_PANELS};
use crate::linalg;
use crate::solver::SparseSolution;

/// Endpoint tolerance for kernels paired with Dirac atoms.
pub const ENDPOINT_TOL: f64 = 1e-9;
/// Parameter grid used for the rank surrogate of the surjectivity assumption.
pub const H0_GRID: usize = 256;

/// Regularizer family. Selects the atoms and the null space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Radon norm on measures; atoms are signed Diracs, no null space.
    Measures,
    /// Total variation in one dimension; atoms are unit steps, null space the constants.
    Tv1d,
    /// `||D^q u||_M`; atoms are truncated powers, null space the polynomials of degree < q.
    Spline { order: usize },
}

impl Kind {
    /// Dimension `k` of the null space.
    pub fn null_dim(&self) -> usize {
        match *self {
            Kind::Measures => 0,
            Kind::Tv1d => 1,
            Kind::Spline { order } => order,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kind::Measures => "measures",
            Kind::Tv1d => "tv1d",
            Kind::Spline { .. } => "spline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fidelity {
    /// `F(v) = lambda/2 ||v - y||^2`
    Quadratic { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: Kind,
    pub domain: Domain,
    pub kernels: Vec<Kernel>,
    pub data: Vec<f64>,
    pub fidelity: Fidelity,
}

impl ProblemSpec {
    pub fn n(&self) -> usize {
        self.kernels.len()
    }

    pub fn lambda(&self) -> f64 {
        match self.fidelity {
            Fidelity::Quadratic { lambda } => lambda,
        }
    }

    /// Checks the type invariants; does not look at the rank condition.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedSpec(m));
        Domain::new(self.domain.lo, self.domain.hi)?;
        if self.kernels.is_empty() {
            return bad("at least one kernel is required".into());
        }
        if self.data.len() != self.kernels.len() {
            return bad(format!(
                "data has {} entries but there are {} kernels",
                self.data.len(),
                self.kernels.len()
            ));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return bad(format!("data[{i}] is not finite"));
        }
        let lambda = self.lambda();
        if !(lambda.is_finite() && lambda > 0.0) {
            return bad(format!("lambda must be positive (got {lambda})"));
        }
        if let Kind::Spline { order } = self.kind {
            if order < 1 {
                return bad("spline_order must be >= 1".into());
            }
        }
        for (i, k) in self.kernels.iter().enumerate() {
            k.check().map_err(|e| match e {
                Error::MalformedSpec(m) => Error::MalformedSpec(format!("kernels[{i}]: {m}")),
                other => other,
            })?;
            if self.kind == Kind::Measures {
                if let Kernel::Cell { .. } = k {
                    return bad(format!("kernels[{i}]: cell kernels are not continuous and cannot pair with Diracs"));
                }
                let dom = &self.domain;
                let (a, b) = (k.value(dom.lo, dom), k.value(dom.hi, dom));
                if a.abs() > ENDPOINT_TOL || b.abs() > ENDPOINT_TOL {
                    return bad(format!(
                        "kernels[{i}] ({}) must vanish at both endpoints for kind measures (values {a:e}, {b:e})",
                        k.name()
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Null-space element `psi_j` evaluated at `s`.
pub fn null_basis_value(kind: Kind, j: usize, s: f64) -> f64 {
    match kind {
        Kind::Measures => unreachable!("measures have no null space"),
        Kind::Tv1d => 1.0,
        Kind::Spline { .. } => s.powi(j as i32),
    }
}

/// A validated problem with its kernel integral tables and the quotient
/// geometry (`range(B)` and its orthogonal complement) precomputed.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    tables: Vec<MomentTable>,
    null_images: DMatrix<f64>,
    null_range: DMatrix<f64>,
    quotient: DMatrix<f64>,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        Self::with_panels(spec, DEFAULT_PANELS)
    }

    /// Like [`Problem::new`] with an explicit number of quadrature panels.
    pub fn with_panels(spec: ProblemSpec, panels: usize) -> Result<Self> {
        spec.check()?;
        let orders = match spec.kind {
            Kind::Measures => 0,
            Kind::Tv1d => 1,
            Kind::Spline { order } => order,
        };
        let tables = if orders == 0 {
            Vec::new()
        } else {
            spec.kernels
                .iter()
                .map(|k| MomentTable::new(k, spec.domain, orders, panels))
                .collect::<Result<Vec<_>>>()?
        };
        let n = spec.n();
        let k = spec.kind.null_dim();
        let null_images = DMatrix::from_fn(n, k, |i, j| tables[i].monomial_integral(j));
        let (null_range, quotient) = linalg::range_and_complement(&null_images);
        Ok(Problem {
            spec,
            tables,
            null_images,
            null_range,
            quotient,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn kind(&self) -> Kind {
        self.spec.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.spec.domain
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda()
    }

    pub fn data(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.spec.data)
    }

    pub(crate) fn tables(&self) -> &[MomentTable] {
        &self.tables
    }

    /// `B`: column `j` holds the kernel pairings with `psi_j`.
    pub fn null_images(&self) -> &DMatrix<f64> {
        &self.null_images
    }

    /// Orthonormal basis of `span(B)^perp`, a concrete model of the quotient space.
    pub fn quotient_basis(&self) -> &DMatrix<f64> {
        &self.quotient
    }

    pub fn dim_quotient(&self) -> usize {
        self.quotient.ncols()
    }

    /// Orthogonal projection onto `span(B)^perp`.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.null_range.ncols() == 0 {
            return v.clone();
        }
        v - &self.null_range * (self.null_range.transpose() * v)
    }

    /// Least-squares null coefficients `beta` with `B beta ~ r`.
    pub fn fit_null(&self, r: &DVector<f64>) -> DVector<f64> {
        linalg::lstsq(&self.null_images, r)
    }

    pub fn fidelity_value(&self, v: &DVector<f64>) -> f64 {
        0.5 * self.lambda() * (v - self.data()).norm_squared()
    }

    /// `lambda (v - y)`; the dual candidate is its negative.
    pub fn fidelity_gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        (v - self.data()) * self.lambda()
    }

    /// Convex conjugate `F*(w) = ||w||^2 / (2 lambda) + <w, y>`.
    pub fn fidelity_conjugate(&self, w: &DVector<f64>) -> f64 {
        w.norm_squared() / (2.0 * self.lambda()) + w.dot(&self.data())
    }

    /// Assembles `K` (atom images, signs included) and `B`.
    pub fn measurement_parts(&self, atoms: &[Atom]) -> MeasurementMatrixParts {
        let mut k = DMatrix::zeros(self.n(), atoms.len());
        for (c, a) in atoms.iter().enumerate() {
            let col = atoms::unsigned_image(self, a.param) * a.sign.value();
            k.set_column(c, &col);
        }
        MeasurementMatrixParts {
            k,
            b: self.null_images.clone(),
        }
    }

    /// `A u` for a sparse solution.
    pub fn forward(&self, solution: &SparseSolution) -> DVector<f64> {
        let mut v = DVector::zeros(self.n());
        for wa in &solution.atoms {
            v += atoms::unsigned_image(self, wa.atom.param) * (wa.atom.sign.value() * wa.weight);
        }
        if !solution.null_coeffs.is_empty() {
            v += &self.null_images * DVector::from_column_slice(&solution.null_coeffs);
        }
        v
    }

    /// `J(u) = sum gamma_i + F(A u)`. Exact for pairwise-distinct atoms.
    pub fn objective(&self, solution: &SparseSolution) -> Result<f64> {
        if let Some((i, j)) = atoms::find_duplicate(self.domain(), &solution.atoms) {
            return Err(Error::DuplicateAtoms(i, j));
        }
        if solution.null_coeffs.len() != self.kind().null_dim() {
            return Err(Error::Dimension(format!(
                "expected {} null coefficients, got {}",
                self.kind().null_dim(),
                solution.null_coeffs.len()
            )));
        }
        let mass: f64 = solution.atoms.iter().map(|a| a.weight).sum();
        Ok(mass + self.fidelity_value(&self.forward(solution)))
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementMatrixParts {
    pub k: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub n: usize,
    /// Numerical rank of `{A(atom)} u {A psi_j}` over the parameter grid.
    pub rank: usize,
    pub dim_quotient: usize,
    pub h0_holds: bool,
    pub warnings: Vec<String>,
}

/// Checks the invariants and the rank surrogate of the surjectivity assumption.
pub fn validate_problem(spec: &ProblemSpec) -> Result<ValidationReport> {
    let problem = Problem::new(spec.clone())?;
    Ok(validate(&problem))
}

pub fn validate(problem: &Problem) -> ValidationReport {
    let n = problem.n();
    let grid = problem.domain().grid(H0_GRID);
    let k = problem.kind().null_dim();
    let mut m = DMatrix::zeros(n, grid.len() + k);
    for (c, &x) in grid.iter().enumerate() {
        m.set_column(c, &atoms::unsigned_image(problem, x));
    }
    for j in 0..k {
        m.set_column(grid.len() + j, &problem.null_images().column(j));
    }
    let rank = linalg::numerical_rank(&m);
    let mut warnings = Vec::new();
    if rank < n {
        warnings.push(format!(
            "measurement images span rank {rank} < N = {n}; the data may not be reachable"
        ));
    }
    ValidationReport {
        n,
        rank,
        dim_quotient: problem.dim_quotient(),
        h0_holds: rank == n,
        warnings,
    }
}

/// `B` for a spec, without keeping the tables around.
pub fn null_basis_images(spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    Ok(Problem::new(spec.clone())?.null_images().clone())
}

/// `dim H_N = N - rank(B)`.
pub fn dim_quotient(spec: &ProblemSpec) -> Result<usize> {
    Ok(Problem::new(spec.clone())?.dim_quotient())
}
