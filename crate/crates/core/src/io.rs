//! Problem and result files (JSON) and plot data (CSV).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atoms::{self, Sign, WeightedAtom};
use crate::certificate::CertificateReport;
use crate::error::{Error, Result};
use crate::kernel::{Domain, Kernel};
use crate::model::{Fidelity, Kind, Problem, ProblemSpec};
use crate::oracle::OracleResult;
use crate::solver::{SolveOutput, SolverOptions, SparseSolution};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Samples in a reconstruction CSV.
pub const RECON_POINTS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Measures,
    Tv1d,
    Spline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: KindName,
    pub domain: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spline_order: Option<usize>,
    pub kernels: Vec<Kernel>,
    pub data: Vec<f64>,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<SolverOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ProblemFile {
    /// Parses a problem file; errors name the offending key and position.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                Error::Parse(inner.to_string())
            } else {
                Error::Parse(format!("at key `{path}`: {inner}"))
            }
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    pub fn from_spec(spec: &ProblemSpec, options: Option<SolverOptions>, seed: Option<u64>) -> Self {
        let (kind, spline_order) = match spec.kind {
            Kind::Measures => (KindName::Measures, None),
            Kind::Tv1d => (KindName::Tv1d, None),
            Kind::Spline { order } => (KindName::Spline, Some(order)),
        };
        ProblemFile {
            kind,
            domain: [spec.domain.lo, spec.domain.hi],
            spline_order,
            kernels: spec.kernels.clone(),
            data: spec.data.clone(),
            lambda: spec.lambda(),
            options,
            seed,
        }
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let kind = match (self.kind, self.spline_order) {
            (KindName::Measures, None) => Kind::Measures,
            (KindName::Tv1d, None) => Kind::Tv1d,
            (KindName::Spline, Some(order)) => Kind::Spline { order },
            (KindName::Spline, None) => {
                return Err(Error::MalformedSpec("key `spline_order` is required for kind spline".into()))
            }
            (_, Some(_)) => {
                return Err(Error::MalformedSpec("key `spline_order` is only valid for kind spline".into()))
            }
        };
        let domain = Domain::new(self.domain[0], self.domain[1])
            .map_err(|e| Error::MalformedSpec(format!("key `domain`: {e}")))?;
        let spec = ProblemSpec {
            kind,
            domain,
            kernels: self.kernels.clone(),
            data: self.data.clone(),
            fidelity: Fidelity::Quadratic { lambda: self.lambda },
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn solver_options(&self) -> SolverOptions {
        self.options.unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomRecord {
    pub param: f64,
    pub sign: Sign,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateRecord {
    pub w: Vec<f64>,
    pub sup_value: f64,
    pub sup_location: f64,
    pub grid_size: usize,
    pub tol: f64,
    pub active_correlations: Vec<f64>,
    pub null_residuals: Vec<f64>,
    pub fidelity_link_residual: f64,
    pub c1_bounded: bool,
    pub c2_saturated: bool,
    pub c3_null_orthogonal: bool,
    pub c4_fidelity_link: bool,
}

impl From<&CertificateReport> for CertificateRecord {
    fn from(r: &CertificateReport) -> Self {
        let c = &r.certificate;
        CertificateRecord {
            w: c.w.iter().copied().collect(),
            sup_value: c.sup_value,
            sup_location: c.sup_location,
            grid_size: c.grid_size,
            tol: r.tol,
            active_correlations: c.active_correlations.clone(),
            null_residuals: c.null_residuals.clone(),
            fidelity_link_residual: c.fidelity_link_residual,
            c1_bounded: r.c1_bounded,
            c2_saturated: r.c2_saturated,
            c3_null_orthogonal: r.c3_null_orthogonal,
            c4_fidelity_link: r.c4_fidelity_link,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub version: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultSource {
    Solver,
    OracleLasso,
    OracleExact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub source: ResultSource,
    pub atoms: Vec<AtomRecord>,
    pub null_coeffs: Vec<f64>,
    pub objective: f64,
    pub gap: Option<f64>,
    pub p: usize,
    #[serde(rename = "dim_HN")]
    pub dim_hn: usize,
    pub certified: bool,
    pub converged: bool,
    pub certificate: Option<CertificateRecord>,
    pub iterations: usize,
    pub grid: Option<usize>,
    pub meta: Meta,
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ResultFile {
    pub fn from_solve(problem: &Problem, out: &SolveOutput) -> Self {
        ResultFile {
            source: ResultSource::Solver,
            atoms: records(&out.solution),
            null_coeffs: out.solution.null_coeffs.clone(),
            objective: out.report.objective,
            gap: finite_or_none(out.report.gap),
            p: out.solution.p(),
            dim_hn: problem.dim_quotient(),
            certified: out.report.certified,
            converged: out.report.converged,
            certificate: Some(CertificateRecord::from(&out.certificate)),
            iterations: out.report.iterations,
            grid: None,
            meta: Meta {
                version: VERSION.to_string(),
                wall_time_s: out.report.wall_time_s,
            },
        }
    }

    /// Oracle output; the nonzero grid weights become the atoms.
    pub fn from_oracle(problem: &Problem, r: &OracleResult, source: ResultSource, wall_time_s: f64) -> Self {
        let solution = r.to_solution();
        ResultFile {
            source,
            atoms: records(&solution),
            null_coeffs: r.null_coeffs.clone(),
            objective: r.objective,
            gap: None,
            p: solution.p(),
            dim_hn: problem.dim_quotient(),
            certified: false,
            converged: r.converged,
            certificate: None,
            iterations: r.iterations,
            grid: Some(r.nodes.len()),
            meta: Meta {
                version: VERSION.to_string(),
                wall_time_s,
            },
        }
    }

    pub fn solution(&self) -> SparseSolution {
        SparseSolution {
            atoms: self.atoms.iter().map(|a| WeightedAtom::new(a.param, a.sign, a.weight)).collect(),
            null_coeffs: self.null_coeffs.clone(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse(format!("at key `{}`: {}", e.path(), e.inner())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result files serialize")
    }

    /// The document without `meta`, for golden comparisons.
    pub fn golden_value(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("result files serialize");
        v.as_object_mut().expect("object").remove("meta");
        v
    }
}

fn records(solution: &SparseSolution) -> Vec<AtomRecord> {
    solution
        .atoms
        .iter()
        .map(|a| AtomRecord {
            param: a.atom.param,
            sign: a.atom.sign,
            weight: a.weight,
        })
        .collect()
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("csv: {e}"))
}

fn write_pairs<W: Write>(out: W, header: [&str; 2], rows: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for (a, b) in rows {
        w.write_record([a.to_string(), b.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// `param,correlation` samples of the certificate.
pub fn write_certificate_csv<W: Write>(out: W, curve: &[(f64, f64)]) -> Result<()> {
    write_pairs(out, ["param", "correlation"], curve.iter().copied())
}

/// `(s, u(s))` at `RECON_POINTS` equispaced samples; samples landing on a jump
/// are skipped.
pub fn reconstruction_samples(problem: &Problem, solution: &SparseSolution) -> Result<Vec<(f64, f64)>> {
    let dom = problem.domain();
    let step = dom.len() / (RECON_POINTS - 1) as f64;
    let mut out = Vec::with_capacity(RECON_POINTS);
    for i in 0..RECON_POINTS {
        let s = if i + 1 == RECON_POINTS { dom.hi } else { dom.lo + step * i as f64 };
        match atoms::reconstruct(problem, solution, s) {
            Ok(u) => out.push((s, u)),
            Err(Error::JumpPointQuery(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn write_reconstruction_csv<W: Write>(out: W, samples: &[(f64, f64)]) -> Result<()> {
    write_pairs(out, ["s", "u"], samples.iter().copied())
}
