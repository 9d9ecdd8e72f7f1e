use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use exsparse::certificate::certificate_curve;
use exsparse::generate::{demo_instance, Demo};
use exsparse::io::{self, ProblemFile, ResultFile, ResultSource};
use exsparse::oracle::{self, CompareTolerances, LassoOptions};
use exsparse::solver::dual_candidate;
use exsparse::{certify, solve, validate, Kind, Problem, SolverOptions};

#[derive(Debug, Parser)]
#[command(name = "exsparse", version, about = "Sparse solutions of inverse problems over extremal atoms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleModeArg {
    Lasso,
    Exact,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve, prune and certify a problem file.
    Solve {
        problem: PathBuf,
        /// Result file (stdout when omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Write the certificate curve as CSV.
        #[arg(long)]
        emit_cert: Option<PathBuf>,
        /// Write reconstruction samples as CSV (tv1d and spline only).
        #[arg(long)]
        emit_recon: Option<PathBuf>,
    },
    /// Solve the grid-discretized problem.
    Oracle {
        problem: PathBuf,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = OracleModeArg::Lasso)]
        mode: OracleModeArg,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compare the solver against the grid LASSO oracle.
    Compare {
        problem: PathBuf,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
    },
    /// Re-check a result file against its problem file.
    Certify { problem: PathBuf, result: PathBuf },
    /// Generate, solve and write a seeded demo instance.
    Demo {
        /// spikes, staircase or spline
        name: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

pub enum Outcome {
    Pass,
    Uncertified,
}

impl Outcome {
    fn from_flag(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Uncertified
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Solve {
            problem,
            out,
            emit_cert,
            emit_recon,
        } => {
            let file = ProblemFile::read(&problem)?;
            let outputs = SolveOutputs {
                result: out,
                cert: emit_cert,
                recon: emit_recon,
            };
            run_solve(&file, &outputs)
        }
        Command::Oracle {
            problem,
            grid,
            mode,
            out,
        } => cmd_oracle(&problem, grid, mode, out.as_deref()),
        Command::Compare { problem, grid } => cmd_compare(&problem, grid),
        Command::Certify { problem, result } => cmd_certify(&problem, &result),
        Command::Demo { name, seed, out_dir } => cmd_demo(&name, seed, &out_dir),
    }
}

fn load(file: &ProblemFile) -> Result<(Problem, SolverOptions)> {
    let spec = file.to_spec()?;
    let problem = Problem::new(spec)?;
    Ok((problem, file.solver_options()))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

struct SolveOutputs {
    result: Option<PathBuf>,
    cert: Option<PathBuf>,
    recon: Option<PathBuf>,
}

fn run_solve(file: &ProblemFile, outputs: &SolveOutputs) -> Result<Outcome> {
    let (problem, opts) = load(file)?;
    let report = validate(&problem);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let out = solve(&problem, &opts);
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    let result = ResultFile::from_solve(&problem, &out);
    write_text(outputs.result.as_deref(), &result.to_json())?;
    if let Some(path) = &outputs.cert {
        let curve = certificate_curve(&problem, &out.certificate.certificate.w, opts.certify_options().grid_size());
        io::write_certificate_csv(create(path)?, &curve)?;
    }
    if let Some(path) = &outputs.recon {
        if problem.kind() == Kind::Measures {
            anyhow::bail!("--emit-recon needs kind tv1d or spline");
        }
        let samples = io::reconstruction_samples(&problem, &out.solution)?;
        io::write_reconstruction_csv(create(path)?, &samples)?;
    }
    eprintln!(
        "objective {:.12e}  gap {:.3e}  p {}  dim_HN {}  certified {}",
        out.report.objective, out.report.gap, out.report.p, out.report.dim_hn, out.report.certified
    );
    Ok(Outcome::from_flag(out.report.certified))
}

fn cmd_oracle(path: &Path, grid: usize, mode: OracleModeArg, out: Option<&Path>) -> Result<Outcome> {
    let (problem, _) = load(&ProblemFile::read(path)?)?;
    let start = Instant::now();
    let (r, source) = match mode {
        OracleModeArg::Lasso => (
            oracle::grid_solve_lasso(&problem, grid, &LassoOptions::default())?,
            ResultSource::OracleLasso,
        ),
        OracleModeArg::Exact => (oracle::grid_solve_exact(&problem, grid)?, ResultSource::OracleExact),
    };
    let result = ResultFile::from_oracle(&problem, &r, source, start.elapsed().as_secs_f64());
    write_text(out, &result.to_json())?;
    eprintln!("objective {:.12e}  p {}  converged {}", r.objective, result.p, r.converged);
    Ok(Outcome::from_flag(r.converged))
}

fn cmd_compare(path: &Path, grid: usize) -> Result<Outcome> {
    let (problem, opts) = load(&ProblemFile::read(path)?)?;
    let out = solve(&problem, &opts);
    let r = oracle::grid_solve_lasso(&problem, grid, &LassoOptions::default())?;
    let cmp = oracle::compare(&problem, &out.solution, out.report.objective, &r, &CompareTolerances::default());
    println!("solver objective   {:.12e}", cmp.solver_objective);
    println!("oracle objective   {:.12e}  (grid {grid})", cmp.oracle_objective);
    println!("relative diff      {:.3e}  {}", cmp.objective_rel_diff, verdict(cmp.objective_ok));
    println!(
        "support hausdorff  {:.3e}  ({:.2} grid steps)  {}",
        cmp.hausdorff,
        cmp.hausdorff / cmp.grid_step,
        verdict(cmp.support_ok)
    );
    Ok(Outcome::from_flag(cmp.pass()))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn cmd_certify(problem_path: &Path, result_path: &Path) -> Result<Outcome> {
    let (problem, opts) = load(&ProblemFile::read(problem_path)?)?;
    let result = ResultFile::read(result_path)?;
    let solution = result.solution();
    if solution.null_coeffs.len() != problem.kind().null_dim() {
        anyhow::bail!(
            "result has {} null coefficients, problem kind needs {}",
            solution.null_coeffs.len(),
            problem.kind().null_dim()
        );
    }
    let w = dual_candidate(&problem, &solution);
    let report = certify(&problem, &solution, &w, &opts.certify_options());
    let c = &report.certificate;
    println!("C1 sup correlation      {:.12}  {}", c.sup_value, verdict(report.c1_bounded));
    println!(
        "C2 saturation deviation {:.3e}  {}",
        report.max_saturation_deviation(),
        verdict(report.c2_saturated)
    );
    println!("C3 null residual        {:.3e}  {}", report.max_null_residual(), verdict(report.c3_null_orthogonal));
    println!("C4 fidelity link        {:.3e}  {}", c.fidelity_link_residual, verdict(report.c4_fidelity_link));
    Ok(Outcome::from_flag(report.passed()))
}

fn cmd_demo(name: &str, seed: u64, out_dir: &Path) -> Result<Outcome> {
    let demo: Demo = name.parse()?;
    let instance = demo_instance(demo, seed)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let file = ProblemFile::from_spec(&instance.spec, None, Some(seed));
    let stem = |suffix: &str| out_dir.join(format!("{name}_{suffix}"));
    std::fs::write(stem("problem.json"), format!("{}\n", file.to_json()))?;
    let recon = (demo != Demo::Spikes).then(|| stem("recon.csv"));
    let outputs = SolveOutputs {
        result: Some(stem("result.json")),
        cert: Some(stem("cert.csv")),
        recon,
    };
    run_solve(&file, &outputs)
}
