//! Command-line front end for `momsos`.
//!
//! [`run`] parses the arguments, executes one subcommand and returns the
//! process exit code:
//!
//! | code | meaning                                          |
//! |------|--------------------------------------------------|
//! | 0    | success                                          |
//! | 1    | usage or input error                             |
//! | 2    | numerical trouble in the conic solver            |
//! | 3    | infeasible (or unbounded) relaxation             |
//!
//! Standard output receives the result only on success; every diagnostic
//! goes to the error stream as a single line.

pub mod json;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use momsos_core::conic::SolveStatus;
use momsos_core::exactness::{certificate_blocks, Certifier, Classification, Tolerances, DEFAULT_GRID};
use momsos_core::poly::Polynomial;
use momsos_core::relaxation::{
    assumption_radius_check, build_q_membership, fixture, BoundingBox, MembershipResult, Pop, FIXTURE_NAMES,
};
use momsos_core::scan::{
    boundary_with, feasible_samples, refine_transitions, render_svg, scan_with, write_boundary_csv_to,
    write_scan_csv_to, AngularScan, BoundaryPolyline,
};
use serde_json::{json, Value};

/// Resolution of the feasible-sample cloud drawn in SVG output.
const SAMPLE_RESOLUTION: usize = 201;

/// Tolerance of the redundant-ball certificate behind the warning.
const RADIUS_CHECK_TOL: f64 = 1e-7;

/// Errors of a CLI invocation, each with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] momsos_core::Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use momsos_core::Error as E;
        match self {
            Self::Core(E::NumericalTrouble(_)) => 2,
            Self::Core(E::RelaxationInfeasible | E::RelaxationUnbounded) => 3,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Core(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "momsos", version, about = "Moment-SOS relaxations, exactness certificates and angular scans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the moment relaxation and print its value and candidate.
    Solve(ObjectiveArgs),
    /// Certify (or refute) exactness of the relaxation for an objective.
    Certify(CertifyArgs),
    /// Decide membership of the objective polynomial in the truncated module.
    MemberQ(MemberArgs),
    /// Decide membership of the objective polynomial in the cone at --point.
    MemberS(MemberSArgs),
    /// Classify linear objectives on a circle of directions (n = 2).
    Scan(ScanArgs),
    /// Support points of the relaxation's moment projection (n = 2).
    Boundary(BoundaryArgs),
    /// Print a bundled POP as JSON.
    Fixture(FixtureArgs),
}

#[derive(Debug, Args)]
#[group(id = "pop_source", required = true, multiple = false)]
struct PopSource {
    /// Bundled fixture: four-points | nonconvex | remark4.
    #[arg(long, group = "pop_source")]
    fixture: Option<String>,
    /// POP JSON file.
    #[arg(long, group = "pop_source")]
    pop: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PopArgs {
    #[command(flatten)]
    source: PopSource,
    /// Bounding box "x1min,x1max,x2min,x2max,…" for the grid oracle.
    #[arg(long = "box", value_name = "BOUNDS", allow_hyphen_values = true)]
    bounds: Option<String>,
    /// Relaxation order r.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    order: u32,
}

#[derive(Debug, Args)]
struct ToleranceArgs {
    /// Feasibility and value tolerance; the membership tolerance is a tenth of it.
    #[arg(long)]
    tol: Option<f64>,
}

impl ToleranceArgs {
    fn tolerances(&self) -> CliResult<Tolerances> {
        match self.tol {
            None => Ok(Tolerances::default()),
            Some(t) => Ok(Tolerances::new(t, t, t / 10.0)?),
        }
    }
}

#[derive(Debug, Args)]
struct ObjectiveArgs {
    #[command(flatten)]
    pop: PopArgs,
    /// Inline linear objective "f0,f1,…,fn" or a polynomial JSON file.
    #[arg(long, value_name = "SPEC|PATH", allow_hyphen_values = true)]
    objective: String,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: ObjectiveArgs,
    #[command(flatten)]
    tol: ToleranceArgs,
    /// Points per axis of the grid oracle.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
}

#[derive(Debug, Args)]
struct MemberArgs {
    #[command(flatten)]
    common: ObjectiveArgs,
    #[command(flatten)]
    tol: ToleranceArgs,
}

#[derive(Debug, Args)]
struct MemberSArgs {
    #[command(flatten)]
    member: MemberArgs,
    /// Base point "x1,…,xn".
    #[arg(long, allow_hyphen_values = true)]
    point: String,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[command(flatten)]
    pop: PopArgs,
    #[command(flatten)]
    tol: ToleranceArgs,
    /// Number of uniformly spaced directions.
    #[arg(long, default_value_t = 720)]
    angles: usize,
    /// Points per axis of the grid oracle.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// CSV destination; a JSON summary goes to stdout instead.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also draw the scan with the relaxation boundary.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Bisect exactness transitions (needs --out).
    #[arg(long)]
    refine: bool,
}

#[derive(Debug, Args)]
struct BoundaryArgs {
    #[command(flatten)]
    pop: PopArgs,
    /// Number of uniformly spaced directions.
    #[arg(long, default_value_t = 720)]
    angles: usize,
    /// CSV destination, stdout by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also draw the boundary.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FixtureArgs {
    /// Fixture name.
    #[arg(conflicts_with = "fixture", required_unless_present = "fixture")]
    name: Option<String>,
    /// Fixture name (alternative to the positional form).
    #[arg(long)]
    fixture: Option<String>,
}

/// Runs the CLI on `args` (including the program name), writing results to
/// `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(err, "{e}");
                1
            } else {
                let _ = write!(out, "{e}");
                0
            };
            return code;
        }
    };
    let mut buf = String::new();
    match execute(&cli.command, &mut buf, err) {
        Ok(()) => match out.write_all(buf.as_bytes()).and_then(|_| out.flush()) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                1
            }
        },
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: &Command, out: &mut String, err: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Solve(a) => solve(a, out, err),
        Command::Certify(a) => certify(a, out, err),
        Command::MemberQ(a) => member_q(a, out),
        Command::MemberS(a) => member_s(a, out),
        Command::Scan(a) => scan(a, out, err),
        Command::Boundary(a) => boundary(a, out, err),
        Command::Fixture(a) => {
            let name = a.name.as_deref().or(a.fixture.as_deref()).unwrap_or_default();
            out.push_str(&json::to_string(&load_fixture(name)?)?);
            Ok(())
        }
    }
}

fn load_fixture(name: &str) -> CliResult<Pop> {
    fixture(name).map_err(|_| {
        CliError::Usage(format!("unknown fixture '{name}' (expected one of {})", FIXTURE_NAMES.join(", ")))
    })
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn parse_floats(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite())).collect()
}

fn load_pop(args: &PopArgs) -> CliResult<Pop> {
    let mut pop = match (&args.source.fixture, &args.source.pop) {
        (Some(name), None) => load_fixture(name)?,
        (None, Some(path)) => Pop::from_json(&read_file(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        _ => return Err(CliError::Usage("give exactly one of --fixture and --pop".into())),
    };
    if let Some(spec) = &args.bounds {
        let v = parse_floats(spec).ok_or_else(|| CliError::Usage(format!("--box: '{spec}' is not a list of numbers")))?;
        if v.len() != 2 * pop.n {
            return Err(CliError::Usage(format!("--box needs {} numbers, got {}", 2 * pop.n, v.len())));
        }
        let lower = v.iter().step_by(2).copied().collect();
        let upper = v.iter().skip(1).step_by(2).copied().collect();
        pop = pop.with_bounds(BoundingBox::new(lower, upper)?)?;
    }
    Ok(pop)
}

fn load_objective(spec: &str, pop: &Pop) -> CliResult<Polynomial> {
    let f = match parse_floats(spec) {
        Some(c) => {
            if c.len() != pop.n + 1 {
                return Err(CliError::Usage(format!(
                    "--objective: a linear objective needs {} coefficients, got {}",
                    pop.n + 1,
                    c.len()
                )));
            }
            Polynomial::linear(&c)?
        }
        None => {
            let path = Path::new(spec);
            serde_json::from_str(&read_file(path)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
    };
    if f.nvars() != pop.n {
        return Err(CliError::Usage(format!("objective has {} variables, the POP has {}", f.nvars(), pop.n)));
    }
    Ok(f)
}

/// Warns when the redundant ball through the box corners has no
/// certificate at order `r`.
fn warn_radius(pop: &Pop, r: u32, err: &mut dyn Write) {
    let Some(b) = &pop.bounds else { return };
    let radius = b
        .lower
        .iter()
        .zip(&b.upper)
        .map(|(l, u)| l.abs().max(u.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    if radius <= 0.0 || 2 * r < 2 {
        return;
    }
    if let Ok(false) = assumption_radius_check(pop, radius, r, RADIUS_CHECK_TOL) {
        let _ = writeln!(
            err,
            "warning: no certificate of {radius:.4}^2 - |x|^2 at order {r}; the module may not be Archimedean at this order"
        );
    }
}

fn numerical_trouble(what: &str) -> CliError {
    CliError::Core(momsos_core::Error::NumericalTrouble(format!("{what} did not converge")))
}

fn solve(a: &ObjectiveArgs, out: &mut String, err: &mut dyn Write) -> CliResult<()> {
    let pop = load_pop(&a.pop)?;
    let f = load_objective(&a.objective, &pop)?;
    warn_radius(&pop, a.pop.order, err);
    let res = Certifier::new(&pop, a.pop.order, Tolerances::default())?.solve(&f)?;
    if res.solver_status != SolveStatus::Optimal {
        return Err(numerical_trouble("the relaxation"));
    }
    let v = json!({
        "order": a.pop.order,
        "value": res.value,
        "dual_value": res.dual_value,
        "candidate": res.candidate,
        "status": res.solver_status,
        "residuals": res.residuals,
        "iterations": res.iterations,
    });
    out.push_str(&json::to_string(&v)?);
    Ok(())
}

fn certify(a: &CertifyArgs, out: &mut String, err: &mut dyn Write) -> CliResult<()> {
    let pop = load_pop(&a.common.pop)?;
    let f = load_objective(&a.common.objective, &pop)?;
    warn_radius(&pop, a.common.pop.order, err);
    let certifier = Certifier::new(&pop, a.common.pop.order, a.tol.tolerances()?)?.with_grid_resolution(a.grid)?;
    let cert = certifier.certify(&f)?;
    if cert.relaxation_status != SolveStatus::Optimal {
        return Err(numerical_trouble("the relaxation"));
    }
    out.push_str(&json::to_string(&cert)?);
    Ok(())
}

fn membership_json(m: &MembershipResult) -> Value {
    json!({
        "verdict": m.verdict,
        "status": m.status,
        "residual": m.residual,
        "coefficient_error": m.coefficient_error,
        "blocks": m.witness.as_ref().map(certificate_blocks),
    })
}

fn member_q(a: &MemberArgs, out: &mut String) -> CliResult<()> {
    let pop = load_pop(&a.common.pop)?;
    let p = load_objective(&a.common.objective, &pop)?;
    let tols = a.tol.tolerances()?;
    let m = build_q_membership(&pop, &p, a.common.pop.order)?.decide(&pop, tols.member_tol)?;
    let mut v = membership_json(&m);
    v["order"] = json!(a.common.pop.order);
    out.push_str(&json::to_string(&v)?);
    Ok(())
}

fn member_s(a: &MemberSArgs, out: &mut String) -> CliResult<()> {
    let pop = load_pop(&a.member.common.pop)?;
    let p = load_objective(&a.member.common.objective, &pop)?;
    let x = parse_floats(&a.point).ok_or_else(|| CliError::Usage(format!("--point: '{}' is not a list of numbers", a.point)))?;
    if x.len() != pop.n {
        return Err(CliError::Usage(format!("--point needs {} coordinates, got {}", pop.n, x.len())));
    }
    let r = a.member.common.pop.order;
    let m = momsos_core::exactness::s_cone_member(&pop, r, &x, &p, a.member.tol.tolerances()?)?;
    let mut v = membership_json(&m);
    v["order"] = json!(r);
    v["point"] = json!(x);
    out.push_str(&json::to_string(&v)?);
    Ok(())
}

fn check_planar(pop: &Pop) -> CliResult<()> {
    if pop.n != 2 {
        return Err(CliError::Usage(format!("scans and boundaries need n = 2, the POP has n = {}", pop.n)));
    }
    Ok(())
}

fn check_angles(angles: usize) -> CliResult<()> {
    if angles == 0 {
        return Err(CliError::Usage("--angles must be positive".into()));
    }
    Ok(())
}

fn svg_for(pop: &Pop, scan: &AngularScan, boundary: &BoundaryPolyline) -> CliResult<String> {
    let samples = feasible_samples(pop, SAMPLE_RESOLUTION)?;
    Ok(render_svg(scan, boundary, &samples))
}

fn scan(a: &ScanArgs, out: &mut String, err: &mut dyn Write) -> CliResult<()> {
    let pop = load_pop(&a.pop)?;
    check_planar(&pop)?;
    check_angles(a.angles)?;
    if a.refine && a.out.is_none() {
        return Err(CliError::Usage("--refine needs --out for the CSV".into()));
    }
    warn_radius(&pop, a.pop.order, err);
    let certifier = Certifier::new(&pop, a.pop.order, a.tol.tolerances()?)?.with_grid_resolution(a.grid)?;
    let result = scan_with(&certifier, a.angles)?;

    let mut csv = Vec::new();
    write_scan_csv_to(&result, &mut csv)?;
    if let Some(svg) = &a.svg {
        let boundary = boundary_with(&certifier, a.angles)?;
        write_file(svg, svg_for(&pop, &result, &boundary)?.as_bytes())?;
    }
    match &a.out {
        None => out.push_str(&String::from_utf8_lossy(&csv)),
        Some(path) => {
            write_file(path, &csv)?;
            let counts: serde_json::Map<String, Value> = [
                Classification::Exact,
                Classification::ValueExactDualUnattained,
                Classification::NotExact,
                Classification::Undetermined,
            ]
            .into_iter()
            .map(|c| (c.as_str().to_string(), json!(result.count(c))))
            .collect();
            let mut v = json!({
                "order": a.pop.order,
                "angles": a.angles,
                "counts": counts,
                "non_exact_intervals": result.non_exact_intervals(),
            });
            if a.refine {
                v["transitions"] = serde_json::to_value(refine_transitions(&certifier, &result)?)?;
            }
            out.push_str(&json::to_string(&v)?);
        }
    }
    Ok(())
}

fn boundary(a: &BoundaryArgs, out: &mut String, err: &mut dyn Write) -> CliResult<()> {
    let pop = load_pop(&a.pop)?;
    check_planar(&pop)?;
    check_angles(a.angles)?;
    warn_radius(&pop, a.pop.order, err);
    let certifier = Certifier::new(&pop, a.pop.order, Tolerances::default())?;
    let poly = boundary_with(&certifier, a.angles)?;
    let mut csv = Vec::new();
    write_boundary_csv_to(&poly, &mut csv)?;
    if let Some(svg) = &a.svg {
        let empty = AngularScan { order: a.pop.order, records: Vec::new() };
        write_file(svg, svg_for(&pop, &empty, &poly)?.as_bytes())?;
    }
    match &a.out {
        None => out.push_str(&String::from_utf8_lossy(&csv)),
        Some(path) => write_file(path, &csv)?,
    }
    Ok(())
}
