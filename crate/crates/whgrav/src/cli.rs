//! Command-line front end. Subcommands form a pipeline around the JSON
//! solution document: `factorize` and `deform` produce documents,
//! `compose` and `invert` combine them, and `verify`, `metric`, and
//! `current` consume either a document (`--config`) or a named preset
//! built on the spot.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or I/O
//! error, 3 violated mathematical precondition. Errors print one JSON
//! object (`{"error": {"kind", "message"}}`) to stderr. Output is
//! deterministic: the same invocation produces byte-identical bytes
//! regardless of thread count (`WHGRAV_THREADS` caps parallelism).

use crate::contour::{Contour, Lambda};
use crate::currents::{current_conservation_residual, kac_moody_current, write_current_csv};
use crate::error::{Error, Result};
use crate::factorize::{
    canonical_solve_with, deform_solution, invert_solution, multiply_solutions, unimodular_pair,
    CanonicalSolution, RootPlacement, SolutionDocument, SolveOptions,
};
use crate::grid::Grid;
use crate::metric::{
    default_signs, integrate_psi, kasner_line_element, metric_data, write_metric_csv,
    IntegrationConstant,
};
use crate::monodromy::{Family, MonodromyDoc};
use crate::spectral::WeylPoint;
use crate::verify::{
    a_from_x_residual, analytic_sampler_with_deformation, compute_a, corrupt_log_m,
    curvature_residual, field_equation_refinement, field_equation_residual, lax_residual,
    normalization_and_symmetry_report, psi_mixed_partial_residual, DerivativeMode, ResidualReport,
    SolutionGrid, Solver,
};
use crate::C;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Parser)]
#[command(
    name = "whgrav",
    about = "Exact gravitational solutions by scalar Wiener-Hopf factorization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a monodromy at a base point and emit a solution document.
    Factorize(FactorizeArgs),
    /// Run the verification suite against a solution.
    Verify(VerifyArgs),
    /// Apply a unimodular meromorphic deformation and emit the document.
    Deform(DeformArgs),
    /// Multiply two stored solutions over their shared contour.
    Compose(ComposeArgs),
    /// Invert a stored solution.
    Invert(InvertArgs),
    /// Reconstruct metric data (Δ, B, ψ) over a grid as CSV.
    Metric(MetricArgs),
    /// Assemble the conserved spectral current over a grid as CSV.
    Current(CurrentArgs),
    /// Print ready-to-run configuration JSON for a named preset.
    Example(ExampleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    #[value(name = "einstein_rosen")]
    EinsteinRosen,
    #[value(name = "kasner")]
    Kasner,
    #[value(name = "pulse")]
    Pulse,
}

/// Where the problem comes from: a named preset with parameters, or a
/// JSON file. For `factorize` the file is a monodromy document; for the
/// consuming subcommands it is a solution document.
#[derive(Args)]
struct SourceArgs {
    /// Built-in family.
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<Preset>,
    /// JSON input file (monodromy document for factorize, solution
    /// document elsewhere).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Wave number k (einstein_rosen).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    k: f64,
    /// Family center / damping parameter a.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    a: f64,
    /// Amplitude b (einstein_rosen, pulse).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    b: f64,
    /// Monomial exponent N (kasner).
    #[arg(long = "N", default_value_t = 2)]
    big_n: i32,
}

impl SourceArgs {
    fn family(&self) -> Result<Family> {
        match self.preset {
            Some(Preset::EinsteinRosen) => Ok(Family::EinsteinRosen {
                k: self.k,
                a: self.a,
                b: self.b,
            }),
            Some(Preset::Kasner) => Ok(Family::Kasner {
                a: self.a,
                n: self.big_n,
            }),
            Some(Preset::Pulse) => Ok(Family::Pulse {
                a: self.a,
                b: self.b,
            }),
            None => Err(Error::Config(
                "no --preset given (and this operation needs one)".into(),
            )),
        }
    }
}

#[derive(Args)]
struct ContourArgs {
    /// Contour: "circle", "tau-a-inside", "tau-a-outside", or a JSON file
    /// path. The named forms are unit circles; the inside/outside names
    /// also fix the root placement.
    #[arg(long, default_value = "circle")]
    contour: String,
    /// Node count for named contours.
    #[arg(long, default_value_t = 256)]
    nodes: usize,
    /// Root placement: geometric, phi-inside, phi-tilde-inside. Overrides
    /// the placement implied by a named contour.
    #[arg(long)]
    placement: Option<String>,
}

impl ContourArgs {
    fn build(&self, lambda: Lambda) -> Result<(Arc<Contour>, RootPlacement)> {
        let (contour, implied) = match self.contour.as_str() {
            "circle" => (
                Contour::unit_circle(lambda, self.nodes)?,
                RootPlacement::Geometric,
            ),
            "tau-a-inside" => (
                Contour::unit_circle(lambda, self.nodes)?,
                RootPlacement::PhiInside,
            ),
            "tau-a-outside" => (
                Contour::unit_circle(lambda, self.nodes)?,
                RootPlacement::PhiTildeInside,
            ),
            path => {
                let text = fs::read_to_string(path)?;
                (Contour::from_json(&text)?, RootPlacement::Geometric)
            }
        };
        let placement = match &self.placement {
            Some(s) => RootPlacement::from_str(s)?,
            None => implied,
        };
        if contour.lambda() != lambda {
            return Err(Error::Config(format!(
                "contour is built for λ = {}, problem has λ = {}",
                contour.lambda().sign(),
                lambda.sign()
            )));
        }
        Ok((contour, placement))
    }
}

#[derive(Args)]
struct PointArgs {
    /// Base point ρ > 0.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Base point v.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    v: f64,
}

impl PointArgs {
    fn point(&self) -> Result<WeylPoint> {
        WeylPoint::new(self.rho, self.v)
    }
}

#[derive(Args)]
struct FactorizeArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    contour: ContourArgs,
    #[command(flatten)]
    point: PointArgs,
    /// Route every channel through contour quadrature.
    #[arg(long)]
    force_quadrature: bool,
    /// Taylor terms of log X stored in the document.
    #[arg(long, default_value_t = 8)]
    taylor_terms: usize,
    /// Also evaluate M (and Δ where real) over this grid,
    /// "rho0:rho1:n,v0:v1:m".
    #[arg(long)]
    grid: Option<String>,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    contour: ContourArgs,
    #[command(flatten)]
    point: PointArgs,
    /// Verification grid "rho0:rho1:n,v0:v1:m". The default spacing of
    /// 0.01 keeps 4th-order stencil truncation well under the default
    /// tolerance.
    #[arg(long, default_value = "0.95:1.05:11,-0.05:0.05:11")]
    grid: String,
    /// Comma-separated subset of checks (default: all). Known names:
    /// x0, det, symmetry, whmt, field_equation, curvature,
    /// psi_mixed_partials, lax, a_from_x.
    #[arg(long, default_value = "all")]
    checks: String,
    /// Derivative source for the one-form A: "auto" picks analytic
    /// derivatives when a preset family supplies them (falling back to
    /// finite differences for stored documents and corrupted data),
    /// "finite-difference" and "analytic" force one route.
    #[arg(long, default_value = "auto")]
    mode: String,
    /// Pointwise stencil step.
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    /// Pass/fail tolerance on every enabled residual.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Spectral-plane point ω for the linear-system check, "RE[,IM]".
    #[arg(long, default_value = "4.0", allow_hyphen_values = true)]
    omega: String,
    /// Also run the half-step refinement study of the field equation.
    #[arg(long)]
    refine: bool,
    /// Negative control: perturb log M by this amplitude before checking.
    #[arg(long)]
    corrupt_m: Option<f64>,
    /// Write the JSON report here (the table still goes to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DeformArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    contour: ContourArgs,
    #[command(flatten)]
    point: PointArgs,
    /// Deformation point in the ω plane: "RE[,IM]", or "a" for the
    /// preset's center parameter.
    #[arg(long, allow_hyphen_values = true)]
    omega: String,
    /// Multiplicity (order of the zero moved across the contour).
    #[arg(long)]
    mult: i32,
    #[arg(long, default_value_t = 8)]
    taylor_terms: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ComposeArgs {
    /// First solution document.
    a: PathBuf,
    /// Second solution document (same contour and base point).
    b: PathBuf,
    #[arg(long, default_value_t = 8)]
    taylor_terms: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InvertArgs {
    /// Solution document to invert.
    a: PathBuf,
    #[arg(long, default_value_t = 8)]
    taylor_terms: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    contour: ContourArgs,
    /// Evaluation grid "rho0:rho1:n,v0:v1:m".
    #[arg(long, default_value = "0.5:2.5:21,-1.0:1.0:21")]
    grid: String,
    /// ψ anchor point "rho,v" (defaults to the grid's low corner).
    #[arg(long)]
    psi_base: Option<String>,
    /// ψ value at the anchor.
    #[arg(long, default_value_t = 0.0)]
    psi_constant: f64,
    /// Sign of dρ² in the 2-d line element (σε = λ).
    #[arg(long)]
    sigma: Option<i8>,
    /// Sign of dv² in the 2-d line element.
    #[arg(long)]
    epsilon: Option<i8>,
    /// Print the power-law line-element descriptor for deformation order
    /// n instead of the CSV (kasner preset).
    #[arg(long)]
    line_element: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurrentArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    contour: ContourArgs,
    /// Evaluation grid "rho0:rho1:n,v0:v1:m".
    #[arg(long, default_value = "0.5:0.9:5,-0.2:0.2:5")]
    grid: String,
    /// Spectral-plane point ω of the current, "RE[,IM]".
    #[arg(long, default_value = "4.0", allow_hyphen_values = true)]
    omega: String,
    /// Deformation applied when building from a preset: ω as "RE[,IM]"
    /// or "a".
    #[arg(long, allow_hyphen_values = true)]
    deform_omega: Option<String>,
    /// Deformation multiplicity.
    #[arg(long, default_value_t = 1)]
    deform_mult: i32,
    /// Pointwise stencil step.
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExampleArgs {
    /// Preset to describe; omit to list the available names.
    name: Option<String>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("WHGRAV_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let body = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{body}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Factorize(args) => cmd_factorize(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Deform(args) => cmd_deform(args),
        Command::Compose(args) => cmd_compose(args),
        Command::Invert(args) => cmd_invert(args),
        Command::Metric(args) => cmd_metric(args),
        Command::Current(args) => cmd_current(args),
        Command::Example(args) => cmd_example(args),
    }
}

fn parse_complex(s: &str) -> Result<C> {
    let mut parts = s.splitn(2, ',');
    let re: f64 = parts
        .next()
        .unwrap_or("")
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {s:?} as RE[,IM]")))?;
    let im: f64 = match parts.next() {
        Some(t) => t
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse {s:?} as RE[,IM]")))?,
        None => 0.0,
    };
    Ok(C::new(re, im))
}

fn write_text(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

/// Build a solution from a preset (factorizing on a fresh contour) or
/// load and re-solve a stored document.
fn load_solution(
    source: &SourceArgs,
    contour: &ContourArgs,
    point: &PointArgs,
) -> Result<(CanonicalSolution, Option<Family>)> {
    if let Some(path) = &source.config {
        let text = fs::read_to_string(path)?;
        let doc = SolutionDocument::from_json(&text)?;
        return Ok((doc.solve()?, None));
    }
    let family = source.family()?;
    let doc = family.document();
    let (contour, placement) = contour.build(doc.lambda)?;
    let sol = canonical_solve_with(
        &doc,
        &contour,
        &point.point()?,
        SolveOptions {
            placement,
            force_quadrature: false,
        },
    )?;
    Ok((sol, Some(family)))
}

#[derive(Serialize)]
struct GridValueRow {
    rho: f64,
    v: f64,
    m: Vec<[f64; 2]>,
    delta: Option<f64>,
}

fn cmd_factorize(args: FactorizeArgs) -> Result<i32> {
    if let Some(path) = &args.source.config {
        let text = fs::read_to_string(path)?;
        let doc = MonodromyDoc::from_json(&text)?;
        let (contour, placement) = args.contour.build(doc.lambda)?;
        let sol = canonical_solve_with(
            &doc,
            &contour,
            &args.point.point()?,
            SolveOptions {
                placement,
                force_quadrature: args.force_quadrature,
            },
        )?;
        return emit_factorization(&sol, &args);
    }
    let family = args.source.family()?;
    let doc = family.document();
    let (contour, placement) = args.contour.build(doc.lambda)?;
    let sol = canonical_solve_with(
        &doc,
        &contour,
        &args.point.point()?,
        SolveOptions {
            placement,
            force_quadrature: args.force_quadrature,
        },
    )?;
    emit_factorization(&sol, &args)
}

fn emit_factorization(sol: &CanonicalSolution, args: &FactorizeArgs) -> Result<i32> {
    let document = sol.to_document(args.taylor_terms);
    let text = match &args.grid {
        None => document.to_json() + "\n",
        Some(spec) => {
            let grid = Grid::parse(spec)?;
            let sgrid = SolutionGrid::from_factorization(sol, grid)?;
            let rows: Vec<GridValueRow> = grid
                .points()
                .map(|(i, j, p)| {
                    let m = &sgrid.m_values()[grid.idx(i, j)];
                    let delta = crate::metric::SymMat2::from_diagonal_channels(m)
                        .and_then(|mat| mat.extract_delta_b())
                        .ok()
                        .map(|(d, _)| d);
                    GridValueRow {
                        rho: p.rho,
                        v: p.v,
                        m: m.iter().map(|z| [z.re, z.im]).collect(),
                        delta,
                    }
                })
                .collect();
            let wrapper = serde_json::json!({
                "document": serde_json::to_value(&document)?,
                "grid_values": serde_json::to_value(&rows)?,
            });
            serde_json::to_string_pretty(&wrapper)? + "\n"
        }
    };
    write_text(&args.out, &text)?;
    Ok(0)
}

#[derive(Serialize)]
struct CheckRow {
    check: String,
    max_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_channel_max: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refinement_ratio: Option<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyOutput {
    rho: f64,
    v: f64,
    grid: Grid,
    tolerance: f64,
    checks: Vec<CheckRow>,
    pass: bool,
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let enabled: Vec<&str> = args.checks.split(',').map(str::trim).collect();
    let all = enabled.iter().any(|c| *c == "all");
    let on = |name: &str| all || enabled.iter().any(|c| *c == name);
    let known = [
        "x0",
        "det",
        "symmetry",
        "whmt",
        "field_equation",
        "curvature",
        "psi_mixed_partials",
        "lax",
        "a_from_x",
    ];
    for c in &enabled {
        if *c != "all" && !known.contains(c) {
            return Err(Error::Config(format!(
                "unknown check {c:?}; known: all, {}",
                known.join(", ")
            )));
        }
    }
    let requested_mode = match args.mode.as_str() {
        "auto" => None,
        "finite-difference" => Some(DerivativeMode::FiniteDifference),
        "analytic" => Some(DerivativeMode::Analytic),
        other => {
            return Err(Error::Config(format!(
                "unknown derivative mode {other:?}; expected auto, finite-difference, or analytic"
            )))
        }
    };
    let grid = Grid::parse(&args.grid)?;
    let omega = parse_complex(&args.omega)?;
    let (sol, family) = load_solution(&args.source, &args.contour, &args.point)?;
    let mode = requested_mode.unwrap_or({
        if family.is_some() && args.corrupt_m.is_none() {
            DerivativeMode::Analytic
        } else {
            DerivativeMode::FiniteDifference
        }
    });

    let mut rows: Vec<CheckRow> = Vec::new();
    let tol = args.tol;
    let push = |rows: &mut Vec<CheckRow>, r: &ResidualReport| {
        rows.push(CheckRow {
            check: r.check.clone(),
            max_residual: r.max_residual,
            per_channel_max: Some(r.per_channel_max.clone()),
            refinement_ratio: None,
            pass: r.passes(tol),
        });
    };

    if on("x0") || on("det") || on("symmetry") || on("whmt") {
        let report = normalization_and_symmetry_report(&sol)?;
        let scalar = |rows: &mut Vec<CheckRow>, name: &str, value: f64| {
            rows.push(CheckRow {
                check: name.into(),
                max_residual: value,
                per_channel_max: None,
                refinement_ratio: None,
                pass: value.is_finite() && value < tol,
            });
        };
        if on("x0") {
            scalar(&mut rows, "x0_normalization", report.x0_deviation);
        }
        if on("det") {
            scalar(&mut rows, "det_unimodular", report.det_deviation);
        }
        if on("symmetry") {
            scalar(&mut rows, "monodromy_symmetry", report.symmetry_residual);
        }
        if on("whmt") {
            scalar(&mut rows, "factorization_symmetry", report.whmt_residual);
        }
    }

    let needs_grid = on("field_equation")
        || on("curvature")
        || on("psi_mixed_partials")
        || on("lax")
        || on("a_from_x");
    if needs_grid {
        let mut sgrid = SolutionGrid::from_factorization(&sol, grid)?;
        if let Some(fam) = &family {
            sgrid = sgrid.with_analytic(analytic_sampler_with_deformation(fam, &sol));
        }
        if let Some(eps) = args.corrupt_m {
            let corrupted = corrupt_log_m(&sgrid.sampler(), eps);
            sgrid = SolutionGrid::from_sampler(grid, sgrid.lambda(), sgrid.nchannels(), corrupted)?;
        }
        let a = compute_a(&sgrid, mode)?;
        if on("field_equation") {
            let mut report = field_equation_residual(&a)?;
            if args.refine {
                let study =
                    field_equation_refinement(&a.sampler(), a.lambda(), a.nchannels(), &grid)?;
                report.refinement_ratio = Some(study.ratio);
            }
            let ratio = report.refinement_ratio;
            push(&mut rows, &report);
            rows.last_mut().expect("just pushed").refinement_ratio = ratio;
        }
        if on("curvature") {
            push(&mut rows, &curvature_residual(&a)?);
        }
        if on("psi_mixed_partials") {
            push(&mut rows, &psi_mixed_partial_residual(&a)?);
        }
        if on("lax") || on("a_from_x") {
            let base = sol.clone();
            let solver: Solver = Arc::new(move |p: &WeylPoint| base.resolve_at(p));
            if on("lax") {
                push(&mut rows, &lax_residual(&solver, &a, omega, args.h)?);
            }
            if on("a_from_x") {
                let (r1, r2) = a_from_x_residual(&solver, &a, args.h)?;
                push(&mut rows, &r1);
                push(&mut rows, &r2);
            }
        }
    }

    let pass = rows.iter().all(|r| r.pass);
    let mut table = String::new();
    table.push_str(&format!(
        "{:<26} {:>14} {:>12} {:>8}\n",
        "check", "max residual", "tolerance", "status"
    ));
    for r in &rows {
        let ratio = r
            .refinement_ratio
            .map(|q| format!("   refinement ratio {q:.2}"))
            .unwrap_or_default();
        table.push_str(&format!(
            "{:<26} {:>14.4e} {:>12.1e} {:>8}{ratio}\n",
            r.check,
            r.max_residual,
            tol,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    table.push_str(&format!(
        "overall: {}\n",
        if pass { "pass" } else { "FAIL" }
    ));
    print!("{table}");

    if args.out.is_some() {
        let point = sol.point();
        let output = VerifyOutput {
            rho: point.rho,
            v: point.v,
            grid,
            tolerance: tol,
            checks: rows,
            pass,
        };
        write_text(&args.out, &(serde_json::to_string_pretty(&output)? + "\n"))?;
    }
    Ok(if pass { 0 } else { 1 })
}

fn cmd_deform(args: DeformArgs) -> Result<i32> {
    let (sol, family) = load_solution(&args.source, &args.contour, &args.point)?;
    let omega = if args.omega.trim() == "a" {
        let center = match family {
            Some(Family::Kasner { a, .. })
            | Some(Family::EinsteinRosen { a, .. })
            | Some(Family::Pulse { a, .. }) => a,
            None => {
                return Err(Error::Config(
                    "--omega a needs a --preset with a center parameter".into(),
                ))
            }
        };
        C::new(center, 0.0)
    } else {
        parse_complex(&args.omega)?
    };
    if sol.channels().len() != 2 {
        return Err(Error::Config(format!(
            "unimodular deformation via --mult expects 2 channels, got {}",
            sol.channels().len()
        )));
    }
    let deformed = deform_solution(&sol, &unimodular_pair(omega, args.mult))?;
    let text = deformed.to_document(args.taylor_terms).to_json() + "\n";
    write_text(&args.out, &text)?;
    Ok(0)
}

fn cmd_compose(args: ComposeArgs) -> Result<i32> {
    let doc_a = SolutionDocument::from_json(&fs::read_to_string(&args.a)?)?;
    let doc_b = SolutionDocument::from_json(&fs::read_to_string(&args.b)?)?;
    if doc_a.contour != doc_b.contour {
        return Err(Error::ContourMismatch);
    }
    let contour = Contour::from_spec(&doc_a.contour)?;
    let sol_a = doc_a.solve_on(&contour)?;
    let sol_b = doc_b.solve_on(&contour)?;
    let product = multiply_solutions(&sol_a, &sol_b)?;
    let text = product.to_document(args.taylor_terms).to_json() + "\n";
    write_text(&args.out, &text)?;
    Ok(0)
}

fn cmd_invert(args: InvertArgs) -> Result<i32> {
    let doc = SolutionDocument::from_json(&fs::read_to_string(&args.a)?)?;
    let inverse = invert_solution(&doc.solve()?);
    let text = inverse.to_document(args.taylor_terms).to_json() + "\n";
    write_text(&args.out, &text)?;
    Ok(0)
}

fn cmd_metric(args: MetricArgs) -> Result<i32> {
    if let Some(n) = args.line_element {
        let constant = IntegrationConstant::Standard;
        let descriptor = kasner_line_element(n, constant)?;
        write_text(
            &args.out,
            &(serde_json::to_string_pretty(&descriptor)? + "\n"),
        )?;
        return Ok(0);
    }
    let grid = Grid::parse(&args.grid)?;
    let base = match &args.psi_base {
        Some(s) => {
            let z = parse_complex(s)?;
            WeylPoint::new(z.re, z.im)?
        }
        None => grid.point(0, 0),
    };
    let point = PointArgs {
        rho: base.rho,
        v: base.v,
    };
    let (sol, family) = load_solution(&args.source, &args.contour, &point)?;
    let mut sgrid = SolutionGrid::from_factorization(&sol, grid)?;
    if let Some(fam) = &family {
        sgrid = sgrid.with_analytic(analytic_sampler_with_deformation(fam, &sol));
    }
    let mode = if family.is_some() {
        DerivativeMode::Analytic
    } else {
        DerivativeMode::FiniteDifference
    };
    let a = compute_a(&sgrid, mode)?;
    let psi = integrate_psi(&a, &base, args.psi_constant)?;
    let lambda = sgrid.lambda();
    let defaults = default_signs(lambda);
    let signs = (
        args.sigma.unwrap_or(defaults.0),
        args.epsilon.unwrap_or(defaults.1),
    );
    let data = metric_data(
        sgrid.m_values(),
        &psi,
        lambda,
        signs,
        base,
        args.psi_constant,
    )?;
    let mut buf = Vec::new();
    write_metric_csv(&mut buf, &data)?;
    write_text(&args.out, std::str::from_utf8(&buf).expect("CSV is UTF-8"))?;
    eprintln!(
        "psi path-independence residual: {:.4e}",
        psi.path_independence_residual
    );
    Ok(0)
}

fn cmd_current(args: CurrentArgs) -> Result<i32> {
    let grid = Grid::parse(&args.grid)?;
    let omega = parse_complex(&args.omega)?;
    let point = PointArgs {
        rho: grid.point(0, 0).rho,
        v: grid.point(0, 0).v,
    };
    let (mut sol, family) = load_solution(&args.source, &args.contour, &point)?;
    if let Some(spec) = &args.deform_omega {
        let center = if spec.trim() == "a" {
            match family {
                Some(Family::Kasner { a, .. })
                | Some(Family::EinsteinRosen { a, .. })
                | Some(Family::Pulse { a, .. }) => C::new(a, 0.0),
                None => return Err(Error::Config("--deform-omega a needs a --preset".into())),
            }
        } else {
            parse_complex(spec)?
        };
        sol = deform_solution(&sol, &unimodular_pair(center, args.deform_mult))?;
    }
    let base = sol.clone();
    let solver: Solver = Arc::new(move |p: &WeylPoint| base.resolve_at(p));
    let current = kac_moody_current(&solver, &grid, omega, args.h)?;
    let mut buf = Vec::new();
    write_current_csv(&mut buf, &current)?;
    write_text(&args.out, std::str::from_utf8(&buf).expect("CSV is UTF-8"))?;
    if grid.nrho >= 5 && grid.nv >= 5 {
        let conservation = current_conservation_residual(&current)?;
        eprintln!(
            "conservation residual: {:.4e}, trace deviation: {:.4e}",
            conservation.max_residual,
            current.max_trace_deviation()
        );
    }
    Ok(0)
}

fn cmd_example(args: ExampleArgs) -> Result<i32> {
    let presets = ["einstein_rosen", "kasner", "pulse"];
    let Some(name) = args.name else {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({ "presets": presets }))?
        );
        return Ok(0);
    };
    let (family, commands) = match name.as_str() {
        "einstein_rosen" => (
            Family::EinsteinRosen {
                k: 1.0,
                a: 1.0,
                b: 1.359140914,
            },
            vec![
                "whgrav factorize --preset einstein_rosen --k 1 --a 1 --b 1.359140914",
                "whgrav verify --preset einstein_rosen --k 1 --a 1 --b 1.359140914 --refine",
                "whgrav metric --preset einstein_rosen --grid 0.5:2.5:21,-1:1:21",
            ],
        ),
        "kasner" => (
            Family::Kasner { a: 1.1125, n: 4 },
            vec![
                "whgrav factorize --preset kasner --N 4 --a 1.1125 --contour tau-a-inside",
                "whgrav verify --preset kasner --N 2 --a 1.1125 --rho 0.5 --grid 0.46:0.54:33,-0.04:0.04:33",
                "whgrav deform --preset kasner --N 4 --a 1.1125 --contour tau-a-inside --omega a --mult 2",
                "whgrav metric --preset kasner --line-element 2",
                "whgrav current --preset kasner --N 2 --a 1.1125 --contour tau-a-inside --deform-omega a --deform-mult 1",
            ],
        ),
        "pulse" => (
            Family::Pulse { a: 1.0, b: 0.5 },
            vec![
                "whgrav factorize --preset pulse --a 1 --b 0.5",
                "whgrav verify --preset pulse --a 1 --b 0.5",
            ],
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; known: {}",
                presets.join(", ")
            )))
        }
    };
    let doc = family.document();
    let contour = Contour::unit_circle(doc.lambda, 256)?;
    let body = serde_json::json!({
        "monodromy": serde_json::to_value(&doc)?,
        "contour": serde_json::to_value(contour.to_spec())?,
        "commands": commands,
    });
    println!("{}", serde_json::to_string_pretty(&body)?);
    Ok(0)
}
