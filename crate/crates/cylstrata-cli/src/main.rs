//! Batch front-end for the layered-medium dipole solver.
//!
//! Subcommands:
//! - `field`        fields at every observation point of a job file, as CSV
//! - `validate`     numeric vs closed-form comparison (homogeneous stacks)
//! - `errormap`     fixed-truncation accuracy map around the source, as CSV
//! - `dump-config`  canonical all-metric form of a job file
//!
//! Exit codes: 0 success, 1 usage or job-file problems, 2 runtime failures
//! (non-convergence or a failed validation threshold).

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use cylstrata::contour::PathKind;
use cylstrata::jobfile::{JobFile, PointEntry};
use cylstrata::solver::{
    analytic_homogeneous, compute_fields, compute_fields_fixed, relative_error_db, CylPoint,
    FieldResult, JobConfig, PathChoice, SolverSettings, SubtractionPolicy,
};
use cylstrata::C64;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cylstrata",
    version,
    about = "Dipole fields in cylindrically stratified media"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute all six field components at every observation point (CSV).
    Field(RunArgs),
    /// Compare the solver against the closed form; homogeneous stacks only.
    Validate(RunArgs),
    /// Relative-error map at fixed truncation on a grid of source offsets
    /// (CSV; homogeneous stacks only, direct-term subtraction disabled).
    Errormap(ErrormapArgs),
    /// Parse a job file and print its canonical all-metric form.
    DumpConfig(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Job file (TOML).
    job: PathBuf,
    /// Worker threads for the node-parallel integration (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Integration path override.
    #[arg(long, value_enum)]
    path: Option<PathArg>,
    /// Convergence tolerance override.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Bent-path tail-decay target override.
    #[arg(long)]
    gamma: Option<f64>,
    /// Iteration budget override.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Write output to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ErrormapArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Mode-sum truncation order (fixed; no refinement).
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    /// Quadrature node budget (fixed; no refinement).
    #[arg(long, default_value_t = 2000)]
    n_int: usize,
    /// Cells per side of the offset grid.
    #[arg(long, default_value_t = 21)]
    grid: usize,
}

#[derive(Args)]
struct DumpArgs {
    /// Job file (TOML).
    job: PathBuf,
    /// Write output to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Auto,
    Sip,
    Dsip,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

type CResult<T> = Result<T, Failure>;

impl From<cylstrata::Error> for Failure {
    fn from(e: cylstrata::Error) -> Self {
        Failure { code: exit_code_for(&e), message: e.to_string() }
    }
}

fn exit_code_for(e: &cylstrata::Error) -> u8 {
    use cylstrata::Error::*;
    match e {
        InvalidJob(_) | InvalidStack(_) | JobFile(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version displays are successes; everything else is a
            // usage error (exit 1, not clap's default 2).
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return ExitCode::from(if ok { 0 } else { 1 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> CResult<u8> {
    match cli.command {
        Command::Field(args) => cmd_field(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Errormap(args) => cmd_errormap(args),
        Command::DumpConfig(args) => cmd_dump_config(args),
    }
}

fn read_job(path: &Path) -> CResult<JobFile> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: 1,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(JobFile::parse(&text)?)
}

fn load_config(args: &RunArgs) -> CResult<JobConfig> {
    let mut config = read_job(&args.job)?.to_config()?;
    apply_overrides(&mut config, args);
    config.validate()?;
    Ok(config)
}

fn open_out(out: &Option<PathBuf>) -> CResult<Box<dyn Write>> {
    match out {
        None => Ok(Box::new(std::io::stdout())),
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| Failure {
                code: 1,
                message: format!("cannot write {}: {e}", p.display()),
            })?;
            Ok(Box::new(f))
        }
    }
}

fn write_fail(e: std::io::Error) -> Failure {
    Failure { code: 2, message: format!("write failed: {e}") }
}

/// One reproducibility line with every knob of the run.
fn settings_banner(s: &SolverSettings) -> String {
    format!(
        "settings: tolerance={} initial_n_max={} initial_n_int={} max_iterations={} \
         path={} gamma={} f_dsip={} subtraction={}",
        s.tolerance,
        s.initial_n_max,
        s.initial_n_int,
        s.max_iterations,
        path_choice_name(s.path),
        s.gamma,
        s.f_dsip,
        match s.subtraction {
            SubtractionPolicy::Auto => "auto",
            SubtractionPolicy::Off => "off",
        },
    )
}

fn path_choice_name(p: PathChoice) -> &'static str {
    match p {
        PathChoice::Auto => "auto",
        PathChoice::Sip => "sip",
        PathChoice::Dsip => "dsip",
    }
}

fn path_kind_name(k: PathKind) -> &'static str {
    match k {
        PathKind::Sip => "sip",
        PathKind::DsipUp => "dsip-up",
        PathKind::DsipDown => "dsip-down",
    }
}

const COMPONENT_NAMES: [&str; 6] = ["e_rho", "e_phi", "e_z", "h_rho", "h_phi", "h_z"];

fn six(e: &[C64; 3], h: &[C64; 3]) -> [C64; 6] {
    [e[0], e[1], e[2], h[0], h[1], h[2]]
}

/// Index of the largest-magnitude component.
fn monitored_index(v: &[C64; 6]) -> usize {
    let mut best = 0;
    for (i, c) in v.iter().enumerate() {
        if c.norm() > v[best].norm() {
            best = i;
        }
    }
    best
}

fn field_row(p: &CylPoint, r: &FieldResult) -> String {
    let v = six(&r.e, &r.h);
    let m = monitored_index(&v);
    let mut cols: Vec<String> = vec![p.rho.to_string(), p.phi.to_string(), p.z.to_string()];
    for c in &v {
        cols.push(c.re.to_string());
        cols.push(c.im.to_string());
    }
    cols.push(COMPONENT_NAMES[m].to_string());
    cols.push(v[m].norm().to_string());
    cols.push(v[m].arg().to_degrees().to_string());
    cols.push(r.report.iterations.to_string());
    cols.push(r.report.n_max.to_string());
    cols.push(r.report.n_int.to_string());
    cols.push(r.report.final_error.to_string());
    cols.push(path_kind_name(r.report.path_kind).to_string());
    cols.push(r.report.subtraction.to_string());
    cols.join(",")
}

const FIELD_HEADER: &str = "rho_m,phi_rad,z_m,\
e_rho_re,e_rho_im,e_phi_re,e_phi_im,e_z_re,e_z_im,\
h_rho_re,h_rho_im,h_phi_re,h_phi_im,h_z_re,h_z_im,\
monitored,monitored_mag,monitored_phase_deg,\
iterations,n_max,n_int,final_error,path,subtraction";

fn cmd_field(args: RunArgs) -> CResult<u8> {
    let config = load_config(&args)?;
    eprintln!("{}", settings_banner(&config.settings));
    let mut out = open_out(&args.out)?;
    writeln!(out, "{FIELD_HEADER}").map_err(write_fail)?;
    let mut failures = 0usize;
    for p in &config.points {
        match compute_fields(&config.stack, &config.dipole, config.frequency_hz, *p, &config.settings)
        {
            Ok(r) => writeln!(out, "{}", field_row(p, &r)).map_err(write_fail)?,
            Err(e) => {
                if exit_code_for(&e) == 1 {
                    return Err(e.into());
                }
                eprintln!("point (rho={}, phi={}, z={}): {e}", p.rho, p.phi, p.z);
                failures += 1;
            }
        }
    }
    Ok(if failures > 0 { 2 } else { 0 })
}

fn cmd_validate(args: RunArgs) -> CResult<u8> {
    let config = load_config(&args)?;
    if config.stack.len() != 1 {
        return Err(Failure {
            code: 1,
            message: "validate requires a homogeneous (single-layer) stack".into(),
        });
    }
    let mut out = open_out(&args.out)?;
    writeln!(out, "{}", settings_banner(&config.settings)).map_err(write_fail)?;
    let mut all_pass = true;
    for (i, p) in config.points.iter().enumerate() {
        writeln!(out, "point {}/{}: rho={} phi={} z={}", i + 1, config.points.len(), p.rho, p.phi, p.z)
            .map_err(write_fail)?;
        let (ea, ha) = analytic_homogeneous(&config.stack, &config.dipole, config.frequency_hz, *p)?;
        let reference = six(&ea, &ha);
        let numeric =
            match compute_fields(&config.stack, &config.dipole, config.frequency_hz, *p, &config.settings) {
                Ok(r) => r,
                Err(e) => {
                    if exit_code_for(&e) == 1 {
                        return Err(e.into());
                    }
                    writeln!(out, "  solver failed: {e}").map_err(write_fail)?;
                    all_pass = false;
                    continue;
                }
            };
        let v = six(&numeric.e, &numeric.h);
        for c in 0..6 {
            writeln!(
                out,
                "  {:5} numeric = {:+e}{:+e}i  analytic = {:+e}{:+e}i  eps_db = {:.2}",
                COMPONENT_NAMES[c],
                v[c].re,
                v[c].im,
                reference[c].re,
                reference[c].im,
                relative_error_db(reference[c], v[c]),
            )
            .map_err(write_fail)?;
        }
        let m = monitored_index(&reference);
        let eps = relative_error_db(reference[m], v[m]);
        let pass = eps <= -60.0;
        all_pass &= pass;
        writeln!(
            out,
            "  monitored {} |analytic| = {:e} eps_db = {:.2} -> {}",
            COMPONENT_NAMES[m],
            reference[m].norm(),
            eps,
            if pass { "pass" } else { "FAIL (need <= -60 dB)" },
        )
        .map_err(write_fail)?;
    }
    writeln!(out, "result: {}", if all_pass { "PASS" } else { "FAIL" }).map_err(write_fail)?;
    Ok(if all_pass { 0 } else { 2 })
}

fn cmd_errormap(args: ErrormapArgs) -> CResult<u8> {
    if args.grid == 0 || args.n_int == 0 {
        return Err(Failure { code: 1, message: "--grid and --n-int must be positive".into() });
    }
    // The map is built around the source; a job without [observe] is fine.
    let mut job = read_job(&args.run.job)?;
    if job.observe.points.is_empty() && job.observe.grid.is_none() {
        job.observe.points.push(PointEntry {
            rho_m: job.source.rho_m.or(job.source.rho_in.map(|v| v * cylstrata::INCH)).map(|r| r + 0.1),
            z_m: Some(0.1),
            ..PointEntry::default()
        });
    }
    let mut config = job.to_config()?;
    apply_overrides(&mut config, &args.run);
    config.validate()?;
    if config.stack.len() != 1 {
        return Err(Failure {
            code: 1,
            message: "errormap requires a homogeneous (single-layer) stack".into(),
        });
    }
    // The map measures raw integration accuracy; subtracting the direct
    // term would make every cell exact by construction.
    config.settings.subtraction = SubtractionPolicy::Off;
    eprintln!("{}", settings_banner(&config.settings));
    eprintln!(
        "errormap: n_max={} n_int={} grid={}x{} offsets 0.01..0.30 m",
        args.n_max, args.n_int, args.grid, args.grid
    );

    let src = config.dipole.position;
    let mut out = open_out(&args.run.out)?;
    writeln!(out, "rho_offset_m,z_offset_m,eps_db,path").map_err(write_fail)?;
    for i in 0..args.grid {
        let dr = offset(i, args.grid);
        for j in 0..args.grid {
            let dz = offset(j, args.grid);
            let p = CylPoint::new(src.rho + dr, src.phi, src.z + dz);
            let (ea, ha) = analytic_homogeneous(&config.stack, &config.dipole, config.frequency_hz, p)?;
            let reference = six(&ea, &ha);
            let m = monitored_index(&reference);
            let row = match compute_fields_fixed(
                &config.stack,
                &config.dipole,
                config.frequency_hz,
                p,
                &config.settings,
                args.n_max,
                args.n_int,
            ) {
                Ok(r) => {
                    let eps = relative_error_db(reference[m], six(&r.e, &r.h)[m]);
                    format!("{dr},{dz},{eps},{}", path_kind_name(r.report.path_kind))
                }
                Err(e) => {
                    if exit_code_for(&e) == 1 {
                        return Err(e.into());
                    }
                    format!("{dr},{dz},inf,-")
                }
            };
            writeln!(out, "{row}").map_err(write_fail)?;
        }
    }
    Ok(0)
}

/// Offsets span 0.01 m to 0.30 m inclusive.
fn offset(i: usize, n: usize) -> f64 {
    const LO: f64 = 0.01;
    const HI: f64 = 0.30;
    if n == 1 {
        LO
    } else {
        LO + (HI - LO) * i as f64 / (n - 1) as f64
    }
}

fn apply_overrides(config: &mut JobConfig, args: &RunArgs) {
    if let Some(n) = args.jobs {
        // Build the global worker pool once; later calls are no-ops.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Some(p) = args.path {
        config.settings.path = match p {
            PathArg::Auto => PathChoice::Auto,
            PathArg::Sip => PathChoice::Sip,
            PathArg::Dsip => PathChoice::Dsip,
        };
    }
    if let Some(t) = args.tolerance {
        config.settings.tolerance = t;
    }
    if let Some(g) = args.gamma {
        config.settings.gamma = g;
    }
    if let Some(m) = args.max_iter {
        config.settings.max_iterations = m;
    }
}

fn cmd_dump_config(args: DumpArgs) -> CResult<u8> {
    let config = read_job(&args.job)?.to_config()?;
    let text = JobFile::from_config(&config).to_toml_string();
    let mut out = open_out(&args.out)?;
    out.write_all(text.as_bytes()).map_err(write_fail)?;
    Ok(0)
}
