//! Command-line front end: `run`, `verify` and `list`.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridopt::gex::{local_search, run_gex, star_set, GexConfig, GexOutcome};
use gridopt::info::information_matrix;
use gridopt::{benchmark, d_criterion, Design, Error, FactorGrid, Model, BENCHMARK_COUNT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "GRIDOPT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gridopt", version, about = "Approximate D-optimal designs on large factor grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an optimal design for a benchmark problem or a model file.
    Run(RunArgs),
    /// Bound the efficiency of a design file by probing its variance function.
    Verify(VerifyArgs),
    /// List the built-in benchmark problems.
    List,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Built-in benchmark problem.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=BENCHMARK_COUNT as u64))]
    pub problem: Option<u64>,
    /// Model file in the model description language.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value_t = GexConfig::default().eff_opt)]
    pub eff_opt: f64,
    #[arg(long, default_value_t = GexConfig::default().eff_grp)]
    pub eff_grp: f64,
    #[arg(long, default_value_t = GexConfig::default().eff_stop)]
    pub eff_stop: f64,
    #[arg(long, default_value_t = GexConfig::default().n_loc)]
    pub n_loc: usize,
    #[arg(long, default_value_t = GexConfig::default().n_rnd)]
    pub n_rnd: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of runs; run `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeat: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Design output path. The run report goes next to it as `<stem>.report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Whiten the regression vectors with the inverse square root of the initial information matrix.
    #[arg(long)]
    pub reparametrize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Design file, CSV (`i,x1,...,xk,weight`) or JSON.
    pub design: PathBuf,
    #[command(flatten)]
    pub source: Source,
    /// Number of random-start hill climbs.
    #[arg(long, default_value_t = 500)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Singular | Error::Indefinite { .. } | Error::Degenerate | Error::Model(_) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// A grid and model to work on.
pub struct Problem {
    pub label: String,
    pub grid: FactorGrid,
    pub model: Model,
}

pub fn load_problem(source: &Source) -> Outcome<Problem> {
    match (&source.problem, &source.model) {
        (Some(id), None) => {
            let p = benchmark(*id as usize)?;
            Ok(Problem {
                label: format!("{id}"),
                grid: p.grid,
                model: p.model,
            })
        }
        (None, Some(path)) => {
            let text = read(path)?;
            let file = gridopt::dsl::parse(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            Ok(Problem {
                grid: file.grid()?,
                model: file.model(&label)?,
                label,
            })
        }
        _ => Err(Failure::usage("exactly one of --problem and --model is required")),
    }
}

fn read(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome<()> {
    std::fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// `x` with 6 significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (5 - x.abs().log10().floor() as i64).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn render_design(design: &Design, phi: f64, m: usize, format: Format) -> String {
    match format {
        Format::Csv => design.to_csv(),
        Format::Table => design.to_table(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&design.to_record(phi, m)).expect("design serializes");
            s.push('\n');
            s
        }
    }
}

/// Design and report paths of run `index` out of `repeat`.
pub fn output_paths(out: &Path, index: u64, repeat: u64) -> (PathBuf, PathBuf) {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = if repeat > 1 { format!("{stem}-run{}", index + 1) } else { stem };
    let design = match out.extension() {
        Some(ext) => out.with_file_name(format!("{stem}.{}", ext.to_string_lossy())),
        None => out.with_file_name(&stem),
    };
    (design, out.with_file_name(format!("{stem}.report.json")))
}

pub fn read_design(path: &Path) -> Outcome<Design> {
    let text = read(path)?;
    let design = if text.trim_start().starts_with('{') {
        Design::from_json(&text)
    } else {
        Design::from_csv(&text)
    };
    design.map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Outcome<()> {
    let problem = load_problem(&args.source)?;
    let base = GexConfig {
        eff_opt: args.eff_opt,
        eff_grp: args.eff_grp,
        eff_stop: args.eff_stop,
        n_loc: args.n_loc,
        n_rnd: args.n_rnd,
        seed: args.seed,
        reparametrize: args.reparametrize,
        ..GexConfig::default()
    };
    base.validate()?;
    let m = problem.model.m();
    let mut phis = Vec::new();
    let mut times = Vec::new();
    let mut support = 0;
    for i in 0..args.repeat {
        let cfg = GexConfig {
            seed: args.seed.wrapping_add(i),
            ..base
        };
        let start = Instant::now();
        let run: GexOutcome = run_gex(&problem.grid, &problem.model, &cfg)?;
        let secs = start.elapsed().as_secs_f64();
        let phi = run.phi();
        let rounds = run.report.rounds.len() - 1;
        let line = format!(
            "run {} seed {} phi {} support {} rounds {} bound {:.9} time {secs:.3}s",
            i + 1,
            cfg.seed,
            sig6(phi),
            run.design.len(),
            rounds,
            run.report.final_.certificate_bound
        );
        let design_text = render_design(&run.design, phi, m, args.format);
        match &args.out {
            Some(path) => {
                let (dp, rp) = output_paths(path, i, args.repeat);
                write(&dp, &design_text)?;
                let report = serde_json::to_string_pretty(&run.report).expect("report serializes");
                write(&rp, &format!("{report}\n"))?;
                emit(out, &line)?;
            }
            None => {
                emit(out, &line)?;
                emit(out, design_text.trim_end())?;
            }
        }
        phis.push(phi);
        times.push(secs);
        support = run.design.len();
    }
    let printed: Vec<String> = phis.iter().map(|&p| sig6(p)).collect();
    let consistent = printed.windows(2).all(|w| w[0] == w[1]);
    let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let phi_text = if consistent { printed[0].clone() } else { printed.join(",") };
    emit(
        out,
        &format!(
            "problem {} phi {} support {} runs {} t_min {t_min:.3}s t_max {t_max:.3}s consistent {}",
            problem.label,
            phi_text,
            support,
            args.repeat,
            if consistent { "yes" } else { "no" }
        ),
    )
}

/// Result of probing the variance function of a design.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub phi: f64,
    pub m: usize,
    pub max_variance: f64,
    pub bound: f64,
    pub climbs: usize,
    pub star_points: usize,
}

/// Evaluates `d` at the terminal points of `probes` hill climbs and on the star
/// sets of all support points.
pub fn verify_design(problem: &Problem, design: &Design, probes: usize, seed: u64) -> Outcome<Verification> {
    if design.k() != problem.grid.factors() {
        return Err(Error::DimensionMismatch {
            expected: problem.grid.factors(),
            got: design.k(),
        }
        .into());
    }
    for p in design.points() {
        problem.grid.locate(p.coords())?;
    }
    let mi = information_matrix(design, &problem.model)?;
    let phi = d_criterion(&mi)?;
    let mut max_d: f64 = 0.0;
    let mut f = vec![0.0; problem.model.m()];
    let mut probe = |x: &[f64]| -> Outcome<()> {
        problem.model.regression(x, &mut f)?;
        max_d = max_d.max(mi.variance(&f)?);
        Ok(())
    };
    let climbs = if probes > 0 {
        local_search(&problem.grid, &problem.model, design, probes, seed)?
    } else {
        Vec::new()
    };
    for x in &climbs {
        probe(x.coords())?;
    }
    let mut star_points = 0;
    for p in design.points() {
        for x in star_set(&problem.grid, p)? {
            probe(x.coords())?;
            star_points += 1;
        }
    }
    let m = problem.model.m();
    Ok(Verification {
        phi,
        m,
        max_variance: max_d,
        bound: m as f64 / max_d,
        climbs: climbs.len(),
        star_points,
    })
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Outcome<()> {
    let problem = load_problem(&args.source)?;
    let design = read_design(&args.design)?;
    let v = verify_design(&problem, &design, args.probes, args.seed)?;
    emit(out, &format!("problem {}", problem.label))?;
    emit(out, &format!("support points {}", design.len()))?;
    emit(out, &format!("phi {}", sig6(v.phi)))?;
    emit(
        out,
        &format!(
            "probed {} distinct climb endpoints from {} climbs and {} star-set points",
            v.climbs, args.probes, v.star_points
        ),
    )?;
    emit(out, &format!("max d {:.9}", v.max_variance))?;
    emit(out, &format!("bound m/max d {:.9}", v.bound))?;
    emit(
        out,
        "note: the bound holds relative to the probed points only; unprobed grid points may have larger variance",
    )
}

/// `a × b^3 × c` for per-factor level counts.
pub fn level_summary(counts: &[usize]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < counts.len() {
        let mut j = i;
        while j < counts.len() && counts[j] == counts[i] {
            j += 1;
        }
        parts.push(if j - i > 1 { format!("{}^{}", counts[i], j - i) } else { counts[i].to_string() });
        i = j;
    }
    parts.join(" × ")
}

pub fn cmd_list(out: &mut dyn Write) -> Outcome<()> {
    emit(out, &format!("{:>2}  {:>2}  {:>2}  {:>9}  {:<44}  description", "id", "k", "m", "points", "levels"))?;
    for id in 1..=BENCHMARK_COUNT {
        let p = benchmark(id)?;
        let counts: Vec<usize> = (0..p.grid.factors()).map(|i| p.grid.level_count(i)).collect();
        emit(
            out,
            &format!(
                "{id:>2}  {:>2}  {:>2}  {:>9.2e}  {:<44}  {}",
                p.grid.factors(),
                p.model.m(),
                p.grid.size_f64(),
                level_summary(&counts),
                p.description
            ),
        )?;
    }
    Ok(())
}

fn emit(out: &mut dyn Write, line: &str) -> Outcome<()> {
    writeln!(out, "{line}").map_err(|e| Failure::usage(format!("cannot write output: {e}")))
}

/// Caps the global worker pool when `GRIDOPT_THREADS` is set.
pub fn configure_threads(value: Option<&str>) -> Outcome<()> {
    let Some(v) = value else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // A pool built earlier in the same process stays in place.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` and runs the command; returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = configure_threads(std::env::var(THREADS_ENV).ok().as_deref()).and_then(|_| match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::List => cmd_list(out),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
