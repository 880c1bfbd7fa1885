use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcdt::bench::{measure, run_experiment, write_csv, DividerKind, GridSpec, RunConfig, RunReport, Validity};
use dcdt::border::IntersectionPolicy;
use dcdt::dc::Strategy;
use dcdt::partition::{SampleRule, WeightFn};
use dcdt::triangulation::{validate_with_limit, Triangulation, DEFAULT_ORACLE_LIMIT};
use dcdt::workload::{generate, load_points, write_points, DistParams, Distribution, DistributionSpec, PointFormat};
use dcdt::Error;

#[derive(Parser)]
#[command(name = "dcdt", version, about = "Divide-and-conquer Delaunay triangulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic point set.
    Generate(GenerateArgs),
    /// Triangulate a point file.
    Triangulate(TriangulateArgs),
    /// Check a triangulation against its points.
    Validate(ValidateArgs),
    /// Run a parameter grid and write one CSV row per run.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Binary,
    Csv,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse::<Distribution>)]
    dist: Distribution,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Output file; CSV on stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to CSV for `.csv` files and binary otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    normal_sigma: Option<f64>,
    #[arg(long)]
    line_count: Option<usize>,
    #[arg(long)]
    line_sigma: Option<f64>,
    #[arg(long)]
    bubble_count: Option<usize>,
    #[arg(long)]
    bubble_sigma: Option<f64>,
    #[arg(long)]
    malicious_offset: Option<f64>,
}

#[derive(Args)]
struct TriangulateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Number of parts; defaults to the thread count.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "kway", value_parser = parse::<Strategy>)]
    strategy: Strategy,
    #[arg(long, default_value = "sample", value_parser = parse::<DividerKind>)]
    divider: DividerKind,
    #[arg(long, default_value = "log", value_parser = parse::<WeightFn>)]
    weights: WeightFn,
    #[arg(long, default_value = "sqrt", value_parser = parse::<SampleRule>)]
    sample: SampleRule,
    #[arg(long, default_value = "grid=1", value_parser = parse::<IntersectionPolicy>)]
    policy: IntersectionPolicy,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 10_000)]
    base_case: usize,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Simplex CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// One-row run report in the bench CSV schema.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Validate when the input has at most this many points.
    #[arg(long, default_value_t = DEFAULT_ORACLE_LIMIT)]
    oracle_limit: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    tris: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ORACLE_LIMIT)]
    limit: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    grid: PathBuf,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run configurations concurrently with one thread each.
    #[arg(long)]
    concurrent: bool,
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit status of a failed command.
enum Failure {
    Invalid(String),
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::KNotPowerOfTwo(_) | Error::OracleLimitExceeded { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<dcdt::geometry::PointSet, Failure> {
    load_points(path, PointFormat::from_path(path)).map_err(|e| match e {
        Error::Io(e) => Failure::Runtime(format!("{}: {e}", path.display())),
        e => e.into(),
    })
}

fn cmd_generate(a: GenerateArgs) -> Result<(), Failure> {
    let mut params = DistParams::default();
    if let Some(v) = a.normal_sigma {
        params.normal_sigma = v;
    }
    if let Some(v) = a.line_count {
        params.line_count = v;
    }
    if let Some(v) = a.line_sigma {
        params.line_sigma = v;
    }
    if let Some(v) = a.bubble_count {
        params.bubble_count = v;
    }
    if let Some(v) = a.bubble_sigma {
        params.bubble_sigma = v;
    }
    if let Some(v) = a.malicious_offset {
        params.malicious_offset = v;
    }
    let spec = DistributionSpec {
        params,
        ..DistributionSpec::new(a.dist, a.dim, a.n, a.seed)
    };
    let points = generate(&spec)?;
    let format = |path: Option<&Path>| match a.format {
        Some(Format::Binary) => PointFormat::Binary,
        Some(Format::Csv) => PointFormat::Csv,
        None => path.map_or(PointFormat::Csv, PointFormat::from_path),
    };
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            write_points(&points, format(Some(path)), &mut w)?;
            w.flush()?;
        }
        None => write_points(&points, format(None), io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_triangulate(a: TriangulateArgs) -> Result<(), Failure> {
    let points = load(&a.input)?;
    let config = RunConfig {
        distribution: None,
        dim: points.dim(),
        n: points.len(),
        k: a.k.unwrap_or(a.threads),
        strategy: a.strategy,
        divider: a.divider,
        weight_fn: a.weights,
        sample_rule: a.sample,
        policy: a.policy,
        seed: a.seed,
        threads: a.threads,
        base_case: a.base_case,
        epsilon: a.epsilon,
        oracle_limit: a.oracle_limit,
    };
    let (t, metrics) = measure(&points, &config.dc_config(), a.oracle_limit)?;
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        t.write_csv(points.len(), &mut w)?;
        w.flush()?;
    }
    let validity = metrics.validity;
    eprintln!(
        "{} points, {} simplices, o_DT {:.4}, {:.3}s, validity {validity}",
        points.len(),
        metrics.finite_simplices,
        metrics.o_dt,
        metrics.times.total.as_secs_f64()
    );
    if let Some(path) = &a.report {
        let mut w = create(path)?;
        let row = RunReport {
            config,
            outcome: Ok(metrics),
        };
        write_csv(&[row], &mut w)?;
        w.flush()?;
    }
    match validity {
        Validity::Violations(c) => Err(Failure::Invalid(format!("{c} oracle violations"))),
        _ => Ok(()),
    }
}

fn cmd_validate(a: ValidateArgs) -> Result<(), Failure> {
    let points = load(&a.points)?;
    let (mut t, n) = Triangulation::read_csv(open(&a.tris)?)?;
    if n != points.len() || t.dim() != points.dim() {
        return Err(Failure::Runtime(format!(
            "triangulation is for {n} points in {}D, point file has {} in {}D",
            t.dim(),
            points.len(),
            points.dim()
        )));
    }
    if let Err(e) = t.relink(&points) {
        return Err(Failure::Invalid(format!("simplices do not form a triangulation: {e}")));
    }
    let report = validate_with_limit(&t, &points, a.limit)?;
    println!(
        "{} simplices: {} empty-sphere, {} facet, {} neighbor, {} orientation violations, {} missing vertices",
        report.finite_simplices,
        report.empty_sphere_violations.len(),
        report.facet_violations,
        report.neighbor_violations,
        report.orientation_violations,
        report.missing_vertices.len()
    );
    if report.is_valid() {
        Ok(())
    } else {
        Err(Failure::Invalid("not a Delaunay triangulation".into()))
    }
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.grid).map_err(|e| Failure::Runtime(format!("{}: {e}", a.grid.display())))?;
    let mut grid = GridSpec::from_toml(&text).map_err(|e| Failure::Usage(e.to_string()))?;
    grid.concurrent |= a.concurrent;
    let rows = run_experiment(&grid)?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            write_csv(&rows, &mut w)?;
            w.flush()?;
        }
        None => write_csv(&rows, io::stdout().lock())?,
    }
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    let invalid = rows
        .iter()
        .filter(|r| matches!(&r.outcome, Ok(m) if matches!(m.validity, Validity::Violations(_))))
        .count();
    eprintln!("{} runs, {failed} failed, {invalid} invalid", rows.len());
    if invalid > 0 {
        return Err(Failure::Invalid(format!("{invalid} runs failed validation")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Triangulate(a) => cmd_triangulate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("invalid: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
