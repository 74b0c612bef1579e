//! `feec` command line: mesh generation and the verification suite.

use std::fs;
use std::io::Write as _;
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use feec::simplicial::{MeshFile, SimplicialComplex};
use feec::suite::{run_suite, MeshSource, Stage, SuiteConfig};
use feec::weights::Faults;

#[derive(Parser)]
#[command(name = "feec", version, about = "Commuting projections onto trimmed finite element complexes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the structured triangulation of [0,1]^n with m divisions per axis as JSON.
    GenMesh {
        n: usize,
        m: usize,
        /// output file (stdout when omitted)
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite. Exits with status 1 if any check fails.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    /// flip one sign of the top-dimensional boundary matrix
    FlipBoundarySign,
    /// let the weight bubble reach one cell outside the extended star
    BubbleExtraCell,
    /// skip the mean-zero correction of the vertex weights
    SkipMeanZero,
}

#[derive(clap::Args)]
struct RunArgs {
    /// mesh file in the JSON format written by gen-mesh
    #[arg(long, conflicts_with = "gen")]
    mesh: Option<PathBuf>,
    /// structured mesh "n,m"
    #[arg(long, default_value = "2,2")]
    gen: String,
    /// refinement levels of the scaling stage
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// polynomial degrees "MIN..MAX"
    #[arg(long, default_value = "1..2")]
    r: String,
    /// form degrees "MIN..MAX" (clipped to the mesh dimension)
    #[arg(long, default_value = "0..3")]
    k: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// directory for the reports (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// exact rational arithmetic for the Whitney identities
    #[arg(long, value_enum, default_value = "on")]
    rational: Switch,
    /// random inputs per (r, k) in the commutation checks
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// comma separated subset of: complex, dimensions, exactness, whitney, weights, extension, projection, scaling
    #[arg(long)]
    stages: Option<String>,
    /// inject a defect (negative control)
    #[arg(long, value_enum)]
    fault: Vec<Fault>,
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>> {
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let lo: usize = a.trim().parse().with_context(|| format!("bad range {s:?}"))?;
    let hi: usize = b.trim().parse().with_context(|| format!("bad range {s:?}"))?;
    if lo > hi {
        bail!("empty range {s:?}");
    }
    Ok(lo..=hi)
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(',').with_context(|| format!("expected n,m but got {s:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn config(args: &RunArgs) -> Result<SuiteConfig> {
    let mesh = match &args.mesh {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mesh: MeshFile = serde_json::from_str(&text).context("parsing mesh file")?;
            MeshSource::File { label: path.display().to_string(), mesh }
        }
        None => {
            let (n, m) = parse_pair(&args.gen)?;
            MeshSource::Structured { n, m }
        }
    };
    let stages = match &args.stages {
        Some(list) => list
            .split(',')
            .map(|s| Stage::parse(s.trim()).with_context(|| format!("unknown stage {s:?}")))
            .collect::<Result<Vec<_>>>()?,
        None => Stage::ALL.to_vec(),
    };
    let mut faults = Faults::default();
    let mut flip_boundary = false;
    for f in &args.fault {
        match f {
            Fault::FlipBoundarySign => flip_boundary = true,
            Fault::BubbleExtraCell => faults.bubble_extra_cell = true,
            Fault::SkipMeanZero => faults.skip_mean_zero = true,
        }
    }
    let cfg = SuiteConfig {
        mesh,
        levels: args.levels,
        r: parse_range(&args.r)?,
        k: parse_range(&args.k)?,
        seed: args.seed,
        rational: matches!(args.rational, Switch::On),
        samples: args.samples,
        stages,
        faults,
        flip_boundary,
        ..SuiteConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<bool> {
    let cfg = config(&args)?;
    let out = run_suite(&cfg)?;
    let (name, body) = match args.format {
        Format::Json => ("report.json", out.to_json()),
        Format::Csv => ("report.csv", out.to_csv()),
    };
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), &body)?;
            fs::write(dir.join("constants.csv"), out.constants_csv())?;
        }
        None => print_stdout(&body)?,
    }
    let checks: usize = out.reports.iter().map(|r| r.checks.len()).sum();
    let failures = out.failures();
    for (rep, c) in &failures {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
        eprintln!(
            "FAIL {} r={} k={} {}: max_err {:e} > tol {:e}",
            rep.op,
            opt(rep.r),
            opt(rep.k),
            c.id,
            c.max_err,
            c.tol
        );
    }
    eprintln!("{} of {} checks passed", checks - failures.len(), checks);
    Ok(failures.is_empty())
}

/// Writes to stdout, treating a closed pipe as success.
fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn gen_mesh(n: usize, m: usize, out: Option<PathBuf>) -> Result<()> {
    let complex = SimplicialComplex::structured(n, m)?;
    let text = serde_json::to_string_pretty(&complex.to_mesh_file())?;
    match out {
        Some(path) => fs::write(path, text)?,
        None => print_stdout(&text)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(t) = std::env::var("FEEC_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring FEEC_THREADS={t:?}"),
        }
    }
    let result = match cli.command {
        Command::GenMesh { n, m, out } => gen_mesh(n, m, out).map(|_| true),
        Command::Run(args) => run(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
