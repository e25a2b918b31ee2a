//! Command-line front end: constants, coefficient counting, graph sampling,
//! statistical experiments, and the full verification battery, all emitting
//! JSON to stdout or a file.
//!
//! Exit codes: 0 success (all verdicts pass), 1 a graded verdict failed,
//! 2 usage or argument error, 3 numeric or convergence failure. Worker
//! thread count comes from `POLYBOLTZ_THREADS` (default 1, single-threaded;
//! 0 means all cores).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde_json::{json, Value};

use polyboltz::analytic::compute_constants_with_family;
use polyboltz::error::{Error, Result};
use polyboltz::lab::{
    run_bs_census, run_constants, run_diameter_tail, run_fragments, run_rayleigh, run_verify,
    run_verify_scaled, LabOptions,
};
use polyboltz::sampler::{BoltzmannSampler, MultisetCounts, UnrootedMethod};
use polyboltz::species::{lookup_species, unrooted_count_series};

#[derive(Parser)]
#[command(
    name = "polyboltz",
    version,
    about = "Polya-Boltzmann sampling laboratory for subcritical unlabelled graph classes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the class constants at a truncation order, with a convergence
    /// study at half and quarter order.
    Constants {
        #[arg(long)]
        class: String,
        #[arg(long)]
        order: usize,
    },
    /// Rooted and unrooted class counts up to size n.
    Count {
        #[arg(long)]
        class: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        mode: CountMode,
    },
    /// Draw graphs of an exact size.
    Sample(SampleArgs),
    /// Run one statistical experiment and grade it.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[arg(long)]
        class: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0x706f_6c79)]
        seed: u64,
        /// Neighborhood radius for bs-census.
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// Series truncation order behind the sampler.
        #[arg(long, default_value_t = 512)]
        order: usize,
        /// Relative half-width of the size window for large draws.
        #[arg(long, default_value_t = 0.05)]
        window: f64,
    },
    /// Run the complete verification battery for a class.
    Verify {
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 0x706f_6c79)]
        seed: u64,
        /// Sample count for the uniformity batteries.
        #[arg(long, default_value_t = 1_000_000)]
        uniformity_samples: usize,
    },
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    class: String,
    #[arg(long)]
    size: usize,
    /// Draw rooted graphs (default is unrooted).
    #[arg(long, conflicts_with = "unrooted")]
    rooted: bool,
    #[arg(long)]
    unrooted: bool,
    /// Unrooted sampling method.
    #[arg(long, value_enum, default_value_t = MethodArg::Decomposition)]
    method: MethodArg,
    #[arg(long, default_value_t = 0x706f_6c79)]
    seed: u64,
    /// Number of graphs to draw.
    #[arg(long, default_value_t = 1)]
    count: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CountMode {
    Rational,
    Float,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Decomposition,
    OrbitRejection,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Rayleigh,
    Diameter,
    BsCensus,
    Fragments,
}

fn threads_from_env() -> Result<usize> {
    match std::env::var("POLYBOLTZ_THREADS") {
        Ok(raw) => raw
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Numeric(format!("POLYBOLTZ_THREADS must be a count, got {raw:?}"))),
        Err(_) => Ok(1),
    }
}

fn rational_counts(class: &str, n: usize) -> Result<Value> {
    let counts = MultisetCounts::new(class, n)?;
    let fmt = |v: &num_rational::BigRational| -> String {
        if v.is_integer() {
            v.numer().to_string()
        } else {
            v.to_string()
        }
    };
    let rooted: Vec<String> = (0..=n).map(|k| fmt(counts.rooted(k))).collect();
    let unrooted: Vec<String> = (0..=n).map(|k| fmt(counts.unrooted(k))).collect();
    let multisets: Vec<String> = (0..=n).map(|k| fmt(counts.multisets(k))).collect();
    Ok(json!({
        "class": class,
        "n": n,
        "mode": "rational",
        "exact": counts.exact(),
        "rooted": rooted,
        "unrooted": unrooted,
        "multisets": multisets,
    }))
}

fn float_counts(class: &str, n: usize) -> Result<Value> {
    let kernel = lookup_species::<f64>(class)?;
    let (_, family) = compute_constants_with_family(kernel.as_ref(), n.max(32))?;
    let (unrooted, exact) = unrooted_count_series(kernel.as_ref(), &family)?;
    let scale = family.scale;
    let unscale = |series: &polyboltz::TruncatedSeries<f64>, k: usize| -> f64 {
        series.coeff(k) / scale.powi(k as i32)
    };
    let rooted: Vec<f64> = (0..=n).map(|k| unscale(&family.rooted, k)).collect();
    let unrooted: Vec<f64> = (0..=n).map(|k| unscale(&unrooted, k)).collect();
    Ok(json!({
        "class": class,
        "n": n,
        "mode": "float",
        "exact": exact,
        "rooted": rooted,
        "unrooted": unrooted,
    }))
}

fn sample_command(args: &SampleArgs) -> Result<Value> {
    let order = args.size.max(64);
    let sampler = BoltzmannSampler::for_class(&args.class, order)?;
    let method = match args.method {
        MethodArg::Decomposition => UnrootedMethod::Decomposition,
        MethodArg::OrbitRejection => UnrootedMethod::OrbitRejection,
    };
    let mut samples = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
        rng.set_stream(i as u64);
        let (graph, meta) = if args.rooted {
            let s = sampler.sample_rooted_sized(args.size, 0.0, &mut rng)?;
            (s.graph, s.meta)
        } else {
            let s = sampler.sample_unrooted_sized(args.size, method, &mut rng)?;
            (s.graph, s.meta)
        };
        samples.push(json!({
            "index": i,
            "graph": graph.to_json(),
            "meta": meta,
        }));
    }
    Ok(json!({
        "class": args.class,
        "size": args.size,
        "mode": if args.rooted { "rooted" } else { "unrooted" },
        "method": if args.rooted { "rooted-rejection" } else { method.as_str() },
        "seed": args.seed,
        "count": args.count,
        "samples": samples,
    }))
}

fn execute(cli: &Cli) -> Result<(Value, bool)> {
    let threads = threads_from_env()?;
    match &cli.command {
        Command::Constants { class, order } => {
            let opts = LabOptions {
                threads,
                order: *order,
                ..LabOptions::default()
            };
            let report = run_constants(class, *order, &opts)?;
            let pass = report.passed();
            Ok((serde_json::to_value(&report)?, pass))
        }
        Command::Count { class, n, mode } => {
            let value = match mode {
                CountMode::Rational => rational_counts(class, *n)?,
                CountMode::Float => float_counts(class, *n)?,
            };
            Ok((value, true))
        }
        Command::Sample(args) => Ok((sample_command(args)?, true)),
        Command::Experiment {
            kind,
            class,
            n,
            samples,
            seed,
            k,
            order,
            window,
        } => {
            let opts = LabOptions {
                seed: *seed,
                threads,
                order: *order,
                window: *window,
                ..LabOptions::default()
            };
            let report = match kind {
                ExperimentKind::Rayleigh => run_rayleigh(class, *n, *samples, &opts)?,
                ExperimentKind::Diameter => run_diameter_tail(class, *n, *samples, &opts)?,
                ExperimentKind::BsCensus => run_bs_census(class, *n, *k, *samples, &opts)?,
                ExperimentKind::Fragments => run_fragments(class, *n, *samples, &opts)?,
            };
            let pass = report.passed();
            Ok((serde_json::to_value(&report)?, pass))
        }
        Command::Verify {
            class,
            seed,
            uniformity_samples,
        } => {
            let opts = LabOptions {
                seed: *seed,
                threads,
                ..LabOptions::default()
            };
            let report = if *uniformity_samples == 1_000_000 {
                run_verify(class, &opts)?
            } else {
                run_verify_scaled(class, *uniformity_samples, &opts)?
            };
            let pass = report.pass;
            Ok((serde_json::to_value(&report)?, pass))
        }
    }
}

fn emit(value: &Value, out: Option<&PathBuf>) -> Result<()> {
    use std::io::Write;
    let body = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, body + "\n")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            if let Err(err) = writeln!(stdout, "{body}") {
                // A closed pipe downstream is not a failure of ours.
                if err.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(err.into());
                }
            }
        }
    }
    Ok(())
}

fn failure_code(err: &Error) -> ExitCode {
    match err {
        Error::UnknownClass(_)
        | Error::Unsupported { .. }
        | Error::SeriesDomain(_)
        | Error::GraphDomain(_)
        | Error::Io(_)
        | Error::Json(_) => ExitCode::from(2),
        Error::Numeric(_)
        | Error::NoConvergence(_)
        | Error::ExactInconsistency(_)
        | Error::BudgetExhausted { .. } => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok((value, pass)) => {
            if let Err(err) = emit(&value, cli.out.as_ref()) {
                eprintln!("error: {err}");
                return failure_code(&err);
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            failure_code(&err)
        }
    }
}
