//! Reproducible sampling experiments with graded verdicts.
//!
//! Each runner draws its samples from per-sample generators: sample `i` of
//! phase `p` always sees `ChaCha12` keyed by the experiment seed on stream
//! `(p << 32) | i`, so a run is bit-identical across thread counts and can
//! be aggregated in index order regardless of completion order. Reports
//! carry the parameters, the raw statistics, and verdicts that are pure
//! functions of those statistics against visible thresholds.

pub mod stats;

mod experiments;
pub mod verify;

pub use experiments::{run_bs_census, run_diameter_tail, run_fragments, run_rayleigh};
pub use verify::{run_verify, run_verify_scaled, CriterionResult, VerifyReport};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analytic::{compute_constants, ConstantsReport};
use crate::error::{Error, Result};
use crate::species::lookup_species;

/// Grading thresholds, visible in every report that uses them.
#[derive(Debug, Clone, Serialize)]
pub struct Thresholds {
    /// Kolmogorov-Smirnov distance bound for continuous-law checks.
    pub ks: f64,
    /// Total-variation bound for census comparisons.
    pub tv_census: f64,
    /// Total-variation bound for fragment-law comparisons.
    pub tv_fragments: f64,
    /// Minimum acceptable chi-square goodness-of-fit p-value.
    pub chi_square_p: f64,
    /// Relative error bound on mean-value checks.
    pub mean_relative: f64,
    /// Relative error bound on second-moment checks.
    pub moment_relative: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            ks: 0.05,
            tv_census: 0.05,
            tv_fragments: 0.10,
            chi_square_p: 0.01,
            mean_relative: 0.05,
            moment_relative: 0.10,
        }
    }
}

/// Common experiment configuration.
#[derive(Debug, Clone, Serialize)]
pub struct LabOptions {
    /// Base seed; sample `i` of phase `p` uses stream `(p << 32) | i`.
    pub seed: u64,
    /// Worker threads; `1` runs sequentially, `0` uses all cores.
    pub threads: usize,
    /// Series truncation order behind samplers and constants.
    pub order: usize,
    /// Relative half-width of the size window for large draws.
    pub window: f64,
    pub thresholds: Thresholds,
}

impl Default for LabOptions {
    fn default() -> Self {
        LabOptions {
            seed: 0x706f_6c79,
            threads: 1,
            order: 512,
            window: 0.05,
            thresholds: Thresholds::default(),
        }
    }
}

/// One graded check: `observed` compared against `threshold` in the
/// direction recorded by the constructor.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub observed: f64,
    pub threshold: f64,
    /// `"<="` when the observation must stay below the threshold,
    /// `">="` when it must stay above.
    pub direction: &'static str,
    pub pass: bool,
}

impl Verdict {
    /// Passes when `observed <= threshold` (and is finite).
    pub fn below(name: &str, observed: f64, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            observed,
            threshold,
            direction: "<=",
            pass: observed.is_finite() && observed <= threshold,
        }
    }

    /// Passes when `observed >= threshold` (and is finite).
    pub fn above(name: &str, observed: f64, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            observed,
            threshold,
            direction: ">=",
            pass: observed.is_finite() && observed >= threshold,
        }
    }

    /// Passes when `value` is within relative distance `tol` of `target`.
    /// The observation recorded is the relative deviation itself.
    pub fn relative(name: &str, value: f64, target: f64, tol: f64) -> Self {
        let dev = if target == 0.0 {
            value.abs()
        } else {
            ((value - target) / target).abs()
        };
        Verdict::below(name, dev, tol)
    }
}

/// Where a report's numbers came from.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub library_version: String,
    pub class: String,
    pub seed: u64,
    pub threads: usize,
    /// Truncation order of the series family behind the run.
    pub series_order: usize,
    /// Mass of the composition levels dropped by the sampler, if one ran.
    pub truncation_bias: Option<f64>,
    /// Number of composition levels the sampler kept, if one ran.
    pub level_cutoff: Option<usize>,
    /// Condensed solved constants the run relied on.
    pub constants: Option<Value>,
}

impl Provenance {
    fn new(class: &str, opts: &LabOptions) -> Self {
        Provenance {
            library_version: env!("CARGO_PKG_VERSION").into(),
            class: class.into(),
            seed: opts.seed,
            threads: opts.threads,
            series_order: opts.order,
            truncation_bias: None,
            level_cutoff: None,
            constants: None,
        }
    }
}

/// Result of one experiment run: parameters in, statistics out, verdicts
/// derived from the statistics alone.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: Value,
    pub statistics: Value,
    pub verdicts: Vec<Verdict>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Runs `job` once per sample index with that sample's private generator,
/// sequentially or on a thread pool depending on `opts.threads`. Output
/// order is sample-index order either way, so aggregation downstream is
/// independent of scheduling.
pub(crate) fn sample_stream<T: Send>(
    samples: usize,
    phase: u64,
    opts: &LabOptions,
    job: impl Fn(usize, &mut ChaCha12Rng) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    debug_assert!(samples < (1 << 32), "sample index must fit its stream slot");
    let run = |i: usize| -> Result<T> {
        let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
        rng.set_stream((phase << 32) | i as u64);
        job(i, &mut rng)
    };
    if opts.threads == 1 {
        (0..samples).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
        pool.install(|| (0..samples).into_par_iter().map(run).collect())
    }
}

/// Reference constants used as regression targets, keyed by context field.
const OUTERPLANAR_REFERENCE: &[(&str, f64)] = &[
    ("rho", 0.133_269_4),
    ("a", 0.170_756_0),
    ("b", 0.018_094_0),
    ("e_z", 1.349_75),
    ("e_uu", 549.359),
    ("eta0_prime", 5.435_858),
    ("eta", 5.038_561),
    ("zeta", 0.053_435_3),
    ("var_xi", 93.806_31),
    ("c_omega", 0.986_468_9),
];

fn context_field(report: &ConstantsReport, key: &str) -> f64 {
    let c = &report.context;
    match key {
        "rho" => c.rho,
        "a" => c.a,
        "b" => c.b,
        "e_z" => c.e_z,
        "e_uu" => c.e_uu,
        "eta0_prime" => c.aux.eta0_prime,
        "eta" => c.eta_mean,
        "zeta" => c.zeta_mean,
        "var_xi" => c.var_xi,
        "c_omega" => c.c_omega,
        _ => f64::NAN,
    }
}

pub(crate) fn condensed_constants(report: &ConstantsReport) -> Value {
    json!({
        "rho": report.context.rho,
        "a": report.context.a,
        "c_omega": report.context.c_omega,
        "c_a": report.context.c_a,
        "span": report.context.span,
        "truncation": report.truncation,
    })
}

/// Solves the class constants at `order` with a convergence study at
/// `order / 4` and `order / 2`, and grades the solved values against the
/// class's reference targets.
pub fn run_constants(class: &str, order: usize, opts: &LabOptions) -> Result<ExperimentReport> {
    if order < 64 {
        return Err(Error::SeriesDomain(format!(
            "convergence study needs order >= 64, got {order}"
        )));
    }
    let kernel = lookup_species::<f64>(class)?;
    let started = std::time::Instant::now();
    let quarter = compute_constants(kernel.as_ref(), order / 4)?;
    let half = compute_constants(kernel.as_ref(), order / 2)?;
    let full = compute_constants(kernel.as_ref(), order)?;
    let elapsed = started.elapsed().as_secs_f64();

    let d1 = (half.context.c_omega - quarter.context.c_omega).abs();
    let d2 = (full.context.c_omega - half.context.c_omega).abs();

    let mut verdicts = vec![Verdict::below(
        "c-omega-contraction",
        d2,
        d1.max(1e-12),
    )];
    match class {
        "trees" => {
            verdicts.push(Verdict::relative("tree-a-is-one", full.context.a, 1.0, 1e-6));
            verdicts.push(Verdict::relative(
                "tree-var-xi-is-one",
                full.context.var_xi,
                1.0,
                1e-6,
            ));
            verdicts.push(Verdict::relative(
                "tree-eta-is-one",
                full.context.eta_mean,
                1.0,
                1e-6,
            ));
            verdicts.push(Verdict::relative(
                "tree-rho-reference",
                full.context.rho,
                0.338_321_9,
                1e-3,
            ));
        }
        "outerplanar" => {
            for (key, target) in OUTERPLANAR_REFERENCE {
                verdicts.push(Verdict::relative(
                    &format!("reference-{key}"),
                    context_field(&full, key),
                    *target,
                    1e-3,
                ));
            }
        }
        _ => {}
    }

    let statistics = json!({
        "orders": [order / 4, order / 2, order],
        "c_omega_by_order": [
            quarter.context.c_omega,
            half.context.c_omega,
            full.context.c_omega,
        ],
        "contraction_steps": [d1, d2],
        "elapsed_seconds": elapsed,
        "report": full,
    });
    let mut provenance = Provenance::new(class, opts);
    provenance.series_order = order;
    provenance.constants = Some(condensed_constants(&full));

    Ok(ExperimentReport {
        experiment: "constants".into(),
        parameters: json!({ "class": class, "order": order }),
        statistics,
        verdicts,
        provenance,
    })
}
