//! The full verification battery: constants regression, exact counting
//! against brute-force enumeration, sampler uniformity at scale, coefficient
//! asymptotics, the limit-statistics experiments, and numeric hygiene.
//!
//! Every criterion reports graded verdicts and its own wall time, so the
//! battery's JSON output is a complete, self-contained audit of one class.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::stats;
use super::{
    run_bs_census, run_constants, run_diameter_tail, run_fragments, run_rayleigh,
    ExperimentReport, LabOptions, Verdict,
};
use crate::analytic::compute_constants_with_family;
use crate::error::{Error, Result};
use crate::sampler::{BoltzmannSampler, MultisetCounts, UnrootedMethod};
use crate::series::TruncatedSeries;
use crate::species::{self, lookup_species};
use crate::toolkit;
use crate::Graph;

/// One graded criterion of the battery.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub name: String,
    pub pass: bool,
    pub seconds: f64,
    pub verdicts: Vec<Verdict>,
    /// Sub-experiment reports backing the verdicts, when any ran.
    pub reports: Vec<ExperimentReport>,
}

impl CriterionResult {
    fn grade(name: &str, started: Instant, verdicts: Vec<Verdict>) -> Self {
        CriterionResult {
            name: name.into(),
            pass: verdicts.iter().all(|v| v.pass),
            seconds: started.elapsed().as_secs_f64(),
            verdicts,
            reports: Vec::new(),
        }
    }
}

/// Outcome of the whole battery for one class.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub class: String,
    pub seed: u64,
    pub library_version: String,
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
}

/// Brute-force enumeration of rooted trees: one representative per class,
/// rooted at vertex 0. Built bottom-up from nondecreasing multisets of
/// strictly smaller rooted subtrees, so each class appears exactly once by
/// construction; no series arithmetic is involved.
pub(crate) fn enumerate_rooted_trees(n: usize) -> Vec<Graph> {
    let mut classes: Vec<Vec<Graph>> = vec![Vec::new(); n + 1];
    if n == 0 {
        return Vec::new();
    }
    classes[1] = vec![Graph::new(1)];
    for size in 2..=n {
        let mut out = Vec::new();
        let mut chosen: Vec<(usize, usize)> = Vec::new();
        build_multisets(&classes, size - 1, (1, 0), &mut chosen, &mut out);
        classes[size] = out;
    }
    classes.swap_remove(n)
}

/// Extends a nondecreasing multiset of (size, index) subtree choices until
/// the remaining budget is zero, then materializes the tree.
fn build_multisets(
    classes: &[Vec<Graph>],
    remaining: usize,
    min_item: (usize, usize),
    chosen: &mut Vec<(usize, usize)>,
    out: &mut Vec<Graph>,
) {
    if remaining == 0 {
        let mut tree = Graph::new(1);
        for &(size, index) in chosen.iter() {
            let offset = tree.append_copy(&classes[size][index]);
            tree.add_edge(0, offset);
        }
        tree.sort_adjacency();
        out.push(tree);
        return;
    }
    let (mut size, mut index) = min_item;
    while size <= remaining {
        if index >= classes[size].len() {
            size += 1;
            index = 0;
            continue;
        }
        chosen.push((size, index));
        build_multisets(classes, remaining - size, (size, index), chosen, out);
        chosen.pop();
        index += 1;
    }
}

/// Free trees with `n` vertices: rooted representatives deduplicated by
/// unrooted canonical code.
pub(crate) fn enumerate_free_trees(n: usize) -> Result<Vec<Graph>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in enumerate_rooted_trees(n) {
        if seen.insert(toolkit::canonical_code(&t)?) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Connected outerplanar representatives with `n` vertices, from the
/// exhaustive connected-graph enumeration.
fn enumerate_outerplanar(n: usize) -> Result<Vec<Graph>> {
    let all = toolkit::enumerate_connected(n)?;
    Ok(all.iter().filter(|g| toolkit::is_outerplanar(g)).cloned().collect())
}

fn big(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Criterion: solved constants match their reference targets, with the
/// convergence study contracting; outerplanar additionally has a wall-time
/// budget for the order-2048 study.
fn constants_criterion(class: &str, opts: &LabOptions) -> Result<CriterionResult> {
    let started = Instant::now();
    let order = if class == "outerplanar" { 2048 } else { 1024 };
    let report = run_constants(class, order, opts)?;
    let mut verdicts = report.verdicts.clone();
    if class == "outerplanar" {
        let elapsed = report.statistics["elapsed_seconds"].as_f64().unwrap_or(f64::NAN);
        verdicts.push(Verdict::below("constants-study-seconds", elapsed, 300.0));
    }
    let mut result = CriterionResult::grade("constants", started, verdicts);
    result.reports.push(report);
    Ok(result)
}

/// Criterion: exact rational coefficients equal brute-force class counts,
/// the frozen unrooted checkpoints hold, and the cycle-pointing identity
/// holds in integer arithmetic.
fn counting_criterion(class: &str) -> Result<CriterionResult> {
    let started = Instant::now();
    let mut verdicts = Vec::new();
    match class {
        "trees" => {
            let counts = MultisetCounts::new("trees", 32)?;
            let mut rooted_mismatch = 0usize;
            for n in 1..=10 {
                if counts.rooted(n) != &big(enumerate_rooted_trees(n).len()) {
                    rooted_mismatch += 1;
                }
            }
            verdicts.push(Verdict::below(
                "rooted-counts-vs-enumeration-mismatches",
                rooted_mismatch as f64,
                0.0,
            ));

            let frozen = [1usize, 1, 1, 2, 3, 6, 11, 23];
            let mut unrooted_mismatch = 0usize;
            for (i, want) in frozen.iter().enumerate() {
                let n = i + 1;
                if counts.unrooted(n) != &big(*want) {
                    unrooted_mismatch += 1;
                }
                if n <= 8 && counts.unrooted(n) != &big(enumerate_free_trees(n)?.len()) {
                    unrooted_mismatch += 1;
                }
            }
            verdicts.push(Verdict::below(
                "unrooted-counts-mismatches",
                unrooted_mismatch as f64,
                0.0,
            ));

            // Cycle-pointing identity, exactly, from an independent rational
            // pipeline: n * c_n = a_n + cv_n + cb_n with integer c_n.
            let kernel = lookup_species::<BigRational>("trees")?;
            let family = crate::analytic::compute_family(kernel.as_ref(), 32)?;
            let cv = species::cv_series(kernel.as_ref(), &family)?;
            let (cb, _) = species::cb_series(kernel.as_ref(), &family)?;
            let mut identity_failures = 0usize;
            for n in 1..=32 {
                let total = family.rooted.coeff(n) + cv.coeff(n) + cb.coeff(n);
                let lhs = big(n) * counts.unrooted(n).clone();
                if lhs != total || !counts.unrooted(n).is_integer() {
                    identity_failures += 1;
                }
            }
            verdicts.push(Verdict::below(
                "cycle-pointing-identity-failures",
                identity_failures as f64,
                0.0,
            ));
        }
        "outerplanar" => {
            let counts = MultisetCounts::new("outerplanar", 7)?;
            let kernel = lookup_species::<BigRational>("outerplanar")?;
            let family = crate::analytic::compute_family(kernel.as_ref(), 7)?;
            let mut rooted_mismatch = 0usize;
            let mut unrooted_mismatch = 0usize;
            for n in 1..=7 {
                let reps = enumerate_outerplanar(n)?;
                let mut rooted = 0usize;
                for g in &reps {
                    rooted += toolkit::aut_orbit_count(g)?;
                }
                if family.rooted.coeff(n) != big(rooted) {
                    rooted_mismatch += 1;
                }
                if counts.rooted(n) != &big(rooted) {
                    rooted_mismatch += 1;
                }
                if counts.unrooted(n) != &big(reps.len()) {
                    unrooted_mismatch += 1;
                }
            }
            verdicts.push(Verdict::below(
                "rooted-counts-vs-enumeration-mismatches",
                rooted_mismatch as f64,
                0.0,
            ));
            verdicts.push(Verdict::below(
                "unrooted-counts-vs-enumeration-mismatches",
                unrooted_mismatch as f64,
                0.0,
            ));
        }
        other => return Err(Error::UnknownClass(other.into())),
    }
    Ok(CriterionResult::grade("exact-counting", started, verdicts))
}

/// Folds per-sample census keys into counts, sequentially or in parallel;
/// the merge is commutative so thread count never changes the census.
fn census_fold(
    samples: usize,
    phase: u64,
    opts: &LabOptions,
    job: impl Fn(&mut ChaCha12Rng) -> Result<Vec<u64>> + Sync,
) -> Result<HashMap<Vec<u64>, usize>> {
    let draw = |i: usize| -> Result<Vec<u64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
        rng.set_stream((phase << 32) | i as u64);
        job(&mut rng)
    };
    if opts.threads == 1 {
        let mut census = HashMap::new();
        for i in 0..samples {
            *census.entry(draw(i)?).or_insert(0usize) += 1;
        }
        Ok(census)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..samples)
                .into_par_iter()
                .try_fold(HashMap::new, |mut census, i| {
                    *census.entry(draw(i)?).or_insert(0usize) += 1;
                    Ok::<_, Error>(census)
                })
                .try_reduce(HashMap::new, |mut a, b| {
                    for (k, v) in b {
                        *a.entry(k).or_insert(0) += v;
                    }
                    Ok(a)
                })
        })
    }
}

/// Grades one uniformity battery: empirical class frequencies against the
/// uniform law over `classes`, by total variation and chi-square fit.
fn grade_battery(
    name: &str,
    census: &HashMap<Vec<u64>, usize>,
    classes: &[Vec<u64>],
) -> Result<Vec<Verdict>> {
    let tv = stats::total_variation_uniform(census, classes)?;
    let mut observed = Vec::with_capacity(classes.len());
    let mut seen = 0usize;
    for key in classes {
        let c = census.get(key).copied().unwrap_or(0);
        observed.push(c);
        seen += c;
    }
    let total: usize = census.values().sum();
    let p = stats::chi_square_uniform_p(&observed, total - seen)?;
    Ok(vec![
        Verdict::below(&format!("{name}-tv"), tv, 0.02),
        Verdict::above(&format!("{name}-chi-square-p"), p, 0.01),
    ])
}

/// Criterion: exact-size samplers are uniform over the enumerated classes
/// at scale, within total variation 0.02, inside a wall-time budget.
fn uniformity_criterion(
    class: &str,
    samples: usize,
    opts: &LabOptions,
) -> Result<CriterionResult> {
    let started = Instant::now();
    let mut verdicts = Vec::new();
    match class {
        "trees" => {
            let sampler = BoltzmannSampler::for_class("trees", 64)?;
            let n = 8;
            let rooted_classes: Vec<Vec<u64>> = enumerate_rooted_trees(n)
                .iter()
                .map(|t| toolkit::treelike_code_rooted(t, 0))
                .collect::<Result<_>>()?;
            let census = census_fold(samples, 10, opts, |rng| {
                let g = sampler.sample_rooted_sized(n, 0.0, rng)?.graph;
                toolkit::treelike_code_rooted(&g, 0)
            })?;
            verdicts.extend(grade_battery("rooted-trees", &census, &rooted_classes)?);

            let free_classes: Vec<Vec<u64>> = enumerate_free_trees(n)?
                .iter()
                .map(toolkit::canonical_code)
                .collect::<Result<_>>()?;
            for (phase, method) in [
                (11, UnrootedMethod::Decomposition),
                (12, UnrootedMethod::OrbitRejection),
            ] {
                let census = census_fold(samples, phase, opts, |rng| {
                    let g = sampler.sample_unrooted_sized(n, method, rng)?.graph;
                    toolkit::canonical_code(&g)
                })?;
                let name = format!("unrooted-trees-{}", method.as_str());
                verdicts.extend(grade_battery(&name, &census, &free_classes)?);
            }
        }
        "outerplanar" => {
            let sampler = BoltzmannSampler::for_class("outerplanar", 64)?;
            let n = 6;
            let classes: Vec<Vec<u64>> = enumerate_outerplanar(n)?
                .iter()
                .map(toolkit::canonical_code)
                .collect::<Result<_>>()?;
            let census = census_fold(samples, 13, opts, |rng| {
                let g = sampler
                    .sample_unrooted_sized(n, UnrootedMethod::OrbitRejection, rng)?
                    .graph;
                toolkit::canonical_code(&g)
            })?;
            verdicts.extend(grade_battery("unrooted-outerplanar", &census, &classes)?);
        }
        other => return Err(Error::UnknownClass(other.into())),
    }
    verdicts.push(Verdict::below(
        "uniformity-seconds",
        started.elapsed().as_secs_f64(),
        600.0,
    ));
    Ok(CriterionResult::grade("sampler-uniformity", started, verdicts))
}

/// Criterion: rooted coefficients follow their `c_a n^{-3/2} rho^{-n}` law
/// with improving accuracy, and the vertex-pointed coefficient ratio
/// converges to the pointed-series value at the singularity.
fn asymptotics_criterion(class: &str) -> Result<CriterionResult> {
    let started = Instant::now();
    let sampler = BoltzmannSampler::for_class(class, 512)?;
    let kernel = lookup_species::<f64>(class)?;
    let (constants, _) = compute_constants_with_family(kernel.as_ref(), 512)?;
    let rho = constants.context.rho;
    let c_a = constants.context.c_a;
    let ratio = sampler.x() / sampler.scale();
    let deviation = |n: usize| -> f64 {
        let a_n_rho_n = sampler.rooted_coeff(n) * ratio.powi(n as i32);
        (a_n_rho_n * (n as f64).powf(1.5) / c_a - 1.0).abs()
    };
    let dev256 = deviation(256);
    let dev512 = deviation(512);
    let span = constants.context.span as usize;
    debug_assert_eq!(span, 1, "supported classes live on the unit lattice");

    let pv = sampler.pv_value();
    let pointed_ratio = sampler.cv_coeff(256) / sampler.rooted_coeff(256);

    let verdicts = vec![
        Verdict::below("rooted-asymptotic-deviation-512", dev512, 0.05),
        Verdict::below(
            "asymptotic-deviation-contraction",
            if dev256 > 1e-9 { dev512 / dev256 } else { 0.0 },
            1.0,
        ),
        Verdict::relative("pointed-ratio-vs-pv-value", pointed_ratio, pv, 0.05),
    ];
    let mut result = CriterionResult::grade("asymptotics", started, verdicts);
    result.reports.push(ExperimentReport {
        experiment: "asymptotics".into(),
        parameters: json!({ "class": class, "orders": [256, 512] }),
        statistics: json!({
            "rho": rho,
            "c_a": c_a,
            "deviation_256": dev256,
            "deviation_512": dev512,
            "pv_value": pv,
            "pointed_ratio_256": pointed_ratio,
        }),
        verdicts: Vec::new(),
        provenance: super::Provenance {
            library_version: env!("CARGO_PKG_VERSION").into(),
            class: class.into(),
            seed: 0,
            threads: 1,
            series_order: 512,
            truncation_bias: Some(sampler.truncation_bias()),
            level_cutoff: Some(sampler.level_cutoff()),
            constants: Some(super::condensed_constants(&constants)),
        },
    });
    Ok(result)
}

/// Criterion: the limit-statistics experiments pass at their stated sizes.
fn limit_statistics_criterion(class: &str, opts: &LabOptions) -> Result<CriterionResult> {
    let started = Instant::now();
    let mut reports = vec![run_rayleigh(class, 10_000, 10_000, opts)?];
    if class == "trees" {
        reports.push(run_diameter_tail(class, 10_000, 10_000, opts)?);
        reports.push(run_bs_census(class, 5_000, 1, 10_000, opts)?);
        reports.push(run_fragments(class, 1_000, 4_000, opts)?);
    }
    let mut verdicts = Vec::new();
    for report in &reports {
        for v in &report.verdicts {
            let mut v = v.clone();
            v.name = format!("{}/{}", report.experiment, v.name);
            verdicts.push(v);
        }
        let elapsed = report.statistics["elapsed_seconds"].as_f64().unwrap_or(f64::NAN);
        verdicts.push(Verdict::below(
            &format!("{}/seconds", report.experiment),
            elapsed,
            1800.0,
        ));
    }
    let mut result = CriterionResult::grade("limit-statistics", started, verdicts);
    result.reports = reports;
    Ok(result)
}

/// Criterion: numeric hygiene. Series square roots and exponentials invert
/// to high precision, closed-form partial derivatives match finite
/// differences, and the solved fixed point has tiny residuals.
fn hygiene_criterion(class: &str) -> Result<CriterionResult> {
    let started = Instant::now();
    let mut verdicts = Vec::new();

    let coeffs = vec![1.0, 0.37, -0.11, 0.073, 0.021, -0.0057, 0.0031, 0.0011];
    let s = TruncatedSeries::from_coeffs(coeffs, 7);
    let root = s.sqrt()?;
    let sqrt_err = sup_norm(&root.mul(&root).sub(&s));
    verdicts.push(Verdict::below("sqrt-roundtrip-error", sqrt_err, 1e-12));
    let log = s.log()?;
    let exp_err = sup_norm(&log.exp()?.sub(&s));
    verdicts.push(Verdict::below("exp-log-roundtrip-error", exp_err, 1e-12));

    let kernel = lookup_species::<f64>(class)?;
    let (constants, _) = compute_constants_with_family(kernel.as_ref(), 256)?;
    let (s1, s2) = (constants.context.a * 0.9, constants.context.b * 0.9);
    let (d1, d2, d11) = species::block_cis_partials(kernel.as_ref(), s1, s2)?;
    let h = 1e-6 * (1.0 + s1.abs());
    let fd1 = (kernel.block_cis_value(s1 + h, s2)? - kernel.block_cis_value(s1 - h, s2)?)
        / (2.0 * h);
    let h2 = 1e-6 * (1.0 + s2.abs());
    let fd2 = (kernel.block_cis_value(s1, s2 + h2)? - kernel.block_cis_value(s1, s2 - h2)?)
        / (2.0 * h2);
    let fd11 = (kernel.block_cis_d1_value(s1 + h, s2)? - kernel.block_cis_d1_value(s1 - h, s2)?)
        / (2.0 * h);
    let scale1 = 1.0 + d1.abs().max(d2.abs()).max(d11.abs());
    verdicts.push(Verdict::below(
        "partial-d1-vs-finite-difference",
        (d1 - fd1).abs() / scale1,
        1e-8,
    ));
    verdicts.push(Verdict::below(
        "partial-d2-vs-finite-difference",
        (d2 - fd2).abs() / scale1,
        1e-8,
    ));
    verdicts.push(Verdict::below(
        "partial-d11-vs-finite-difference",
        (d11 - fd11).abs() / scale1,
        1e-8,
    ));

    verdicts.push(Verdict::below(
        "fixed-point-residual",
        constants.residual_value,
        1e-12,
    ));
    verdicts.push(Verdict::below(
        "derivative-residual",
        constants.residual_derivative,
        1e-12,
    ));
    Ok(CriterionResult::grade("numeric-hygiene", started, verdicts))
}

fn sup_norm(s: &TruncatedSeries<f64>) -> f64 {
    s.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()))
}

/// Runs the complete battery for one class with fixed seeds and the stated
/// criterion sizes. This is the engine behind the `verify` command; expect
/// a long run at the full sample counts.
pub fn run_verify(class: &str, opts: &LabOptions) -> Result<VerifyReport> {
    run_verify_scaled(class, 1_000_000, opts)
}

/// [`run_verify`] with an explicit uniformity sample count, so smoke tests
/// can run the full battery shape quickly.
pub fn run_verify_scaled(
    class: &str,
    uniformity_samples: usize,
    opts: &LabOptions,
) -> Result<VerifyReport> {
    lookup_species::<f64>(class)?;
    let criteria = vec![
        constants_criterion(class, opts)?,
        counting_criterion(class)?,
        uniformity_criterion(class, uniformity_samples, opts)?,
        asymptotics_criterion(class)?,
        limit_statistics_criterion(class, opts)?,
        hygiene_criterion(class)?,
    ];
    let pass = criteria.iter().all(|c| c.pass);
    Ok(VerifyReport {
        class: class.into(),
        seed: opts.seed,
        library_version: env!("CARGO_PKG_VERSION").into(),
        criteria,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rooted_tree_enumeration_matches_classic_counts() {
        let want = [1usize, 1, 2, 4, 9, 20, 48, 115, 286, 719];
        for (i, expect) in want.iter().enumerate() {
            let n = i + 1;
            assert_eq!(enumerate_rooted_trees(n).len(), *expect, "n = {n}");
        }
        let free = [1usize, 1, 1, 2, 3, 6, 11, 23];
        for (i, expect) in free.iter().enumerate() {
            let n = i + 1;
            assert_eq!(enumerate_free_trees(n).unwrap().len(), *expect, "n = {n}");
        }
    }

    #[test]
    fn enumerated_trees_are_trees() {
        for t in enumerate_rooted_trees(7) {
            assert_eq!(t.m(), t.n() - 1);
            assert_eq!(toolkit::components(&t).len(), 1);
        }
    }

    #[test]
    fn counting_criterion_passes_for_trees() {
        let result = counting_criterion("trees").unwrap();
        assert!(result.pass, "verdicts: {:?}", result.verdicts);
    }

    #[test]
    fn hygiene_criterion_passes_for_trees() {
        let result = hygiene_criterion("trees").unwrap();
        assert!(result.pass, "verdicts: {:?}", result.verdicts);
    }

    #[test]
    fn small_uniformity_battery_reports_all_checks() {
        let opts = LabOptions::default();
        let result = uniformity_criterion("trees", 4_000, &opts).unwrap();
        let names: Vec<&str> = result.verdicts.iter().map(|v| v.name.as_str()).collect();
        assert!(names.contains(&"rooted-trees-tv"));
        assert!(names.contains(&"unrooted-trees-decomposition-tv"));
        assert!(names.contains(&"unrooted-trees-orbit-rejection-chi-square-p"));
        for v in &result.verdicts {
            if v.name.ends_with("-tv") {
                assert!(v.observed < 0.2, "{}: {}", v.name, v.observed);
            }
        }
    }

    #[test]
    fn asymptotics_criterion_passes_for_trees() {
        let result = asymptotics_criterion("trees").unwrap();
        assert!(result.pass, "verdicts: {:?}", result.verdicts);
    }
}
