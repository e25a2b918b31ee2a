//! The sampling experiments: distance profile, diameter tail, local census,
//! and fragment law.
//!
//! Large draws use the size-windowed samplers and normalize per-sample by
//! the realized size, so the window never enters the graded statistic. Each
//! phase of an experiment owns one stream namespace of the base seed.

use std::collections::HashMap;

use serde_json::json;

use super::stats;
use super::{condensed_constants, sample_stream, ExperimentReport, LabOptions, Provenance, Verdict};
use crate::analytic::{compute_constants_with_family, ConstantsReport};
use crate::error::{Error, Result};
use crate::randkit;
use crate::sampler::{BoltzmannSampler, MultisetSampler};
use crate::species::lookup_species;
use crate::toolkit;
use crate::Graph;

/// A solved class bound to its sampler, shared by every experiment phase.
struct Bench {
    sampler: BoltzmannSampler,
    constants: ConstantsReport,
}

fn bench(class: &str, opts: &LabOptions) -> Result<Bench> {
    let kernel = lookup_species::<f64>(class)?;
    let (constants, family) = compute_constants_with_family(kernel.as_ref(), opts.order)?;
    let sampler = BoltzmannSampler::at_singularity(kernel, &family, &constants.context)?;
    Ok(Bench { sampler, constants })
}

fn provenance(class: &str, opts: &LabOptions, b: &Bench) -> Provenance {
    let mut p = Provenance::new(class, opts);
    p.truncation_bias = Some(b.sampler.truncation_bias());
    p.level_cutoff = Some(b.sampler.level_cutoff());
    p.constants = Some(condensed_constants(&b.constants));
    p
}

fn require_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::Numeric("an experiment needs at least one sample".into()));
    }
    Ok(())
}

/// Draws unrooted graphs near size `n`, measures the distance between two
/// independent uniform vertices, rescales by `2 c_omega / sqrt(size)`, and
/// grades the sample against the unit Rayleigh law. A control column shows
/// that a doubled distance constant would shift the mean far outside the
/// accepted band.
pub fn run_rayleigh(
    class: &str,
    n: usize,
    samples: usize,
    opts: &LabOptions,
) -> Result<ExperimentReport> {
    require_samples(samples)?;
    let b = bench(class, opts)?;
    let c_omega = b.constants.context.c_omega;
    let started = std::time::Instant::now();
    let draws = sample_stream(samples, 0, opts, |_i, rng| {
        let s = b.sampler.sample_unrooted_window(n, opts.window, rng)?;
        let g = s.graph;
        let v1 = randkit::uniform_index(rng, g.n()) as u32;
        let v2 = randkit::uniform_index(rng, g.n()) as u32;
        let d = toolkit::bfs_distances(&g, v1)[v2 as usize];
        Ok((g.n(), d, s.meta.attempts, s.meta.nodes_created))
    })?;
    let elapsed = started.elapsed().as_secs_f64();

    let mean_attempts = stats::mean(&draws.iter().map(|d| d.2 as f64).collect::<Vec<_>>())?;
    let mean_nodes = stats::mean(&draws.iter().map(|d| d.3 as f64).collect::<Vec<_>>())?;
    let values: Vec<f64> = draws
        .iter()
        .map(|&(k, d, _, _)| 2.0 * c_omega * d as f64 / (k as f64).sqrt())
        .collect();
    let ks = stats::ks_statistic(&values, stats::rayleigh_cdf)?;
    let mean = stats::mean(&values)?;
    let target = stats::rayleigh_mean();
    let control_mean = 2.0 * mean;
    let control_dev = ((control_mean - target) / target).abs();
    let mean_size = stats::mean(&draws.iter().map(|d| d.0 as f64).collect::<Vec<_>>())?;

    let thr = &opts.thresholds;
    let verdicts = vec![
        Verdict::below("rayleigh-ks", ks, thr.ks),
        Verdict::relative("mean-relative-error", mean, target, thr.mean_relative),
        Verdict::above("doubled-constant-deviation", control_dev, thr.mean_relative),
    ];
    Ok(ExperimentReport {
        experiment: "rayleigh".into(),
        parameters: json!({
            "class": class, "n": n, "samples": samples,
            "window": opts.window, "method": "decomposition-window",
        }),
        statistics: json!({
            "ks": ks,
            "mean": mean,
            "mean_target": target,
            "control_mean": control_mean,
            "control_deviation": control_dev,
            "mean_size": mean_size,
            "mean_attempts": mean_attempts,
            "mean_nodes": mean_nodes,
            "c_omega": c_omega,
            "elapsed_seconds": elapsed,
        }),
        verdicts,
        provenance: provenance(class, opts, &b),
    })
}

/// Measures graph diameters near size `n`, fits the Gaussian tail rate of
/// `log P(D >= x)` against `x^2 / n`, checks the fit is an upper envelope
/// beyond the median, and grades the rescaled second moment of the
/// two-point distance against its Rayleigh limit.
pub fn run_diameter_tail(
    class: &str,
    n: usize,
    samples: usize,
    opts: &LabOptions,
) -> Result<ExperimentReport> {
    require_samples(samples)?;
    let b = bench(class, opts)?;
    let c_omega = b.constants.context.c_omega;
    let started = std::time::Instant::now();
    let draws = sample_stream(samples, 0, opts, |_i, rng| {
        let g = b.sampler.sample_unrooted_window(n, opts.window, rng)?.graph;
        let dia = toolkit::diameter(&g)?;
        let v1 = randkit::uniform_index(rng, g.n()) as u32;
        let v2 = randkit::uniform_index(rng, g.n()) as u32;
        let d = toolkit::bfs_distances(&g, v1)[v2 as usize];
        Ok((g.n(), dia, d))
    })?;
    let elapsed = started.elapsed().as_secs_f64();

    let moment = stats::mean(
        &draws
            .iter()
            .map(|&(k, _, d)| 2.0 * c_omega * c_omega * (d as f64) * (d as f64) / k as f64)
            .collect::<Vec<_>>(),
    )?;

    let diameters: Vec<f64> = draws.iter().map(|&(_, dia, _)| dia as f64).collect();
    let med = stats::median(&diameters)?;
    let max_dia = diameters.iter().cloned().fold(0.0f64, f64::max) as usize;
    let total = diameters.len() as f64;
    // Tail points beyond the median: (x^2 / n, log P(D >= x)).
    let mut points = Vec::new();
    let mut counts = Vec::new();
    for x in (med.floor() as usize + 1)..=max_dia {
        let c = diameters.iter().filter(|&&d| d >= x as f64).count();
        if c == 0 {
            continue;
        }
        let u = (x * x) as f64 / n as f64;
        points.push((u, (c as f64 / total).ln()));
        counts.push((x, c));
    }
    let firm: Vec<(f64, f64)> = points
        .iter()
        .zip(&counts)
        .filter(|(_, &(_, c))| c >= 10)
        .map(|(p, _)| *p)
        .collect();
    let fit = if firm.len() >= 3 {
        stats::fit_line(&firm)?
    } else {
        stats::fit_line(&points)?
    };
    let decay = -fit.slope;
    let excess = points
        .iter()
        .map(|&(u, logp)| logp - (fit.intercept + fit.slope * u))
        .fold(f64::NEG_INFINITY, f64::max);

    let thr = &opts.thresholds;
    let verdicts = vec![
        Verdict::above("tail-decay-rate", decay, 0.0),
        Verdict::below("envelope-excess", excess, 1.0),
        Verdict::relative("squared-distance-moment", moment, 1.0, thr.moment_relative),
    ];
    Ok(ExperimentReport {
        experiment: "diameter".into(),
        parameters: json!({
            "class": class, "n": n, "samples": samples,
            "window": opts.window, "method": "decomposition-window",
        }),
        statistics: json!({
            "median_diameter": med,
            "max_diameter": max_dia,
            "tail_counts": counts,
            "envelope": { "log_c": fit.intercept, "decay": decay, "excess": excess },
            "squared_distance_moment": moment,
            "moment_target": 1.0,
            "c_omega": c_omega,
            "elapsed_seconds": elapsed,
        }),
        verdicts,
        provenance: provenance(class, opts, &b),
    })
}

fn census_at(
    b: &Bench,
    n: usize,
    radius: u32,
    rooted: bool,
    phase: u64,
    samples: usize,
    opts: &LabOptions,
) -> Result<HashMap<Vec<u64>, usize>> {
    let codes = sample_stream(samples, phase, opts, |_i, rng| {
        let g = if rooted {
            b.sampler.sample_rooted_sized(n, opts.window, rng)?.graph
        } else {
            b.sampler.sample_unrooted_window(n, opts.window, rng)?.graph
        };
        let v = randkit::uniform_index(rng, g.n()) as u32;
        toolkit::neighborhood_code(&g, v, radius)
    })?;
    let mut census = HashMap::new();
    for code in codes {
        *census.entry(code).or_insert(0usize) += 1;
    }
    Ok(census)
}

/// Compares the local neighborhood statistics (radius-`k` ball codes at a
/// uniform vertex) of the rooted and unrooted samplers near size `n`, and
/// checks the census is stable when the size doubles from `n / 2`.
pub fn run_bs_census(
    class: &str,
    n: usize,
    radius: u32,
    samples: usize,
    opts: &LabOptions,
) -> Result<ExperimentReport> {
    require_samples(samples)?;
    if n < 4 {
        return Err(Error::Numeric("census needs n >= 4".into()));
    }
    let b = bench(class, opts)?;
    let started = std::time::Instant::now();
    let rooted = census_at(&b, n, radius, true, 0, samples, opts)?;
    let unrooted = census_at(&b, n, radius, false, 1, samples, opts)?;
    let half = census_at(&b, n / 2, radius, false, 2, samples, opts)?;
    let elapsed = started.elapsed().as_secs_f64();

    let tv_rooted = stats::total_variation(&rooted, &unrooted)?;
    let tv_half = stats::total_variation(&unrooted, &half)?;

    let thr = &opts.thresholds;
    let verdicts = vec![
        Verdict::below("rooted-vs-unrooted-tv", tv_rooted, thr.tv_census),
        Verdict::below("half-size-stability-tv", tv_half, thr.tv_census),
    ];
    Ok(ExperimentReport {
        experiment: "bs-census".into(),
        parameters: json!({
            "class": class, "n": n, "k": radius, "samples": samples,
            "window": opts.window,
            "method": "rooted-rejection vs decomposition-window",
        }),
        statistics: json!({
            "rooted_vs_unrooted_tv": tv_rooted,
            "half_size_stability_tv": tv_half,
            "distinct_codes": {
                "rooted": rooted.len(),
                "unrooted": unrooted.len(),
                "half": half.len(),
            },
            "elapsed_seconds": elapsed,
        }),
        verdicts,
        provenance: provenance(class, opts, &b),
    })
}

/// Fragments larger than this total size are pooled into one census bucket.
const FRAGMENT_KEY_CAP: usize = 12;

/// Census key of a fragment: the sorted canonical codes of its components,
/// or `None` when the fragment is larger than the comparison cap.
fn fragment_key(parts: &[Graph]) -> Result<Option<Vec<Vec<u64>>>> {
    let total: usize = parts.iter().map(|p| p.n()).sum();
    if total > FRAGMENT_KEY_CAP {
        return Ok(None);
    }
    let mut codes = Vec::with_capacity(parts.len());
    for p in parts {
        codes.push(toolkit::canonical_code(p)?);
    }
    codes.sort();
    Ok(Some(codes))
}

fn split_components(g: &Graph) -> Vec<Graph> {
    toolkit::components(g)
        .into_iter()
        .map(|vs| g.induced(&vs))
        .collect()
}

/// Draws possibly-disconnected graphs of total size `n`, removes the largest
/// component, and compares the distribution of what remains against the
/// limit fragment sampler. Also checks the empty-fragment probability and
/// the median fragment size.
pub fn run_fragments(
    class: &str,
    n: usize,
    samples: usize,
    opts: &LabOptions,
) -> Result<ExperimentReport> {
    require_samples(samples)?;
    if n < 2 {
        return Err(Error::Numeric("fragment study needs n >= 2".into()));
    }
    let ms = MultisetSampler::new(class, n)?;
    let started = std::time::Instant::now();

    let finite = sample_stream(samples, 0, opts, |_i, rng| {
        let m = ms.sample_multiset(n, rng)?;
        let (largest, parts) = toolkit::largest_component_split(&m.graph);
        let total = m.graph.n() - largest.n();
        Ok((total, fragment_key(&parts)?))
    })?;
    let limit = sample_stream(samples, 1, opts, |_i, rng| {
        let f = ms.sampler().sample_fragment_limit(None, rng)?;
        let parts = split_components(&f.graph);
        Ok((f.graph.n(), fragment_key(&parts)?, f.deficit))
    })?;
    let elapsed = started.elapsed().as_secs_f64();

    let mut census_finite = HashMap::new();
    let mut census_limit = HashMap::new();
    for (_, key) in &finite {
        *census_finite.entry(key.clone()).or_insert(0usize) += 1;
    }
    for (_, key, _) in &limit {
        *census_limit.entry(key.clone()).or_insert(0usize) += 1;
    }
    let tv = stats::total_variation(&census_finite, &census_limit)?;

    let level_means = ms.sampler().fragment_level_means()?;
    let p_empty_limit_target = (-level_means.iter().sum::<f64>()).exp();
    let sigma = (p_empty_limit_target * (1.0 - p_empty_limit_target) / samples as f64).sqrt();
    let p_empty_finite =
        finite.iter().filter(|(t, _)| *t == 0).count() as f64 / samples as f64;
    let p_empty_limit =
        limit.iter().filter(|(t, _, _)| *t == 0).count() as f64 / samples as f64;
    let z_finite = (p_empty_finite - p_empty_limit_target).abs() / sigma;
    let z_limit = (p_empty_limit - p_empty_limit_target).abs() / sigma;

    let totals: Vec<f64> = finite.iter().map(|(t, _)| *t as f64).collect();
    let median_fragment = stats::median(&totals)?;
    let deficit = limit.first().map(|&(_, _, d)| d).unwrap_or(0.0);

    let thr = &opts.thresholds;
    let verdicts = vec![
        Verdict::below("fragment-law-tv", tv, thr.tv_fragments),
        Verdict::below("finite-empty-fragment-z", z_finite, 3.0),
        Verdict::below("limit-empty-fragment-z", z_limit, 3.0),
        Verdict::below("median-fragment-size", median_fragment, 10.0),
    ];
    Ok(ExperimentReport {
        experiment: "fragments".into(),
        parameters: json!({
            "class": class, "n": n, "samples": samples,
            "method": "multiset-recursive vs fragment-limit",
            "key_cap": FRAGMENT_KEY_CAP,
        }),
        statistics: json!({
            "fragment_tv": tv,
            "p_empty_finite": p_empty_finite,
            "p_empty_limit": p_empty_limit,
            "p_empty_target": p_empty_limit_target,
            "z_finite": z_finite,
            "z_limit": z_limit,
            "median_fragment": median_fragment,
            "distinct_keys": {
                "finite": census_finite.len(),
                "limit": census_limit.len(),
            },
            "level_truncation_deficit": deficit,
            "exact_counts": ms.counts().exact(),
            "elapsed_seconds": elapsed,
        }),
        verdicts,
        provenance: {
            let mut p = Provenance::new(class, opts);
            p.series_order = n;
            p.truncation_bias = Some(ms.sampler().truncation_bias());
            p.level_cutoff = Some(ms.sampler().level_cutoff());
            p
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_opts(order: usize) -> LabOptions {
        LabOptions {
            order,
            ..LabOptions::default()
        }
    }

    #[test]
    fn rayleigh_runs_are_reproducible() {
        let opts = quick_opts(96);
        let a = run_rayleigh("trees", 48, 40, &opts).unwrap();
        let b = run_rayleigh("trees", 48, 40, &opts).unwrap();
        for key in ["ks", "mean", "mean_size", "control_mean"] {
            assert_eq!(
                a.statistics[key].as_f64().unwrap(),
                b.statistics[key].as_f64().unwrap(),
                "statistic {key} drifted between identical runs"
            );
        }
        assert_eq!(a.verdicts.len(), 3);
        assert!(a.statistics["ks"].as_f64().unwrap().is_finite());
        let mut par = opts.clone();
        par.threads = 3;
        let c = run_rayleigh("trees", 48, 40, &par).unwrap();
        assert_eq!(
            a.statistics["mean"].as_f64().unwrap(),
            c.statistics["mean"].as_f64().unwrap()
        );
    }

    #[test]
    fn census_radius_zero_is_exactly_stable() {
        let opts = quick_opts(96);
        let report = run_bs_census("trees", 24, 0, 30, &opts).unwrap();
        let tv = report.statistics["rooted_vs_unrooted_tv"].as_f64().unwrap();
        assert_eq!(tv, 0.0);
        let tv_half = report.statistics["half_size_stability_tv"].as_f64().unwrap();
        assert_eq!(tv_half, 0.0);
        assert!(report.passed());
    }

    #[test]
    fn diameter_tail_produces_an_envelope() {
        let opts = quick_opts(96);
        let report = run_diameter_tail("trees", 56, 80, &opts).unwrap();
        let decay = report.statistics["envelope"]["decay"].as_f64().unwrap();
        assert!(decay.is_finite());
        let excess = report.statistics["envelope"]["excess"].as_f64().unwrap();
        assert!(excess.is_finite());
        let moment = report.statistics["squared_distance_moment"].as_f64().unwrap();
        assert!(moment > 0.0);
    }

    #[test]
    fn fragment_law_matches_itself_at_small_size() {
        let opts = quick_opts(64);
        let report = run_fragments("trees", 48, 120, &opts).unwrap();
        let p = report.statistics["p_empty_target"].as_f64().unwrap();
        assert!(p > 0.0 && p < 1.0, "p = {p}");
        let tv = report.statistics["fragment_tv"].as_f64().unwrap();
        assert!(tv < 0.35, "tv = {tv}");
        let med = report.statistics["median_fragment"].as_f64().unwrap();
        assert!(med <= 10.0, "median = {med}");
    }
}
