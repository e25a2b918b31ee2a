//! Distances, goodness-of-fit measures, and tail fits for experiment grading.
//!
//! Everything here is deterministic: statistics are computed from recorded
//! sample values, so a report can be re-graded offline from its JSON body.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Distribution function of the unit Rayleigh law.
pub fn rayleigh_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-0.5 * x * x).exp()
    }
}

/// Mean of the unit Rayleigh law, `sqrt(pi / 2)`.
pub fn rayleigh_mean() -> f64 {
    (PI / 2.0).sqrt()
}

/// Kolmogorov-Smirnov statistic of a sample against a continuous law.
///
/// Returns `sup_x |F_n(x) - F(x)|` where `F_n` is the empirical distribution
/// function of the sample.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Numeric("KS statistic of an empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("KS statistic of a non-finite sample".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    let n = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        sup = sup.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(sup)
}

/// Sample mean.
pub fn mean(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Numeric("mean of an empty sample".into()));
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Median of a sample, by midpoint of the two central order statistics.
pub fn median(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Numeric("median of an empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    let k = sorted.len();
    if k % 2 == 1 {
        Ok(sorted[k / 2])
    } else {
        Ok(0.5 * (sorted[k / 2 - 1] + sorted[k / 2]))
    }
}

/// Total variation distance between two empirical censuses.
///
/// Each census maps a class key to a count; the distance is half the L1
/// distance between the two normalized frequency vectors, over the union of
/// the observed keys.
pub fn total_variation<K: Eq + Hash>(
    a: &HashMap<K, usize>,
    b: &HashMap<K, usize>,
) -> Result<f64> {
    let ta: usize = a.values().sum();
    let tb: usize = b.values().sum();
    if ta == 0 || tb == 0 {
        return Err(Error::Numeric("total variation of an empty census".into()));
    }
    let mut l1 = 0.0;
    for (key, &ca) in a {
        let cb = b.get(key).copied().unwrap_or(0);
        l1 += (ca as f64 / ta as f64 - cb as f64 / tb as f64).abs();
    }
    for (key, &cb) in b {
        if !a.contains_key(key) {
            l1 += cb as f64 / tb as f64;
        }
    }
    Ok(0.5 * l1)
}

/// Total variation between an empirical census and a uniform law over a known
/// class list. Keys of the census that fall outside the class list contribute
/// their full empirical mass.
pub fn total_variation_uniform<K: Eq + Hash>(
    census: &HashMap<K, usize>,
    classes: &[K],
) -> Result<f64> {
    let total: usize = census.values().sum();
    if total == 0 || classes.is_empty() {
        return Err(Error::Numeric("total variation of an empty census".into()));
    }
    let p = 1.0 / classes.len() as f64;
    let mut l1 = 0.0;
    let mut seen = 0usize;
    for key in classes {
        let c = census.get(key).copied().unwrap_or(0);
        seen += c;
        l1 += (c as f64 / total as f64 - p).abs();
    }
    l1 += (total - seen) as f64 / total as f64;
    Ok(0.5 * l1)
}

/// Chi-square goodness-of-fit p-value of observed counts against a uniform
/// law over `classes` cells. Counts beyond the listed cells are pooled into
/// one extra zero-expectation cell, which drives the statistic up.
pub fn chi_square_uniform_p(observed: &[usize], stray: usize) -> Result<f64> {
    let cells = observed.len();
    if cells < 2 {
        return Err(Error::Numeric("chi-square needs at least two cells".into()));
    }
    let total: usize = observed.iter().sum::<usize>() + stray;
    if total == 0 {
        return Err(Error::Numeric("chi-square of an empty sample".into()));
    }
    let expect = total as f64 / cells as f64;
    let mut stat = 0.0;
    for &o in observed {
        let d = o as f64 - expect;
        stat += d * d / expect;
    }
    stat += stray as f64 * stray as f64 / expect;
    let dof = (cells - 1) as f64;
    let dist = ChiSquared::new(dof)
        .map_err(|e| Error::Numeric(format!("chi-square with dof {dof}: {e}")))?;
    Ok(1.0 - dist.cdf(stat))
}

/// Least-squares line fit `y ~ intercept + slope * x`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Fits a line through the given points by least squares.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::Numeric("line fit needs at least two points".into()));
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 * (1.0 + sxx.abs()) {
        return Err(Error::Numeric("line fit on degenerate abscissae".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok(LineFit { slope, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_cdf_has_known_median() {
        let med = (2.0f64 * 2.0f64.ln()).sqrt();
        assert!((rayleigh_cdf(med) - 0.5).abs() < 1e-12);
        assert_eq!(rayleigh_cdf(-1.0), 0.0);
        assert!((rayleigh_mean() - 1.2533141373155003).abs() < 1e-12);
    }

    #[test]
    fn ks_of_perfect_grid_is_small() {
        let n = 1000;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let ks = ks_statistic(&grid, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(ks <= 0.5 / n as f64 + 1e-12, "ks = {ks}");
        let shifted: Vec<f64> = grid.iter().map(|x| x * 0.5).collect();
        let ks2 = ks_statistic(&shifted, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(ks2 > 0.4, "ks2 = {ks2}");
    }

    #[test]
    fn total_variation_extremes() {
        let mut a = HashMap::new();
        let mut b = HashMap::new();
        a.insert("x", 10usize);
        b.insert("y", 7usize);
        assert!((total_variation(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!((total_variation(&a, &a).unwrap()).abs() < 1e-12);
        b.insert("x", 7usize);
        b.remove("y");
        assert!((total_variation(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn uniform_total_variation_counts_stray_mass() {
        let mut census = HashMap::new();
        census.insert(0u32, 50usize);
        census.insert(1u32, 50usize);
        let tv = total_variation_uniform(&census, &[0, 1]).unwrap();
        assert!(tv.abs() < 1e-12);
        census.insert(9u32, 100usize);
        let tv = total_variation_uniform(&census, &[0, 1]).unwrap();
        assert!((tv - 0.5).abs() < 1e-12, "tv = {tv}");
    }

    #[test]
    fn chi_square_flags_biased_counts() {
        let p_uniform = chi_square_uniform_p(&[100, 101, 99, 100], 0).unwrap();
        assert!(p_uniform > 0.9, "p = {p_uniform}");
        let p_biased = chi_square_uniform_p(&[400, 10, 10, 10], 0).unwrap();
        assert!(p_biased < 1e-6, "p = {p_biased}");
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0 - 0.25 * i as f64)).collect();
        let fit = fit_line(&pts).unwrap();
        assert!((fit.slope + 0.25).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
    }
}
