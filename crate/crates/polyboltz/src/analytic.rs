//! Fixed-point series construction, singularity location, and the numeric
//! constants of a block class.
//!
//! The rooted series satisfies `A(z) = E(z, A(z))` with
//! `E(z, u) = z * exp(Z(u, A(z^2)) + sum_{i>=2} Z(A(z^i), A(z^{2i})) / i)`,
//! where `Z` is the class's derived-block cycle-index sum. The coefficients
//! come out of a Newton iteration on that fixed point; the singularity
//! `(rho, a)` then solves the square-root branching system
//! `E(rho, a) = a`, `E_u(rho, a) = 1`, and every distance and asymptotic
//! constant is an evaluation of `E`'s partial derivatives at that point.
//!
//! Float-mode series can be built in a scaled coordinate: with scale `s`,
//! coefficient `n` stores `a_n * s^n`. Choosing `s` near `rho` keeps the
//! stored numbers bounded at truncation orders where raw coefficients would
//! overflow.

use num_integer::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Coeff;
use crate::series::TruncatedSeries;
use crate::species::{
    unrooted_count_series, EtaReport, Outerplanar, SeriesFamily, SpeciesKernel,
};

/// Largest number of substitution levels retained in power tables.
const POWER_CUTOFF: usize = 64;

/// Residual target for the singularity solver.
const NEWTON_TOLERANCE: f64 = 1e-12;

/// Solved constants of one class at its singularity.
#[derive(Debug, Clone, Serialize)]
pub struct BoltzmannContext {
    pub class: String,
    /// Radius of convergence of the rooted series.
    pub rho: f64,
    /// Rooted series value at the singularity.
    pub a: f64,
    /// Rooted series value at the squared singularity.
    pub b: f64,
    /// Rooted series values at `rho^i`, index `i - 1`; entry 0 repeats `a`.
    pub powers: Vec<f64>,
    pub e_z: f64,
    pub e_u: f64,
    pub e_uu: f64,
    /// Polynomial-correction constant of the coefficient asymptotics.
    pub c_a: f64,
    /// Variance of the fixed-point offspring count.
    pub var_xi: f64,
    /// Mean of the non-fixed-point count.
    pub zeta_mean: f64,
    /// Mean marked-pair distance in a bi-pointed derived block.
    pub eta_mean: f64,
    /// Distance scaling constant.
    pub c_omega: f64,
    /// Lattice span of the class.
    pub span: u64,
    /// Distance-system auxiliaries behind `eta_mean`.
    pub aux: EtaReport,
}

/// [`BoltzmannContext`] plus solver provenance, ready for JSON emission.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    pub context: BoltzmannContext,
    /// Truncation order of the series family behind the constants.
    pub truncation: usize,
    /// `|E(rho, a) - a|` at the accepted solution.
    pub residual_value: f64,
    /// `|E_u(rho, a) - 1|` at the accepted solution.
    pub residual_derivative: f64,
    pub newton_iterations: usize,
    pub newton_tolerance: f64,
    /// Number of `rho^i` levels kept in the power table.
    pub power_cutoff: usize,
    /// Geometric bound on the mass of the omitted levels.
    pub power_tail_bound: f64,
}

/// Finite-truncation subcriticality evidence. The verdict is evidence, not a
/// proof: it reports whether the truncated sums still look convergent at the
/// probed point.
#[derive(Debug, Clone, Serialize)]
pub struct SubcriticalReport {
    pub class: String,
    pub epsilon: f64,
    pub rho: f64,
    pub a: f64,
    /// Probe point in the block-argument direction, `a + epsilon`.
    pub u_point: f64,
    /// Probe point in the variable direction, `rho + epsilon`.
    pub z_point: f64,
    /// Largest late-term growth ratio of the block series at `u_point`.
    pub u_tail_ratio: Option<f64>,
    /// Largest late-term growth ratio of the rooted series at `z_point^2`,
    /// the innermost argument fed back into the block sum.
    pub z_tail_ratio: Option<f64>,
    /// The block series radius, when the class knows it in closed form.
    pub block_radius: Option<f64>,
    /// `block_radius - u_point` when the radius is known.
    pub block_margin: Option<f64>,
    /// "consistent" or "inconsistent".
    pub verdict: String,
}

/// Computes the rooted series family of a class at `order`, unscaled.
pub fn compute_family<C: Coeff>(
    class: &dyn SpeciesKernel<C>,
    order: usize,
) -> Result<SeriesFamily<C>> {
    compute_family_scaled(class, order, C::one())
}

/// Computes the rooted series family in the scaled coordinate: coefficient
/// `n` of the result stores `a_n * scale^n`.
pub fn compute_family_scaled<C: Coeff>(
    class: &dyn SpeciesKernel<C>,
    order: usize,
    scale: C,
) -> Result<SeriesFamily<C>> {
    let sf = scale.to_f64();
    if !(sf > 0.0) || !sf.is_finite() {
        return Err(Error::SeriesDomain(format!(
            "series scale must be positive and finite, got {sf}"
        )));
    }
    if order == 0 {
        return Err(Error::SeriesDomain(
            "family order must be at least 1".into(),
        ));
    }
    let rooted = family_fixed_point(class, order, &scale)?;
    Ok(SeriesFamily {
        class_name: class.name().to_string(),
        rooted,
        scale,
    })
}

/// One application of the map `a -> E(z, a)` in the scaled coordinate.
/// The result loses the kernel's documented truncation slack, so it comes
/// back at a slightly smaller order than `a`.
fn apply_class_map<C: Coeff>(
    class: &dyn SpeciesKernel<C>,
    a: &TruncatedSeries<C>,
    scale: &C,
) -> Result<(TruncatedSeries<C>, TruncatedSeries<C>)> {
    let pad = a.order();
    let sub2 = a.substitute_power_geom(2, scale, pad);
    let w = class.block_cis(a, &sub2)?;
    let wo = w.order();
    let mut s = w.clone();
    let mut q = scale.clone();
    for i in 2..=wo {
        let inv_i = C::one().div(&C::from_i64(i as i64));
        let term = w.substitute_power_geom(i, &q, wo).scale(&inv_i);
        s = s.add(&term);
        q = q.mul(scale);
    }
    let atom = TruncatedSeries::monomial(scale.clone(), 1, wo);
    let f = s.exp()?.mul(&atom);
    let d1 = class.block_cis_d1(a, &sub2)?.with_order(f.order());
    Ok((f, d1))
}

/// Newton iteration for the fixed point `A = E(z, A)`. Each step solves the
/// linearization in the direct argument; the substituted occurrences at
/// `z^i`, `i >= 2`, only involve coefficients of half the order and are
/// refreshed every step, so the number of correct coefficients still
/// roughly doubles per iteration.
fn family_fixed_point<C: Coeff>(
    class: &dyn SpeciesKernel<C>,
    order: usize,
    scale: &C,
) -> Result<TruncatedSeries<C>> {
    let pad = order + 4;
    let mut a = TruncatedSeries::monomial(scale.clone(), 1, pad);
    let max_iter = 2 * (usize::BITS - order.leading_zeros()) as usize + 24;
    for _ in 0..max_iter {
        let (f, d1) = apply_class_map(class, &a, scale)?;
        let diff = f.sub(&a);
        let mut settled = true;
        for n in 0..=order.min(diff.order()) {
            if C::exact_arithmetic() {
                if !diff.coeff(n).is_zero() {
                    settled = false;
                    break;
                }
                continue;
            }
            let d = diff.coeff(n).to_f64().abs();
            if d.is_nan() {
                return Err(Error::Numeric(format!(
                    "fixed-point iteration produced NaN at order {n}"
                )));
            }
            // Relative roundoff threshold; the additive floor only matters
            // for coefficients that are structurally zero.
            if d > 1e-12 * a.coeff(n).to_f64().abs() + 1e-290 {
                settled = false;
                break;
            }
        }
        if settled {
            return Ok(a.with_order(order));
        }
        let e_u = f.mul(&d1);
        let one = TruncatedSeries::constant(C::one(), e_u.order());
        let delta = diff.mul(&one.sub(&e_u).recip()?);
        a = a.add(&delta).with_order(pad);
    }
    Err(Error::NoConvergence(format!(
        "series fixed point did not stabilize at order {order} within \
         {max_iter} Newton steps"
    )))
}

/// Float evaluations of a family and its derivative at scalar points,
/// undoing the storage scale.
pub(crate) struct FamilyEval<'a> {
    family: &'a SeriesFamily<f64>,
    deriv: TruncatedSeries<f64>,
}

impl<'a> FamilyEval<'a> {
    pub(crate) fn new(family: &'a SeriesFamily<f64>) -> Self {
        Self {
            family,
            deriv: family.rooted.derivative(),
        }
    }

    /// `A(y)` by truncated summation. Geometrically accurate for `y` well
    /// inside the radius; near the radius the truncation tail is the
    /// algebraic one the caller must account for.
    pub(crate) fn value(&self, y: f64) -> f64 {
        self.family.rooted.eval_at(&(y / self.family.scale)).value
    }

    /// `A'(y)` by truncated summation.
    pub(crate) fn dvalue(&self, y: f64) -> f64 {
        self.deriv.eval_at(&(y / self.family.scale)).value / self.family.scale
    }
}

/// `E` and its partial derivatives at a scalar point `(x, u)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EPartials {
    pub e: f64,
    pub e_u: f64,
    pub e_z: f64,
    pub e_uu: f64,
    pub e_uz: f64,
    /// `A(x^2)`, the innermost substituted value.
    pub b2: f64,
}

/// Evaluates `E(x, u)` and its partials. The level sum over `i >= 2` stops
/// once `x^i` drops below 1e-18, where further contributions fall under the
/// double-precision floor of the running sums (they enter through series
/// values of order `x^i`).
pub(crate) fn e_partials(
    class: &dyn SpeciesKernel<f64>,
    fe: &FamilyEval<'_>,
    x: f64,
    u: f64,
) -> Result<EPartials> {
    if !(x > 0.0 && x < 1.0) || !(u > 0.0) {
        return Err(Error::SeriesDomain(format!(
            "E evaluation needs 0 < x < 1 and u > 0, got ({x}, {u})"
        )));
    }
    let b2 = fe.value(x * x);
    let z_outer = class.block_cis_value(u, b2)?;
    let d1v = class.block_cis_d1_value(u, b2)?;
    let d2v = class.block_cis_d2_value(u, b2)?;
    let d11v = class.block_cis_d11_value(u, b2)?;
    let d12v = class.block_cis_d12_value(u, b2)?;
    let b2p = fe.dvalue(x * x);
    let mut sum = 0.0;
    let mut sum_z = d2v * 2.0 * x * b2p;
    let mut i = 2u32;
    loop {
        let p = x.powi(i as i32);
        if p < 1e-18 || i > 400 {
            break;
        }
        let ai = fe.value(p);
        let a2i = fe.value(p * p);
        sum += class.block_cis_value(ai, a2i)? / f64::from(i);
        let d1i = class.block_cis_d1_value(ai, a2i)?;
        let d2i = class.block_cis_d2_value(ai, a2i)?;
        sum_z += d1i * x.powi(i as i32 - 1) * fe.dvalue(p)
            + 2.0 * d2i * x.powi(2 * i as i32 - 1) * fe.dvalue(p * p);
        i += 1;
    }
    let e = x * (z_outer + sum).exp();
    if !e.is_finite() {
        return Err(Error::Numeric(format!(
            "E({x}, {u}) overflowed during evaluation"
        )));
    }
    let e_z = e * (1.0 / x + sum_z);
    Ok(EPartials {
        e,
        e_u: e * d1v,
        e_z,
        e_uu: e * (d1v * d1v + d11v),
        e_uz: e_z * d1v + e * d12v * 2.0 * x * b2p,
        b2,
    })
}

/// Aitken acceleration of three consecutive sequence values.
fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let dd = d2 - d1;
    if dd.abs() < 1e-300 {
        x2
    } else {
        x2 - d2 * d2 / dd
    }
}

/// Coefficient-ratio estimate of the singularity, Aitken-accelerated, in
/// unscaled coordinates. Lattice classes are handled by stepping the ratio
/// over the declared span.
fn ratio_initial_guess(
    class: &dyn SpeciesKernel<f64>,
    family: &SeriesFamily<f64>,
) -> Result<f64> {
    let d = class.lattice_span().max(1) as usize;
    let n = family.order();
    // Start at the top of the realized support so lattice classes whose
    // truncation order falls between support points still line up.
    let mut top = n;
    while top > 0 && !(family.rooted.coeff(top) > 0.0) {
        top -= 1;
    }
    let mut estimates = Vec::new();
    let mut m = top;
    while m >= 2 * d && estimates.len() < 3 {
        let hi = family.rooted.coeff(m);
        let lo = family.rooted.coeff(m - d);
        if hi > 0.0 && lo > 0.0 {
            estimates.push(family.scale * (lo / hi).powf(1.0 / d as f64));
        }
        m -= d;
    }
    match estimates.len() {
        0 => Err(Error::Numeric(
            "no usable coefficient ratios for the singularity guess".into(),
        )),
        1 => Ok(estimates[0]),
        2 => Ok(estimates[0]),
        _ => Ok(aitken(estimates[2], estimates[1], estimates[0])),
    }
}

pub(crate) struct SingularitySolve {
    pub rho: f64,
    pub a: f64,
    pub iterations: usize,
}

/// Damped Newton iteration on `(E(x,u) - u, E_u(x,u) - 1)`.
pub(crate) fn locate_singularity_full(
    class: &dyn SpeciesKernel<f64>,
    family: &SeriesFamily<f64>,
) -> Result<SingularitySolve> {
    let fe = FamilyEval::new(family);
    let rho0 = ratio_initial_guess(class, family)?.clamp(1e-9, 0.995);
    let mut x = rho0;
    let mut u = fe.value(rho0).max(1e-12);
    if !u.is_finite() {
        return Err(Error::Numeric(format!(
            "initial series value at the ratio guess {rho0} is not finite"
        )));
    }
    // The ratio guess overshoots the singularity by O(1/order), and the
    // truncated series evaluated there can overshoot the block radius in
    // turn. Pull the starting point back inside the admissible region.
    if let Some(r) = class.block_radius() {
        u = u.min(0.997 * r);
    }
    let mut ep = loop {
        match e_partials(class, &fe, x, u) {
            Ok(v) => break v,
            Err(e) => {
                u *= 0.997;
                x *= 0.999;
                if u < 1e-12 {
                    return Err(e);
                }
            }
        }
    };
    let mut res = (ep.e - u).abs().max((ep.e_u - 1.0).abs());
    let mut iterations = 0usize;
    for iter in 0..200 {
        iterations = iter;
        if res < NEWTON_TOLERANCE {
            break;
        }
        let f1 = ep.e - u;
        let f2 = ep.e_u - 1.0;
        let j11 = ep.e_z;
        let j12 = ep.e_u - 1.0;
        let j21 = ep.e_uz;
        let j22 = ep.e_uu;
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            return Err(Error::Numeric(format!(
                "singular Jacobian while locating the singularity: det {det:e}"
            )));
        }
        let dx = (f1 * j22 - j12 * f2) / det;
        let du = (j11 * f2 - f1 * j21) / det;
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let xn = x - lam * dx;
            let un = u - lam * du;
            if xn > 1e-12 && xn < 0.9999 && un > 0.0 {
                if let Ok(epn) = e_partials(class, &fe, xn, un) {
                    let resn = (epn.e - un).abs().max((epn.e_u - 1.0).abs());
                    if resn < res {
                        x = xn;
                        u = un;
                        ep = epn;
                        res = resn;
                        accepted = true;
                        break;
                    }
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res >= NEWTON_TOLERANCE {
        return Err(Error::NoConvergence(format!(
            "singularity Newton stalled at residual {res:e} after \
             {iterations} iterations (x = {x}, u = {u})"
        )));
    }
    Ok(SingularitySolve {
        rho: x,
        a: u,
        iterations,
    })
}

/// Locates the singularity `(rho, a)` of a class from its series family.
pub fn locate_singularity(
    class: &dyn SpeciesKernel<f64>,
    family: &SeriesFamily<f64>,
) -> Result<(f64, f64)> {
    let s = locate_singularity_full(class, family)?;
    Ok((s.rho, s.a))
}

/// Computes the full constant set of a class.
///
/// A preliminary unscaled family at a moderate order supplies the scale for
/// the full-order family, which keeps float coefficients bounded at large
/// truncations. The singularity system itself only consumes series values
/// at arguments `<= rho^2`, so its accuracy is geometric in the order.
pub fn compute_constants(
    class: &dyn SpeciesKernel<f64>,
    order: usize,
) -> Result<ConstantsReport> {
    Ok(compute_constants_with_family(class, order)?.0)
}

/// [`compute_constants`] returning the full-order scaled family alongside the
/// report, so downstream consumers (samplers, coefficient studies) do not pay
/// for a second fixed-point solve.
pub fn compute_constants_with_family(
    class: &dyn SpeciesKernel<f64>,
    order: usize,
) -> Result<(ConstantsReport, SeriesFamily<f64>)> {
    let pilot_order = order.clamp(32, 128);
    let pilot = compute_family(class, pilot_order)?;
    let pilot_solve = locate_singularity_full(class, &pilot)?;
    let family = compute_family_scaled(class, order, pilot_solve.rho)?;
    let solve = locate_singularity_full(class, &family)?;
    let fe = FamilyEval::new(&family);
    let (rho, a) = (solve.rho, solve.a);
    let ep = e_partials(class, &fe, rho, a)?;
    let b = ep.b2;
    let mut powers = vec![a];
    let mut cutoff = 1usize;
    for i in 2..=POWER_CUTOFF {
        let p = rho.powi(i as i32);
        if p < 1e-300 {
            break;
        }
        powers.push(fe.value(p));
        cutoff = i;
    }
    let power_tail_bound = rho.powi(cutoff as i32 + 1) / (1.0 - rho);
    let aux = class.mean_block_distance(a, b)?;
    let var_xi = ep.e_uu * a;
    let zeta_mean = ep.e_z * rho / a - 1.0;
    let eta_mean = aux.eta;
    let c_omega = ((1.0 + zeta_mean) * var_xi).sqrt() / (2.0 * eta_mean);
    let span = class.lattice_span().max(1);
    let c_a =
        span as f64 * (rho * ep.e_z / (2.0 * std::f64::consts::PI * ep.e_uu)).sqrt();
    let checks = [
        (rho > 0.0 && rho < 1.0, "rho inside (0, 1)"),
        (a > 0.0, "a positive"),
        (b < a, "b below a"),
        (var_xi > 0.0, "positive offspring variance"),
        (zeta_mean >= -1e-9, "nonnegative non-fixed mean"),
        (eta_mean >= 1.0 - 1e-9, "block distance mean at least 1"),
        (c_omega > 0.0, "positive distance constant"),
    ];
    for (ok, what) in checks {
        if !ok {
            return Err(Error::Numeric(format!(
                "constants failed the invariant: {what}"
            )));
        }
    }
    let context = BoltzmannContext {
        class: class.name().to_string(),
        rho,
        a,
        b,
        powers,
        e_z: ep.e_z,
        e_u: ep.e_u,
        e_uu: ep.e_uu,
        c_a,
        var_xi,
        zeta_mean,
        eta_mean,
        c_omega,
        span,
        aux,
    };
    let report = ConstantsReport {
        context,
        truncation: order,
        residual_value: (ep.e - a).abs(),
        residual_derivative: (ep.e_u - 1.0).abs(),
        newton_iterations: solve.iterations,
        newton_tolerance: NEWTON_TOLERANCE,
        power_cutoff: cutoff,
        power_tail_bound,
    };
    Ok((report, family))
}

/// Mean marked-pair block distance of the outerplanar class, with the full
/// linear-system auxiliaries.
pub fn eta_outerplanar(a: f64, b: f64) -> Result<EtaReport> {
    SpeciesKernel::<f64>::mean_block_distance(&Outerplanar, a, b)
}

/// Largest late-term growth ratio of `series` evaluated at `x`: the
/// geometric-mean per-order ratio between consecutive nonzero terms among
/// the last `window` of them, computed in log space so overflowing probe
/// points still yield a ratio.
fn max_tail_ratio(series: &TruncatedSeries<f64>, x: f64, window: usize) -> Option<f64> {
    let lx = x.abs().ln();
    let mut best: Option<f64> = None;
    let mut prev: Option<(usize, f64)> = None;
    let mut used = 0usize;
    for n in (0..=series.order()).rev() {
        let c = series.coeff(n).abs();
        if c == 0.0 {
            continue;
        }
        if let Some((m, lc)) = prev {
            let gap = (m - n) as f64;
            let r = ((lc - c.ln()) / gap + lx).exp();
            best = Some(best.map_or(r, |b: f64| b.max(r)));
            used += 1;
            if used >= window {
                break;
            }
        }
        prev = Some((n, c.ln()));
    }
    best
}

/// Finite-truncation subcriticality probe at `(a + epsilon, rho + epsilon)`.
///
/// Two truncated sums are inspected: the block series along its direct
/// argument at `a + epsilon`, and the rooted series at `(rho + epsilon)^2`,
/// which is the innermost argument the block sum feeds on. The verdict is
/// "consistent" when every inspected tail still decays.
pub fn subcriticality_check(
    class: &dyn SpeciesKernel<f64>,
    family: &SeriesFamily<f64>,
    epsilon: f64,
) -> Result<SubcriticalReport> {
    if !(epsilon >= 0.0) {
        return Err(Error::SeriesDomain(format!(
            "subcriticality probe offset must be nonnegative, got {epsilon}"
        )));
    }
    let (rho, a) = locate_singularity(class, family)?;
    let u_point = a + epsilon;
    let z_point = rho + epsilon;
    let probe_order = family.order().min(64);
    // Slot-1 expansion of the block sum: the second slot is fed a monomial
    // above the probe order, so every term it touches lands beyond the
    // truncation and the surviving coefficients are exactly those of
    // `Z(s1, 0)`.
    let pad = 2 * probe_order + 2;
    let u_series = class
        .block_cis(
            &TruncatedSeries::identity(pad),
            &TruncatedSeries::monomial(1.0, probe_order + 1, pad),
        )?
        .with_order(probe_order);
    let u_tail_ratio = max_tail_ratio(&u_series, u_point, 8);
    let z_tail_ratio = max_tail_ratio(
        &family.rooted,
        z_point * z_point / family.scale,
        8,
    );
    let block_radius = class.block_radius();
    let block_margin = block_radius.map(|r| r - u_point);
    let consistent = u_tail_ratio.map_or(true, |r| r < 1.0)
        && z_tail_ratio.map_or(true, |r| r < 1.0);
    Ok(SubcriticalReport {
        class: class.name().to_string(),
        epsilon,
        rho,
        a,
        u_point,
        z_point,
        u_tail_ratio,
        z_tail_ratio,
        block_radius,
        block_margin,
        verdict: if consistent { "consistent" } else { "inconsistent" }.to_string(),
    })
}

/// Lattice span observed in the unrooted counting series: the gcd of
/// `n - 1` over orders with a positive count.
pub fn lattice_span<C: Coeff>(
    class: &dyn SpeciesKernel<C>,
    family: &SeriesFamily<C>,
) -> Result<u64> {
    let (counts, _exact) = unrooted_count_series(class, family)?;
    let mut g = 0u64;
    let mut any = false;
    for n in 1..=counts.order() {
        if counts.coeff(n).to_f64() > 0.0 {
            any = true;
            g = g.gcd(&((n - 1) as u64));
        }
    }
    if !any {
        return Err(Error::SeriesDomain(
            "lattice span of an identically zero counting series".into(),
        ));
    }
    Ok(g.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::species::{lookup_species, TriangleCactus};
    use num_rational::BigRational;

    fn rat(v: i64) -> BigRational {
        BigRational::from_i64(v)
    }

    #[test]
    fn tree_family_matches_rooted_counts() {
        let class = lookup_species::<BigRational>("trees").unwrap();
        let fam = compute_family(class.as_ref(), 10).unwrap();
        let want = [0i64, 1, 1, 2, 4, 9, 20, 48, 115, 286, 719];
        for (n, w) in want.iter().enumerate() {
            assert_eq!(fam.rooted.coeff(n), rat(*w), "order {n}");
        }
    }

    #[test]
    fn outerplanar_family_matches_hand_counts() {
        let class = lookup_species::<BigRational>("outerplanar").unwrap();
        let fam = compute_family(class.as_ref(), 6).unwrap();
        // n = 3: two rootings of the path plus the triangle. n = 4: paths
        // (2), stars (2), triangle with a pendant edge (3), the square (1),
        // and the chorded square (2).
        let want = [0i64, 1, 1, 3, 10];
        for (n, w) in want.iter().enumerate() {
            assert_eq!(fam.rooted.coeff(n), rat(*w), "order {n}");
        }
    }

    #[test]
    fn newton_agrees_with_plain_iteration() {
        for name in ["trees", "outerplanar"] {
            let class = lookup_species::<BigRational>(name).unwrap();
            let order = 24;
            let newton = compute_family(class.as_ref(), order).unwrap();
            let mut a =
                TruncatedSeries::monomial(BigRational::from_i64(1), 1, order + 4);
            for _ in 0..=order {
                let (f, _) =
                    apply_class_map(class.as_ref(), &a, &BigRational::from_i64(1))
                        .unwrap();
                a = f.with_order(order + 4);
            }
            for n in 0..=order {
                assert_eq!(a.coeff(n), newton.rooted.coeff(n), "{name} order {n}");
            }
        }
    }

    #[test]
    fn cactus_family_has_span_two_support() {
        let fam = compute_family::<BigRational>(&TriangleCactus, 9).unwrap();
        // Rooted triangle cacti exist only at odd sizes.
        for n in [2usize, 4, 6, 8] {
            assert!(fam.rooted.coeff(n).is_zero(), "order {n}");
        }
        assert_eq!(fam.rooted.coeff(1), rat(1));
        assert_eq!(fam.rooted.coeff(3), rat(1));
        assert!(fam.rooted.coeff(5).to_f64() > 0.0);
    }

    #[test]
    fn tree_singularity_is_forced_and_matches_ratios() {
        let class = lookup_species::<f64>("trees").unwrap();
        let fam = compute_family(class.as_ref(), 512).unwrap();
        let (rho, a) = locate_singularity(class.as_ref(), &fam).unwrap();
        assert!((a - 1.0).abs() < 1e-6, "a = {a}");
        // Independent estimate: Richardson ladder on the coefficient
        // ratios, which carry a c/n bias at an algebraic singularity.
        let r = |n: usize| fam.rooted.coeff(n - 1) / fam.rooted.coeff(n);
        let level1 = |n: usize| 2.0 * r(2 * n) - r(n);
        let level2 =
            |n: usize| (4.0 * level1(2 * n) - level1(n)) / 3.0;
        let oracle = level2(128);
        assert!(
            (rho - oracle).abs() < 1e-6,
            "solver {rho} vs ratio ladder {oracle}"
        );
    }

    #[test]
    fn outerplanar_singularity_matches_quoted_digits() {
        let class = lookup_species::<f64>("outerplanar").unwrap();
        let fam = compute_family(class.as_ref(), 256).unwrap();
        let (rho, a) = locate_singularity(class.as_ref(), &fam).unwrap();
        assert!((rho - 0.1332694).abs() < 1e-6, "rho = {rho}");
        assert!((a - 0.1707560).abs() < 1e-6, "a = {a}");
    }

    fn rel(x: f64, want: f64) -> f64 {
        (x - want).abs() / want.abs()
    }

    #[test]
    fn outerplanar_constants_match_quoted_values() {
        let class = lookup_species::<f64>("outerplanar").unwrap();
        let report = compute_constants(class.as_ref(), 512).unwrap();
        let c = &report.context;
        assert!(rel(c.rho, 0.1332694) < 1e-3);
        assert!(rel(c.a, 0.1707560) < 1e-3);
        assert!(rel(c.b, 0.0180940) < 1e-3);
        assert!(rel(c.e_z, 1.34975) < 1e-3, "e_z = {}", c.e_z);
        assert!(rel(c.e_uu, 549.359) < 1e-3, "e_uu = {}", c.e_uu);
        assert!(rel(c.var_xi, 93.80631) < 1e-3, "var_xi = {}", c.var_xi);
        assert!(
            rel(c.zeta_mean, 0.0534353) < 1e-3,
            "zeta_mean = {}",
            c.zeta_mean
        );
        assert!(
            rel(c.eta_mean, 5.038561) < 1e-3,
            "eta_mean = {}",
            c.eta_mean
        );
        assert!(
            rel(c.aux.eta0_prime, 5.435858) < 1e-3,
            "eta0' = {}",
            c.aux.eta0_prime
        );
        assert!(rel(c.c_omega, 0.9864689) < 1e-3, "c_omega = {}", c.c_omega);
        assert!(rel(c.c_a, 0.007219) < 2e-3, "c_a = {}", c.c_a);
        assert_eq!(c.span, 1);
        assert!(report.residual_value < 1e-12);
        assert!(report.residual_derivative < 1e-12);
        assert!((c.powers[0] - c.a).abs() == 0.0);
        assert!((c.powers[1] - c.b).abs() < 1e-12);
    }

    #[test]
    fn tree_constants_are_forced() {
        let class = lookup_species::<f64>("trees").unwrap();
        let report = compute_constants(class.as_ref(), 512).unwrap();
        let c = &report.context;
        assert!((c.a - 1.0).abs() < 1e-6);
        assert!((c.var_xi - 1.0).abs() < 1e-6, "var_xi = {}", c.var_xi);
        assert!((c.eta_mean - 1.0).abs() < 1e-6);
        assert!((c.rho - 0.3383219).abs() < 1e-4, "rho = {}", c.rho);
        // The coefficient asymptotics of rooted trees pin this constant.
        assert!(rel(c.c_a, 0.4399240) < 1e-3, "c_a = {}", c.c_a);
        assert!(c.c_omega > 0.0);
    }

    #[test]
    fn constants_are_deterministic() {
        let class = lookup_species::<f64>("outerplanar").unwrap();
        let r1 = compute_constants(class.as_ref(), 256).unwrap();
        let r2 = compute_constants(class.as_ref(), 256).unwrap();
        assert_eq!(r1.context.rho.to_bits(), r2.context.rho.to_bits());
        assert_eq!(r1.context.c_omega.to_bits(), r2.context.c_omega.to_bits());
        assert_eq!(r1.context.c_a.to_bits(), r2.context.c_a.to_bits());
    }

    #[test]
    fn subcriticality_verdicts_match_expectations() {
        let trees = lookup_species::<f64>("trees").unwrap();
        let tf = compute_family(trees.as_ref(), 128).unwrap();
        let tr = subcriticality_check(trees.as_ref(), &tf, 0.01).unwrap();
        assert_eq!(tr.verdict, "consistent", "{tr:?}");

        let outer = lookup_species::<f64>("outerplanar").unwrap();
        let pilot = compute_family(outer.as_ref(), 128).unwrap();
        let (rho, _) = locate_singularity(outer.as_ref(), &pilot).unwrap();
        let of = compute_family_scaled(outer.as_ref(), 512, rho).unwrap();
        let near = subcriticality_check(outer.as_ref(), &of, 0.001).unwrap();
        assert_eq!(near.verdict, "consistent", "{near:?}");
        assert!(near.u_tail_ratio.unwrap() < 1.0);
        let far = subcriticality_check(outer.as_ref(), &of, 10.0).unwrap();
        assert_eq!(far.verdict, "inconsistent", "{far:?}");
    }

    #[test]
    fn lattice_spans_match_declarations() {
        let trees = lookup_species::<BigRational>("trees").unwrap();
        let tf = compute_family(trees.as_ref(), 12).unwrap();
        assert_eq!(lattice_span(trees.as_ref(), &tf).unwrap(), 1);
        let outer = lookup_species::<BigRational>("outerplanar").unwrap();
        let of = compute_family(outer.as_ref(), 12).unwrap();
        assert_eq!(lattice_span(outer.as_ref(), &of).unwrap(), 1);
        let cf = compute_family::<BigRational>(&TriangleCactus, 13).unwrap();
        assert_eq!(lattice_span(&TriangleCactus, &cf).unwrap(), 2);
        assert_eq!(
            SpeciesKernel::<BigRational>::lattice_span(&TriangleCactus),
            2
        );
    }

    #[test]
    fn constants_report_serializes_cleanly() {
        let class = lookup_species::<f64>("trees").unwrap();
        let report = compute_constants(class.as_ref(), 128).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(parsed["context"]["c_omega"].as_f64().unwrap() > 0.0);
        assert!(parsed["newton_tolerance"].as_f64().unwrap() <= 1e-12);
    }

    #[test]
    fn scaled_and_unscaled_families_agree() {
        let class = lookup_species::<f64>("outerplanar").unwrap();
        let plain = compute_family(class.as_ref(), 40).unwrap();
        let scaled = compute_family_scaled(class.as_ref(), 40, 0.13).unwrap();
        for n in 1..=40usize {
            let want = plain.rooted.coeff(n);
            let got = scaled.rooted.coeff(n) / 0.13f64.powi(n as i32);
            assert!(
                (got - want).abs() < 1e-9 * want.abs().max(1.0),
                "order {n}: {got} vs {want}"
            );
        }
    }
}
