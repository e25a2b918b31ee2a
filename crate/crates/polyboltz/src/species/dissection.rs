//! Edge-rooted polygon dissections: counting series, closed forms, samplers.
//!
//! A dissection is a 2-connected outerplanar graph drawn with a distinguished
//! oriented root edge on the outer face; its size is the number of non-root
//! vertices reachable from the root edge's head, i.e. all vertices except the
//! origin. The class satisfies
//!
//! ```text
//! D(s) = s + D(s)^2 / (1 - D(s))
//!      = (1 + s - sqrt(s^2 - 6s + 1)) / 4,
//! ```
//!
//! read as: a dissection is a single edge, or a fan of at least two smaller
//! dissections glued along a bounded face whose far side is the root edge.
//! The counting sequence starts 1, 1, 3, 11, 45 and the square-root
//! singularity sits at `3 - 2 sqrt(2)`.
//!
//! The graph builders below realize this grammar as recursive samplers. They
//! write into a caller-supplied [`Graph`] so larger assemblies (chains of
//! dissections mirrored by a reflection) can reuse them in place.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::randkit::{bernoulli, geometric, u01, uniform_index};
use crate::scalar::Coeff;
use crate::series::TruncatedSeries;

/// Radius of convergence of the dissection series, `3 - 2 sqrt(2)`.
pub fn dissection_radius() -> f64 {
    3.0 - 2.0 * std::f64::consts::SQRT_2
}

/// Hard per-draw vertex cap for the recursive builders. A single block draw
/// at subcritical parameters has small expected size; hitting this cap means
/// the parameters are broken, not that the draw was unlucky.
pub(crate) const BLOCK_VERTEX_CAP: u32 = 10_000_000;

/// Truncated dissection series `D(z)` to `order`, via the closed form,
/// cross-checked against the quadratic recurrence `D = z - zD + 2D^2`.
pub fn dissection_series<C: Coeff>(order: usize) -> Result<TruncatedSeries<C>> {
    let closed: TruncatedSeries<C> =
        dissection_of_series(&TruncatedSeries::identity(order))?;
    let mut rec = vec![C::zero(); order + 1];
    for n in 1..=order {
        let mut acc = if n == 1 { C::one() } else { C::zero() };
        acc = acc.sub(&rec[n - 1]);
        let mut conv = C::zero();
        for j in 1..n {
            conv = conv.add(&rec[j].mul(&rec[n - j]));
        }
        acc = acc.add(&C::from_i64(2).mul(&conv));
        rec[n] = acc;
    }
    for n in 0..=order {
        let a = closed.coeff(n);
        let b = rec[n].clone();
        let diff = a.sub(&b).to_f64().abs();
        let scale = a.to_f64().abs().max(b.to_f64().abs()).max(1.0);
        if diff > 1e-9 * scale {
            return Err(Error::ExactInconsistency(format!(
                "dissection closed form and recurrence disagree at order {n}: \
                 {} vs {}",
                a.to_f64(),
                b.to_f64()
            )));
        }
    }
    Ok(closed)
}

/// `D(t)` for a series argument `t` with zero constant term.
pub fn dissection_of_series<C: Coeff>(
    t: &TruncatedSeries<C>,
) -> Result<TruncatedSeries<C>> {
    if !t.coeff(0).is_zero() {
        return Err(Error::SeriesDomain(
            "dissection substitution needs a series with zero constant term".into(),
        ));
    }
    let order = t.order();
    let one = TruncatedSeries::constant(C::one(), order);
    let disc = t
        .mul(t)
        .sub(&t.scale(&C::from_i64(6)))
        .add(&one);
    let root = disc.sqrt()?;
    let quarter = C::one().div(&C::from_i64(4));
    Ok(one.add(t).sub(&root).scale(&quarter))
}

/// `D'(t)` for a series argument with zero constant term.
pub fn dissection_derivative_of_series<C: Coeff>(
    t: &TruncatedSeries<C>,
) -> Result<TruncatedSeries<C>> {
    if !t.coeff(0).is_zero() {
        return Err(Error::SeriesDomain(
            "dissection substitution needs a series with zero constant term".into(),
        ));
    }
    let order = t.order();
    let one = TruncatedSeries::constant(C::one(), order);
    let disc = t
        .mul(t)
        .sub(&t.scale(&C::from_i64(6)))
        .add(&one);
    let invroot = disc.sqrt()?.recip()?;
    let three = TruncatedSeries::constant(C::from_i64(3), order);
    let quarter = C::one().div(&C::from_i64(4));
    Ok(one.sub(&t.sub(&three).mul(&invroot)).scale(&quarter))
}

fn scalar_disc(x: f64) -> Result<f64> {
    // The explicit radius comparison keeps the rejection sharp even where
    // rounding makes the discriminant land a hair on the wrong side of zero.
    let disc = x * x - 6.0 * x + 1.0;
    if x >= dissection_radius() || disc <= 0.0 {
        return Err(Error::SeriesDomain(format!(
            "dissection parameter {x} is at or beyond the radius {}",
            dissection_radius()
        )));
    }
    Ok(disc)
}

/// Scalar `D(x)` for `0 <= x <` the radius.
pub fn dissection_value(x: f64) -> Result<f64> {
    let disc = scalar_disc(x)?;
    Ok((1.0 + x - disc.sqrt()) / 4.0)
}

/// Scalar `D'(x)`.
pub fn dissection_d1(x: f64) -> Result<f64> {
    let disc = scalar_disc(x)?;
    Ok((1.0 - (x - 3.0) / disc.sqrt()) / 4.0)
}

/// Scalar `D''(x)`.
pub fn dissection_d2(x: f64) -> Result<f64> {
    let disc = scalar_disc(x)?;
    Ok(2.0 * disc.powf(-1.5))
}

/// Checks the vertex cap, so runaway parameters fail fast instead of
/// exhausting memory.
fn check_cap(g: &Graph) -> Result<()> {
    if g.n() as u32 > BLOCK_VERTEX_CAP {
        return Err(Error::BudgetExhausted {
            nodes_created: g.n() as u64,
        });
    }
    Ok(())
}

/// Extends `g` with a Boltzmann dissection at parameter `x` whose root edge
/// is `(o, t)`; both endpoints must already exist. Adds the root edge itself.
pub(crate) fn build_dissection(
    g: &mut Graph,
    o: u32,
    t: u32,
    x: f64,
    rng: &mut dyn RngCore,
) -> Result<()> {
    let d = dissection_value(x)?;
    if bernoulli(rng, x / d) {
        g.add_edge(o, t);
        return Ok(());
    }
    build_dissection_composite(g, o, t, x, rng)
}

/// The composite branch alone: a bounded face with `k >= 2` sub-dissections,
/// `P(k)` proportional to `D(x)^k`.
pub(crate) fn build_dissection_composite(
    g: &mut Graph,
    o: u32,
    t: u32,
    x: f64,
    rng: &mut dyn RngCore,
) -> Result<()> {
    let d = dissection_value(x)?;
    let k = 2 + geometric(rng, d);
    let mut prev = o;
    for i in 0..k {
        let next = if i + 1 == k { t } else { g.add_vertex() };
        check_cap(g)?;
        build_dissection(g, prev, next, x, rng)?;
        prev = next;
    }
    g.add_edge(o, t);
    Ok(())
}

/// Draws `k >= 2` proportional to `k * q^(k-1)` by sequential inversion.
fn pointed_fan_width(rng: &mut dyn RngCore, q: f64) -> usize {
    let total = 1.0 / ((1.0 - q) * (1.0 - q)) - 1.0;
    let mut r = u01(rng) * total;
    let mut k = 2usize;
    let mut w = 2.0 * q;
    loop {
        if r < w || k > 1_000_000 {
            return k;
        }
        r -= w;
        k += 1;
        w = k as f64 * q.powi(k as i32 - 1);
    }
}

/// Vertex-pointed variant: builds a dissection whose total weight is `D'(x)`
/// and returns the marked non-origin vertex. With `force_composite` the
/// single-edge case (which would mark `t`) is excluded, leaving mass
/// `D'(x) - 1`.
pub(crate) fn build_dissection_pointed(
    g: &mut Graph,
    o: u32,
    t: u32,
    x: f64,
    rng: &mut dyn RngCore,
    force_composite: bool,
) -> Result<u32> {
    let d = dissection_value(x)?;
    let dp = dissection_d1(x)?;
    if !force_composite && bernoulli(rng, 1.0 / dp) {
        g.add_edge(o, t);
        return Ok(t);
    }
    let k = pointed_fan_width(rng, d);
    let pointed_at = uniform_index(rng, k);
    let mut mark = t;
    let mut prev = o;
    for i in 0..k {
        let next = if i + 1 == k { t } else { g.add_vertex() };
        check_cap(g)?;
        if i == pointed_at {
            mark = build_dissection_pointed(g, prev, next, x, rng, false)?;
        } else {
            build_dissection(g, prev, next, x, rng)?;
        }
        prev = next;
    }
    g.add_edge(o, t);
    Ok(mark)
}

/// Copies `temp` into `g`, identifying `temp`'s vertices 0 and 1 with `o` and
/// `t`. Returns the vertex map.
fn merge_endpoints(g: &mut Graph, temp: &Graph, o: u32, t: u32) -> Vec<u32> {
    let mut map = vec![0u32; temp.n()];
    map[0] = o;
    map[1] = t;
    for v in 2..temp.n() {
        map[v] = g.add_vertex();
    }
    for (a, b) in temp.edges() {
        g.add_edge(map[a as usize], map[b as usize]);
    }
    map
}

/// Pointed dissection conditioned on the mark avoiding the far root vertex;
/// total weight `D'(x) - D(x)/x`. Rejected attempts are built into a scratch
/// graph so `g` is only touched on acceptance.
pub(crate) fn build_dissection_pointed_nondest(
    g: &mut Graph,
    o: u32,
    t: u32,
    x: f64,
    rng: &mut dyn RngCore,
) -> Result<u32> {
    for _ in 0..100_000 {
        let mut temp = Graph::new(2);
        let mark = build_dissection_pointed(&mut temp, 0, 1, x, rng, false)?;
        if mark == 1 {
            continue;
        }
        check_cap(g)?;
        let map = merge_endpoints(g, &temp, o, t);
        return Ok(map[mark as usize]);
    }
    Err(Error::NoConvergence(
        "pointed dissection kept marking the excluded vertex".into(),
    ))
}

/// Standalone Boltzmann dissection at parameter `x`, rooted at the origin of
/// its root edge (vertex 0; the far end is vertex 1).
pub fn sample_dissection(x: f64, rng: &mut dyn RngCore) -> Result<Graph> {
    if !(x > 0.0) || x >= dissection_radius() {
        return Err(Error::SeriesDomain(format!(
            "dissection parameter must lie in (0, {}), got {x}",
            dissection_radius()
        )));
    }
    let mut g = Graph::new(2);
    build_dissection(&mut g, 0, 1, x, rng)?;
    g.set_root(Some(0));
    g.sort_adjacency();
    Ok(g)
}
