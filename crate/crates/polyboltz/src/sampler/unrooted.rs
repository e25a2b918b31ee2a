//! Unrooted conditioned draws.
//!
//! Two routes produce a uniform unlabelled graph of a given size. The
//! decomposition route uses the pointing identity: size-`n` structures
//! split as `n * c_n = a_n + cv_n + cb_n` into rooted, vertex-centered and
//! block-centered pointings, so picking a summand proportionally to its
//! coefficient at `n`, drawing it conditioned on `n` and erasing marks is
//! uniform: every unrooted graph owns exactly `n` pointings. The
//! orbit-rejection route draws a rooted graph at size `n`, forgets the
//! root and accepts with probability one over the number of vertex orbits,
//! trading an exact automorphism computation per attempt for no pointed
//! machinery at all.
//!
//! The windowed variant relaxes the size to `[n (1 - delta), n (1 + delta)]`
//! for large-scale experiments: each attempt re-picks the summand by its
//! full series mass at the parameter, draws it freely under the window's
//! size cap and thins the hit by `n_lo / size`, cancelling the factor
//! `size` between the pointing count and the object so that acceptance is
//! proportional to the plain Boltzmann weight of the unrooted graph.

use rand::RngCore;

use super::{BoltzmannSampler, Counters, DrawArena, SampleMeta, UnrootedMethod, UnrootedSample};
use crate::error::{Error, Result};
use crate::randkit::{bernoulli, pick_weighted};
use crate::toolkit::aut_orbit_count;

impl BoltzmannSampler {
    /// Value of the block-centered pointed series at the parameter,
    /// summed from the coefficient table. The summands at levels two and
    /// higher converge geometrically; the table order bounds the residual.
    pub(crate) fn cb_value(&self) -> f64 {
        let t = self.tables.x / self.tables.scale;
        let mut acc = 0.0;
        for &c in self.tables.cb_coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    /// Uniform unrooted draw at exact size `n` by the requested method.
    pub fn sample_unrooted_sized(
        &self,
        n: usize,
        method: UnrootedMethod,
        rng: &mut dyn RngCore,
    ) -> Result<UnrootedSample> {
        let mut counters = Counters::new();
        match method {
            UnrootedMethod::Decomposition => self.unrooted_decomposed(n, &mut counters, rng),
            UnrootedMethod::OrbitRejection => self.unrooted_by_orbits(n, &mut counters, rng),
        }
    }

    pub(crate) fn unrooted_decomposed(
        &self,
        n: usize,
        counters: &mut Counters,
        rng: &mut dyn RngCore,
    ) -> Result<UnrootedSample> {
        if n == 0 {
            return Err(Error::SeriesDomain("target size must be positive".into()));
        }
        if n > self.tables.order {
            return Err(Error::SeriesDomain(format!(
                "exact decomposition at size {n} needs coefficient tables to that \
                 order, have {}",
                self.tables.order
            )));
        }
        let masses = [self.rooted_coeff(n), self.cv_coeff(n), self.cb_coeff(n)];
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::SeriesDomain(format!(
                "the class has no structures at size {n}"
            )));
        }
        // The summand is fixed once and its draw conditioned on the size;
        // re-picking per attempt would skew the mixture by the summands'
        // acceptance rates.
        let (mut graph, mut meta) = match pick_weighted(rng, &masses) {
            0 => {
                let got = self.rooted_sized_inner(n, 0.0, counters, rng)?;
                (got.graph, got.meta)
            }
            1 => {
                let got = self.cv_pointed_inner(n, counters, rng)?;
                (got.graph, got.meta)
            }
            _ => {
                let got = self.cb_pointed_inner(n, counters, rng)?;
                (got.graph, got.meta)
            }
        };
        graph.forget_annotations();
        graph.sort_adjacency();
        meta.method = "decomposition".into();
        meta.exact = meta.exact && self.tables.cb_exact;
        Ok(UnrootedSample { graph, meta })
    }

    pub(crate) fn unrooted_by_orbits(
        &self,
        n: usize,
        counters: &mut Counters,
        rng: &mut dyn RngCore,
    ) -> Result<UnrootedSample> {
        let mut attempts = 0u64;
        loop {
            let rooted = self.rooted_sized_inner(n, 0.0, counters, rng)?;
            attempts += rooted.meta.attempts;
            let mut graph = rooted.graph;
            graph.forget_annotations();
            let orbits = aut_orbit_count(&graph)?;
            // A graph with r root orbits arises from r rooted shapes;
            // accepting with probability 1/r levels the field exactly.
            if bernoulli(rng, 1.0 / orbits as f64) {
                graph.sort_adjacency();
                return Ok(UnrootedSample {
                    graph,
                    meta: SampleMeta {
                        attempts,
                        nodes_created: counters.nodes_created,
                        truncation_bias: self.tables.truncation_bias,
                        method: "orbit-rejection".into(),
                        exact: true,
                    },
                });
            }
        }
    }

    /// Unrooted draw with size in `[n (1 - delta), n (1 + delta)]`,
    /// weighted within the window by the Boltzmann mass of each size.
    /// Built for large sizes where exact conditioning is too slow; the
    /// route is the decomposition one with per-attempt summand re-picks
    /// and a `n_lo / size` thinning.
    pub fn sample_unrooted_window(
        &self,
        n: usize,
        delta: f64,
        rng: &mut dyn RngCore,
    ) -> Result<UnrootedSample> {
        let (lo, hi) = Self::size_window(n, delta)?;
        if lo == hi {
            return self.sample_unrooted_sized(n, UnrootedMethod::Decomposition, rng);
        }
        let masses = [
            self.avalue(1),
            self.avalue(1) * self.pv_value(),
            self.cb_value(),
        ];
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::SeriesDomain(
                "pointing masses are not positive and finite at this parameter".into(),
            ));
        }
        let mut counters = Counters::new();
        let mut arena = DrawArena::new();
        let mut attempts = 0u64;
        loop {
            attempts += 1;
            counters.begin_attempt(Some(hi as u64));
            let drawn = match pick_weighted(rng, &masses) {
                0 => self.draw_plain_in(&mut arena, 1, 1, true, &mut counters, rng)?,
                1 => self.draw_cv(&mut counters, rng)?.map(|(g, _, _)| g),
                _ => self.draw_cb(&mut counters, rng)?.map(|(g, _, _, _)| g),
            };
            let mut graph = match drawn {
                Some(g) => g,
                None => continue,
            };
            let k = graph.n();
            if k < lo {
                continue;
            }
            if !bernoulli(rng, lo as f64 / k as f64) {
                continue;
            }
            graph.forget_annotations();
            graph.sort_adjacency();
            return Ok(UnrootedSample {
                graph,
                meta: SampleMeta {
                    attempts,
                    nodes_created: counters.nodes_created,
                    truncation_bias: self.tables.truncation_bias,
                    method: "decomposition-window".into(),
                    exact: false,
                },
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolkit::{canonical_code, components, is_outerplanar};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::collections::HashMap;

    fn is_tree(g: &crate::graph::Graph) -> bool {
        g.n() >= 1 && g.m() == g.n() - 1 && components(g).len() == 1
    }

    fn class_frequencies(
        s: &BoltzmannSampler,
        n: usize,
        method: UnrootedMethod,
        draws: usize,
        seed: u64,
    ) -> HashMap<Vec<u64>, usize> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut freq = HashMap::new();
        for _ in 0..draws {
            let got = s.sample_unrooted_sized(n, method, &mut rng).unwrap();
            assert_eq!(got.graph.n(), n);
            assert!(is_tree(&got.graph));
            assert!(got.graph.root().is_none());
            assert!(got.graph.marked_cycle().is_none());
            let code = canonical_code(&got.graph).unwrap();
            *freq.entry(code).or_insert(0) += 1;
        }
        freq
    }

    #[test]
    fn decomposition_draws_are_uniform_over_trees_of_size_six() {
        let s = BoltzmannSampler::for_class("trees", 64).unwrap();
        let freq =
            class_frequencies(&s, 6, UnrootedMethod::Decomposition, 3_600, 60);
        assert_eq!(freq.len(), 6, "six free trees at size six");
        for (code, count) in freq {
            let dev = (count as f64 - 600.0).abs() / 600.0;
            assert!(dev < 0.16, "class {code:?} frequency off by {dev}");
        }
    }

    #[test]
    fn orbit_rejection_matches_the_same_uniform_law() {
        let s = BoltzmannSampler::for_class("trees", 64).unwrap();
        let freq =
            class_frequencies(&s, 6, UnrootedMethod::OrbitRejection, 3_600, 61);
        assert_eq!(freq.len(), 6);
        for (code, count) in freq {
            let dev = (count as f64 - 600.0).abs() / 600.0;
            assert!(dev < 0.16, "class {code:?} frequency off by {dev}");
        }
    }

    #[test]
    fn both_methods_cover_the_size_two_identity() {
        // One free tree at size two; both routes must produce it directly.
        let s = BoltzmannSampler::for_class("trees", 64).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(62);
        for method in [UnrootedMethod::Decomposition, UnrootedMethod::OrbitRejection] {
            let got = s.sample_unrooted_sized(2, method, &mut rng).unwrap();
            assert_eq!(got.graph.n(), 2);
            assert_eq!(got.graph.m(), 1);
        }
    }

    #[test]
    fn outerplanar_orbit_draws_stay_in_class() {
        let s = BoltzmannSampler::for_class("outerplanar", 64).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(63);
        for _ in 0..60 {
            let got = s
                .sample_unrooted_sized(5, UnrootedMethod::OrbitRejection, &mut rng)
                .unwrap();
            assert_eq!(got.graph.n(), 5);
            assert!(is_outerplanar(&got.graph));
            assert!(got.meta.exact);
        }
    }

    #[test]
    fn windowed_draws_land_in_the_window() {
        let s = BoltzmannSampler::for_class("trees", 128).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(64);
        for _ in 0..30 {
            let got = s.sample_unrooted_window(30, 0.2, &mut rng).unwrap();
            assert!(got.graph.n() >= 24 && got.graph.n() <= 36);
            assert!(is_tree(&got.graph));
            assert_eq!(got.meta.method, "decomposition-window");
        }
    }

    #[test]
    fn impossible_sizes_are_rejected_up_front() {
        let s = BoltzmannSampler::for_class("trees", 64).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(65);
        let err = s
            .sample_unrooted_sized(0, UnrootedMethod::Decomposition, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::SeriesDomain(_)));
        let err = s
            .sample_unrooted_sized(1_000, UnrootedMethod::Decomposition, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::SeriesDomain(_)));
    }
}
