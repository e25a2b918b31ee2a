//! Cycle-pointed draws: structures carrying a marked automorphism cycle,
//! split by whether that cycle is centered at a vertex or inside a block.
//!
//! A vertex-centered draw is a plain rooted draw at the center plus one
//! distinguished block group at replication level `i >= 2` whose block is
//! atom- or pair-pointed; the pointing continues recursively through the
//! marked cycle of the block symmetry. A block-centered draw starts from a
//! block symmetry with a marked cycle of length at least two and installs
//! a rooted graph on every automorphism cycle of the block.
//!
//! Marked cycles compose by copy interleaving: when a cycle of length `l`
//! is replicated over `j` block copies and carries a subtree whose own
//! marked cycle has length `L`, the assembled cycle has length `j * l * L`
//! and follows the orbit of the symmetry that rotates the copies and
//! applies the block automorphism on wrap-around. Conditioned on its size,
//! a draw is uniform over the pointed structures of the class (for
//! block-centered outerplanar draws up to the reflective-only symmetry
//! accounting, reported through the `exact` flag).

use rand::RngCore;

use super::{
    cycles_of, glue_copy, BoltzmannSampler, CbDraw, CbPointedSample, Counters,
    PointedSample, SampleMeta,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::randkit::pick_weighted;
use crate::species::{BlockDrawMode, SymmetryDraw};

impl BoltzmannSampler {
    /// Branch table of the vertex-centered pointing: replication levels
    /// `i >= 2` up to the cutoff, each in an atom-pointed and a
    /// pair-pointed variant. Returns the weights and the branch labels.
    pub(crate) fn cv_branches(&self) -> (Vec<f64>, Vec<(usize, BlockDrawMode)>) {
        let mut weights = Vec::new();
        let mut branches = Vec::new();
        for i in 2..=self.tables.level_cutoff {
            weights.push(self.tables.d1vals[i - 1] * self.pavalue(i));
            branches.push((i, BlockDrawMode::AtomPointed));
            weights.push(2.0 * self.tables.d2vals[i - 1] * self.pavalue(2 * i));
            branches.push((i, BlockDrawMode::PairPointed));
        }
        (weights, branches)
    }

    /// Total mass of the vertex-centered pointing branches: the value of
    /// the level-two-and-up pointed block sum at the sampler's parameter.
    pub(crate) fn pv_value(&self) -> f64 {
        self.cv_branches().0.iter().sum()
    }

    /// One draw of the pointed rooted law at exponent `m >= 2`: a plain
    /// rooted draw whose root either becomes the marked cycle itself or
    /// carries one distinguished pointed block group. Returns the graph
    /// and its marked cycle, or `None` when the size cap fires.
    pub(crate) fn draw_pointed(
        &self,
        m: usize,
        mu: u64,
        count_root: bool,
        counters: &mut Counters,
        rng: &mut dyn RngCore,
    ) -> Result<Option<(Graph, Vec<u32>)>> {
        debug_assert!(m >= 2, "pointed draws live at exponent two and higher");
        let mut weights = vec![1.0];
        let mut branches = Vec::new();
        let mut j = 1usize;
        while j * m <= self.tables.level_cutoff {
            let jm = j * m;
            weights.push(self.tables.d1vals[jm - 1] * self.pavalue(jm));
            branches.push((j, BlockDrawMode::AtomPointed));
            weights.push(2.0 * self.tables.d2vals[jm - 1] * self.pavalue(2 * jm));
            branches.push((j, BlockDrawMode::PairPointed));
            j += 1;
        }
        let choice = pick_weighted(rng, &weights);
        let mut base = match self.draw_plain(m, mu, count_root, counters, rng)? {
            Some(g) => g,
            None => return Ok(None),
        };
        if choice == 0 {
            return Ok(Some((base, vec![0])));
        }
        let (j, mode) = branches[choice - 1];
        let jm = j * m;
        let block = self
            .kernel
            .sample_block(mode, self.avalue(jm), self.avalue(2 * jm), rng)?;
        match self.attach_pointed_group(&mut base, 0, &block, j, jm, mu, counters, rng)? {
            Some(cycle) => Ok(Some((base, cycle))),
            None => Ok(None),
        }
    }

    /// Installs a pointed block group at `center`: `copies` interleaved
    /// copies of `block`, plain subtrees on the unmarked symmetry cycles,
    /// and the pointing continued through the marked one. `unit` is the
    /// exponent of a single copy's atoms, `mu` the final multiplicity of
    /// the host. Returns the assembled marked cycle, or `None` when the
    /// size cap fires.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn attach_pointed_group(
        &self,
        host: &mut Graph,
        center: u32,
        block: &SymmetryDraw,
        copies: usize,
        unit: usize,
        mu: u64,
        counters: &mut Counters,
        rng: &mut dyn RngCore,
    ) -> Result<Option<Vec<u32>>> {
        let mc = block.marked_cycle.as_ref().ok_or_else(|| {
            Error::ExactInconsistency(
                "pointed block draw carries no marked cycle".into(),
            )
        })?;
        debug_assert_eq!(
            block.automorphism.first().copied(),
            Some(0),
            "rooted block symmetries must fix the attachment vertex"
        );
        let bn = block.graph.n();
        let edges = block.graph.edges();
        let mut copy_maps: Vec<Vec<u32>> = Vec::with_capacity(copies);
        for _ in 0..copies {
            let mut map = vec![0u32; bn];
            map[0] = center;
            for slot in map.iter_mut().skip(1) {
                *slot = host.add_vertex();
                counters.charge(1)?;
                if !counters.grow(mu) {
                    return Ok(None);
                }
            }
            for &(u, v) in &edges {
                host.add_edge(map[u as usize], map[v as usize]);
            }
            copy_maps.push(map);
        }
        let lm = mc.len();
        let mut final_cycle = None;
        for cyc in cycles_of(&block.automorphism, true) {
            let l = cyc.len();
            if cyc.contains(&mc[0]) {
                debug_assert_eq!(l, lm, "marked cycle must be a whole symmetry cycle");
                let drawn = self.draw_pointed(
                    unit * lm,
                    mu * (copies * lm) as u64,
                    false,
                    counters,
                    rng,
                )?;
                let (sub, sub_cycle) = match drawn {
                    Some(pair) => pair,
                    None => return Ok(None),
                };
                let sedges = sub.edges();
                let mut site_maps = Vec::with_capacity(lm * copies);
                for b in 0..lm {
                    for map in &copy_maps {
                        let site = map[mc[b] as usize];
                        site_maps.push(glue_copy(host, site, &sub, &sedges, counters)?);
                    }
                }
                let mut assembled = Vec::with_capacity(sub_cycle.len() * site_maps.len());
                for &q in &sub_cycle {
                    for smap in &site_maps {
                        assembled.push(smap[q as usize]);
                    }
                }
                final_cycle = Some(assembled);
            } else {
                let drawn = self.draw_plain(
                    unit * l,
                    mu * (copies * l) as u64,
                    false,
                    counters,
                    rng,
                )?;
                let sub = match drawn {
                    Some(g) => g,
                    None => return Ok(None),
                };
                let sedges = sub.edges();
                for map in &copy_maps {
                    for &v in &cyc {
                        glue_copy(host, map[v as usize], &sub, &sedges, counters)?;
                    }
                }
            }
        }
        final_cycle.map(Some).ok_or_else(|| {
            Error::ExactInconsistency(
                "marked cycle of a pointed block is not an atom symmetry cycle".into(),
            )
        })
    }

    /// One free draw of the vertex-centered pointed law. Returns the
    /// graph, its marked cycle and the size of the plain rooted part, or
    /// `None` when the size cap fires.
    pub(crate) fn draw_cv(
        &self,
        counters: &mut Counters,
        rng: &mut dyn RngCore,
    ) -> Result<Option<(Graph, Vec<u32>, usize)>> {
        let (weights, branches) = self.cv_branches();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::SeriesDomain(
                "no vertex-centered pointing mass at this parameter".into(),
            ));
        }
        let (level, mode) = branches[pick_weighted(rng, &weights)];
        let mut base = match self.draw_plain(1, 1, true, counters, rng)? {
            Some(g) => g,
            None => return Ok(None),
        };
        let a_part = base.n();
        let block = self
            .kernel
            .sample_block(mode, self.avalue(level), self.avalue(2 * level), rng)?;
        let attached = self.attach_pointed_group(
            &mut base, 0, &block, level, level, 1, counters, rng,
        )?;
        match attached {
            Some(cycle) => Ok(Some((base, cycle, a_part))),
            None => Ok(None),
        }
    }

    /// One free draw of the block-centered pointed law. Returns the graph,
    /// its marked cycle, the size bookkeeping and the exactness flag, or
    /// `None` when the size cap fires.
    pub(crate) fn draw_cb(
        &self,
        counters: &mut Counters,
        rng: &mut dyn RngCore,
    ) -> Result<Option<(Graph, Vec<u32>, CbDraw, bool)>> {
        let svals = [self.avalue(1), self.avalue(2), self.avalue(3)];
        let pointed = [self.tables.pavalues[0], self.pavalue(2), self.pavalue(3)];
        let (block, exact) = self.kernel.sample_cb_block(&svals, &pointed, rng)?;
        let mc = match block.marked_cycle.as_ref() {
            Some(c) => c.clone(),
            None => {
                return Err(Error::ExactInconsistency(
                    "block-centered draw carries no marked cycle".into(),
                ))
            }
        };
        if mc.len() < 2 {
            return Err(Error::ExactInconsistency(
                "block-centered marked cycles must have length at least two".into(),
            ));
        }
        let mut host = block.graph.clone();
        let bn = host.n();
        counters.charge(bn as u64)?;
        for _ in 0..bn {
            if !counters.grow(1) {
                return Ok(None);
            }
        }
        let mut hull_size = 0usize;
        let mut components: Vec<Graph> = Vec::new();
        let mut final_cycle = None;
        for cyc in cycles_of(&block.automorphism, false) {
            let l = cyc.len();
            if cyc.contains(&mc[0]) {
                debug_assert_eq!(l, mc.len(), "marked cycle must be a whole symmetry cycle");
                let drawn = self.draw_pointed(l, l as u64, false, counters, rng)?;
                let (sub, sub_cycle) = match drawn {
                    Some(pair) => pair,
                    None => return Ok(None),
                };
                let sedges = sub.edges();
                let mut site_maps = Vec::with_capacity(l);
                for &v in mc.iter() {
                    site_maps.push(glue_copy(&mut host, v, &sub, &sedges, counters)?);
                }
                record_attachments(&sub, l, &mut hull_size, &mut components);
                let mut assembled = Vec::with_capacity(sub_cycle.len() * site_maps.len());
                for &q in &sub_cycle {
                    for smap in &site_maps {
                        assembled.push(smap[q as usize]);
                    }
                }
                final_cycle = Some(assembled);
            } else {
                let drawn = self.draw_plain(l, l as u64, false, counters, rng)?;
                let sub = match drawn {
                    Some(g) => g,
                    None => return Ok(None),
                };
                let sedges = sub.edges();
                for &v in &cyc {
                    glue_copy(&mut host, v, &sub, &sedges, counters)?;
                }
                record_attachments(&sub, l, &mut hull_size, &mut components);
            }
        }
        let cycle = final_cycle.ok_or_else(|| {
            Error::ExactInconsistency(
                "block-centered marked cycle is not a symmetry cycle".into(),
            )
        })?;
        let draw = CbDraw {
            hull_size,
            slot_count: components.len(),
            components,
        };
        Ok(Some((host, cycle, draw, exact)))
    }

    /// Vertex-centered cycle-pointed draw conditioned on exact size `n`.
    /// The output carries a marked cycle of length at least two whose
    /// center is a vertex; conditioned draws are uniform per structure.
    pub fn sample_cv_pointed(&self, n: usize, rng: &mut dyn RngCore) -> Result<PointedSample> {
        if n <= self.tables.order && !(self.cv_coeff(n) > 0.0) {
            return Err(Error::SeriesDomain(format!(
                "no vertex-centered pointed structures at size {n}"
            )));
        }
        let mut counters = Counters::new();
        self.cv_pointed_inner(n, &mut counters, rng)
    }

    pub(crate) fn cv_pointed_inner(
        &self,
        n: usize,
        counters: &mut Counters,
        rng: &mut dyn RngCore,
    ) -> Result<PointedSample> {
        let mut attempts = 0u64;
        loop {
            attempts += 1;
            counters.begin_attempt(Some(n as u64));
            if let Some((mut g, cycle, a_part)) = self.draw_cv(counters, rng)? {
                if g.n() == n {
                    g.set_marked_cycle(Some(cycle));
                    g.sort_adjacency();
                    return Ok(PointedSample {
                        graph: g,
                        a_part,
                        pv_part: n - a_part,
                        meta: SampleMeta {
                            attempts,
                            nodes_created: counters.nodes_created,
                            truncation_bias: self.tables.truncation_bias,
                            method: "cv-rejection".into(),
                            exact: true,
                        },
                    });
                }
            }
        }
    }

    /// Block-centered cycle-pointed draw conditioned on exact size `n`.
    /// The size splits as the core-block atoms with trivial attachments
    /// plus the attached rooted components, reported in the draw record.
    pub fn sample_cb_pointed(&self, n: usize, rng: &mut dyn RngCore) -> Result<CbPointedSample> {
        if n <= self.tables.order && !(self.cb_coeff(n) > 0.0) {
            return Err(Error::SeriesDomain(format!(
                "no block-centered pointed structures at size {n}"
            )));
        }
        let mut counters = Counters::new();
        self.cb_pointed_inner(n, &mut counters, rng)
    }

    pub(crate) fn cb_pointed_inner(
        &self,
        n: usize,
        counters: &mut Counters,
        rng: &mut dyn RngCore,
    ) -> Result<CbPointedSample> {
        let mut attempts = 0u64;
        loop {
            attempts += 1;
            counters.begin_attempt(Some(n as u64));
            if let Some((mut g, cycle, draw, exact)) = self.draw_cb(counters, rng)? {
                if g.n() == n {
                    g.set_marked_cycle(Some(cycle));
                    g.sort_adjacency();
                    return Ok(CbPointedSample {
                        graph: g,
                        draw,
                        meta: SampleMeta {
                            attempts,
                            nodes_created: counters.nodes_created,
                            truncation_bias: self.tables.truncation_bias,
                            method: "cb-rejection".into(),
                            exact,
                        },
                    });
                }
            }
        }
    }
}

/// Tallies one subtree installed over a whole symmetry cycle of length `l`
/// into the block-centered size bookkeeping: trivial subtrees extend the
/// hull, nontrivial ones contribute one rooted component per cycle site.
fn record_attachments(
    sub: &Graph,
    l: usize,
    hull_size: &mut usize,
    components: &mut Vec<Graph>,
) {
    if sub.n() == 1 {
        *hull_size += l;
    } else {
        for _ in 0..l {
            let mut comp = sub.clone();
            comp.set_root(Some(0));
            comp.sort_adjacency();
            components.push(comp);
        }
    }
}
