//! Simple-graph value type shared by samplers, algorithms and experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected simple graph with optional root and optional marked cycle.
///
/// Vertices are `0..n`. Adjacency lists are kept sorted; construction sites
/// that add edges in bulk call [`Graph::sort_adjacency`] once at the end.
/// The marked cycle is an ordered vertex list describing one cycle of some
/// automorphism (used by cycle-pointed samplers).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
    root: Option<u32>,
    marked_cycle: Option<Vec<u32>>,
}

/// Serialized shape: explicit edge list plus the optional annotations.
#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    root: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    marked_cycle: Option<Vec<u32>>,
}

impl Graph {
    /// Graph with `n` isolated vertices.
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            root: None,
            marked_cycle: None,
        }
    }

    /// Graph from an edge list over vertices `0..n`.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut g = Self::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g.sort_adjacency();
        g
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.adj.len()
    }

    /// Number of edges.
    pub fn m(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Append an isolated vertex, returning its index.
    pub fn add_vertex(&mut self) -> u32 {
        self.adj.push(Vec::new());
        (self.adj.len() - 1) as u32
    }

    /// Empties the graph, handing its cleared adjacency lists to `pool` so
    /// a rejection loop can rebuild attempts without allocator churn.
    pub(crate) fn recycle_into(&mut self, pool: &mut Vec<Vec<u32>>) {
        for mut list in self.adj.drain(..) {
            list.clear();
            pool.push(list);
        }
        self.root = None;
        self.marked_cycle = None;
    }

    /// Appends a vertex backed by a caller-provided empty list, returning
    /// its index; the list's spare capacity is put back to work.
    pub(crate) fn push_prepared_list(&mut self, list: Vec<u32>) -> u32 {
        debug_assert!(list.is_empty(), "recycled adjacency list must be clear");
        self.adj.push(list);
        (self.adj.len() - 1) as u32
    }

    /// Add the undirected edge `{u, v}`. Callers must not add duplicates;
    /// [`Graph::sort_adjacency`] asserts simplicity in debug builds.
    pub fn add_edge(&mut self, u: u32, v: u32) {
        debug_assert_ne!(u, v, "self-loops are not representable");
        self.adj[u as usize].push(v);
        self.adj[v as usize].push(u);
    }

    /// True when the edge `{u, v}` is present (adjacency must be sorted).
    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    /// Sorted neighbors of `v`.
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    /// Sort all adjacency lists (call once after bulk edge insertion).
    pub fn sort_adjacency(&mut self) {
        for list in &mut self.adj {
            list.sort_unstable();
            debug_assert!(
                list.windows(2).all(|w| w[0] != w[1]),
                "duplicate edge inserted"
            );
        }
    }

    /// Edges as ordered pairs `u < v`.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.m());
        for (u, list) in self.adj.iter().enumerate() {
            for &v in list {
                if (u as u32) < v {
                    out.push((u as u32, v));
                }
            }
        }
        out
    }

    pub fn root(&self) -> Option<u32> {
        self.root
    }

    pub fn set_root(&mut self, root: Option<u32>) {
        if let Some(r) = root {
            assert!((r as usize) < self.n(), "root out of range");
        }
        self.root = root;
    }

    pub fn marked_cycle(&self) -> Option<&[u32]> {
        self.marked_cycle.as_deref()
    }

    pub fn set_marked_cycle(&mut self, cycle: Option<Vec<u32>>) {
        if let Some(c) = &cycle {
            assert!(c.iter().all(|&v| (v as usize) < self.n()));
        }
        self.marked_cycle = cycle;
    }

    /// Drop root and marked-cycle annotations, keeping the plain graph.
    pub fn forget_annotations(&mut self) {
        self.root = None;
        self.marked_cycle = None;
    }

    /// Disjoint union: append a copy of `other`, returning the vertex offset
    /// of the copy. Annotations of `other` are not copied.
    pub fn append_copy(&mut self, other: &Graph) -> u32 {
        let offset = self.n() as u32;
        for list in &other.adj {
            self.adj.push(list.iter().map(|&v| v + offset).collect());
        }
        offset
    }

    /// Induced subgraph on `verts` (which need not be sorted), relabelled to
    /// `0..verts.len()` in the given order. Annotations are dropped.
    pub fn induced(&self, verts: &[u32]) -> Graph {
        let mut index = vec![u32::MAX; self.n()];
        for (i, &v) in verts.iter().enumerate() {
            index[v as usize] = i as u32;
        }
        let mut g = Graph::new(verts.len());
        for &v in verts {
            for &w in self.neighbors(v) {
                let (iv, iw) = (index[v as usize], index[w as usize]);
                if iw != u32::MAX && iv < iw {
                    g.add_edge(iv, iw);
                }
            }
        }
        g.sort_adjacency();
        g
    }

    /// Relabel vertices by a permutation (`perm[old] = new`). Annotations are
    /// mapped along.
    pub fn relabel(&self, perm: &[u32]) -> Graph {
        let mut g = Graph::new(self.n());
        for (u, list) in self.adj.iter().enumerate() {
            for &v in list {
                if (u as u32) < v {
                    g.add_edge(perm[u], perm[v as usize]);
                }
            }
        }
        g.sort_adjacency();
        g.root = self.root.map(|r| perm[r as usize]);
        g.marked_cycle = self
            .marked_cycle
            .as_ref()
            .map(|c| c.iter().map(|&v| perm[v as usize]).collect());
        g
    }

    /// Serialize to the JSON interchange shape.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(GraphJson {
            n: self.n(),
            edges: self.edges(),
            root: self.root,
            marked_cycle: self.marked_cycle.clone(),
        })
        .expect("graph serialization cannot fail")
    }

    /// Parse the JSON interchange shape.
    pub fn from_json(value: &serde_json::Value) -> Result<Graph> {
        let parsed: GraphJson = serde_json::from_value(value.clone())?;
        let mut g = Graph::new(parsed.n);
        for &(u, v) in &parsed.edges {
            if u as usize >= parsed.n || v as usize >= parsed.n || u == v {
                return Err(Error::GraphDomain(format!(
                    "edge ({u}, {v}) out of range for n = {}",
                    parsed.n
                )));
            }
            g.add_edge(u, v);
        }
        g.sort_adjacency();
        if let Some(r) = parsed.root {
            if r as usize >= parsed.n {
                return Err(Error::GraphDomain("root out of range".into()));
            }
        }
        g.root = parsed.root;
        if let Some(c) = &parsed.marked_cycle {
            if c.iter().any(|&v| v as usize >= parsed.n) {
                return Err(Error::GraphDomain("marked cycle out of range".into()));
            }
        }
        g.marked_cycle = parsed.marked_cycle;
        Ok(g)
    }

    /// graph6 encoding (vertex count up to 62 covers every exchange use here).
    pub fn to_graph6(&self) -> Result<String> {
        let n = self.n();
        if n > 62 {
            return Err(Error::GraphDomain(
                "graph6 export limited to 62 vertices".into(),
            ));
        }
        let mut out = String::new();
        out.push((n as u8 + 63) as char);
        let mut bits: Vec<bool> = Vec::with_capacity(n * (n - 1) / 2);
        for v in 1..n {
            for u in 0..v {
                bits.push(self.has_edge(u as u32, v as u32));
            }
        }
        while bits.len() % 6 != 0 {
            bits.push(false);
        }
        for chunk in bits.chunks(6) {
            let mut val = 0u8;
            for &b in chunk {
                val = (val << 1) | b as u8;
            }
            out.push((val + 63) as char);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        g.set_root(Some(2));
        g.set_marked_cycle(Some(vec![1, 3]));
        let j = g.to_json();
        let back = Graph::from_json(&j).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn graph6_matches_known_encoding() {
        // The labeled 4-cycle 0-1-2-3-0: upper-triangle bits 101101 = 45,
        // printable as 45 + 63 = 'l', so the encoding is "Cl".
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(g.to_graph6().unwrap(), "Cl");
    }

    #[test]
    fn induced_keeps_inner_edges() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]);
        let h = g.induced(&[1, 2, 3]);
        assert_eq!(h.n(), 3);
        assert_eq!(h.m(), 3);
    }
}
