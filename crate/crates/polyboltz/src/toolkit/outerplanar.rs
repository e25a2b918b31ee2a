//! Outerplanarity recognition and Hamilton-cycle recovery for 2-connected
//! blocks.
//!
//! A 2-connected outerplanar graph has a unique Hamilton cycle (the outer
//! face); an edge lies on it exactly when deleting that edge destroys
//! 2-connectivity. The recovered cycle is verified (cover, degrees, chord
//! non-crossing), so a true result is always sound.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::toolkit::blocks::block_cut_tree;

fn is_biconnected(g: &Graph) -> bool {
    g.n() >= 3
        && match block_cut_tree(g) {
            Ok(t) => t.block_count() == 1,
            Err(_) => false,
        }
}

fn remove_edge(g: &Graph, drop: (u32, u32)) -> Graph {
    let edges: Vec<(u32, u32)> = g
        .edges()
        .into_iter()
        .filter(|&(u, v)| (u, v) != drop)
        .collect();
    Graph::from_edges(g.n(), &edges)
}

/// Hamilton cycle (outer face) of a 2-connected outerplanar graph with at
/// least 3 vertices. Errors when the input is not such a graph.
pub fn block_hamilton_cycle(g: &Graph) -> Result<Vec<u32>> {
    let n = g.n();
    if n < 3 {
        return Err(Error::GraphDomain(
            "hamilton cycle needs at least 3 vertices".into(),
        ));
    }
    if !is_biconnected(g) {
        return Err(Error::GraphDomain("block is not 2-connected".into()));
    }
    if g.m() > 2 * n - 3 {
        return Err(Error::GraphDomain(
            "too many edges for an outerplanar block".into(),
        ));
    }
    let mut cycle_adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut chords: Vec<(u32, u32)> = Vec::new();
    for (u, v) in g.edges() {
        if is_biconnected(&remove_edge(g, (u, v))) {
            chords.push((u, v));
        } else {
            cycle_adj[u as usize].push(v);
            cycle_adj[v as usize].push(u);
        }
    }
    if cycle_adj.iter().any(|l| l.len() != 2) {
        return Err(Error::GraphDomain(
            "boundary edges do not form a cycle".into(),
        ));
    }
    // Walk the claimed cycle from vertex 0.
    let mut cycle = Vec::with_capacity(n);
    let mut prev = u32::MAX;
    let mut at = 0u32;
    loop {
        cycle.push(at);
        let nexts = &cycle_adj[at as usize];
        let next = if nexts[0] != prev { nexts[0] } else { nexts[1] };
        prev = at;
        at = next;
        if at == 0 {
            break;
        }
        if cycle.len() > n {
            return Err(Error::GraphDomain("boundary is not a single cycle".into()));
        }
    }
    if cycle.len() != n {
        return Err(Error::GraphDomain("boundary cycle misses vertices".into()));
    }
    let mut pos = vec![0u32; n];
    for (i, &v) in cycle.iter().enumerate() {
        pos[v as usize] = i as u32;
    }
    let spans: Vec<(u32, u32)> = chords
        .iter()
        .map(|&(u, v)| {
            let (a, b) = (pos[u as usize], pos[v as usize]);
            (a.min(b), a.max(b))
        })
        .collect();
    for (i, &(a1, b1)) in spans.iter().enumerate() {
        for &(a2, b2) in &spans[i + 1..] {
            let crossing = (a1 < a2 && a2 < b1 && b1 < b2) || (a2 < a1 && a1 < b2 && b2 < b1);
            if crossing {
                return Err(Error::GraphDomain("chords cross: not outerplanar".into()));
            }
        }
    }
    Ok(cycle)
}

/// True when every block of every component embeds with all vertices on the
/// outer face.
pub fn is_outerplanar(g: &Graph) -> bool {
    for comp in crate::toolkit::distance::components(g) {
        let sub = g.induced(&comp);
        let tree = match block_cut_tree(&sub) {
            Ok(t) => t,
            Err(_) => return false,
        };
        for verts in &tree.blocks {
            if verts.len() >= 3 && block_hamilton_cycle(&sub.induced(verts)).is_err() {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_cycle_recovered() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let c = block_hamilton_cycle(&g).unwrap();
        assert_eq!(c.len(), 5);
    }

    #[test]
    fn polygon_with_nested_chords_accepted() {
        let g = Graph::from_edges(
            6,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 2), (0, 3)],
        );
        let c = block_hamilton_cycle(&g).unwrap();
        assert_eq!(c.len(), 6);
        assert!(is_outerplanar(&g));
    }

    #[test]
    fn k4_rejected() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert!(block_hamilton_cycle(&g).is_err());
        assert!(!is_outerplanar(&g));
    }

    #[test]
    fn k23_rejected() {
        let g = Graph::from_edges(5, &[(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)]);
        assert!(!is_outerplanar(&g));
    }

    #[test]
    fn diamond_accepted() {
        // 4-cycle plus one chord is outerplanar.
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        assert!(is_outerplanar(&g));
        assert_eq!(block_hamilton_cycle(&g).unwrap().len(), 4);
    }

    #[test]
    fn trees_are_outerplanar() {
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (2, 3), (2, 4)]);
        assert!(is_outerplanar(&g));
    }

    #[test]
    fn crossing_chords_rejected() {
        let g = Graph::from_edges(
            5,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2), (1, 3)],
        );
        assert!(!is_outerplanar(&g));
    }

    #[test]
    fn blocks_checked_independently() {
        // Two squares sharing a cut vertex, one with a chord.
        let g = Graph::from_edges(
            7,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4), (4, 5), (5, 6), (6, 3)],
        );
        assert!(is_outerplanar(&g));
    }
}
