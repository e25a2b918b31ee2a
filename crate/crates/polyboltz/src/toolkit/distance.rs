//! Breadth-first distances, exact diameter, and component splitting.

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Distances from `src` to every vertex (`u32::MAX` when unreachable).
pub fn bfs_distances(g: &Graph, src: u32) -> Vec<u32> {
    let mut dist = vec![u32::MAX; g.n()];
    let mut queue = std::collections::VecDeque::new();
    dist[src as usize] = 0;
    queue.push_back(src);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v as usize];
        for &w in g.neighbors(v) {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = dv + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

fn bfs_with_parents(g: &Graph, src: u32) -> (Vec<u32>, Vec<u32>) {
    let mut dist = vec![u32::MAX; g.n()];
    let mut parent = vec![u32::MAX; g.n()];
    let mut queue = std::collections::VecDeque::new();
    dist[src as usize] = 0;
    queue.push_back(src);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v as usize];
        for &w in g.neighbors(v) {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = dv + 1;
                parent[w as usize] = v;
                queue.push_back(w);
            }
        }
    }
    (dist, parent)
}

fn farthest(dist: &[u32]) -> (u32, u32) {
    let mut best = (0u32, 0u32);
    for (v, &d) in dist.iter().enumerate() {
        if d != u32::MAX && d > best.1 {
            best = (v as u32, d);
        }
    }
    best
}

/// Exact diameter of a connected graph.
///
/// Runs a double sweep for a lower bound, then scans fringe levels from a
/// midpoint root, refining with full eccentricity computations until the
/// level bound certifies the maximum. Linear per sweep; the number of sweeps
/// is small on tree-like inputs.
pub fn diameter(g: &Graph) -> Result<u32> {
    let n = g.n();
    if n == 0 {
        return Err(Error::GraphDomain("diameter of the empty graph".into()));
    }
    if n == 1 {
        return Ok(0);
    }
    let d0 = bfs_distances(g, 0);
    if d0.iter().any(|&d| d == u32::MAX) {
        return Err(Error::GraphDomain("diameter requires a connected graph".into()));
    }
    let (a, _) = farthest(&d0);
    let (dist_a, parent_a) = bfs_with_parents(g, a);
    let (b, mut lower) = farthest(&dist_a);

    // Midpoint of the a-b path found by the double sweep.
    let mut mid = b;
    for _ in 0..(dist_a[b as usize] / 2) {
        mid = parent_a[mid as usize];
    }
    let dist_mid = bfs_distances(g, mid);
    let top = *dist_mid.iter().max().expect("nonempty");
    let mut by_level: Vec<Vec<u32>> = vec![Vec::new(); top as usize + 1];
    for (v, &d) in dist_mid.iter().enumerate() {
        by_level[d as usize].push(v as u32);
    }
    // Any pair of vertices at levels <= i is within distance 2i of each
    // other through the midpoint, so once lower >= 2i the scan is complete.
    let mut level = top;
    while level > 0 && 2 * level > lower {
        for &v in &by_level[level as usize] {
            let ecc = *bfs_distances(g, v).iter().max().expect("nonempty");
            lower = lower.max(ecc);
        }
        level -= 1;
    }
    Ok(lower)
}

/// Connected components as sorted vertex lists, largest first.
pub fn components(g: &Graph) -> Vec<Vec<u32>> {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n as u32 {
        if seen[s as usize] {
            continue;
        }
        let mut comp = vec![s];
        seen[s as usize] = true;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &w in g.neighbors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort_by(|x, y| y.len().cmp(&x.len()));
    out
}

/// Split a (possibly disconnected) graph into its largest component and the
/// remaining fragment components.
///
/// Components are ordered by size descending; among equal-size candidates for
/// the largest, the tie is broken by canonical code when one is computable,
/// falling back to the component containing the smallest vertex index.
/// Annotations are dropped in all returned graphs.
pub fn largest_component_split(g: &Graph) -> (Graph, Vec<Graph>) {
    let comps = components(g);
    if comps.is_empty() {
        return (Graph::new(0), Vec::new());
    }
    let top_size = comps[0].len();
    let mut leader = 0usize;
    if comps.len() > 1 && comps[1].len() == top_size {
        let mut best_code: Option<Vec<u64>> = None;
        for (i, comp) in comps.iter().enumerate() {
            if comp.len() != top_size {
                break;
            }
            let sub = g.induced(comp);
            let code = crate::toolkit::treelike::treelike_code(&sub)
                .or_else(|_| crate::toolkit::canon::canonical_code(&sub));
            if let Ok(code) = code {
                if best_code.as_ref().map_or(true, |b| code < *b) {
                    best_code = Some(code);
                    leader = i;
                }
            }
        }
    }
    let giant = g.induced(&comps[leader]);
    let fragments = comps
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != leader)
        .map(|(_, comp)| g.induced(comp))
        .collect();
    (giant, fragments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_diameter() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        assert_eq!(diameter(&g).unwrap(), 5);
    }

    #[test]
    fn cycle_diameter() {
        let g = Graph::from_edges(7, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 0)]);
        assert_eq!(diameter(&g).unwrap(), 3);
    }

    #[test]
    fn star_diameter() {
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(diameter(&g).unwrap(), 2);
    }

    #[test]
    fn diameter_agrees_with_all_pairs_on_small_graphs() {
        let cases = [
            Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]),
            Graph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5)]),
            Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
        ];
        for g in &cases {
            let brute = (0..g.n() as u32)
                .map(|v| *bfs_distances(g, v).iter().max().unwrap())
                .max()
                .unwrap();
            assert_eq!(diameter(g).unwrap(), brute);
        }
    }

    #[test]
    fn split_finds_giant_and_fragments() {
        let g = Graph::from_edges(
            7,
            &[(0, 1), (1, 2), (2, 3), (4, 5)],
        );
        let (giant, frags) = largest_component_split(&g);
        assert_eq!(giant.n(), 4);
        let mut sizes: Vec<usize> = frags.iter().map(Graph::n).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2]);
    }
}
