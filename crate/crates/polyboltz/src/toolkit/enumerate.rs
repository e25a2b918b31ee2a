//! Exhaustive enumeration of unlabelled connected graphs on up to 7 vertices,
//! their automorphisms, and their cycle-pointed classes.
//!
//! Representatives are edge bitmasks that are minimal in their relabeling
//! orbit. Results are cached per vertex count, so repeated calls are cheap.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::toolkit::blocks::block_cut_tree;

const MAX_ENUM_N: usize = 7;

fn edge_index_table(n: usize) -> Vec<Vec<usize>> {
    let mut idx = vec![vec![usize::MAX; n]; n];
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            idx[i][j] = k;
            idx[j][i] = k;
            k += 1;
        }
    }
    idx
}

fn all_permutations(n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur: Vec<u8> = (0..n as u8).collect();
    fn rec(k: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for i in k..cur.len() {
            cur.swap(k, i);
            rec(k + 1, cur, out);
            cur.swap(k, i);
        }
    }
    rec(0, &mut cur, &mut out);
    out
}

/// Per-permutation edge-bit remap tables.
fn bit_tables(n: usize) -> (Vec<(u8, u8)>, Vec<Vec<u8>>) {
    let idx = edge_index_table(n);
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i as u8, j as u8));
        }
    }
    let tables = all_permutations(n)
        .into_iter()
        .map(|p| {
            pairs
                .iter()
                .map(|&(i, j)| idx[p[i as usize] as usize][p[j as usize] as usize] as u8)
                .collect()
        })
        .collect();
    (pairs, tables)
}

fn remap_mask(mask: u32, table: &[u8]) -> u32 {
    let mut out = 0u32;
    let mut rest = mask;
    while rest != 0 {
        let k = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        out |= 1 << table[k];
    }
    out
}

fn mask_is_connected(mask: u32, n: usize, pairs: &[(u8, u8)]) -> bool {
    if n == 1 {
        return true;
    }
    let mut adj = [0u8; 8];
    let mut rest = mask;
    while rest != 0 {
        let k = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let (i, j) = pairs[k];
        adj[i as usize] |= 1 << j;
        adj[j as usize] |= 1 << i;
    }
    let full = ((1u32 << n) - 1) as u8;
    let mut visited = 1u8;
    let mut frontier = 1u8;
    while frontier != 0 {
        let mut next = 0u8;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[v];
        }
        frontier = next & !visited;
        visited |= next;
    }
    visited == full
}

fn mask_to_graph(mask: u32, n: usize, pairs: &[(u8, u8)]) -> Graph {
    let mut edges = Vec::new();
    let mut rest = mask;
    while rest != 0 {
        let k = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let (i, j) = pairs[k];
        edges.push((i as u32, j as u32));
    }
    Graph::from_edges(n, &edges)
}

fn graph_to_mask(g: &Graph, idx: &[Vec<usize>]) -> u32 {
    let mut mask = 0u32;
    for (u, v) in g.edges() {
        mask |= 1 << idx[u as usize][v as usize];
    }
    mask
}

fn connected_cache() -> &'static Mutex<HashMap<usize, Arc<Vec<Graph>>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<Graph>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// All unlabelled connected graphs on `n <= 7` vertices, one representative
/// per isomorphism class.
pub fn enumerate_connected(n: usize) -> Result<Arc<Vec<Graph>>> {
    if n == 0 || n > MAX_ENUM_N {
        return Err(Error::GraphDomain(format!(
            "exhaustive enumeration supports 1..={MAX_ENUM_N} vertices, got {n}"
        )));
    }
    if let Some(hit) = connected_cache().lock().expect("cache lock").get(&n) {
        return Ok(hit.clone());
    }
    let (pairs, tables) = bit_tables(n);
    let bits = pairs.len();
    let mut reps = Vec::new();
    'mask: for mask in 0..(1u32 << bits) {
        if !mask_is_connected(mask, n, &pairs) {
            continue;
        }
        // Keep only masks minimal within their relabeling orbit.
        for table in &tables[1..] {
            if remap_mask(mask, table) < mask {
                continue 'mask;
            }
        }
        reps.push(mask_to_graph(mask, n, &pairs));
    }
    let arc = Arc::new(reps);
    connected_cache()
        .lock()
        .expect("cache lock")
        .insert(n, arc.clone());
    Ok(arc)
}

/// All automorphisms of a graph on up to 7 vertices, as permutation vectors.
pub fn automorphisms(g: &Graph) -> Result<Vec<Vec<u8>>> {
    let n = g.n();
    if n > MAX_ENUM_N {
        return Err(Error::GraphDomain(format!(
            "brute-force automorphisms support up to {MAX_ENUM_N} vertices"
        )));
    }
    let (_, tables) = bit_tables(n);
    let idx = edge_index_table(n);
    let mask = graph_to_mask(g, &idx);
    let perms = all_permutations(n);
    Ok(perms
        .into_iter()
        .zip(tables.iter())
        .filter(|(_, table)| remap_mask(mask, table) == mask)
        .map(|(p, _)| p)
        .collect())
}

/// Where a marked automorphism cycle is anchored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PointingCenter {
    /// Length-1 cycle: an ordinary root vertex.
    Root,
    /// Longer cycle fixing a center vertex.
    Vertex(u32),
    /// Longer cycle fixing a center block, given by its vertex set.
    Block(Vec<u32>),
}

/// One isomorphism class of (graph, marked automorphism cycle).
#[derive(Debug, Clone)]
pub struct CyclePointedClass {
    pub graph: Graph,
    /// Representative oriented cycle.
    pub cycle: Vec<u32>,
    pub center: PointingCenter,
}

fn min_rotation(seq: &[u32]) -> Vec<u32> {
    let k = seq.len();
    let start = (0..k)
        .min_by(|&a, &b| {
            (0..k)
                .map(|i| seq[(a + i) % k])
                .cmp((0..k).map(|i| seq[(b + i) % k]))
        })
        .expect("nonempty");
    (0..k).map(|i| seq[(start + i) % k]).collect()
}

fn cycles_of(perm: &[u8]) -> Vec<Vec<u32>> {
    let n = perm.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut at = s;
        while !seen[at] {
            seen[at] = true;
            cyc.push(at as u32);
            at = perm[at] as usize;
        }
        out.push(cyc);
    }
    out
}

/// Middle node of the path between consecutive cycle atoms in the extended
/// block-cut tree: a vertex node (< n) or a block node (n + block index).
fn cycle_center(g: &Graph, cycle: &[u32]) -> Result<PointingCenter> {
    let tree = block_cut_tree(g)?;
    let n = g.n();
    let adj = crate::toolkit::treelike::extended_tree_adjacency(n, &tree);
    let mut center: Option<usize> = None;
    for (i, &v) in cycle.iter().enumerate() {
        let target = cycle[(i + 1) % cycle.len()] as usize;
        // Breadth-first path from v to its successor.
        let mut parent = vec![usize::MAX; adj.len()];
        let mut queue = std::collections::VecDeque::from([v as usize]);
        parent[v as usize] = v as usize;
        while let Some(x) = queue.pop_front() {
            if x == target {
                break;
            }
            for &y in &adj[x] {
                if parent[y] == usize::MAX {
                    parent[y] = x;
                    queue.push_back(y);
                }
            }
        }
        let mut path = vec![target];
        while *path.last().expect("nonempty") != v as usize {
            path.push(parent[*path.last().expect("nonempty")]);
        }
        let mid = path[path.len() / 2];
        match center {
            None => center = Some(mid),
            Some(c) if c == mid => {}
            Some(_) => {
                return Err(Error::GraphDomain(
                    "marked cycle has no consistent center".into(),
                ))
            }
        }
    }
    let mid = center.expect("cycle is nonempty");
    Ok(if mid < n {
        PointingCenter::Vertex(mid as u32)
    } else {
        PointingCenter::Block(tree.blocks[mid - n].clone())
    })
}

/// All cycle-pointed classes on connected graphs with `n` vertices: pairs of
/// a graph and a marked cycle of one of its automorphisms, up to isomorphism.
pub fn enumerate_cycle_pointed(n: usize) -> Result<Vec<CyclePointedClass>> {
    let reps = enumerate_connected(n)?;
    let mut out = Vec::new();
    for g in reps.iter() {
        let auts = automorphisms(g)?;
        let mut seen = std::collections::HashSet::new();
        for sigma in &auts {
            for cyc in cycles_of(sigma) {
                // Canonical key: minimal rotation over the automorphism orbit.
                let key = auts
                    .iter()
                    .map(|gamma| {
                        let image: Vec<u32> =
                            cyc.iter().map(|&v| gamma[v as usize] as u32).collect();
                        min_rotation(&image)
                    })
                    .min()
                    .expect("identity present");
                if !seen.insert(key.clone()) {
                    continue;
                }
                let center = if key.len() == 1 {
                    PointingCenter::Root
                } else {
                    cycle_center(g, &key)?
                };
                out.push(CyclePointedClass {
                    graph: g.clone(),
                    cycle: key,
                    center,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn connected_counts_match_classics() {
        let expect = [1usize, 1, 2, 6, 21, 112];
        for (i, &want) in expect.iter().enumerate() {
            let n = i + 1;
            assert_eq!(enumerate_connected(n).unwrap().len(), want, "n = {n}");
        }
    }

    #[test]
    fn seven_vertex_count_matches() {
        assert_eq!(enumerate_connected(7).unwrap().len(), 853);
    }

    #[test]
    fn automorphism_group_sizes() {
        let path = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(automorphisms(&path).unwrap().len(), 2);
        let triangle = Graph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(automorphisms(&triangle).unwrap().len(), 6);
        let star = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(automorphisms(&star).unwrap().len(), 6);
    }

    #[test]
    fn pointing_identity_on_small_sizes() {
        // Classes of (graph, marked cycle) must total n times the number of
        // connected graphs of size n.
        for n in 1..=5 {
            let total: usize = enumerate_cycle_pointed(n).unwrap().len();
            let plain = enumerate_connected(n).unwrap().len();
            assert_eq!(total, n * plain, "n = {n}");
        }
    }

    #[test]
    fn path_of_three_centers() {
        // P3 has 3 rooted classes less symmetry: classes are root-at-end,
        // root-at-middle, and the end-swap 2-cycle centered at the middle
        // vertex; 3 * 1 = 3 pointings for the path, plus 6 for the triangle.
        let classes = enumerate_cycle_pointed(3).unwrap();
        let path_classes: Vec<_> = classes.iter().filter(|c| c.graph.m() == 2).collect();
        assert_eq!(path_classes.len(), 3);
        let symmetric: Vec<_> = path_classes.iter().filter(|c| c.cycle.len() == 2).collect();
        assert_eq!(symmetric.len(), 1);
        assert!(matches!(symmetric[0].center, PointingCenter::Vertex(_)));
    }

    #[test]
    fn reflected_path_of_four_is_block_centered() {
        let classes = enumerate_cycle_pointed(4).unwrap();
        let p4: Vec<_> = classes
            .iter()
            .filter(|c| c.graph.m() == 3 && c.graph.neighbors(0).len() <= 2 && c.cycle.len() == 2)
            .collect();
        // P4's end swap is centered at the middle edge block; its inner swap
        // belongs to the same automorphism.
        assert!(p4
            .iter()
            .any(|c| matches!(c.center, PointingCenter::Block(_))));
    }
}
