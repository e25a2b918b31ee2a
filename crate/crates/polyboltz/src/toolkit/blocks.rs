//! Biconnected components, cut vertices and the block-cut tree.

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Decomposition of a connected graph into biconnected components.
///
/// Blocks are maximal 2-connected subgraphs or bridges; an isolated vertex
/// yields no block. The block-cut tree has one node per block and one per cut
/// vertex, with an edge whenever a cut vertex belongs to a block.
#[derive(Debug, Clone)]
pub struct BlockCutTree {
    /// Vertex sets of the blocks, each sorted ascending.
    pub blocks: Vec<Vec<u32>>,
    /// Edge sets of the blocks.
    pub block_edges: Vec<Vec<(u32, u32)>>,
    /// Cut vertices, sorted ascending.
    pub cutvertices: Vec<u32>,
    /// `is_cut[v]` for every vertex.
    pub is_cut: Vec<bool>,
    /// Indices into `blocks` for every vertex (one entry unless a cut vertex).
    pub blocks_of_vertex: Vec<Vec<usize>>,
}

impl BlockCutTree {
    /// Number of blocks.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }
}

/// Compute the block-cut tree of a connected graph with at least one vertex.
pub fn block_cut_tree(g: &Graph) -> Result<BlockCutTree> {
    let n = g.n();
    if n == 0 {
        return Err(Error::GraphDomain("empty graph has no block-cut tree".into()));
    }
    let mut disc = vec![u32::MAX; n];
    let mut low = vec![0u32; n];
    let mut parent = vec![u32::MAX; n];
    let mut is_cut = vec![false; n];
    let mut edge_stack: Vec<(u32, u32)> = Vec::new();
    let mut blocks_edges: Vec<Vec<(u32, u32)>> = Vec::new();

    // Iterative depth-first search; frames hold (vertex, next neighbor index).
    let root = 0u32;
    let mut frames: Vec<(u32, usize)> = vec![(root, 0)];
    disc[0] = 0;
    low[0] = 0;
    let mut timer = 1u32;
    let mut root_children = 0usize;

    while let Some(&mut (v, ref mut idx)) = frames.last_mut() {
        let vi = v as usize;
        if *idx < g.degree(v) {
            let w = g.neighbors(v)[*idx];
            *idx += 1;
            let wi = w as usize;
            if disc[wi] == u32::MAX {
                parent[wi] = v;
                disc[wi] = timer;
                low[wi] = timer;
                timer += 1;
                if v == root {
                    root_children += 1;
                }
                edge_stack.push((v, w));
                frames.push((w, 0));
            } else if w != parent[vi] && disc[wi] < disc[vi] {
                edge_stack.push((v, w));
                low[vi] = low[vi].min(disc[wi]);
            }
        } else {
            frames.pop();
            if let Some(&(p, _)) = frames.last() {
                let pi = p as usize;
                low[pi] = low[pi].min(low[vi]);
                if low[vi] >= disc[pi] {
                    if p != root || root_children > 1 {
                        is_cut[pi] = true;
                    }
                    let mut block = Vec::new();
                    while let Some(&(a, b)) = edge_stack.last() {
                        if disc[a as usize] >= disc[vi] || (a == p && b == v) {
                            block.push((a, b));
                            edge_stack.pop();
                            if a == p && b == v {
                                break;
                            }
                        } else {
                            break;
                        }
                    }
                    blocks_edges.push(block);
                }
            }
        }
    }

    if timer as usize != n {
        return Err(Error::GraphDomain(format!(
            "graph is disconnected: reached {timer} of {n} vertices"
        )));
    }
    // The root-child rule above only marks the parent side; mark the root of
    // the search when it heads more than one block.
    if root_children > 1 {
        is_cut[root as usize] = true;
    }

    let mut blocks: Vec<Vec<u32>> = Vec::with_capacity(blocks_edges.len());
    for edges in &blocks_edges {
        let mut verts: Vec<u32> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
        verts.sort_unstable();
        verts.dedup();
        blocks.push(verts);
    }
    let mut blocks_of_vertex = vec![Vec::new(); n];
    for (bi, verts) in blocks.iter().enumerate() {
        for &v in verts {
            blocks_of_vertex[v as usize].push(bi);
        }
    }
    let cutvertices: Vec<u32> = (0..n as u32).filter(|&v| is_cut[v as usize]).collect();
    Ok(BlockCutTree {
        blocks,
        block_edges: blocks_edges,
        cutvertices,
        is_cut,
        blocks_of_vertex,
    })
}
