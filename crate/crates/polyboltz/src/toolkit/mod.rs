//! Graph algorithms backing the samplers, statistics and acceptance checks:
//! biconnected decomposition, distances and exact diameter, canonical codes,
//! exhaustive small-graph enumeration, and outerplanarity recognition.

pub mod blocks;
pub mod canon;
pub mod distance;
pub mod enumerate;
pub mod outerplanar;
pub mod treelike;

pub use blocks::{block_cut_tree, BlockCutTree};
pub use canon::{aut_orbit_count, canonical_code, canonical_code_rooted, neighborhood_code};
pub use distance::{bfs_distances, components, diameter, largest_component_split};
pub use enumerate::{
    automorphisms, enumerate_connected, enumerate_cycle_pointed, CyclePointedClass, PointingCenter,
};
pub use outerplanar::{block_hamilton_cycle, is_outerplanar};
pub use treelike::{treelike_code, treelike_code_rooted};
