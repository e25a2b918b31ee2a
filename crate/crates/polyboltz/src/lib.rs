//! Polya-Boltzmann sampling laboratory for subcritical unlabelled graph classes.
//!
//! The crate turns the analytic description of a block-stable graph class
//! (unlabelled trees and unlabelled outerplanar graphs are built in) into:
//!
//! - truncated power-series arithmetic over exact rationals or floats
//!   ([`series`]),
//! - cycle-index evaluations and counting series for rooted, cycle-pointed and
//!   unrooted graphs ([`species`]),
//! - numeric constants of the class: singularity, subtree-weight moments and
//!   the distance-scaling constant ([`analytic`]),
//! - exact and approximate random samplers for rooted and unrooted graphs and
//!   for graph multisets ([`sampler`]),
//! - deterministic graph algorithms used by the samplers and experiments:
//!   block structure, distances, canonical codes, small-order enumeration
//!   ([`graph`], [`toolkit`]),
//! - reproducible statistical experiments with JSON reports ([`lab`]).
//!
//! The `polyboltz` binary exposes the experiments on the command line.

#![forbid(unsafe_code)]

pub mod analytic;
pub mod error;
pub mod graph;
pub mod lab;
mod randkit;
pub mod sampler;
pub mod scalar;
pub mod series;
pub mod species;
pub mod toolkit;

pub use error::Error;
pub use graph::Graph;
pub use series::TruncatedSeries;
