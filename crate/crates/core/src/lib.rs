//! Regular path queries over a compact ring index of a labeled graph.

pub mod bitvector;
pub mod dictionary;
pub mod engine;
pub mod glushkov;
pub mod index;
pub mod persist;
pub mod ring;
pub mod syntax;
pub mod wavelet_tree;
