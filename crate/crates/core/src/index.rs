//! A ring together with the dictionary that names its ids.

use crate::dictionary::{Dictionary, Graph};
use crate::ring::{Ring, RingError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Index {
    pub ring: Ring,
    pub dict: Dictionary,
}

impl Index {
    pub fn build(graph: Graph) -> Result<Index, RingError> {
        let ring = Ring::build(
            &graph.triples,
            graph.dict.num_nodes(),
            graph.dict.num_preds(),
        )?;
        Ok(Index {
            ring,
            dict: graph.dict,
        })
    }
}
