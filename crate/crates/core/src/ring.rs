//! The ring: BWT-ordered predicate and subject columns of a completed triple
//! set, each stored as a wavelet tree, plus cumulative object and predicate
//! counts.
//!
//! `L_p` holds the predicates of the triples sorted by `(o, s, p)` and `L_s`
//! the subjects of the triples sorted by `(p, o, s)`. The object column is
//! never stored: its ranges are implied by `C_o`.

use crate::wavelet_tree::{WaveletError, WaveletTree};
use thiserror::Error;

pub type NodeId = u32;
pub type PredId = u32;

/// An edge `s -p-> o` with dense 1-based ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub s: NodeId,
    pub p: PredId,
    pub o: NodeId,
}

impl Triple {
    pub fn new(s: NodeId, p: PredId, o: NodeId) -> Self {
        Triple { s, p, o }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RingError {
    #[error("triple {0:?} has an id outside 1..={1} (nodes) / 1..={2} (predicates)")]
    IdOutOfRange(Triple, u32, u32),
    #[error("duplicate triple {0:?}")]
    Duplicate(Triple),
    #[error("inconsistent ring: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
}

/// Inclusive 1-based range over a BWT column; empty iff `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Range {
    pub lo: u64,
    pub hi: u64,
}

impl Range {
    pub const EMPTY: Range = Range { lo: 1, hi: 0 };

    pub fn new(lo: u64, hi: u64) -> Self {
        Range { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn len(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            self.hi - self.lo + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    n: u64,
    num_nodes: u32,
    num_preds: u32,
    lp: WaveletTree,
    ls: WaveletTree,
    /// `c_o[x]` = triples with object < x, for x in `1..=num_nodes + 1`.
    c_o: Vec<u64>,
    /// `c_p[x]` = triples with predicate < x, for x in `1..=num_preds + 1`.
    c_p: Vec<u64>,
}

impl Ring {
    /// Builds the ring over a duplicate-free triple set.
    ///
    /// `num_preds` counts every predicate id in use, inverses included.
    pub fn build(triples: &[Triple], num_nodes: u32, num_preds: u32) -> Result<Self, RingError> {
        for t in triples {
            if t.s == 0
                || t.o == 0
                || t.p == 0
                || t.s > num_nodes
                || t.o > num_nodes
                || t.p > num_preds
            {
                return Err(RingError::IdOutOfRange(*t, num_nodes, num_preds));
            }
        }
        let mut osp: Vec<Triple> = triples.to_vec();
        osp.sort_unstable_by_key(|t| (t.o, t.s, t.p));
        if let Some(w) = osp.windows(2).find(|w| w[0] == w[1]) {
            return Err(RingError::Duplicate(w[0]));
        }
        let lp_seq: Vec<u32> = osp.iter().map(|t| t.p).collect();
        let mut c_o = vec![0u64; num_nodes as usize + 2];
        for t in &osp {
            c_o[t.o as usize + 1] += 1;
        }
        for x in 1..c_o.len() {
            c_o[x] += c_o[x - 1];
        }
        drop(osp);

        let mut pos: Vec<Triple> = triples.to_vec();
        pos.sort_unstable_by_key(|t| (t.p, t.o, t.s));
        let ls_seq: Vec<u32> = pos.iter().map(|t| t.s).collect();
        drop(pos);

        let lp = WaveletTree::build(&lp_seq, num_preds.max(1))?;
        let ls = WaveletTree::build(&ls_seq, num_nodes.max(1))?;
        let mut c_p = vec![0u64; num_preds as usize + 2];
        for (p, c) in c_p.iter_mut().enumerate().skip(1) {
            *c = lp.leaf_prefix_count(p as u32);
        }
        Ok(Ring {
            n: triples.len() as u64,
            num_nodes,
            num_preds,
            lp,
            ls,
            c_o,
            c_p,
        })
    }

    /// Reassembles a ring from stored parts, checking that they agree.
    pub fn from_parts(
        num_nodes: u32,
        num_preds: u32,
        lp: WaveletTree,
        ls: WaveletTree,
        c_o: Vec<u64>,
    ) -> Result<Self, RingError> {
        let n = lp.len();
        if ls.len() != n {
            return Err(RingError::Corrupt("column lengths differ"));
        }
        if lp.sigma() != num_preds.max(1) || ls.sigma() != num_nodes.max(1) {
            return Err(RingError::Corrupt("alphabet sizes do not match header"));
        }
        if c_o.len() != num_nodes as usize + 2
            || c_o[0] != 0
            || c_o[1] != 0
            || c_o[c_o.len() - 1] != n
        {
            return Err(RingError::Corrupt("object counts malformed"));
        }
        if c_o.windows(2).any(|w| w[0] > w[1]) {
            return Err(RingError::Corrupt("object counts not monotone"));
        }
        let mut c_p = vec![0u64; num_preds as usize + 2];
        for (p, c) in c_p.iter_mut().enumerate().skip(1) {
            *c = lp.leaf_prefix_count(p as u32);
        }
        Ok(Ring {
            n,
            num_nodes,
            num_preds,
            lp,
            ls,
            c_o,
            c_p,
        })
    }

    /// Number of (completed) triples.
    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_nodes(&self) -> u32 {
        self.num_nodes
    }

    pub fn num_preds(&self) -> u32 {
        self.num_preds
    }

    pub fn lp(&self) -> &WaveletTree {
        &self.lp
    }

    pub fn ls(&self) -> &WaveletTree {
        &self.ls
    }

    /// `C_o[x]` for `x` in `1..=|V| + 1`.
    pub fn c_o(&self, x: NodeId) -> u64 {
        self.c_o[x as usize]
    }

    /// `C_p[x]` for `x` in `1..=num_preds + 1`.
    pub fn c_p(&self, x: PredId) -> u64 {
        self.c_p[x as usize]
    }

    pub fn c_o_table(&self) -> &[u64] {
        &self.c_o
    }

    /// LF-step from `L_p` to the same triple's position in `L_s`.
    pub fn lf_p(&self, i: u64) -> u64 {
        assert!(
            i >= 1 && i <= self.n,
            "position {i} out of range 1..={}",
            self.n
        );
        let c = self.lp.access(i);
        self.c_p[c as usize] + self.lp.rank(c, i)
    }

    /// Backward search: from an object range of `L_p` to the `L_s` range of
    /// triples with predicate `p` and object in that range.
    pub fn backward_step(&self, r: Range, p: PredId) -> Range {
        if r.is_empty() || p == 0 || p > self.num_preds {
            return Range::EMPTY;
        }
        let base = self.c_p[p as usize];
        Range::new(
            base + self.lp.rank(p, r.lo - 1) + 1,
            base + self.lp.rank(p, r.hi),
        )
    }

    /// Range of `L_p` holding the triples whose object is `o`.
    pub fn object_range(&self, o: NodeId) -> Range {
        assert!(
            o >= 1 && o <= self.num_nodes,
            "node {o} out of range 1..={}",
            self.num_nodes
        );
        Range::new(self.c_o[o as usize] + 1, self.c_o[o as usize + 1])
    }

    pub fn full_range(&self) -> Range {
        Range::new(1, self.n)
    }

    /// Contiguous block of `L_s` listing the subjects of predicate `p`.
    pub fn subject_range(&self, p: PredId) -> Range {
        assert!(
            p >= 1 && p <= self.num_preds,
            "predicate {p} out of range 1..={}",
            self.num_preds
        );
        Range::new(self.c_p[p as usize] + 1, self.c_p[p as usize + 1])
    }

    /// Number of triples labeled `p`.
    pub fn pred_cardinality(&self, p: PredId) -> u64 {
        if p == 0 || p > self.num_preds {
            0
        } else {
            self.c_p[p as usize + 1] - self.c_p[p as usize]
        }
    }

    /// Distinct subjects in an `L_s` range, with their multiplicity.
    pub fn distinct_subjects(&self, r: Range) -> Vec<(NodeId, u64)> {
        if r.is_empty() {
            return Vec::new();
        }
        self.ls
            .pruned_distinct(r.lo, r.hi, |_| true)
            .into_iter()
            .map(|(s, lo, hi)| (s, hi - lo + 1))
            .collect()
    }

    /// Wavelet-tree payload in bits (both columns).
    pub fn payload_bits(&self) -> u64 {
        self.lp.stored_bits() + self.ls.stored_bits()
    }

    /// Recovers every triple by walking each `L_p` position to its subject.
    pub fn triples(&self) -> Vec<Triple> {
        let mut out = Vec::with_capacity(self.n as usize);
        for o in 1..=self.num_nodes {
            let r = self.object_range(o);
            for i in r.lo..=r.hi {
                if r.is_empty() {
                    break;
                }
                let p = self.lp.access(i);
                let s = self.ls.access(self.lf_p(i));
                out.push(Triple::new(s, p, o));
            }
        }
        out
    }
}
