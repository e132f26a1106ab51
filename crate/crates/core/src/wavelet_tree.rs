//! Balanced wavelet tree over the alphabet `1..=sigma`.
//!
//! A node covering symbols `[a, b]` sends the first `ceil((b - a + 1) / 2)`
//! symbols to its left child. Nodes are numbered in heap order (root `1`,
//! children `2v` and `2v + 1`), so callers can keep per-node annotations in
//! flat arrays. Physically the bitvectors of all internal nodes at one depth
//! are concatenated into a single level bitvector; each node remembers where
//! its slice starts.

use crate::bitvector::{BitVector, BitVectorBuilder};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WaveletError {
    #[error("symbol {symbol} at position {position} outside alphabet 1..={sigma}")]
    SymbolOutOfRange {
        symbol: u32,
        position: usize,
        sigma: u32,
    },
    #[error("alphabet size must be at least 1")]
    EmptyAlphabet,
    #[error("inconsistent wavelet tree levels: {0}")]
    Corrupt(&'static str),
}

/// Which child to descend into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Child {
    Left,
    Right,
}

/// A range of positions inside one node's subsequence.
///
/// Positions are 1-based and inclusive; the range is empty iff `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRange {
    pub node: u32,
    pub depth: u32,
    pub sym_lo: u32,
    pub sym_hi: u32,
    pub lo: u64,
    pub hi: u64,
}

impl NodeRange {
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

    pub fn is_leaf(&self) -> bool {
        self.sym_lo == self.sym_hi
    }

    /// Last symbol that goes to the left child.
    pub fn split(&self) -> u32 {
        self.sym_lo + (self.sym_hi - self.sym_lo + 1).div_ceil(2) - 1
    }
}

/// Decision returned by a [`RangeVisitor`] callback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visit {
    Descend,
    Prune,
    Stop,
}

/// Hooks for [`WaveletTree::traverse`].
///
/// `enter` is called on every node (leaves included) reached with a non-empty
/// range; `leaf` on leaves that `enter` accepted; `exit` on internal nodes
/// after both children were processed.
pub trait RangeVisitor {
    fn enter(&mut self, r: &NodeRange) -> Visit;
    fn leaf(&mut self, r: &NodeRange) -> Visit;
    fn exit(&mut self, _r: &NodeRange) {}
}

#[derive(Clone, PartialEq, Eq)]
pub struct WaveletTree {
    n: u64,
    sigma: u32,
    levels: Vec<BitVector>,
    /// `counts[c]` = number of symbols smaller than `c`, for `c` in `1..=sigma + 1`.
    counts: Vec<u64>,
    node_start: Vec<u64>,
    node_ones: Vec<u64>,
    leaf_ids: Vec<u32>,
}

impl std::fmt::Debug for WaveletTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveletTree")
            .field("n", &self.n)
            .field("sigma", &self.sigma)
            .field("levels", &self.levels.len())
            .finish()
    }
}

/// Height of the balanced tree over `sigma` symbols.
pub fn tree_height(sigma: u32) -> u32 {
    if sigma <= 1 {
        0
    } else {
        32 - (sigma - 1).leading_zeros()
    }
}

impl WaveletTree {
    /// Builds the tree over `seq`, whose symbols must lie in `1..=sigma`.
    pub fn build(seq: &[u32], sigma: u32) -> Result<Self, WaveletError> {
        if sigma == 0 {
            return Err(WaveletError::EmptyAlphabet);
        }
        for (i, &c) in seq.iter().enumerate() {
            if c == 0 || c > sigma {
                return Err(WaveletError::SymbolOutOfRange {
                    symbol: c,
                    position: i + 1,
                    sigma,
                });
            }
        }
        let height = tree_height(sigma) as usize;
        let mut builders: Vec<BitVectorBuilder> = (0..height)
            .map(|_| BitVectorBuilder::with_capacity(seq.len() as u64))
            .collect();
        let mut scratch = seq.to_vec();
        let mut buf = vec![0u32; seq.len()];
        fill_levels(&mut builders, &mut scratch, &mut buf, 0, 1, sigma);
        let levels = builders.into_iter().map(BitVectorBuilder::finish).collect();
        Self::from_levels(seq.len() as u64, sigma, levels)
    }

    /// Reassembles a tree from its level bitvectors, recomputing node offsets
    /// and symbol counts.
    pub fn from_levels(n: u64, sigma: u32, levels: Vec<BitVector>) -> Result<Self, WaveletError> {
        if sigma == 0 {
            return Err(WaveletError::EmptyAlphabet);
        }
        if levels.len() != tree_height(sigma) as usize {
            return Err(WaveletError::Corrupt(
                "level count does not match alphabet size",
            ));
        }
        let id_space = 2usize << tree_height(sigma);
        let mut wt = WaveletTree {
            n,
            sigma,
            levels,
            counts: vec![0; sigma as usize + 2],
            node_start: vec![0; id_space],
            node_ones: vec![0; id_space],
            leaf_ids: vec![0; sigma as usize + 1],
        };
        let mut offsets = vec![0u64; wt.levels.len()];
        let mut histogram = vec![0u64; sigma as usize + 1];
        // Pre-order walk: node lengths flow down via rank, offsets accumulate per depth.
        let mut stack = vec![(1u32, 0u32, 1u32, sigma, n)];
        while let Some((v, d, a, b, len)) = stack.pop() {
            if a == b {
                wt.leaf_ids[a as usize] = v;
                histogram[a as usize] = len;
                continue;
            }
            let d_us = d as usize;
            let start = offsets[d_us];
            if start + len > wt.levels[d_us].len() {
                return Err(WaveletError::Corrupt("node extends past its level"));
            }
            offsets[d_us] += len;
            let ones_before = wt.levels[d_us].rank1(start);
            wt.node_start[v as usize] = start;
            wt.node_ones[v as usize] = ones_before;
            let ones = wt.levels[d_us].rank1(start + len) - ones_before;
            let mid = a + (b - a + 1).div_ceil(2) - 1;
            // Right pushed first so the left subtree is finished first at every depth.
            stack.push((2 * v + 1, d + 1, mid + 1, b, ones));
            stack.push((2 * v, d + 1, a, mid, len - ones));
        }
        for (d, &off) in offsets.iter().enumerate() {
            if off != wt.levels[d].len() {
                return Err(WaveletError::Corrupt(
                    "level length does not match node lengths",
                ));
            }
        }
        for c in 1..=sigma as usize {
            wt.counts[c + 1] = wt.counts[c] + histogram[c];
        }
        Ok(wt)
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sigma(&self) -> u32 {
        self.sigma
    }

    pub fn levels(&self) -> &[BitVector] {
        &self.levels
    }

    /// Size of the heap-order id space (valid ids are below this bound).
    pub fn node_id_bound(&self) -> usize {
        self.node_start.len()
    }

    /// Heap-order id of the leaf for symbol `c`.
    pub fn leaf_id(&self, c: u32) -> u32 {
        self.leaf_ids[c as usize]
    }

    /// Number of internal nodes.
    pub fn internal_nodes(&self) -> u32 {
        self.sigma - 1
    }

    /// Total bits stored across all levels.
    pub fn stored_bits(&self) -> u64 {
        self.levels.iter().map(BitVector::len).sum()
    }

    /// Range over the whole root sequence restricted to `[lo, hi]` (1-based).
    pub fn root_range(&self, lo: u64, hi: u64) -> NodeRange {
        NodeRange {
            node: 1,
            depth: 0,
            sym_lo: 1,
            sym_hi: self.sigma,
            lo,
            hi,
        }
    }

    /// Number of positions of node `r.node`.
    pub fn node_len(&self, r: &NodeRange) -> u64 {
        self.span_count(r.sym_lo, r.sym_hi)
    }

    /// Occurrences of symbols in `sym_lo..=sym_hi`.
    pub fn span_count(&self, sym_lo: u32, sym_hi: u32) -> u64 {
        self.counts[sym_hi as usize + 1] - self.counts[sym_lo as usize]
    }

    #[inline]
    fn rank1_at(&self, node: u32, depth: u32, i: u64) -> u64 {
        let level = &self.levels[depth as usize];
        level.rank1(self.node_start[node as usize] + i) - self.node_ones[node as usize]
    }

    /// Symbol at 1-based position `i`.
    pub fn access(&self, i: u64) -> u32 {
        assert!(
            i >= 1 && i <= self.n,
            "position {i} out of range 1..={}",
            self.n
        );
        let mut r = self.root_range(i, i);
        let mut pos = i;
        while !r.is_leaf() {
            let level = &self.levels[r.depth as usize];
            let bit = level.access(self.node_start[r.node as usize] + pos - 1);
            let ones = self.rank1_at(r.node, r.depth, pos);
            let mid = r.split();
            if bit {
                pos = ones;
                r = NodeRange {
                    node: 2 * r.node + 1,
                    depth: r.depth + 1,
                    sym_lo: mid + 1,
                    ..r
                };
            } else {
                pos -= ones;
                r = NodeRange {
                    node: 2 * r.node,
                    depth: r.depth + 1,
                    sym_hi: mid,
                    ..r
                };
            }
        }
        r.sym_lo
    }

    /// Occurrences of `c` among the first `i` positions.
    pub fn rank(&self, c: u32, i: u64) -> u64 {
        assert!(
            c >= 1 && c <= self.sigma,
            "symbol {c} out of range 1..={}",
            self.sigma
        );
        assert!(i <= self.n, "prefix {i} exceeds length {}", self.n);
        let mut r = self.root_range(1, i);
        let mut pos = i;
        while !r.is_leaf() && pos > 0 {
            let ones = self.rank1_at(r.node, r.depth, pos);
            let mid = r.split();
            if c > mid {
                pos = ones;
                r = NodeRange {
                    node: 2 * r.node + 1,
                    depth: r.depth + 1,
                    sym_lo: mid + 1,
                    ..r
                };
            } else {
                pos -= ones;
                r = NodeRange {
                    node: 2 * r.node,
                    depth: r.depth + 1,
                    sym_hi: mid,
                    ..r
                };
            }
        }
        pos
    }

    /// Projects a node range into one of its children.
    #[inline]
    pub fn extend_range(&self, r: &NodeRange, child: Child) -> NodeRange {
        debug_assert!(!r.is_leaf());
        let mid = r.split();
        let (lo, hi) = if r.is_empty() {
            (1, 0)
        } else {
            let ones_before = self.rank1_at(r.node, r.depth, r.lo - 1);
            let ones_upto = self.rank1_at(r.node, r.depth, r.hi);
            match child {
                Child::Left => ((r.lo - 1 - ones_before) + 1, r.hi - ones_upto),
                Child::Right => (ones_before + 1, ones_upto),
            }
        };
        match child {
            Child::Left => NodeRange {
                node: 2 * r.node,
                depth: r.depth + 1,
                sym_lo: r.sym_lo,
                sym_hi: mid,
                lo,
                hi,
            },
            Child::Right => NodeRange {
                node: 2 * r.node + 1,
                depth: r.depth + 1,
                sym_lo: mid + 1,
                sym_hi: r.sym_hi,
                lo,
                hi,
            },
        }
    }

    /// Both children of `r`, computing each rank only once.
    #[inline]
    pub fn children(&self, r: &NodeRange) -> (NodeRange, NodeRange) {
        let mid = r.split();
        let (ones_before, ones_upto) = if r.is_empty() {
            (0, 0)
        } else {
            (
                self.rank1_at(r.node, r.depth, r.lo - 1),
                self.rank1_at(r.node, r.depth, r.hi),
            )
        };
        let (llo, lhi, rlo, rhi) = if r.is_empty() {
            (1, 0, 1, 0)
        } else {
            (
                r.lo - ones_before,
                r.hi - ones_upto,
                ones_before + 1,
                ones_upto,
            )
        };
        (
            NodeRange {
                node: 2 * r.node,
                depth: r.depth + 1,
                sym_lo: r.sym_lo,
                sym_hi: mid,
                lo: llo,
                hi: lhi,
            },
            NodeRange {
                node: 2 * r.node + 1,
                depth: r.depth + 1,
                sym_lo: mid + 1,
                sym_hi: r.sym_hi,
                lo: rlo,
                hi: rhi,
            },
        )
    }

    /// Depth-first, left-to-right traversal of the nodes reachable from `r`
    /// with non-empty ranges, steered by `visitor`. Returns `false` if the
    /// visitor stopped the traversal.
    pub fn traverse<V: RangeVisitor>(&self, r: &NodeRange, visitor: &mut V) -> bool {
        if r.is_empty() {
            return true;
        }
        match visitor.enter(r) {
            Visit::Prune => return true,
            Visit::Stop => return false,
            Visit::Descend => {}
        }
        if r.is_leaf() {
            return visitor.leaf(r) != Visit::Stop;
        }
        let (left, right) = self.children(r);
        if !self.traverse(&left, visitor) || !self.traverse(&right, visitor) {
            return false;
        }
        visitor.exit(r);
        true
    }

    /// Distinct symbols in the root range `[lo, hi]` whose subtree passes
    /// `keep`, each with its leaf-local range, in increasing symbol order.
    ///
    /// `keep` must be monotone: if it holds for a child it holds for the parent.
    pub fn pruned_distinct<F>(&self, lo: u64, hi: u64, keep: F) -> Vec<(u32, u64, u64)>
    where
        F: FnMut(u32) -> bool,
    {
        struct Collect<F> {
            keep: F,
            out: Vec<(u32, u64, u64)>,
        }
        impl<F: FnMut(u32) -> bool> RangeVisitor for Collect<F> {
            fn enter(&mut self, r: &NodeRange) -> Visit {
                if (self.keep)(r.node) {
                    Visit::Descend
                } else {
                    Visit::Prune
                }
            }
            fn leaf(&mut self, r: &NodeRange) -> Visit {
                self.out.push((r.sym_lo, r.lo, r.hi));
                Visit::Descend
            }
        }
        let mut v = Collect {
            keep,
            out: Vec::new(),
        };
        self.traverse(&self.root_range(lo, hi), &mut v);
        v.out
    }

    /// Distinct symbols occurring in both root ranges.
    pub fn range_intersect(&self, a: (u64, u64), b: (u64, u64)) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![(self.root_range(a.0, a.1), self.root_range(b.0, b.1))];
        while let Some((x, y)) = stack.pop() {
            if x.is_empty() || y.is_empty() {
                continue;
            }
            if x.is_leaf() {
                out.push(x.sym_lo);
                continue;
            }
            let (xl, xr) = self.children(&x);
            let (yl, yr) = self.children(&y);
            stack.push((xr, yr));
            stack.push((xl, yl));
        }
        out
    }

    /// Number of symbols smaller than `c` in the whole sequence.
    pub fn leaf_prefix_count(&self, c: u32) -> u64 {
        assert!(c >= 1 && c <= self.sigma + 1);
        self.counts[c as usize]
    }

    /// Ancestors of the leaf for `c`, from the leaf up to the root.
    pub fn path_to_root(&self, c: u32) -> impl Iterator<Item = u32> {
        let mut v = self.leaf_id(c);
        std::iter::from_fn(move || {
            if v == 0 {
                None
            } else {
                let cur = v;
                v /= 2;
                Some(cur)
            }
        })
    }
}

fn fill_levels(
    builders: &mut [BitVectorBuilder],
    seq: &mut [u32],
    buf: &mut [u32],
    depth: usize,
    a: u32,
    b: u32,
) {
    if a == b {
        return;
    }
    let mid = a + (b - a + 1).div_ceil(2) - 1;
    let builder = &mut builders[depth];
    let mut left = 0;
    for &c in seq.iter() {
        let right = c > mid;
        builder.push(right);
        if !right {
            buf[left] = c;
            left += 1;
        }
    }
    let mut k = left;
    for &c in seq.iter() {
        if c > mid {
            buf[k] = c;
            k += 1;
        }
    }
    seq.copy_from_slice(&buf[..seq.len()]);
    let (ls, rs) = seq.split_at_mut(left);
    let (lb, rb) = buf[..k].split_at_mut(left);
    fill_levels(builders, ls, lb, depth + 1, a, mid);
    fill_levels(builders, rs, rb, depth + 1, mid + 1, b);
}
