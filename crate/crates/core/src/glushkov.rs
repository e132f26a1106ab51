//! Glushkov automata simulated bit-parallel.
//!
//! An expression with `m` atoms yields `m + 1` states: state 0 is initial and
//! state `i` is entered only by the label of the `i`-th atom. State sets are
//! bit masks with state `i` at bit `m - i`, so the initial state is the highest
//! bit. One forward step is `T[D] & B[p]` and one backward step is
//! `T'[D & B[p]]`, where `T` maps a set to the union of its successors and `T'`
//! to the union of its predecessors.

use crate::ring::PredId;
use crate::syntax::Expr;
use smallvec::{smallvec, SmallVec};
use std::fmt;
use thiserror::Error;

/// Default cap on the number of atoms in an expression.
pub const DEFAULT_MAX_LITERALS: usize = 256;
/// Largest automaton stored in one unsplit table.
pub const MONOLITHIC_MAX_STATES: usize = 16;
/// Subtable width used when the table is split.
pub const DEFAULT_SPLIT_BITS: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NfaError {
    #[error("expression has {m} atoms, more than the limit of {max}")]
    TooManyLiterals { m: usize, max: usize },
    #[error("table chunk width must be in 1..=24, got {0}")]
    BadChunkWidth(usize),
}

/// A set of automaton states.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct StateSet {
    words: SmallVec<[u64; 2]>,
}

impl StateSet {
    pub fn empty(num_states: usize) -> Self {
        StateSet {
            words: smallvec![0; num_states.div_ceil(64).max(1)],
        }
    }

    pub fn from_words(words: &[u64]) -> Self {
        StateSet {
            words: SmallVec::from_slice(words),
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    fn set_bit(&mut self, b: usize) {
        self.words[b / 64] |= 1u64 << (b % 64);
    }

    #[inline]
    fn get_bit(&self, b: usize) -> bool {
        (self.words[b / 64] >> (b % 64)) & 1 == 1
    }

    #[inline]
    pub fn and(&self, other: &StateSet) -> StateSet {
        StateSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    #[inline]
    pub fn and_not(&self, other: &StateSet) -> StateSet {
        StateSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    #[inline]
    pub fn or_assign(&mut self, other: &StateSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    #[inline]
    pub fn intersects(&self, other: &StateSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    /// Whether every state of `self` is in `other`.
    #[inline]
    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    fn bit_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Extracts `len <= 64` bits starting at bit `start`.
    #[inline]
    fn extract(&self, start: usize, len: usize) -> u64 {
        let wi = start / 64;
        let off = start % 64;
        let mut v = self.words[wi] >> off;
        if off + len > 64 && wi + 1 < self.words.len() {
            v |= self.words[wi + 1] << (64 - off);
        }
        if len < 64 {
            v &= (1u64 << len) - 1;
        }
        v
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateSet(")?;
        for (i, w) in self.words.iter().enumerate().rev() {
            if i + 1 < self.words.len() {
                write!(f, "_")?;
            }
            write!(f, "{w:x}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableLayout {
    /// Unsplit when `m + 1 <= 16`, otherwise 12-bit subtables.
    Auto,
    /// Subtables indexed by `d` bits each; `d >= m + 1` means one table.
    Split(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NfaOptions {
    pub layout: TableLayout,
    pub max_literals: usize,
}

impl Default for NfaOptions {
    fn default() -> Self {
        NfaOptions {
            layout: TableLayout::Auto,
            max_literals: DEFAULT_MAX_LITERALS,
        }
    }
}

/// Vertically split lookup table from state sets to state sets.
#[derive(Debug, Clone)]
struct Table {
    chunk_bits: usize,
    words: usize,
    /// Row `x` of chunk `j` starts at `(j << chunk_bits | x) * words`.
    rows: Vec<u64>,
}

impl Table {
    /// `image[b]` is the set contributed by bit `b` of the argument.
    fn build(image: &[StateSet], chunk_bits: usize, words: usize) -> Table {
        let nbits = image.len();
        let chunks = nbits.div_ceil(chunk_bits);
        let width = 1usize << chunk_bits;
        let mut rows = vec![0u64; chunks * width * words];
        for j in 0..chunks {
            let base = j * chunk_bits;
            let len = chunk_bits.min(nbits - base);
            for x in 1..(1usize << len) {
                let low = x.trailing_zeros() as usize;
                let prev = x & (x - 1);
                let dst = (j * width + x) * words;
                let src = (j * width + prev) * words;
                for w in 0..words {
                    rows[dst + w] = rows[src + w] | image[base + low].words[w];
                }
            }
        }
        Table {
            chunk_bits,
            words,
            rows,
        }
    }

    #[inline]
    fn lookup(&self, x: &StateSet, nbits: usize) -> StateSet {
        let mut out = StateSet {
            words: smallvec![0; self.words],
        };
        let width = 1usize << self.chunk_bits;
        let mut j = 0;
        let mut base = 0;
        while base < nbits {
            let len = self.chunk_bits.min(nbits - base);
            let key = x.extract(base, len) as usize;
            if key != 0 {
                let row = &self.rows[(j * width + key) * self.words..][..self.words];
                for (o, r) in out.words.iter_mut().zip(row) {
                    *o |= r;
                }
            }
            base += self.chunk_bits;
            j += 1;
        }
        out
    }

    fn chunks(&self, nbits: usize) -> usize {
        nbits.div_ceil(self.chunk_bits)
    }
}

/// Bit-parallel Glushkov automaton of one expression.
#[derive(Debug, Clone)]
pub struct Nfa {
    m: usize,
    /// Label of each position `1..=m` (index 0 unused); `None` if unresolved.
    labels: Vec<Option<PredId>>,
    /// Sorted by predicate.
    b: Vec<(PredId, StateSet)>,
    forward: Table,
    backward: Table,
    finals: StateSet,
    initial: StateSet,
    empty: StateSet,
    /// Successors of each state, by state number.
    follow: Vec<StateSet>,
}

struct Sets {
    nullable: bool,
    first: StateSet,
    last: StateSet,
}

impl Nfa {
    /// Builds the automaton, resolving each atom to a predicate id.
    pub fn build<R>(expr: &Expr, mut resolve: R, opts: NfaOptions) -> Result<Nfa, NfaError>
    where
        R: FnMut(&str, bool) -> Option<PredId>,
    {
        let m = expr.count_literals();
        if m > opts.max_literals {
            return Err(NfaError::TooManyLiterals {
                m,
                max: opts.max_literals,
            });
        }
        let chunk_bits = match opts.layout {
            TableLayout::Auto if m < MONOLITHIC_MAX_STATES => m + 1,
            TableLayout::Auto => DEFAULT_SPLIT_BITS,
            TableLayout::Split(d) if d == 0 || d > 24 => return Err(NfaError::BadChunkWidth(d)),
            TableLayout::Split(d) => d.min(m + 1),
        };
        let n = m + 1;
        let bit = |state: usize| m - state;
        let labels: Vec<Option<PredId>> = std::iter::once(None)
            .chain(
                expr.atoms()
                    .into_iter()
                    .map(|(name, inv)| resolve(name, inv)),
            )
            .collect();

        let mut follow = vec![StateSet::empty(n); n];
        let mut next = 1;
        let top = Self::positions(expr, m, &mut next, &mut follow);
        follow[0] = top.first.clone();

        let mut finals = top.last;
        if top.nullable {
            finals.set_bit(bit(0));
        }
        let mut initial = StateSet::empty(n);
        initial.set_bit(bit(0));

        let mut b: Vec<(PredId, StateSet)> = Vec::new();
        for (state, label) in labels.iter().enumerate().skip(1) {
            if let Some(p) = *label {
                match b.binary_search_by_key(&p, |e| e.0) {
                    Ok(k) => b[k].1.set_bit(bit(state)),
                    Err(k) => {
                        let mut s = StateSet::empty(n);
                        s.set_bit(bit(state));
                        b.insert(k, (p, s));
                    }
                }
            }
        }

        // Table argument bit b stands for state m - b.
        let fwd_image: Vec<StateSet> = (0..n).map(|bi| follow[m - bi].clone()).collect();
        let mut pred = vec![StateSet::empty(n); n];
        for (q, succ) in follow.iter().enumerate() {
            for tb in succ.bit_positions() {
                pred[m - tb].set_bit(bit(q));
            }
        }
        let bwd_image: Vec<StateSet> = (0..n).map(|bi| pred[m - bi].clone()).collect();
        let words = n.div_ceil(64);
        let forward = Table::build(&fwd_image, chunk_bits, words);
        let backward = Table::build(&bwd_image, chunk_bits, words);
        let empty = StateSet::empty(n);
        Ok(Nfa {
            m,
            labels,
            b,
            forward,
            backward,
            finals,
            initial,
            empty,
            follow,
        })
    }

    fn positions(e: &Expr, m: usize, next: &mut usize, follow: &mut [StateSet]) -> Sets {
        let n = m + 1;
        match e {
            Expr::Epsilon => Sets {
                nullable: true,
                first: StateSet::empty(n),
                last: StateSet::empty(n),
            },
            Expr::Atom { .. } => {
                let mut s = StateSet::empty(n);
                s.set_bit(m - *next);
                *next += 1;
                Sets {
                    nullable: false,
                    first: s.clone(),
                    last: s,
                }
            }
            Expr::Concat(a, b) => {
                let a = Self::positions(a, m, next, follow);
                let b = Self::positions(b, m, next, follow);
                for x in a.last.bit_positions() {
                    follow[m - x].or_assign(&b.first);
                }
                let mut first = a.first;
                if a.nullable {
                    first.or_assign(&b.first);
                }
                let mut last = b.last;
                if b.nullable {
                    last.or_assign(&a.last);
                }
                Sets {
                    nullable: a.nullable && b.nullable,
                    first,
                    last,
                }
            }
            Expr::Alt(a, b) => {
                let mut a = Self::positions(a, m, next, follow);
                let b = Self::positions(b, m, next, follow);
                a.first.or_assign(&b.first);
                a.last.or_assign(&b.last);
                Sets {
                    nullable: a.nullable || b.nullable,
                    first: a.first,
                    last: a.last,
                }
            }
            Expr::Star(a) | Expr::Plus(a) => {
                let s = Self::positions(a, m, next, follow);
                for x in s.last.bit_positions() {
                    follow[m - x].or_assign(&s.first);
                }
                Sets {
                    nullable: s.nullable || matches!(e, Expr::Star(_)),
                    ..s
                }
            }
        }
    }

    /// Number of atoms; the automaton has `m + 1` states.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_states(&self) -> usize {
        self.m + 1
    }

    /// Words per state set.
    pub fn words(&self) -> usize {
        self.initial.words.len()
    }

    /// Number of subtables per lookup table.
    pub fn table_chunks(&self) -> usize {
        self.forward.chunks(self.m + 1)
    }

    pub fn initial(&self) -> &StateSet {
        &self.initial
    }

    pub fn finals(&self) -> &StateSet {
        &self.finals
    }

    pub fn empty_set(&self) -> StateSet {
        self.empty.clone()
    }

    /// Whether the empty path matches.
    pub fn accepts_empty(&self) -> bool {
        self.finals.intersects(&self.initial)
    }

    /// States entered by label `p`; empty if `p` does not occur.
    #[inline]
    pub fn b(&self, p: PredId) -> &StateSet {
        match self.b.binary_search_by_key(&p, |e| e.0) {
            Ok(k) => &self.b[k].1,
            Err(_) => &self.empty,
        }
    }

    /// Predicates occurring in the expression, with their state sets.
    pub fn b_entries(&self) -> &[(PredId, StateSet)] {
        &self.b
    }

    /// Label of state `i` in `1..=m`.
    pub fn label(&self, state: usize) -> Option<PredId> {
        self.labels[state]
    }

    /// Set containing exactly `state`.
    pub fn singleton(&self, state: usize) -> StateSet {
        let mut s = self.empty.clone();
        s.set_bit(self.m - state);
        s
    }

    /// Whether `state` is in `d`.
    pub fn contains(&self, d: &StateSet, state: usize) -> bool {
        d.get_bit(self.m - state)
    }

    /// States of `d` in increasing state order.
    pub fn states(&self, d: &StateSet) -> Vec<usize> {
        let mut v: Vec<usize> = d.bit_positions().map(|b| self.m - b).collect();
        v.reverse();
        v
    }

    /// Successors of the states of `d` by any label.
    #[inline]
    pub fn t(&self, d: &StateSet) -> StateSet {
        self.forward.lookup(d, self.m + 1)
    }

    /// Predecessors of the states of `d` by any label.
    #[inline]
    pub fn t_rev(&self, d: &StateSet) -> StateSet {
        self.backward.lookup(d, self.m + 1)
    }

    #[inline]
    pub fn step_forward(&self, d: &StateSet, p: PredId) -> StateSet {
        self.t(d).and(self.b(p))
    }

    #[inline]
    pub fn step_backward(&self, d: &StateSet, p: PredId) -> StateSet {
        let x = d.and(self.b(p));
        if x.is_empty() {
            return x;
        }
        self.t_rev(&x)
    }

    #[inline]
    pub fn is_final(&self, d: &StateSet) -> bool {
        d.intersects(&self.finals)
    }

    #[inline]
    pub fn contains_initial(&self, d: &StateSet) -> bool {
        d.intersects(&self.initial)
    }

    /// Successor sets of each state, indexed by state.
    pub fn follow_sets(&self) -> &[StateSet] {
        &self.follow
    }

    /// Labels that can be read first on an accepting path.
    pub fn first_labels(&self) -> Vec<Option<PredId>> {
        self.states(&self.follow[0])
            .into_iter()
            .map(|q| self.labels[q])
            .collect()
    }

    /// Labels that can be read last on an accepting path.
    pub fn last_labels(&self) -> Vec<Option<PredId>> {
        self.states(&self.finals)
            .into_iter()
            .filter(|&q| q != 0)
            .map(|q| self.labels[q])
            .collect()
    }

    /// Accepts a word by forward simulation.
    pub fn accepts(&self, word: &[PredId]) -> bool {
        let mut d = self.initial.clone();
        for &p in word {
            d = self.step_forward(&d, p);
        }
        self.is_final(&d)
    }
}
