//! Backward traversal of the product graph over the ring.
//!
//! Each step starts at an `L_p` range aligned to one object (or to all of
//! them) with a set `D` of active states and runs three parts: find the
//! predicates in the range that enter some state of `D` (part 1), find the
//! distinct subjects of those edges that bring new states (part 2), and map
//! each subject back to its `L_p` range as an object (part 3).

use super::scratch::{intersects, subset, Cells, Scratch};
use super::PruneMode;
use crate::glushkov::{Nfa, StateSet};
use crate::ring::{NodeId, PredId, Range, Ring};
use crate::wavelet_tree::{NodeRange, RangeVisitor, Visit, WaveletTree};
use smallvec::SmallVec;
use std::collections::{HashMap, VecDeque};
use std::time::{Duration, Instant};

/// Traversal counters, always collected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub queue_pops: u64,
    /// Internal and leaf nodes of `L_p` descended into by part 1.
    pub part1_nodes: u64,
    /// Part-1 nodes with no reported predicate below them.
    pub part1_wasted: u64,
    /// Internal nodes of `L_s` descended into by part 2.
    pub part2_nodes: u64,
    /// Part-2 internal nodes with no subject leaf reached below them.
    pub part2_wasted: u64,
    /// Subject leaves reached by part 2, pruned or not.
    pub part2_leaves: u64,
    /// Arrivals carrying a state already expanded at that node (audit only).
    pub reexpansions: u64,
    /// Internal `D[v]` cells exceeding the intersection below them (audit only).
    pub visited_violations: u64,
}

/// Deadline check amortized over many cheap ticks.
#[derive(Debug, Clone)]
pub(crate) struct Clock {
    pub(crate) start: Instant,
    deadline: Option<Instant>,
    ticks: u32,
    expired: bool,
}

const TICKS_PER_CHECK: u32 = 1024;

impl Clock {
    pub(crate) fn new(timeout: Option<Duration>) -> Self {
        let start = Instant::now();
        Clock {
            start,
            deadline: timeout.map(|t| start + t),
            ticks: 0,
            expired: false,
        }
    }

    /// Returns `true` once the deadline has passed.
    #[inline]
    pub(crate) fn tick(&mut self) -> bool {
        self.ticks += 1;
        if self.ticks >= TICKS_PER_CHECK {
            self.ticks = 0;
            self.check();
        }
        self.expired
    }

    pub(crate) fn check(&mut self) -> bool {
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                self.expired = true;
            }
        }
        self.expired
    }

    pub(crate) fn expired(&self) -> bool {
        self.expired
    }
}

/// Mutable state shared by all traversals of one query.
pub struct Env<'s> {
    pub(crate) scratch: &'s mut Scratch,
    pub(crate) mode: PruneMode,
    pub(crate) counters: Counters,
    pub(crate) clock: Clock,
    audit: Option<HashMap<NodeId, StateSet>>,
    masks_key: Option<u32>,
}

impl<'s> Env<'s> {
    pub fn new(scratch: &'s mut Scratch, mode: PruneMode) -> Self {
        Env {
            scratch,
            mode,
            counters: Counters::default(),
            clock: Clock::new(None),
            audit: None,
            masks_key: None,
        }
    }

    pub(crate) fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    /// Enables the re-expansion and visited-mask checks.
    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit.then(HashMap::new);
        self
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }
}

/// One automaton driving traversals over one ring.
pub struct Traversal<'r, 'e, 's> {
    pub ring: &'r Ring,
    pub nfa: &'r Nfa,
    pub env: &'e mut Env<'s>,
}

impl<'r, 'e, 's> Traversal<'r, 'e, 's> {
    /// Binds `nfa` and fills the predicate masks `B[v]` of the `L_p` tree.
    pub fn new(ring: &'r Ring, nfa: &'r Nfa, env: &'e mut Env<'s>) -> Self {
        env.masks_key = None;
        Self::bind(ring, nfa, env, 0)
    }

    /// Like [`Traversal::new`], but keeps the masks if `key` was loaded last.
    pub(crate) fn bind(ring: &'r Ring, nfa: &'r Nfa, env: &'e mut Env<'s>, key: u32) -> Self {
        if env.masks_key == Some(key) {
            return Traversal { ring, nfa, env };
        }
        env.masks_key = Some(key);
        let lp = ring.lp();
        let cells = &mut env.scratch.bmask;
        cells.reset(lp.node_id_bound(), nfa.words());
        for (p, set) in nfa.b_entries() {
            if *p >= 1 && *p <= lp.sigma() {
                for v in lp.path_to_root(*p) {
                    cells.or_into(v as usize, set.words());
                }
            }
        }
        Traversal { ring, nfa, env }
    }

    /// Forgets all visited states.
    pub fn reset_visited(&mut self) {
        let w = self.nfa.words();
        self.env
            .scratch
            .ds
            .reset(self.ring.num_nodes() as usize + 1, w);
        self.env.scratch.dv.reset(self.ring.ls().node_id_bound(), w);
        if let Some(a) = self.env.audit.as_mut() {
            a.clear();
        }
    }

    /// Records that `s` has been reached with `d`.
    pub fn mark(&mut self, s: NodeId, d: &StateSet) {
        self.env.scratch.ds.or_into(s as usize, d.words());
        if let Some(a) = self.env.audit.as_mut() {
            a.entry(s)
                .or_insert_with(|| StateSet::empty(self.nfa.num_states()))
                .or_assign(d);
        }
    }

    /// States `s` has been reached with so far.
    pub fn visited(&self, s: NodeId) -> StateSet {
        StateSet::from_words(self.env.scratch.ds.get(s as usize))
    }

    /// Part 1: the predicates in `L_p[range]` entering a state of `d`, each
    /// with the `L_s` range of its edges into the range. `None` on timeout.
    pub fn part1(&mut self, range: Range, d: &StateSet) -> Option<Vec<(PredId, Range)>> {
        if range.is_empty() || d.is_empty() {
            return Some(Vec::new());
        }
        let lp = self.ring.lp();
        let mut v = Part1 {
            bmask: &self.env.scratch.bmask,
            d: d.words(),
            out: Vec::new(),
            starts: Vec::new(),
            visited: 0,
            wasted: 0,
            clock: &mut self.env.clock,
        };
        let finished = lp.traverse(&lp.root_range(range.lo, range.hi), &mut v);
        self.env.counters.part1_nodes += v.visited;
        self.env.counters.part1_wasted += v.wasted;
        if !finished {
            return None;
        }
        let ring = self.ring;
        Some(
            v.out
                .into_iter()
                .map(|(p, lo, hi)| (p, Range::new(ring.c_p(p) + lo, ring.c_p(p) + hi)))
                .collect(),
        )
    }

    /// Part 2: from the `L_s` range of predicate `p`, the distinct subjects
    /// that reach the current node with states they were not yet visited
    /// with. Each arrival carries only its new states; `D[s]` is updated.
    pub fn part2(&mut self, p: PredId, r: Range, d: &StateSet) -> Option<Vec<(NodeId, StateSet)>> {
        let next = self.nfa.step_backward(d, p);
        self.part2_with(r, &next)
    }

    /// Part 2 with the step already applied.
    pub fn part2_with(&mut self, r: Range, next: &StateSet) -> Option<Vec<(NodeId, StateSet)>> {
        if r.is_empty() || next.is_empty() {
            return Some(Vec::new());
        }
        let ls = self.ring.ls();
        let Scratch { ds, dv, .. } = &mut *self.env.scratch;
        let mut v = Part2 {
            ls,
            ds,
            dv,
            d: next,
            mode: self.env.mode,
            arrivals: Vec::new(),
            starts: Vec::new(),
            leaves: 0,
            visited: 0,
            wasted: 0,
            clock: &mut self.env.clock,
        };
        let finished = ls.traverse(&ls.root_range(r.lo, r.hi), &mut v);
        let (arrivals, leaves, visited, wasted) = (v.arrivals, v.leaves, v.visited, v.wasted);
        let c = &mut self.env.counters;
        c.part2_leaves += leaves;
        c.part2_nodes += visited;
        c.part2_wasted += wasted;
        if let Some(audit) = self.env.audit.as_mut() {
            for (s, new) in &arrivals {
                let seen = audit
                    .entry(*s)
                    .or_insert_with(|| StateSet::empty(self.nfa.num_states()));
                if seen.intersects(new) {
                    c.reexpansions += 1;
                }
                seen.or_assign(new);
            }
        }
        finished.then_some(arrivals)
    }

    /// Part 3: the `L_p` range of `s` seen as an object.
    pub fn part3(&self, s: NodeId) -> Range {
        self.ring.object_range(s)
    }

    /// Counts internal `D[v]` cells that hold a state missing from some
    /// subject below them. Only meaningful under [`PruneMode::Sound`].
    pub fn audit_visited_masks(&mut self) -> u64 {
        let ls = self.ring.ls();
        let ds = &self.env.scratch.ds;
        let dv = &self.env.scratch.dv;
        let mut violations = 0;
        let mut stack = vec![ls.root_range(1, ls.len())];
        while let Some(r) = stack.pop() {
            if r.is_leaf() || ls.node_len(&r) == 0 {
                continue;
            }
            if dv.is_set(r.node as usize) {
                let cell = dv.get(r.node as usize);
                let mut ok = true;
                for s in r.sym_lo..=r.sym_hi {
                    if ls.span_count(s, s) > 0 && !subset(cell, ds.get(s as usize)) {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    violations += 1;
                }
            }
            let (a, b) = ls.children(&r);
            stack.push(a);
            stack.push(b);
        }
        self.env.counters.visited_violations += violations;
        violations
    }
}

struct Part1<'a> {
    bmask: &'a Cells,
    d: &'a [u64],
    out: Vec<(PredId, u64, u64)>,
    starts: Vec<usize>,
    visited: u64,
    wasted: u64,
    clock: &'a mut Clock,
}

impl RangeVisitor for Part1<'_> {
    fn enter(&mut self, r: &NodeRange) -> Visit {
        if !intersects(self.d, self.bmask.get(r.node as usize)) {
            return Visit::Prune;
        }
        self.visited += 1;
        if !r.is_leaf() {
            self.starts.push(self.out.len());
        }
        Visit::Descend
    }

    fn leaf(&mut self, r: &NodeRange) -> Visit {
        self.out.push((r.sym_lo, r.lo, r.hi));
        if self.clock.tick() {
            Visit::Stop
        } else {
            Visit::Descend
        }
    }

    fn exit(&mut self, _r: &NodeRange) {
        let start = self.starts.pop().expect("balanced enter/exit");
        if self.out.len() == start {
            self.wasted += 1;
        }
    }
}

struct Part2<'a> {
    ls: &'a WaveletTree,
    ds: &'a mut Cells,
    dv: &'a mut Cells,
    d: &'a StateSet,
    mode: PruneMode,
    arrivals: Vec<(NodeId, StateSet)>,
    starts: Vec<u64>,
    leaves: u64,
    visited: u64,
    wasted: u64,
    clock: &'a mut Clock,
}

impl RangeVisitor for Part2<'_> {
    fn enter(&mut self, r: &NodeRange) -> Visit {
        let d = self.d.words();
        if r.is_leaf() {
            self.leaves += 1;
            return if subset(d, self.ds.get(r.sym_lo as usize)) {
                Visit::Prune
            } else {
                Visit::Descend
            };
        }
        if subset(d, self.dv.get(r.node as usize)) {
            return Visit::Prune;
        }
        self.visited += 1;
        self.starts.push(self.leaves);
        if self.mode == PruneMode::Eager {
            self.dv.or_into(r.node as usize, d);
        }
        Visit::Descend
    }

    fn leaf(&mut self, r: &NodeRange) -> Visit {
        let s = r.sym_lo;
        let new = self
            .d
            .and_not(&StateSet::from_words(self.ds.get(s as usize)));
        self.ds.or_into(s as usize, self.d.words());
        self.arrivals.push((s, new));
        if self.clock.tick() {
            Visit::Stop
        } else {
            Visit::Descend
        }
    }

    fn exit(&mut self, r: &NodeRange) {
        let start = self.starts.pop().expect("balanced enter/exit");
        if self.leaves == start {
            self.wasted += 1;
        }
        if self.mode != PruneMode::Sound {
            return;
        }
        // D[v] may hold any set contained in every D[s] below v; refresh it
        // from the children, ignoring subtrees with no occurrences.
        let mid = r.split();
        let mut acc: Option<SmallVec<[u64; 4]>> = None;
        for (id, lo, hi) in [
            (2 * r.node, r.sym_lo, mid),
            (2 * r.node + 1, mid + 1, r.sym_hi),
        ] {
            if self.ls.span_count(lo, hi) == 0 {
                continue;
            }
            let cell = if lo == hi {
                self.ds.get(lo as usize)
            } else {
                self.dv.get(id as usize)
            };
            acc = Some(match acc {
                None => SmallVec::from_slice(cell),
                Some(a) => a.iter().zip(cell).map(|(x, y)| x & y).collect(),
            });
        }
        if let Some(a) = acc {
            if a.iter().any(|&w| w != 0) {
                self.dv.or_into(r.node as usize, &a);
            }
        }
    }
}

/// Outcome of one [`Search::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Progress,
    Exhausted,
    Interrupted,
}

/// Breadth-first backward search over the product graph.
///
/// Nodes reached with the initial state are appended to `found`; each node
/// appears there at most once per search.
#[derive(Debug, Default)]
pub struct Search {
    queue: VecDeque<(Range, StateSet)>,
}

impl Search {
    /// Starts from object `o` in the final states.
    pub fn from_object(
        t: &mut Traversal<'_, '_, '_>,
        o: NodeId,
        found: &mut Vec<NodeId>,
    ) -> Search {
        t.reset_visited();
        let f = t.nfa.finals().clone();
        t.mark(o, &f);
        if t.nfa.contains_initial(&f) {
            found.push(o);
        }
        let mut s = Search::default();
        let r = t.part3(o);
        if !r.is_empty() {
            s.queue.push_back((r, f));
        }
        s
    }

    /// Starts from every object at once in the final states.
    pub fn from_all(t: &mut Traversal<'_, '_, '_>, found: &mut Vec<NodeId>) -> Search {
        t.reset_visited();
        let f = t.nfa.finals().clone();
        for v in 1..=t.ring.num_nodes() {
            t.mark(v, &f);
        }
        if t.nfa.contains_initial(&f) {
            found.extend(1..=t.ring.num_nodes());
        }
        let mut s = Search::default();
        let r = t.ring.full_range();
        if !r.is_empty() {
            s.queue.push_back((r, f));
        }
        s
    }

    pub fn is_exhausted(&self) -> bool {
        self.queue.is_empty()
    }

    /// Expands one queued node.
    pub fn step(&mut self, t: &mut Traversal<'_, '_, '_>, found: &mut Vec<NodeId>) -> Step {
        let Some((range, d)) = self.queue.pop_front() else {
            return Step::Exhausted;
        };
        t.env.counters.queue_pops += 1;
        if t.env.clock.tick() {
            return Step::Interrupted;
        }
        let Some(preds) = t.part1(range, &d) else {
            return Step::Interrupted;
        };
        for (p, r) in preds {
            let Some(arrivals) = t.part2(p, r, &d) else {
                return Step::Interrupted;
            };
            for (s, new) in arrivals {
                if t.nfa.contains_initial(&new) {
                    found.push(s);
                }
                if !new.is_subset(t.nfa.initial()) {
                    let r = t.part3(s);
                    if !r.is_empty() {
                        self.queue.push_back((r, new));
                    }
                }
            }
        }
        if self.queue.is_empty() {
            Step::Exhausted
        } else {
            Step::Progress
        }
    }

    /// Runs to completion; `false` if interrupted.
    pub fn run(&mut self, t: &mut Traversal<'_, '_, '_>, found: &mut Vec<NodeId>) -> bool {
        loop {
            match self.step(t, found) {
                Step::Progress => {}
                Step::Exhausted => return true,
                Step::Interrupted => return false,
            }
        }
    }
}
