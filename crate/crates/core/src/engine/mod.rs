//! Regular path query evaluation over the ring.
//!
//! Queries are answered by backward traversals of the product graph of the
//! ring and the query's Glushkov automaton (see [`traversal`]). Constant
//! objects start a traversal directly; constant subjects reverse the query;
//! variable-to-variable queries first find the useful nodes at one end from
//! the full range and then run one traversal per such node.
//!
//! Results are produced lazily by an [`Evaluation`] iterator under set
//! semantics, with a result limit and a timeout.

pub mod scratch;
mod special;
pub mod traversal;


pub use scratch::Scratch;
pub use traversal::{Counters, Env, Search, Step, Traversal};

use crate::glushkov::{Nfa, NfaError, NfaOptions};
use crate::index::Index;
use crate::ring::{NodeId, PredId, Ring};
use crate::syntax::{reverse_expr, Expr, Query, Term};
use special::{Flow, Special};
use std::collections::{HashSet, VecDeque};
use std::time::Duration;
use thiserror::Error;
use traversal::Clock;

/// How part 2 maintains the visited masks `D[v]` of internal `L_s` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PruneMode {
    /// `D[v]` is kept below the intersection of the `D[s]` under `v`.
    #[default]
    Sound,
    /// `D[v] |= D` whenever the traversal descends through `v`.
    Eager,
}

/// Which end of a variable-to-variable query is enumerated first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VvStart {
    /// Start at the end whose labels are rarer.
    #[default]
    Auto,
    Subjects,
    Objects,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub timeout: Option<Duration>,
    pub limit: u64,
    pub prune: PruneMode,
    pub vv_start: VvStart,
    /// Use the fixed-length handlers for `?x p ?y`, `?x p|q ?y`, `?x p/q ?y`.
    pub special: bool,
    pub nfa: NfaOptions,
    /// Check the no-re-expansion and visited-mask invariants while running.
    pub audit: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            timeout: Some(Duration::from_secs(60)),
            limit: 1_000_000,
            prune: PruneMode::Sound,
            vv_start: VvStart::Auto,
            special: true,
            nfa: NfaOptions::default(),
            audit: false,
        }
    }
}

/// Bindings of the query's variables; constants are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Solution {
    pub subject: Option<NodeId>,
    pub object: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Truncated,
    Timeout,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Truncated => "truncated",
            Status::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Report {
    pub status: Status,
    pub solutions: u64,
    pub elapsed: Duration,
    pub counters: Counters,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error(transparent)]
    Nfa(#[from] NfaError),
}

/// What a node found by a single traversal stands for.
#[derive(Debug, Clone, Copy)]
enum Role {
    Subject,
    Object,
    /// Constant-to-constant: success once this node is found.
    Target(NodeId),
}

struct VarVar {
    first: Nfa,
    second: Nfa,
    phase1: Option<Search>,
    starts: Vec<NodeId>,
    next: usize,
    current: Option<(NodeId, Search)>,
    /// Whether phase 1 finds subjects (and phase 2 their objects).
    subjects_first: bool,
}

enum Plan {
    Done,
    Single {
        nfa: Nfa,
        search: Search,
        role: Role,
    },
    VarVar(Box<VarVar>),
    Special(Special),
}

/// Deduplicating, limited output buffer.
struct Sink {
    out: VecDeque<Solution>,
    seen: HashSet<u64>,
    emitted: u64,
    limit: u64,
    truncated: bool,
    same_var: bool,
}

impl Sink {
    /// Returns `false` once no further solutions are wanted.
    fn push(&mut self, sol: Solution) -> bool {
        if self.same_var && sol.subject != sol.object {
            return true;
        }
        let key = (sol.subject.unwrap_or(0) as u64) << 32 | sol.object.unwrap_or(0) as u64;
        if self.seen.contains(&key) {
            return true;
        }
        if self.emitted >= self.limit {
            self.truncated = true;
            return false;
        }
        self.seen.insert(key);
        self.emitted += 1;
        self.out.push_back(sol);
        true
    }
}

/// A running query. Iterate to obtain solutions, then call [`Evaluation::report`].
pub struct Evaluation<'a> {
    ring: &'a Ring,
    index: &'a Index,
    env: Env<'a>,
    plan: Plan,
    sink: Sink,
    found: Vec<NodeId>,
    timed_out: bool,
    elapsed: Option<Duration>,
}

fn resolve_term(index: &Index, t: &Term) -> Option<Option<NodeId>> {
    match t {
        Term::Var(_) => Some(None),
        Term::Const(name) => index.dict.node_id(name).map(Some),
    }
}

fn cardinality(ring: &Ring, labels: &[Option<PredId>]) -> u64 {
    labels
        .iter()
        .map(|p| p.map_or(0, |p| ring.pred_cardinality(p)))
        .sum()
}

impl<'a> Evaluation<'a> {
    pub fn new(
        index: &'a Index,
        query: &Query,
        config: &EngineConfig,
        scratch: &'a mut Scratch,
    ) -> Result<Self, EngineError> {
        let m = query.expr.count_literals();
        if m > config.nfa.max_literals {
            return Err(NfaError::TooManyLiterals {
                m,
                max: config.nfa.max_literals,
            }
            .into());
        }
        let ring = &index.ring;
        let env = Env::new(scratch, config.prune)
            .with_audit(config.audit)
            .with_clock(Clock::new(config.timeout));
        let same_var =
            matches!((&query.subject, &query.object), (Term::Var(a), Term::Var(b)) if a == b);
        let mut ev = Evaluation {
            ring,
            index,
            env,
            plan: Plan::Done,
            sink: Sink {
                out: VecDeque::new(),
                seen: HashSet::new(),
                emitted: 0,
                limit: config.limit,
                truncated: false,
                same_var,
            },
            found: Vec::new(),
            timed_out: false,
            elapsed: None,
        };
        let (Some(s), Some(o)) = (
            resolve_term(index, &query.subject),
            resolve_term(index, &query.object),
        ) else {
            ev.finish();
            return Ok(ev);
        };
        let build = |e: &Expr| Nfa::build(e, |n, inv| index.dict.resolve(n, inv), config.nfa);
        let forward = || build(&query.expr);
        let reversed = || build(&reverse_expr(&query.expr));
        ev.plan = match (s, o) {
            (None, Some(o)) => ev.single(forward()?, o, Role::Subject),
            (Some(s), None) => ev.single(reversed()?, s, Role::Object),
            (Some(s), Some(o)) => {
                let fwd = forward()?;
                if cardinality(ring, &fwd.first_labels()) < cardinality(ring, &fwd.last_labels()) {
                    ev.single(reversed()?, s, Role::Target(o))
                } else {
                    ev.single(fwd, o, Role::Target(s))
                }
            }
            (None, None) => match Special::plan(&query.expr, &index.dict)
                .filter(|_| config.special && !same_var)
            {
                Some(sp) => Plan::Special(sp),
                None => {
                    let fwd = forward()?;
                    let rev = reversed()?;
                    let subjects_first = match config.vv_start {
                        VvStart::Subjects => true,
                        VvStart::Objects => false,
                        VvStart::Auto => {
                            cardinality(ring, &fwd.first_labels())
                                > cardinality(ring, &fwd.last_labels())
                        }
                    };
                    let (first, second) = if subjects_first {
                        (fwd, rev)
                    } else {
                        (rev, fwd)
                    };
                    let search = {
                        let mut t = Traversal::bind(ring, &first, &mut ev.env, 1);
                        Search::from_all(&mut t, &mut ev.found)
                    };
                    let starts = std::mem::take(&mut ev.found);
                    Plan::VarVar(Box::new(VarVar {
                        first,
                        second,
                        phase1: Some(search),
                        starts,
                        next: 0,
                        current: None,
                        subjects_first,
                    }))
                }
            },
        };
        if let Plan::Single { role, .. } = &ev.plan {
            let role = *role;
            ev.deliver(role);
        }
        Ok(ev)
    }

    fn single(&mut self, nfa: Nfa, start: NodeId, role: Role) -> Plan {
        let search = {
            let mut t = Traversal::bind(self.ring, &nfa, &mut self.env, 1);
            Search::from_object(&mut t, start, &mut self.found)
        };
        Plan::Single { nfa, search, role }
    }

    /// Turns nodes found by a single traversal into solutions.
    fn deliver(&mut self, role: Role) {
        for x in self.found.drain(..) {
            let sol = match role {
                Role::Subject => Solution {
                    subject: Some(x),
                    object: None,
                },
                Role::Object => Solution {
                    subject: None,
                    object: Some(x),
                },
                Role::Target(t) if t == x => {
                    self.sink.push(Solution {
                        subject: None,
                        object: None,
                    });
                    self.plan = Plan::Done;
                    break;
                }
                Role::Target(_) => continue,
            };
            if !self.sink.push(sol) {
                self.plan = Plan::Done;
                break;
            }
        }
    }

    fn finish(&mut self) {
        self.plan = Plan::Done;
        if self.elapsed.is_none() {
            self.elapsed = Some(self.env.clock.start.elapsed());
        }
    }

    /// Performs one unit of work.
    fn advance(&mut self) {
        if self.env.clock.expired() {
            self.timed_out = true;
            self.finish();
            return;
        }
        let ring = self.ring;
        match &mut self.plan {
            Plan::Done => self.finish(),
            Plan::Single { nfa, search, role } => {
                let role = *role;
                let mut t = Traversal::bind(ring, nfa, &mut self.env, 1);
                let step = search.step(&mut t, &mut self.found);
                self.deliver(role);
                match step {
                    Step::Progress => {}
                    Step::Exhausted => self.finish(),
                    Step::Interrupted => {
                        self.timed_out = true;
                        self.finish();
                    }
                }
            }
            Plan::Special(sp) => {
                let sink = &mut self.sink;
                let flow = sp.step(ring, &self.index.dict, &mut self.env.clock, &mut |s, o| {
                    sink.push(Solution {
                        subject: Some(s),
                        object: Some(o),
                    })
                });
                match flow {
                    Flow::More => {}
                    Flow::Done => self.finish(),
                    Flow::Stop => {
                        self.timed_out = self.env.clock.expired();
                        self.finish();
                    }
                }
            }
            Plan::VarVar(vv) => {
                if let Some(search) = vv.phase1.as_mut() {
                    let mut t = Traversal::bind(ring, &vv.first, &mut self.env, 1);
                    match search.step(&mut t, &mut vv.starts) {
                        Step::Progress => {}
                        Step::Exhausted => vv.phase1 = None,
                        Step::Interrupted => {
                            self.timed_out = true;
                            self.finish();
                        }
                    }
                    return;
                }
                let step = if let Some((_, search)) = vv.current.as_mut() {
                    let mut t = Traversal::bind(ring, &vv.second, &mut self.env, 2);
                    search.step(&mut t, &mut self.found)
                } else if vv.next < vv.starts.len() {
                    let x = vv.starts[vv.next];
                    vv.next += 1;
                    let mut t = Traversal::bind(ring, &vv.second, &mut self.env, 2);
                    let search = Search::from_object(&mut t, x, &mut self.found);
                    let step = if search.is_exhausted() {
                        Step::Exhausted
                    } else {
                        Step::Progress
                    };
                    vv.current = Some((x, search));
                    step
                } else {
                    self.finish();
                    return;
                };
                let x = vv
                    .current
                    .as_ref()
                    .map(|c| c.0)
                    .expect("phase 2 has a current start");
                let subjects_first = vv.subjects_first;
                if step != Step::Progress {
                    vv.current = None;
                }
                for y in self.found.drain(..) {
                    let (s, o) = if subjects_first { (x, y) } else { (y, x) };
                    if !self.sink.push(Solution {
                        subject: Some(s),
                        object: Some(o),
                    }) {
                        self.plan = Plan::Done;
                        break;
                    }
                }
                if step == Step::Interrupted {
                    self.timed_out = true;
                }
                if matches!(self.plan, Plan::Done) || self.timed_out {
                    self.finish();
                }
            }
        }
    }

    /// Status and counters so far; final once the iterator is exhausted.
    pub fn report(&self) -> Report {
        let status = if self.timed_out {
            Status::Timeout
        } else if self.sink.truncated {
            Status::Truncated
        } else {
            Status::Ok
        };
        Report {
            status,
            solutions: self.sink.emitted,
            elapsed: self
                .elapsed
                .unwrap_or_else(|| self.env.clock.start.elapsed()),
            counters: self.env.counters,
        }
    }

    /// Runs the sound-mode visited-mask audit on the scratch state of the
    /// last traversal.
    pub fn audit_visited_masks(&mut self) -> u64 {
        let nfa = match &self.plan {
            Plan::Single { nfa, .. } => nfa,
            Plan::VarVar(vv) => &vv.second,
            _ => return 0,
        };
        let mut t = Traversal {
            ring: self.ring,
            nfa,
            env: &mut self.env,
        };
        t.audit_visited_masks()
    }
}

impl Iterator for Evaluation<'_> {
    type Item = Solution;

    fn next(&mut self) -> Option<Solution> {
        loop {
            if let Some(s) = self.sink.out.pop_front() {
                return Some(s);
            }
            if matches!(self.plan, Plan::Done) {
                self.finish();
                return None;
            }
            self.advance();
        }
    }
}

/// Evaluates `query` to completion.
pub fn evaluate(
    index: &Index,
    query: &Query,
    config: &EngineConfig,
) -> Result<(Vec<Solution>, Report), EngineError> {
    let mut scratch = Scratch::new();
    evaluate_with(index, query, config, &mut scratch)
}

/// Like [`evaluate`], reusing `scratch`.
pub fn evaluate_with(
    index: &Index,
    query: &Query,
    config: &EngineConfig,
    scratch: &mut Scratch,
) -> Result<(Vec<Solution>, Report), EngineError> {
    let mut ev = Evaluation::new(index, query, config, scratch)?;
    let sols: Vec<Solution> = ev.by_ref().collect();
    Ok((sols, ev.report()))
}
