//! Shared generators and reference implementations for integration tests.
//!
//! The oracles here work on their own expression type and on the raw edge
//! list; they share no code with the library beyond its public entry points.

#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use ring_rpq::engine::{evaluate, EngineConfig, Solution};
use ring_rpq::glushkov::{Nfa, NfaOptions, StateSet, TableLayout};
use ring_rpq::index::Index;
use ring_rpq::syntax::parse_expr;
use std::collections::{BTreeSet, HashMap, VecDeque};

/// Regular expression over predicate indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Re {
    Atom(usize, bool),
    Concat(Box<Re>, Box<Re>),
    Alt(Box<Re>, Box<Re>),
    Star(Box<Re>),
    Plus(Box<Re>),
    Opt(Box<Re>),
}

impl Re {
    pub fn literals(&self) -> usize {
        match self {
            Re::Atom(..) => 1,
            Re::Concat(a, b) | Re::Alt(a, b) => a.literals() + b.literals(),
            Re::Star(a) | Re::Plus(a) | Re::Opt(a) => a.literals(),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Re::Alt(..) => 0,
            Re::Concat(..) => 1,
            Re::Atom(_, true) => 2,
            _ => 3,
        }
    }

    /// Query syntax, parenthesized only where precedence requires it.
    pub fn text(&self) -> String {
        fn wrap(e: &Re, min: u8) -> String {
            if e.prec() < min {
                format!("({})", e.text())
            } else {
                e.text()
            }
        }
        match self {
            Re::Atom(p, false) => format!("<p{p}>"),
            Re::Atom(p, true) => format!("^<p{p}>"),
            Re::Concat(a, b) => format!("{}/{}", wrap(a, 1), wrap(b, 2)),
            Re::Alt(a, b) => format!("{}|{}", wrap(a, 0), wrap(b, 1)),
            Re::Star(a) => format!("{}*", wrap(a, 3)),
            Re::Plus(a) => format!("{}+", wrap(a, 3)),
            Re::Opt(a) => format!("{}?", wrap(a, 3)),
        }
    }

    /// Literals in textual order as `(predicate, inverted)`.
    pub fn atoms(&self, out: &mut Vec<(usize, bool)>) {
        match self {
            Re::Atom(p, i) => out.push((*p, *i)),
            Re::Concat(a, b) | Re::Alt(a, b) => {
                a.atoms(out);
                b.atoms(out);
            }
            Re::Star(a) | Re::Plus(a) | Re::Opt(a) => a.atoms(out),
        }
    }
}

/// Random expression with exactly `m` literals over predicates `0..preds`.
pub fn random_re<R: Rng>(rng: &mut R, m: usize, preds: usize) -> Re {
    let base = if m == 1 {
        Re::Atom(rng.gen_range(0..preds), rng.gen_bool(0.3))
    } else {
        let k = rng.gen_range(1..m);
        let a = Box::new(random_re(rng, k, preds));
        let b = Box::new(random_re(rng, m - k, preds));
        if rng.gen_bool(0.6) {
            Re::Concat(a, b)
        } else {
            Re::Alt(a, b)
        }
    };
    match rng.gen_range(0..10) {
        0 | 1 => Re::Star(Box::new(base)),
        2 => Re::Plus(Box::new(base)),
        3 => Re::Opt(Box::new(base)),
        _ => base,
    }
}

/// Proptest strategy for expressions with at most `max_m` literals.
pub fn re_strategy(preds: usize, max_m: usize) -> impl Strategy<Value = Re> {
    let leaf = (0..preds, any::<bool>()).prop_map(|(p, i)| Re::Atom(p, i));
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Re::Concat(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Re::Alt(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Re::Star(Box::new(a))),
            inner.clone().prop_map(|a| Re::Plus(Box::new(a))),
            inner.prop_map(|a| Re::Opt(Box::new(a))),
        ]
    })
    .prop_filter("too many literals", move |e| e.literals() <= max_m)
}

/// A word in the language of `e` (label = `(predicate, inverted)`).
pub fn sample_word<R: Rng>(rng: &mut R, e: &Re, out: &mut Vec<(usize, bool)>) {
    match e {
        Re::Atom(p, i) => out.push((*p, *i)),
        Re::Concat(a, b) => {
            sample_word(rng, a, out);
            sample_word(rng, b, out);
        }
        Re::Alt(a, b) => {
            let pick = if rng.gen_bool(0.5) { a } else { b };
            sample_word(rng, pick, out);
        }
        Re::Star(a) | Re::Plus(a) | Re::Opt(a) => {
            let (lo, hi) = match e {
                Re::Star(_) => (0, 3),
                Re::Plus(_) => (1, 3),
                _ => (0, 1),
            };
            for _ in 0..rng.gen_range(lo..=hi) {
                sample_word(rng, a, out);
            }
        }
    }
}

/// Explicit Glushkov automaton: positions `1..=m`, state 0 is initial.
pub struct Positions {
    pub m: usize,
    pub labels: Vec<(usize, bool)>,
    pub nullable: bool,
    pub first: BTreeSet<usize>,
    pub last: BTreeSet<usize>,
    pub follow: Vec<BTreeSet<usize>>,
}

impl Positions {
    pub fn new(e: &Re) -> Positions {
        let mut labels = vec![(usize::MAX, false)];
        e.atoms(&mut labels);
        let m = labels.len() - 1;
        let mut follow = vec![BTreeSet::new(); m + 1];
        let mut next = 1;
        let (nullable, first, last) = Self::walk(e, &mut next, &mut follow);
        Positions {
            m,
            labels,
            nullable,
            first,
            last,
            follow,
        }
    }

    fn walk(
        e: &Re,
        next: &mut usize,
        follow: &mut [BTreeSet<usize>],
    ) -> (bool, BTreeSet<usize>, BTreeSet<usize>) {
        match e {
            Re::Atom(..) => {
                let i = *next;
                *next += 1;
                (false, [i].into(), [i].into())
            }
            Re::Concat(a, b) => {
                let (na, fa, la) = Self::walk(a, next, follow);
                let (nb, fb, lb) = Self::walk(b, next, follow);
                for &i in &la {
                    follow[i].extend(fb.iter().copied());
                }
                let first = if na {
                    fa.union(&fb).copied().collect()
                } else {
                    fa
                };
                let last = if nb {
                    la.union(&lb).copied().collect()
                } else {
                    lb
                };
                (na && nb, first, last)
            }
            Re::Alt(a, b) => {
                let (na, fa, la) = Self::walk(a, next, follow);
                let (nb, fb, lb) = Self::walk(b, next, follow);
                (
                    na || nb,
                    fa.union(&fb).copied().collect(),
                    la.union(&lb).copied().collect(),
                )
            }
            Re::Star(a) | Re::Plus(a) => {
                let (n, f, l) = Self::walk(a, next, follow);
                for &i in &l {
                    follow[i].extend(f.iter().copied());
                }
                (n || matches!(e, Re::Star(_)), f, l)
            }
            Re::Opt(a) => {
                let (_, f, l) = Self::walk(a, next, follow);
                (true, f, l)
            }
        }
    }

    fn succ(&self, i: usize) -> &BTreeSet<usize> {
        if i == 0 {
            &self.first
        } else {
            &self.follow[i]
        }
    }

    pub fn finals(&self) -> BTreeSet<usize> {
        let mut f = self.last.clone();
        if self.nullable {
            f.insert(0);
        }
        f
    }

    pub fn step(&self, s: &BTreeSet<usize>, a: (usize, bool)) -> BTreeSet<usize> {
        s.iter()
            .flat_map(|&i| self.succ(i).iter().copied())
            .filter(|&j| self.labels[j] == a)
            .collect()
    }

    pub fn step_back(&self, s: &BTreeSet<usize>, a: (usize, bool)) -> BTreeSet<usize> {
        (0..=self.m)
            .filter(|&i| {
                self.succ(i)
                    .iter()
                    .any(|j| s.contains(j) && self.labels[*j] == a)
            })
            .collect()
    }

    pub fn accepts(&self, word: &[(usize, bool)]) -> bool {
        let mut s: BTreeSet<usize> = [0].into();
        for &a in word {
            s = self.step(&s, a);
        }
        s.iter().any(|i| self.finals().contains(i))
    }
}

/// Thompson automaton with epsilon moves.
struct Thompson {
    eps: Vec<Vec<usize>>,
    moves: Vec<Vec<((usize, bool), usize)>>,
}

impl Thompson {
    fn new(e: &Re) -> (Thompson, usize, usize) {
        let mut t = Thompson {
            eps: Vec::new(),
            moves: Vec::new(),
        };
        let (s, f) = t.build(e);
        (t, s, f)
    }

    fn state(&mut self) -> usize {
        self.eps.push(Vec::new());
        self.moves.push(Vec::new());
        self.eps.len() - 1
    }

    fn build(&mut self, e: &Re) -> (usize, usize) {
        let (s, f) = (self.state(), self.state());
        match e {
            Re::Atom(p, i) => self.moves[s].push(((*p, *i), f)),
            Re::Concat(a, b) => {
                let (sa, fa) = self.build(a);
                let (sb, fb) = self.build(b);
                self.eps[s].push(sa);
                self.eps[fa].push(sb);
                self.eps[fb].push(f);
            }
            Re::Alt(a, b) => {
                for x in [a, b] {
                    let (sx, fx) = self.build(x);
                    self.eps[s].push(sx);
                    self.eps[fx].push(f);
                }
            }
            Re::Star(a) | Re::Plus(a) | Re::Opt(a) => {
                let (sa, fa) = self.build(a);
                self.eps[s].push(sa);
                self.eps[fa].push(f);
                if !matches!(e, Re::Plus(_)) {
                    self.eps[s].push(f);
                }
                if !matches!(e, Re::Opt(_)) {
                    self.eps[fa].push(sa);
                }
            }
        }
        (s, f)
    }
}

/// Labeled multigraph on nodes `0..nodes` with edges `(s, p, o)`.
#[derive(Debug, Clone)]
pub struct RandGraph {
    pub nodes: usize,
    pub preds: usize,
    pub edges: Vec<(usize, usize, usize)>,
}

impl RandGraph {
    pub fn random<R: Rng>(
        rng: &mut R,
        max_nodes: usize,
        max_preds: usize,
        max_edges: usize,
    ) -> RandGraph {
        let nodes = rng.gen_range(1..=max_nodes);
        let preds = rng.gen_range(1..=max_preds);
        let k = rng.gen_range(1..=max_edges);
        let edges = (0..k)
            .map(|_| {
                (
                    rng.gen_range(0..nodes),
                    rng.gen_range(0..preds),
                    rng.gen_range(0..nodes),
                )
            })
            .collect();
        RandGraph {
            nodes,
            preds,
            edges,
        }
    }

    pub fn tsv(&self) -> String {
        self.edges
            .iter()
            .map(|(s, p, o)| format!("n{s}\tp{p}\tn{o}\n"))
            .collect()
    }

    /// Nodes incident to some edge.
    pub fn occurring(&self) -> BTreeSet<usize> {
        self.edges.iter().flat_map(|&(s, _, o)| [s, o]).collect()
    }

    pub fn index(&self) -> Index {
        Index::build(ring_rpq::dictionary::ingest(&self.tsv()).unwrap()).unwrap()
    }

    /// Nodes reachable from `start` along a path spelling a word of `e`.
    pub fn reach(&self, e: &Re, start: usize) -> BTreeSet<usize> {
        let (t, s0, f) = Thompson::new(e);
        let mut adj: HashMap<(usize, (usize, bool)), Vec<usize>> = HashMap::new();
        for &(s, p, o) in &self.edges {
            adj.entry((s, (p, false))).or_default().push(o);
            adj.entry((o, (p, true))).or_default().push(s);
        }
        let mut seen = vec![false; self.nodes * t.eps.len()];
        let mut queue = VecDeque::from([(start, s0)]);
        seen[start * t.eps.len() + s0] = true;
        let mut out = BTreeSet::new();
        while let Some((v, q)) = queue.pop_front() {
            if q == f {
                out.insert(v);
            }
            let mut next: Vec<(usize, usize)> = t.eps[q].iter().map(|&r| (v, r)).collect();
            for &(label, r) in &t.moves[q] {
                for &w in adj.get(&(v, label)).into_iter().flatten() {
                    next.push((w, r));
                }
            }
            for (w, r) in next {
                let k = w * t.eps.len() + r;
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back((w, r));
                }
            }
        }
        out
    }
}

/// One end of a query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum End {
    Var(&'static str),
    Node(usize),
    /// A constant absent from the graph.
    Missing,
}

impl End {
    fn text(&self) -> String {
        match self {
            End::Var(v) => format!("?{v}"),
            End::Node(i) => format!("<n{i}>"),
            End::Missing => "<nowhere>".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: RandGraph,
    pub subject: End,
    pub re: Re,
    pub object: End,
}

/// Result rows keyed by variable bindings; constants bind to "".
pub type Answer = BTreeSet<(String, String)>;

impl Instance {
    pub fn random<R: Rng>(rng: &mut R, max_m: usize) -> Instance {
        let graph = RandGraph::random(rng, 40, 6, 300);
        let occurring: Vec<usize> = graph.occurring().into_iter().collect();
        let end = |rng: &mut R, var: &'static str| match rng.gen_range(0..10) {
            0..=4 => End::Var(var),
            5 => End::Missing,
            _ => End::Node(occurring[rng.gen_range(0..occurring.len())]),
        };
        let subject = end(rng, "x");
        let mut object = end(rng, "y");
        if subject == End::Var("x") && object == End::Var("y") && rng.gen_bool(0.1) {
            object = End::Var("x");
        }
        // One predicate beyond the graph's, so some literals never match.
        let m = rng.gen_range(1..=max_m);
        let re = random_re(rng, m, graph.preds + 1);
        Instance {
            graph,
            subject,
            re,
            object,
        }
    }

    pub fn query(&self) -> String {
        format!(
            "{} {} {}",
            self.subject.text(),
            self.re.text(),
            self.object.text()
        )
    }

    pub fn shape(&self) -> &'static str {
        match (
            matches!(self.subject, End::Var(_)),
            matches!(self.object, End::Var(_)),
        ) {
            (false, false) => "c-c",
            (false, true) => "c-v",
            (true, false) => "v-c",
            (true, true) => "v-v",
        }
    }

    pub fn oracle(&self) -> Answer {
        let g = &self.graph;
        let name = |i: usize| format!("n{i}");
        let mut out = Answer::new();
        match (&self.subject, &self.object) {
            (End::Missing, _) | (_, End::Missing) => {}
            (End::Node(s), End::Node(o)) => {
                if g.reach(&self.re, *s).contains(o) {
                    out.insert((String::new(), String::new()));
                }
            }
            (End::Node(s), End::Var(_)) => {
                out.extend(
                    g.reach(&self.re, *s)
                        .into_iter()
                        .map(|o| (String::new(), name(o))),
                );
            }
            (End::Var(_), End::Node(o)) => {
                for s in g.occurring() {
                    if g.reach(&self.re, s).contains(o) {
                        out.insert((name(s), String::new()));
                    }
                }
            }
            (End::Var(a), End::Var(b)) => {
                for s in g.occurring() {
                    for o in g.reach(&self.re, s) {
                        if a != b || s == o {
                            out.insert((name(s), name(o)));
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn answer(index: &Index, sols: &[Solution]) -> Answer {
    let name = |x: Option<u32>| {
        x.map_or(String::new(), |id| {
            index.dict.node_name(id).unwrap().to_string()
        })
    };
    sols.iter()
        .map(|s| (name(s.subject), name(s.object)))
        .collect()
}

pub fn run(index: &Index, query: &str, config: &EngineConfig) -> Answer {
    let q = ring_rpq::syntax::parse(query).unwrap_or_else(|e| panic!("{query}: {e}"));
    let (sols, _) = evaluate(index, &q, config).unwrap();
    answer(index, &sols)
}

pub const PREDS: usize = 4;

pub fn label_id((p, inv): (usize, bool)) -> u32 {
    p as u32 + 1 + if inv { PREDS as u32 } else { 0 }
}

pub fn resolve(name: &str, inv: bool) -> Option<u32> {
    let p: usize = name.strip_prefix('p')?.parse().ok()?;
    Some(label_id((p, inv)))
}

pub fn build_nfa(e: &Re, layout: TableLayout) -> Nfa {
    let expr = parse_expr(&e.text()).unwrap();
    Nfa::build(
        &expr,
        resolve,
        NfaOptions {
            layout,
            ..NfaOptions::default()
        },
    )
    .unwrap()
}

pub fn states(nfa: &Nfa, d: &StateSet) -> BTreeSet<usize> {
    nfa.states(d).into_iter().collect()
}

pub fn random_word<R: Rng>(rng: &mut R, e: &Re) -> Vec<(usize, bool)> {
    let mut w = Vec::new();
    if rng.gen_bool(0.7) {
        sample_word(rng, e, &mut w);
        if !w.is_empty() && rng.gen_bool(0.3) {
            let i = rng.gen_range(0..w.len());
            w[i] = (rng.gen_range(0..PREDS), rng.gen_bool(0.5));
        }
    } else {
        for _ in 0..rng.gen_range(0..6) {
            w.push((rng.gen_range(0..PREDS), rng.gen_bool(0.5)));
        }
    }
    w
}

/// Checks forward and backward simulation of `word` step by step against
/// the explicit automaton.
pub fn check_pair(e: &Re, word: &[(usize, bool)], nfa: &Nfa) -> Result<(), String> {
    let fail = |what: &str| Err(format!("{} {what} on {word:?}", e.text()));
    let pos = Positions::new(e);
    let mut expected: BTreeSet<usize> = [0].into();
    let mut d = nfa.initial().clone();
    if states(nfa, &d) != expected {
        return fail("initial");
    }
    for &a in word {
        expected = pos.step(&expected, a);
        d = nfa.step_forward(&d, label_id(a));
        if states(nfa, &d) != expected {
            return fail("forward");
        }
    }
    let accepted = pos.accepts(word);
    if nfa.is_final(&d) != accepted
        || nfa.accepts(&word.iter().map(|&a| label_id(a)).collect::<Vec<_>>()) != accepted
    {
        return fail("acceptance");
    }
    let mut expected = pos.finals();
    let mut d = nfa.finals().clone();
    if states(nfa, &d) != expected {
        return fail("finals");
    }
    for &a in word.iter().rev() {
        expected = pos.step_back(&expected, a);
        d = nfa.step_backward(&d, label_id(a));
        if states(nfa, &d) != expected {
            return fail("backward");
        }
    }
    if nfa.contains_initial(&d) != accepted {
        return fail("backward acceptance");
    }
    Ok(())
}

/// Whether two automata have identical masks and transition tables on `probes`.
pub fn same_tables(a: &Nfa, b: &Nfa, probes: &[StateSet]) -> bool {
    a.initial() == b.initial()
        && a.finals() == b.finals()
        && a.b_entries() == b.b_entries()
        && a.follow_sets() == b.follow_sets()
        && probes
            .iter()
            .all(|d| a.t(d) == b.t(d) && a.t_rev(d) == b.t_rev(d))
}

/// Random state sets over `m + 1` states (`m < 64`).
pub fn random_probes<R: Rng>(rng: &mut R, m: usize, k: usize) -> Vec<StateSet> {
    (0..k)
        .map(|_| StateSet::from_words(&[rng.gen::<u64>() & ((1u64 << (m + 1)) - 1)]))
        .collect()
}
