//! Variable-to-variable queries of length one or two, answered with backward
//! search alone: `?x p ?y`, `?x p|q|... ?y` and `?x p/q ?y` (atoms possibly
//! inverted).

use super::traversal::Clock;
use crate::dictionary::Dictionary;
use crate::ring::{NodeId, PredId, Ring};
use crate::syntax::Expr;

#[derive(Debug)]
pub(crate) enum Special {
    Atoms {
        preds: Vec<PredId>,
        pi: usize,
        subjects: Vec<NodeId>,
        si: usize,
    },
    Concat {
        p1: PredId,
        p2: PredId,
        mids: Option<Vec<NodeId>>,
        zi: usize,
    },
}

pub(crate) enum Flow {
    More,
    Done,
    Stop,
}

fn alt_atoms<'e>(e: &'e Expr, out: &mut Vec<(&'e str, bool)>) -> bool {
    match e {
        Expr::Atom { name, inverted } => {
            out.push((name, *inverted));
            true
        }
        Expr::Alt(a, b) => alt_atoms(a, out) && alt_atoms(b, out),
        _ => false,
    }
}

impl Special {
    /// The handler for `expr`, if it has one of the supported shapes.
    pub(crate) fn plan(expr: &Expr, dict: &Dictionary) -> Option<Special> {
        let mut atoms = Vec::new();
        if alt_atoms(expr, &mut atoms) {
            let mut preds: Vec<PredId> = atoms
                .into_iter()
                .filter_map(|(n, i)| dict.resolve(n, i))
                .collect();
            preds.sort_unstable();
            preds.dedup();
            return Some(Special::Atoms {
                preds,
                pi: 0,
                subjects: Vec::new(),
                si: 0,
            });
        }
        if let Expr::Concat(a, b) = expr {
            if let (
                Expr::Atom {
                    name: n1,
                    inverted: i1,
                },
                Expr::Atom {
                    name: n2,
                    inverted: i2,
                },
            ) = (&**a, &**b)
            {
                return Some(match (dict.resolve(n1, *i1), dict.resolve(n2, *i2)) {
                    (Some(p1), Some(p2)) => Special::Concat {
                        p1,
                        p2,
                        mids: None,
                        zi: 0,
                    },
                    _ => Special::Atoms {
                        preds: Vec::new(),
                        pi: 0,
                        subjects: Vec::new(),
                        si: 0,
                    },
                });
            }
        }
        None
    }

    /// Handles one subject (or one midpoint), passing pairs to `emit` until it
    /// returns `false`.
    pub(crate) fn step(
        &mut self,
        ring: &Ring,
        dict: &Dictionary,
        clock: &mut Clock,
        emit: &mut dyn FnMut(NodeId, NodeId) -> bool,
    ) -> Flow {
        match self {
            Special::Atoms {
                preds,
                pi,
                subjects,
                si,
            } => {
                while *si >= subjects.len() {
                    if *pi >= preds.len() {
                        return Flow::Done;
                    }
                    let p = preds[*pi];
                    *pi += 1;
                    *subjects = ring
                        .distinct_subjects(ring.subject_range(p))
                        .into_iter()
                        .map(|(s, _)| s)
                        .collect();
                    *si = 0;
                }
                let p = preds[*pi - 1];
                let s = subjects[*si];
                *si += 1;
                let q = dict.inverse(p).expect("every predicate has an inverse");
                for (o, _) in ring.distinct_subjects(ring.backward_step(ring.object_range(s), q)) {
                    if !emit(s, o) || clock.tick() {
                        return Flow::Stop;
                    }
                }
                Flow::More
            }
            Special::Concat { p1, p2, mids, zi } => {
                let (p1, p2) = (*p1, *p2);
                let mids = mids.get_or_insert_with(|| {
                    let q1 = dict.inverse(p1).expect("every predicate has an inverse");
                    let a = ring.subject_range(q1);
                    let b = ring.subject_range(p2);
                    ring.ls().range_intersect((a.lo, a.hi), (b.lo, b.hi))
                });
                let Some(&z) = mids.get(*zi) else {
                    return Flow::Done;
                };
                *zi += 1;
                let q2 = dict.inverse(p2).expect("every predicate has an inverse");
                let zr = ring.object_range(z);
                let subjects = ring.distinct_subjects(ring.backward_step(zr, p1));
                let objects = ring.distinct_subjects(ring.backward_step(zr, q2));
                for &(s, _) in &subjects {
                    for &(o, _) in &objects {
                        if !emit(s, o) || clock.tick() {
                            return Flow::Stop;
                        }
                    }
                }
                Flow::More
            }
        }
    }
}
