//! String dictionary and triple-file ingestion.
//!
//! Input is one `s<TAB>p<TAB>o` record per line; blank lines and lines
//! starting with `#` are skipped. Ingestion completes the graph: every edge
//! `(s, p, o)` also yields `(o, p̂, s)` where `p̂` is the inverse of `p`.
//!
//! By default ids follow lexicographic order of names, base predicates take
//! `1..=|P|` and the inverse of `p` is `p + |P|`, printed as `^name`. An id-map
//! sidecar pins ids explicitly:
//!
//! ```text
//! [nodes]
//! name<TAB>id
//! [predicates]
//! name<TAB>id<TAB>inverse-name
//! ```

use crate::ring::{NodeId, PredId, Triple};
use std::collections::HashMap;
use thiserror::Error;

pub const INVERSE_PREFIX: char = '^';

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("id map line {line}: {msg}")]
    IdMap { line: usize, msg: String },
    #[error("id map: {0}")]
    IdMapInconsistent(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DictError {
    #[error("node id {0} out of range")]
    NodeOutOfRange(u32),
    #[error("predicate id {0} out of range")]
    PredOutOfRange(u32),
    #[error("invalid dictionary: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dictionary {
    node_names: Vec<String>,
    node_ids: HashMap<String, NodeId>,
    pred_names: Vec<String>,
    pred_ids: HashMap<String, PredId>,
    /// `inverse[p - 1]` is the id of `p̂`.
    inverse: Vec<PredId>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.contains(['\t', '\n', '\r'])
}

impl Dictionary {
    /// Builds a dictionary from id-ordered names (id `i` is at index `i - 1`)
    /// and the inverse of every predicate.
    pub fn from_parts(
        node_names: Vec<String>,
        pred_names: Vec<String>,
        inverse: Vec<PredId>,
    ) -> Result<Self, DictError> {
        if inverse.len() != pred_names.len() {
            return Err(DictError::Invalid(
                "inverse table length differs from predicate count".into(),
            ));
        }
        let np = pred_names.len() as u32;
        for (i, &q) in inverse.iter().enumerate() {
            let p = i as u32 + 1;
            if q == 0 || q > np || inverse[q as usize - 1] != p {
                return Err(DictError::Invalid(format!(
                    "inverse of predicate {p} is not an involution"
                )));
            }
        }
        let node_ids = index_names(&node_names, "node")?;
        let pred_ids = index_names(&pred_names, "predicate")?;
        Ok(Dictionary {
            node_names,
            node_ids,
            pred_names,
            pred_ids,
            inverse,
        })
    }

    pub fn num_nodes(&self) -> u32 {
        self.node_names.len() as u32
    }

    /// Number of predicate ids, inverses included.
    pub fn num_preds(&self) -> u32 {
        self.pred_names.len() as u32
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.node_ids.get(name).copied()
    }

    pub fn node_name(&self, id: NodeId) -> Result<&str, DictError> {
        self.node_names
            .get((id as usize).wrapping_sub(1))
            .map(String::as_str)
            .ok_or(DictError::NodeOutOfRange(id))
    }

    pub fn pred_id(&self, name: &str) -> Option<PredId> {
        self.pred_ids.get(name).copied()
    }

    pub fn pred_name(&self, id: PredId) -> Result<&str, DictError> {
        self.pred_names
            .get((id as usize).wrapping_sub(1))
            .map(String::as_str)
            .ok_or(DictError::PredOutOfRange(id))
    }

    pub fn inverse(&self, p: PredId) -> Option<PredId> {
        self.inverse.get((p as usize).wrapping_sub(1)).copied()
    }

    /// Id of the label `name`, or of its inverse when `inverted` is set.
    pub fn resolve(&self, name: &str, inverted: bool) -> Option<PredId> {
        let p = self.pred_id(name)?;
        if inverted {
            self.inverse(p)
        } else {
            Some(p)
        }
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn pred_names(&self) -> &[String] {
        &self.pred_names
    }

    pub fn inverse_table(&self) -> &[PredId] {
        &self.inverse
    }
}

fn index_names(names: &[String], kind: &str) -> Result<HashMap<String, u32>, DictError> {
    let mut map = HashMap::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if !valid_name(name) {
            return Err(DictError::Invalid(format!(
                "{kind} name {name:?} is empty or contains a tab or newline"
            )));
        }
        if map.insert(name.clone(), i as u32 + 1).is_some() {
            return Err(DictError::Invalid(format!(
                "duplicate {kind} name {name:?}"
            )));
        }
    }
    Ok(map)
}

/// A dictionary-encoded, completed graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub dict: Dictionary,
    /// Sorted and duplicate-free, closed under inversion.
    pub triples: Vec<Triple>,
}

fn parse_records(text: &str) -> Result<Vec<[&str; 3]>, IngestError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(IngestError::Malformed {
                line: idx + 1,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(IngestError::Malformed {
                line: idx + 1,
                msg: "empty field".into(),
            });
        }
        out.push([fields[0], fields[1], fields[2]]);
    }
    Ok(out)
}

fn complete(mut triples: Vec<Triple>, dict: &Dictionary) -> Vec<Triple> {
    let n = triples.len();
    for i in 0..n {
        let t = triples[i];
        let q = dict.inverse(t.p).expect("every predicate has an inverse");
        triples.push(Triple::new(t.o, q, t.s));
    }
    triples.sort_unstable();
    triples.dedup();
    triples
}

/// Ingests a triple file with lexicographic id assignment.
pub fn ingest(text: &str) -> Result<Graph, IngestError> {
    let records = parse_records(text)?;
    let mut nodes: Vec<&str> = Vec::new();
    let mut preds: Vec<&str> = Vec::new();
    for (idx, r) in records.iter().enumerate() {
        if r[1].starts_with(INVERSE_PREFIX) {
            return Err(IngestError::Malformed {
                line: line_of(text, idx),
                msg: format!("predicate {:?} uses the reserved inverse prefix", r[1]),
            });
        }
        nodes.push(r[0]);
        nodes.push(r[2]);
        preds.push(r[1]);
    }
    nodes.sort_unstable();
    nodes.dedup();
    preds.sort_unstable();
    preds.dedup();
    let np = preds.len() as u32;
    let node_names: Vec<String> = nodes.iter().map(|s| s.to_string()).collect();
    let mut pred_names: Vec<String> = preds.iter().map(|s| s.to_string()).collect();
    pred_names.extend(preds.iter().map(|s| format!("{INVERSE_PREFIX}{s}")));
    let inverse: Vec<PredId> = (1..=np).map(|p| p + np).chain(1..=np).collect();
    let dict = Dictionary::from_parts(node_names, pred_names, inverse).map_err(|e| {
        IngestError::Malformed {
            line: 0,
            msg: e.to_string(),
        }
    })?;
    let triples = records
        .iter()
        .map(|r| {
            Triple::new(
                dict.node_ids[r[0]],
                dict.pred_ids[r[1]],
                dict.node_ids[r[2]],
            )
        })
        .collect();
    let triples = complete(triples, &dict);
    Ok(Graph { dict, triples })
}

/// Line number (1-based) of the `idx`-th record of `text`.
fn line_of(text: &str, idx: usize) -> usize {
    let mut seen = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if seen == idx {
            return i + 1;
        }
        seen += 1;
    }
    0
}

/// Parses an id-map sidecar into a dictionary.
pub fn parse_id_map(text: &str) -> Result<Dictionary, IngestError> {
    enum Section {
        None,
        Nodes,
        Preds,
    }
    let mut section = Section::None;
    let mut nodes: Vec<(u32, String)> = Vec::new();
    let mut preds: Vec<(u32, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let err = |msg: String| IngestError::IdMap { line: idx + 1, msg };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.trim() {
            "[nodes]" => {
                section = Section::Nodes;
                continue;
            }
            "[predicates]" => {
                section = Section::Preds;
                continue;
            }
            _ => {}
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let id = |s: &str| {
            s.parse::<u32>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| err(format!("bad id {s:?}")))
        };
        match section {
            Section::None => {
                return Err(err("entry outside a [nodes] or [predicates] section".into()))
            }
            Section::Nodes => {
                if fields.len() != 2 {
                    return Err(err("expected name<TAB>id".into()));
                }
                nodes.push((id(fields[1])?, fields[0].to_string()));
            }
            Section::Preds => {
                if fields.len() != 3 {
                    return Err(err("expected name<TAB>id<TAB>inverse".into()));
                }
                preds.push((id(fields[1])?, fields[0].to_string(), fields[2].to_string()));
            }
        }
    }
    let node_names = dense(nodes.into_iter().collect(), "node")?;
    let pred_names = dense(
        preds.iter().map(|(i, n, _)| (*i, n.clone())).collect(),
        "predicate",
    )?;
    let by_name: HashMap<&str, u32> = preds.iter().map(|(i, n, _)| (n.as_str(), *i)).collect();
    let mut inverse = vec![0; pred_names.len()];
    for (i, n, inv) in &preds {
        let q = *by_name.get(inv.as_str()).ok_or_else(|| {
            IngestError::IdMapInconsistent(format!(
                "inverse {inv:?} of {n:?} is not a listed predicate"
            ))
        })?;
        inverse[*i as usize - 1] = q;
    }
    Dictionary::from_parts(node_names, pred_names, inverse)
        .map_err(|e| IngestError::IdMapInconsistent(e.to_string()))
}

fn dense(mut entries: Vec<(u32, String)>, kind: &str) -> Result<Vec<String>, IngestError> {
    entries.sort();
    for (k, (i, name)) in entries.iter().enumerate() {
        if *i as usize != k + 1 {
            return Err(IngestError::IdMapInconsistent(format!(
                "{kind} ids are not dense 1..={} (at {name:?})",
                entries.len()
            )));
        }
    }
    Ok(entries.into_iter().map(|(_, n)| n).collect())
}

/// Ingests a triple file whose names are all pinned by `dict`.
pub fn ingest_with_dictionary(text: &str, dict: Dictionary) -> Result<Graph, IngestError> {
    let records = parse_records(text)?;
    let mut triples = Vec::with_capacity(records.len());
    for (idx, r) in records.iter().enumerate() {
        let unknown = |kind: &str, name: &str| IngestError::Malformed {
            line: line_of(text, idx),
            msg: format!("{kind} {name:?} missing from id map"),
        };
        let s = dict.node_id(r[0]).ok_or_else(|| unknown("node", r[0]))?;
        let p = dict
            .pred_id(r[1])
            .ok_or_else(|| unknown("predicate", r[1]))?;
        let o = dict.node_id(r[2]).ok_or_else(|| unknown("node", r[2]))?;
        triples.push(Triple::new(s, p, o));
    }
    let triples = complete(triples, &dict);
    Ok(Graph { dict, triples })
}

pub const RUNNING_EXAMPLE_TSV: &str = include_str!("../fixtures/santiago.tsv");
pub const RUNNING_EXAMPLE_IDMAP: &str = include_str!("../fixtures/santiago.idmap");

/// The five-station transport network used throughout the tests, with ids
/// SA=1, UCh=2, LH=3, BA=4, Baq=5 and l1=1, l2=2, l5=3, bus=4, ^bus=5.
pub fn running_example() -> Graph {
    let dict = parse_id_map(RUNNING_EXAMPLE_IDMAP).expect("fixture id map is valid");
    ingest_with_dictionary(RUNNING_EXAMPLE_TSV, dict).expect("fixture is valid")
}
