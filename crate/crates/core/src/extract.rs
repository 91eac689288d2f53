//! Provable nodes, minimal proofs and dataset records.
//!
//! All proof-finished edges lead to one sink. A node is provable when the
//! sink is reachable; its proof is the fewest-tactics path, ties broken by
//! total tactic length and then lexicographically.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Signature;
use crate::explore::{Dst, NodeId, StateGraph};
use crate::state::{parse_state, theorem_header, ProofState};

pub const DEFAULT_MAX_DEPTH: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("node {0} cannot reach the proof-finished sink")]
pub struct NotProvable(pub NodeId);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProofPath {
    pub tactics: Vec<String>,
}

impl ProofPath {
    pub fn new(tactics: Vec<String>) -> Self {
        ProofPath { tactics }
    }

    pub fn len(&self) -> usize {
        self.tactics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tactics.is_empty()
    }

    pub fn total_chars(&self) -> usize {
        self.tactics.iter().map(|t| t.chars().count()).sum()
    }

    fn concat(&self) -> String {
        self.tactics.concat()
    }
}

/// Total order used to pick among proofs: length, total characters, the
/// concatenated text, then the tactic sequence itself.
pub fn proof_order(a: &ProofPath, b: &ProofPath) -> Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| a.total_chars().cmp(&b.total_chars()))
        .then_with(|| a.concat().cmp(&b.concat()))
        .then_with(|| a.tactics.cmp(&b.tactics))
}

/// Edge-count distance from each node to the sink; `None` when unreachable.
pub fn distances_to_proof(graph: &StateGraph) -> Vec<Option<usize>> {
    let n = graph.nodes().len();
    let mut incoming: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for e in graph.edges() {
        match e.dst {
            Dst::Node(v) => incoming[v].push(e.src),
            Dst::ProofFinished => {
                if dist[e.src].is_none() {
                    dist[e.src] = Some(1);
                    queue.push_back(e.src);
                }
            }
        }
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued nodes have distances");
        for &u in &incoming[v] {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Best proof for every provable node, by dynamic programming over
/// distance layers.
pub fn shortest_proofs(graph: &StateGraph) -> Vec<Option<ProofPath>> {
    let dist = distances_to_proof(graph);
    let mut order: Vec<NodeId> = (0..dist.len()).filter(|&v| dist[v].is_some()).collect();
    order.sort_by_key(|&v| dist[v]);
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); dist.len()];
    for (i, e) in graph.edges().iter().enumerate() {
        outgoing[e.src].push(i);
    }
    let mut best: Vec<Option<ProofPath>> = vec![None; dist.len()];
    for v in order {
        let d = dist[v].expect("filtered");
        let mut choice: Option<ProofPath> = None;
        for &i in &outgoing[v] {
            let e = &graph.edges()[i];
            let rest = match e.dst {
                Dst::ProofFinished if d == 1 => Vec::new(),
                Dst::Node(w) if dist[w] == Some(d - 1) => {
                    best[w].as_ref().expect("closer layer done").tactics.clone()
                }
                _ => continue,
            };
            let mut tactics = Vec::with_capacity(d);
            tactics.push(e.tactic.clone());
            tactics.extend(rest);
            let cand = ProofPath::new(tactics);
            if choice
                .as_ref()
                .is_none_or(|c| proof_order(&cand, c) == Ordering::Less)
            {
                choice = Some(cand);
            }
        }
        best[v] = choice;
    }
    best
}

pub fn shortest_proof(graph: &StateGraph, node: NodeId) -> Result<ProofPath, NotProvable> {
    shortest_proofs(graph)
        .into_iter()
        .nth(node)
        .flatten()
        .ok_or(NotProvable(node))
}

/// The header followed by one indented tactic per line.
pub fn render_theorem(state: &ProofState, name: &str, sig: &Signature, proof: &ProofPath) -> String {
    let mut out = theorem_header(state, name, sig);
    for t in &proof.tactics {
        out.push_str("\n  ");
        out.push_str(t);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremRecord {
    pub id: String,
    /// Header ending in `:= by`; the proof is kept separately.
    pub theorem: String,
    pub proof: ProofPath,
    pub source: String,
    pub depth: usize,
    pub state: String,
    /// The state could not be parsed, so `theorem` holds raw engine text.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub external: bool,
}

impl TheoremRecord {
    pub fn full_text(&self) -> String {
        let mut out = self.theorem.clone();
        for t in &self.proof.tactics {
            out.push_str("\n  ");
            out.push_str(t);
        }
        out
    }
}

/// One record per provable node within `max_depth`, in insertion order.
pub fn extract_dataset(
    graph: &StateGraph,
    max_depth: usize,
    source: &str,
    sig: &Signature,
) -> Vec<TheoremRecord> {
    let proofs = shortest_proofs(graph);
    let mut records = Vec::new();
    for (id, node) in graph.nodes().iter().enumerate() {
        let Some(proof) = &proofs[id] else { continue };
        if proof.len() > max_depth {
            continue;
        }
        let rec_id = format!("{source}_{:04}", node.idx);
        let (theorem, external) = match parse_state(&node.pretty, sig) {
            Ok(state) => (theorem_header(&state, &rec_id, sig), false),
            Err(_) => (node.pretty.clone(), true),
        };
        records.push(TheoremRecord {
            id: rec_id,
            theorem,
            proof: proof.clone(),
            source: source.to_string(),
            depth: proof.len(),
            state: node.pretty.clone(),
            external,
        });
    }
    records
}

pub fn write_dataset(records: &[TheoremRecord], mut out: impl Write) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
