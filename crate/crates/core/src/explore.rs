//! Breadth-first exploration of a theorem's state graph.
//!
//! Every dequeued state is embedded, the nearest templates are instantiated
//! against its names, and each resulting tactic is tried. New states are
//! queued once; repeats only add edges and parent records.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::io::{self, BufRead, Write};
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::embed::TemplateIndex;
use crate::engine::{Applied, EngineError, ProofEngine, StateId};
use crate::state::{CanonicalKey, StateContext};
use crate::template::instantiate;

pub type NodeId = usize;

/// Serialized name of the proof-finished sink.
pub const PROOF_FINISHED: &str = "PF";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dst {
    Node(NodeId),
    ProofFinished,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub key: CanonicalKey,
    pub pretty: String,
    /// Queue position at insertion; equal to the node id.
    pub idx: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: NodeId,
    pub tactic: String,
    pub dst: Dst,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentRecord {
    pub parent: NodeId,
    pub tactic: String,
    /// Length of the discovery path ending with this edge.
    pub prefix_len: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateGraph {
    nodes: Vec<Node>,
    by_key: HashMap<CanonicalKey, NodeId>,
    edges: Vec<Edge>,
    parents: Vec<Vec<ParentRecord>>,
    depth: Vec<usize>,
    attempted: u64,
    succeeded: u64,
    /// Set when exploration stopped because the engine failed.
    pub truncated: Option<String>,
}

impl StateGraph {
    pub fn new(root_pretty: &str) -> Self {
        let mut g = StateGraph::default();
        g.insert_node(root_pretty, 0);
        g
    }

    fn insert_node(&mut self, pretty: &str, depth: usize) -> NodeId {
        let id = self.nodes.len();
        let key = CanonicalKey(pretty.to_string());
        self.by_key.insert(key.clone(), id);
        self.nodes.push(Node {
            key,
            pretty: pretty.to_string(),
            idx: id,
        });
        self.parents.push(Vec::new());
        self.depth.push(depth);
        id
    }

    /// Record `src --tactic--> pretty`; returns the destination and whether
    /// it is new. Self-loops are dropped and return `None`.
    pub fn add_transition(&mut self, src: NodeId, tactic: &str, pretty: &str) -> Option<(NodeId, bool)> {
        let key = CanonicalKey(pretty.to_string());
        let (dst, fresh) = match self.by_key.get(&key) {
            Some(&d) if d == src => return None,
            Some(&d) => (d, false),
            None => (self.insert_node(pretty, self.depth[src] + 1), true),
        };
        self.edges.push(Edge {
            src,
            tactic: tactic.to_string(),
            dst: Dst::Node(dst),
        });
        self.parents[dst].push(ParentRecord {
            parent: src,
            tactic: tactic.to_string(),
            prefix_len: self.depth[src] + 1,
        });
        Some((dst, fresh))
    }

    pub fn add_proof_finished(&mut self, src: NodeId, tactic: &str) {
        self.edges.push(Edge {
            src,
            tactic: tactic.to_string(),
            dst: Dst::ProofFinished,
        });
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn find(&self, pretty: &str) -> Option<NodeId> {
        self.by_key.get(&CanonicalKey(pretty.to_string())).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn parents(&self, id: NodeId) -> &[ParentRecord] {
        &self.parents[id]
    }

    pub fn transitions_attempted(&self) -> u64 {
        self.attempted
    }

    pub fn transitions_succeeded(&self) -> u64 {
        self.succeeded
    }

    pub fn write_snapshot(&self, mut out: impl Write) -> io::Result<()> {
        for n in &self.nodes {
            serde_json::to_writer(
                &mut out,
                &NodeLine {
                    node: n.idx,
                    state: n.pretty.clone(),
                    idx: n.idx,
                },
            )?;
            out.write_all(b"\n")?;
        }
        for e in &self.edges {
            let dst = match e.dst {
                Dst::Node(d) => DstWire::Node(d),
                Dst::ProofFinished => DstWire::Sink(PROOF_FINISHED.to_string()),
            };
            serde_json::to_writer(
                &mut out,
                &EdgeLine {
                    src: e.src,
                    tactic: e.tactic.clone(),
                    dst,
                },
            )?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Rebuild a graph from a snapshot. Nodes must appear with dense ids in
    /// order, before any edge that mentions them.
    pub fn read_snapshot(input: impl BufRead) -> io::Result<Self> {
        let bad = |line: usize, msg: String| {
            io::Error::new(io::ErrorKind::InvalidData, format!("snapshot line {line}: {msg}"))
        };
        let mut g = StateGraph::default();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<SnapshotLine>(&line).map_err(|e| bad(i + 1, e.to_string()))? {
                SnapshotLine::Node(n) => {
                    if n.node != g.nodes.len() || n.idx != n.node {
                        return Err(bad(i + 1, format!("node {} out of order", n.node)));
                    }
                    if g.by_key.contains_key(&CanonicalKey(n.state.clone())) {
                        return Err(bad(i + 1, "duplicate state".into()));
                    }
                    g.insert_node(&n.state, 0);
                }
                SnapshotLine::Edge(e) => {
                    let dst = match e.dst {
                        DstWire::Node(d) => Dst::Node(d),
                        DstWire::Sink(s) if s == PROOF_FINISHED => Dst::ProofFinished,
                        DstWire::Sink(s) => return Err(bad(i + 1, format!("bad dst {s:?}"))),
                    };
                    let known = |n: usize| n < g.nodes.len();
                    if !known(e.src) || matches!(dst, Dst::Node(d) if !known(d)) {
                        return Err(bad(i + 1, "edge mentions unknown node".into()));
                    }
                    g.edges.push(Edge {
                        src: e.src,
                        tactic: e.tactic,
                        dst,
                    });
                }
            }
        }
        if g.nodes.is_empty() {
            return Err(bad(0, "no nodes".into()));
        }
        g.rebuild_parents();
        g.attempted = g.edges.len() as u64;
        g.succeeded = g.edges.len() as u64;
        Ok(g)
    }

    fn rebuild_parents(&mut self) {
        let mut depth = vec![usize::MAX; self.nodes.len()];
        depth[0] = 0;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.src == u) {
                if let Dst::Node(v) = e.dst {
                    if depth[v] == usize::MAX {
                        depth[v] = depth[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        for p in &mut self.parents {
            p.clear();
        }
        for e in &self.edges {
            if let Dst::Node(v) = e.dst {
                self.parents[v].push(ParentRecord {
                    parent: e.src,
                    tactic: e.tactic.clone(),
                    prefix_len: depth[e.src].saturating_add(1),
                });
            }
        }
        self.depth = depth;
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeLine {
    node: usize,
    state: String,
    idx: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DstWire {
    Node(usize),
    Sink(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeLine {
    src: usize,
    tactic: String,
    dst: DstWire,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SnapshotLine {
    Node(NodeLine),
    Edge(EdgeLine),
}

/// Produces candidate tactics for a state, in the order they are tried.
pub trait CandidateSource: Sync {
    fn candidates<'a>(&'a self, pretty: &str) -> Box<dyn Iterator<Item = String> + 'a>;
}

/// Nearest templates from an index, each instantiated against the state's
/// names. Templates come in rank order, instantiations in enumeration order.
pub struct RetrievalCandidates<'i> {
    pub index: &'i TemplateIndex,
    pub k: usize,
    pub cap: usize,
}

impl CandidateSource for RetrievalCandidates<'_> {
    fn candidates<'a>(&'a self, pretty: &str) -> Box<dyn Iterator<Item = String> + 'a> {
        let ctx = StateContext::from_pretty(pretty);
        let hits = self.index.query(pretty, self.k);
        let cap = self.cap;
        Box::new(
            hits.into_iter()
                .flat_map(move |h| instantiate(h.template, &ctx, cap)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploreBudget {
    pub max_transitions: u64,
    /// `None` disables the clock (deterministic runs).
    pub max_seconds: Option<f64>,
    pub k_neighbors: usize,
    pub instantiation_cap: usize,
}

impl Default for ExploreBudget {
    fn default() -> Self {
        ExploreBudget {
            max_transitions: 200_000,
            max_seconds: Some(1800.0),
            k_neighbors: crate::embed::DEFAULT_K,
            instantiation_cap: crate::template::DEFAULT_INSTANTIATION_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExploreStats {
    pub transitions_attempted: u64,
    pub transitions_succeeded: u64,
    pub distinct_states: usize,
    pub proof_finished_hits: usize,
    pub elapsed_seconds: f64,
    pub states_per_minute: f64,
}

pub fn graph_stats(graph: &StateGraph, elapsed: Duration) -> ExploreStats {
    let secs = elapsed.as_secs_f64();
    let distinct = graph.nodes.len();
    ExploreStats {
        transitions_attempted: graph.attempted,
        transitions_succeeded: graph.succeeded,
        distinct_states: distinct,
        proof_finished_hits: graph
            .edges
            .iter()
            .filter(|e| e.dst == Dst::ProofFinished)
            .count(),
        elapsed_seconds: secs,
        states_per_minute: if secs > 0.0 {
            distinct as f64 / (secs / 60.0)
        } else {
            0.0
        },
    }
}

#[derive(Debug)]
pub struct Exploration {
    pub graph: StateGraph,
    pub stats: ExploreStats,
}

/// Explore `theorem` breadth-first within `budget`. Fails only if the
/// theorem cannot be entered; later engine errors truncate the graph.
pub fn explore<E: ProofEngine + ?Sized>(
    theorem: &str,
    engine: &mut E,
    source: &dyn CandidateSource,
    budget: &ExploreBudget,
) -> Result<Exploration, EngineError> {
    let start = Instant::now();
    let (root, pretty) = engine.enter(theorem)?;
    let mut graph = StateGraph::new(&pretty);
    let mut engine_ids: Vec<StateId> = vec![root];
    let mut counter = 0u64;
    let mut queue = BinaryHeap::from([(Reverse(counter), 0usize)]);
    let out_of_budget = |attempted: u64| {
        attempted >= budget.max_transitions
            || budget
                .max_seconds
                .is_some_and(|s| start.elapsed().as_secs_f64() >= s)
    };

    'outer: while let Some((_, node)) = queue.pop() {
        let pretty = graph.nodes[node].pretty.clone();
        let mut tried = HashSet::new();
        for tactic in source.candidates(&pretty) {
            if out_of_budget(graph.attempted) {
                break 'outer;
            }
            if !tried.insert(tactic.clone()) {
                continue;
            }
            graph.attempted += 1;
            match engine.apply(engine_ids[node], &tactic) {
                Ok(Applied::Failure(_)) => {}
                Ok(Applied::ProofFinished) => {
                    graph.succeeded += 1;
                    graph.add_proof_finished(node, &tactic);
                }
                Ok(Applied::NewState { id, pretty }) => {
                    graph.succeeded += 1;
                    if let Some((dst, true)) = graph.add_transition(node, &tactic, &pretty) {
                        engine_ids.push(id);
                        debug_assert_eq!(engine_ids.len(), dst + 1);
                        counter += 1;
                        queue.push((Reverse(counter), dst));
                    }
                }
                Err(e) => {
                    warn!("engine failed during exploration: {e}");
                    graph.truncated = Some(e.to_string());
                    break 'outer;
                }
            }
        }
    }
    let stats = graph_stats(&graph, start.elapsed());
    debug!(
        "explored {} states with {} attempts",
        stats.distinct_states, stats.transitions_attempted
    );
    Ok(Exploration { graph, stats })
}
