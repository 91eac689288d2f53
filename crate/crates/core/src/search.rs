//! Budgeted depth-first proof search and a benchmark runner.
//!
//! Each expansion tries candidates in retrieval order until it has gathered
//! `tries_per_state` new, unseen successor states (or, in attempts mode,
//! until that many candidates were tried). Search descends into the first
//! successor and backtracks to the others in discovery order.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::engine::{Applied, ProofEngine, StateId};
use crate::explore::CandidateSource;
use crate::extract::ProofPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TryMode {
    /// Count only candidates that produced a new unseen state.
    #[default]
    ValidStates,
    /// Count every candidate attempted.
    Attempts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    pub max_seconds: Option<f64>,
    pub tries_per_state: usize,
    pub mode: TryMode,
    /// Optional cap on apply attempts, for reproducible runs.
    pub max_transitions: Option<u64>,
    pub k_neighbors: usize,
    pub instantiation_cap: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_seconds: Some(120.0),
            tries_per_state: 10,
            mode: TryMode::ValidStates,
            max_transitions: None,
            k_neighbors: crate::embed::DEFAULT_K,
            instantiation_cap: crate::template::DEFAULT_INSTANTIATION_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    Timeout,
    TransitionLimit,
    Exhausted,
    Engine(String),
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailReason::Timeout => f.write_str("timeout"),
            FailReason::TransitionLimit => f.write_str("transition limit"),
            FailReason::Exhausted => f.write_str("exhausted"),
            FailReason::Engine(e) => write!(f, "engine: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Proved(ProofPath),
    Failed(FailReason),
}

#[derive(Debug, Clone)]
pub struct SearchReport {
    pub outcome: SearchOutcome,
    pub attempts: u64,
    pub expanded: usize,
    pub elapsed_seconds: f64,
}

struct Frame {
    path: Vec<String>,
    children: VecDeque<(String, StateId, String)>,
}

enum Expansion {
    Children(VecDeque<(String, StateId, String)>),
    Finished(String),
    Stop(FailReason),
}

struct Search<'a, E: ?Sized> {
    engine: &'a mut E,
    source: &'a dyn CandidateSource,
    budget: &'a SearchBudget,
    start: Instant,
    visited: HashSet<String>,
    attempts: u64,
    expanded: usize,
}

impl<E: ProofEngine + ?Sized> Search<'_, E> {
    fn out_of_budget(&self) -> Option<FailReason> {
        if self
            .budget
            .max_seconds
            .is_some_and(|s| self.start.elapsed().as_secs_f64() >= s)
        {
            return Some(FailReason::Timeout);
        }
        if self.budget.max_transitions.is_some_and(|m| self.attempts >= m) {
            return Some(FailReason::TransitionLimit);
        }
        None
    }

    fn expand(&mut self, state: StateId, pretty: &str) -> Expansion {
        self.expanded += 1;
        let mut children = VecDeque::new();
        let mut tried_here = 0usize;
        let mut seen_here = HashSet::new();
        for tactic in self.source.candidates(pretty) {
            let counted = match self.budget.mode {
                TryMode::ValidStates => children.len(),
                TryMode::Attempts => tried_here,
            };
            if counted >= self.budget.tries_per_state {
                break;
            }
            if let Some(reason) = self.out_of_budget() {
                return Expansion::Stop(reason);
            }
            if !seen_here.insert(tactic.clone()) {
                continue;
            }
            self.attempts += 1;
            tried_here += 1;
            match self.engine.apply(state, &tactic) {
                Ok(Applied::ProofFinished) => return Expansion::Finished(tactic),
                Ok(Applied::NewState { id, pretty }) => {
                    if self.visited.insert(pretty.clone()) {
                        children.push_back((tactic, id, pretty));
                    }
                }
                Ok(Applied::Failure(_)) => {}
                Err(e) => return Expansion::Stop(FailReason::Engine(e.to_string())),
            }
        }
        Expansion::Children(children)
    }

    fn run(&mut self, root: StateId, root_pretty: String) -> SearchOutcome {
        self.visited.insert(root_pretty.clone());
        let mut stack: Vec<Frame> = Vec::new();
        let mut next = Some((Vec::new(), root, root_pretty));
        loop {
            if let Some((path, id, pretty)) = next.take() {
                match self.expand(id, &pretty) {
                    Expansion::Finished(last) => {
                        let mut tactics = path;
                        tactics.push(last);
                        return SearchOutcome::Proved(ProofPath::new(tactics));
                    }
                    Expansion::Stop(reason) => return SearchOutcome::Failed(reason),
                    Expansion::Children(children) => stack.push(Frame { path, children }),
                }
            }
            let Some(top) = stack.last_mut() else {
                return SearchOutcome::Failed(FailReason::Exhausted);
            };
            match top.children.pop_front() {
                Some((tactic, id, pretty)) => {
                    let mut path = top.path.clone();
                    path.push(tactic);
                    next = Some((path, id, pretty));
                }
                None => {
                    stack.pop();
                }
            }
        }
    }
}

/// Search for a proof of `theorem`. Engine problems become failed outcomes.
pub fn prove<E: ProofEngine + ?Sized>(
    theorem: &str,
    engine: &mut E,
    source: &dyn CandidateSource,
    budget: &SearchBudget,
) -> SearchReport {
    let start = Instant::now();
    let (outcome, attempts, expanded) = match engine.enter(theorem) {
        Err(e) => (SearchOutcome::Failed(FailReason::Engine(e.to_string())), 0, 0),
        Ok((root, pretty)) => {
            let mut search = Search {
                engine,
                source,
                budget,
                start,
                visited: HashSet::new(),
                attempts: 0,
                expanded: 0,
            };
            let outcome = search.run(root, pretty);
            (outcome, search.attempts, search.expanded)
        }
    };
    SearchReport {
        outcome,
        attempts,
        expanded,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Split a theorem file into blocks separated by blank lines.
pub fn parse_theorem_file(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim_end());
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n"));
    }
    blocks
}

/// Name following the `theorem`/`lemma`/`example` keyword, if any.
pub fn theorem_name(theorem: &str) -> Option<&str> {
    let mut words = theorem.split_whitespace();
    match words.next()? {
        "theorem" | "lemma" => words
            .next()
            .map(|w| w.split(['(', ':']).next().unwrap_or(w))
            .filter(|w| !w.is_empty()),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchEntry {
    pub theorem: String,
    pub proved: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proof: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub attempts: u64,
    pub seconds: f64,
}

impl BenchEntry {
    pub fn from_report(name: &str, report: &SearchReport) -> Self {
        let (proved, proof, reason) = match &report.outcome {
            SearchOutcome::Proved(p) => (true, Some(p.tactics.clone()), None),
            SearchOutcome::Failed(r) => (false, None, Some(r.to_string())),
        };
        BenchEntry {
            theorem: name.to_string(),
            proved,
            proof,
            reason,
            attempts: report.attempts,
            seconds: report.elapsed_seconds,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub entries: Vec<BenchEntry>,
    pub wall_seconds: f64,
}

impl BenchReport {
    pub fn proved(&self) -> usize {
        self.entries.iter().filter(|e| e.proved).count()
    }

    pub fn total(&self) -> usize {
        self.entries.len()
    }

    /// `proved/total`
    pub fn summary(&self) -> String {
        format!("{}/{}", self.proved(), self.total())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entries serialize"));
            out.push('\n');
        }
        out
    }
}

/// Run `prove` on each theorem with a fresh engine from `engine_factory`.
pub fn bench<E: ProofEngine>(
    theorems: &[String],
    mut engine_factory: impl FnMut() -> Result<E, crate::engine::EngineError>,
    source: &dyn CandidateSource,
    budget: &SearchBudget,
) -> BenchReport {
    let start = Instant::now();
    let entries = theorems
        .iter()
        .enumerate()
        .map(|(i, theorem)| {
            let name = theorem_name(theorem)
                .map(str::to_string)
                .unwrap_or_else(|| format!("theorem_{i}"));
            let report = match engine_factory() {
                Ok(mut engine) => prove(theorem, &mut engine, source, budget),
                Err(e) => SearchReport {
                    outcome: SearchOutcome::Failed(FailReason::Engine(e.to_string())),
                    attempts: 0,
                    expanded: 0,
                    elapsed_seconds: 0.0,
                },
            };
            BenchEntry::from_report(&name, &report)
        })
        .collect();
    BenchReport {
        entries,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::engine::{replay, BuiltinSession};
    use crate::expr::Signature;
    use crate::theory::Theory;

    struct Fixed(Vec<&'static str>);

    impl CandidateSource for Fixed {
        fn candidates<'a>(&'a self, _: &str) -> Box<dyn Iterator<Item = String> + 'a> {
            Box::new(self.0.iter().map(|s| s.to_string()))
        }
    }

    const T: &str = "theorem my_mul_comm_assoc (a b c : ℝ) : a * b * c = b * (a * c)";

    fn budget() -> SearchBudget {
        SearchBudget {
            max_seconds: None,
            max_transitions: Some(10_000),
            ..SearchBudget::default()
        }
    }

    #[test]
    fn finds_a_two_step_proof() {
        let th = Arc::new(Theory::group());
        let mut engine = BuiltinSession::builtin(th.clone());
        let source = Fixed(vec!["rw [mul_comm b a]", "rw [mul_comm a b]", "rw [mul_assoc]"]);
        let report = prove(T, &mut engine, &source, &budget());
        let SearchOutcome::Proved(p) = report.outcome else {
            panic!("{:?}", report.outcome)
        };
        assert_eq!(p.len(), 2);
        assert_eq!(replay(th, T, &p.tactics), Some(2));
    }

    #[test]
    fn empty_theory_is_exhausted() {
        let th = Arc::new(Theory::empty(Signature::group("G")));
        let mut engine = BuiltinSession::builtin(th);
        let source = Fixed(vec!["rw [mul_assoc]"]);
        let report = prove(T, &mut engine, &source, &SearchBudget::default());
        assert_eq!(report.outcome, SearchOutcome::Failed(FailReason::Exhausted));
        assert!(report.elapsed_seconds < 1.0);
    }

    #[test]
    fn zero_time_budget_times_out() {
        let mut engine = BuiltinSession::builtin(Arc::new(Theory::group()));
        let b = SearchBudget {
            max_seconds: Some(0.0),
            ..SearchBudget::default()
        };
        let report = prove(T, &mut engine, &Fixed(vec!["rw [mul_assoc]"]), &b);
        assert_eq!(report.outcome, SearchOutcome::Failed(FailReason::Timeout));
        assert_eq!(report.attempts, 0);
    }

    #[test]
    fn seen_states_do_not_count_as_valid() {
        // mul_comm a b then mul_comm b a returns to the root, which is seen;
        // with one try per state the search must still find another child.
        let th = Arc::new(Theory::group());
        let mut engine = BuiltinSession::builtin(th);
        let b = SearchBudget {
            tries_per_state: 1,
            ..budget()
        };
        let source = Fixed(vec!["rw [mul_comm b a]", "rw [mul_comm a b]", "rw [mul_assoc]"]);
        let report = prove(T, &mut engine, &source, &b);
        assert!(matches!(report.outcome, SearchOutcome::Proved(_)));

        let mut engine = BuiltinSession::builtin(Arc::new(Theory::group()));
        let attempts_mode = SearchBudget {
            tries_per_state: 1,
            mode: TryMode::Attempts,
            ..budget()
        };
        // the only attempt at the root fails, so nothing is left to explore
        let source = Fixed(vec!["rw [mul_comm x y]", "rw [mul_comm a b]"]);
        let report = prove(T, &mut engine, &source, &attempts_mode);
        assert_eq!(report.outcome, SearchOutcome::Failed(FailReason::Exhausted));
        assert_eq!(report.attempts, 1);
    }

    #[test]
    fn theorem_files_and_names() {
        let text = "theorem a (x : G) : x = x\n\n\ntheorem b\n  (x : G) : x * 1 = x\n";
        let blocks = parse_theorem_file(text);
        assert_eq!(blocks.len(), 2);
        assert_eq!(theorem_name(&blocks[1]), Some("b"));
        assert_eq!(theorem_name("theorem c(x : G) : x = x"), Some("c"));
        assert_eq!(theorem_name("example : 1 = 1"), None);
    }

    #[test]
    fn bench_accounting() {
        let th = Arc::new(Theory::group());
        let theorems = vec![
            T.to_string(),
            "theorem mul_one (a : G) : a * 1 = a".to_string(),
            "theorem bad (a : G) : a * = a".to_string(),
        ];
        let source = Fixed(vec!["rw [mul_comm a b]", "rw [mul_assoc]", "rw [mul_one]"]);
        let report = bench(
            &theorems,
            || Ok(BuiltinSession::builtin(th.clone())),
            &source,
            &budget(),
        );
        assert_eq!(report.summary(), "2/3");
        assert_eq!(report.proved() + report.entries.iter().filter(|e| !e.proved).count(), 3);
        assert!(report.to_jsonl().lines().nth(2).unwrap().contains("\"proved\":false"));
    }
}
