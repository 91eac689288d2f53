use std::collections::{HashMap, HashSet, VecDeque};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use navigator::embed::{cosine, embed};
use navigator::engine::protocol::{decode_message, encode_message, EngineMessage, Request, Response};
use navigator::engine::{Applied, ApplyTiming, BackendKind, EngineError, ProofEngine, StateId};
use navigator::explore::{explore, CandidateSource, ExploreBudget};
use navigator::template::{templatize, Vocabulary};
use navigator::{parse_term, print_term, Signature, StateContext, Term, Theory};

fn term_strategy() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["a", "b", "c", "x"]).prop_map(Term::var),
        Just(Term::constant("1")),
    ];
    leaf.prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Term::binary("*", l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Term::binary("+", l, r)),
            inner.prop_map(|t| Term::postfix("⁻¹", t)),
        ]
    })
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(t in term_strategy()) {
        let sig = Signature::group("G");
        let text = print_term(&t, &sig);
        let back = parse_term(&text, &sig).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(print_term(&back, &sig), text);
    }

    #[test]
    fn alias_spelling_parses_the_same(t in term_strategy()) {
        let sig = Signature::group("G");
        let text = print_term(&t, &sig);
        prop_assert_eq!(parse_term(&text.replace("⁻¹", "^-1"), &sig).unwrap(), t);
    }

    #[test]
    fn protocol_round_trip(
        id in any::<u64>(),
        state_id in any::<u64>(),
        text in "[ -~⊢⁻¹ℝ\n\"\\\\]{0,40}",
        pick in 0usize..8,
    ) {
        let m = match pick {
            0 => EngineMessage::Ready { engine: text.clone() },
            1 => EngineMessage::Request(Request::Enter { id, theorem: text.clone() }),
            2 => EngineMessage::Request(Request::Apply { id, state_id, tactic: text.clone() }),
            3 => EngineMessage::Request(Request::Close { id }),
            4 => EngineMessage::Response(Response::State { id, state_id, pretty: text.clone() }),
            5 => EngineMessage::Response(Response::ProofFinished { id }),
            6 => EngineMessage::Response(Response::Ack { id }),
            _ => EngineMessage::Response(Response::Error { id, error: text.clone() }),
        };
        let line = encode_message(&m);
        prop_assert!(line.ends_with('\n'));
        prop_assert_eq!(line.matches('\n').count(), 1);
        prop_assert_eq!(decode_message(&line).unwrap(), m);
    }

    #[test]
    fn templates_ignore_variable_names(
        names in prop::collection::hash_set("[a-z][a-z0-9]{0,3}", 2..4),
    ) {
        let names: Vec<String> = names.into_iter().collect();
        let vocab = Vocabulary::from_theory(&Theory::group());
        let reference = StateContext { variables: vec!["p".into(), "q".into()], hypotheses: vec![] };
        let renamed = StateContext { variables: names.clone(), hypotheses: vec![] };
        prop_assume!(names.iter().all(|n| !["rw", "at", "by", "with", "only", "use"].contains(&n.as_str())));
        let a = templatize("rw [mul_comm p q]", &reference, &vocab).unwrap();
        let b = templatize(&format!("rw [mul_comm {} {}]", names[0], names[1]), &renamed, &vocab).unwrap();
        prop_assert_eq!(a.template, b.template);
    }
}

#[test]
fn disjoint_token_strings_are_nearly_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let word = |prefix: char, rng: &mut ChaCha8Rng| {
        let len = rng.gen_range(2..8);
        let mut w = String::from(prefix);
        for _ in 0..len {
            w.push(rng.gen_range(b'a'..=b'z') as char);
        }
        w
    };
    let mut total = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(3..15);
        let a: Vec<String> = (0..n).map(|_| word('p', &mut rng)).collect();
        let m = rng.gen_range(3..15);
        let b: Vec<String> = (0..m).map(|_| word('q', &mut rng)).collect();
        total += cosine(&embed(&a.join(" ")), &embed(&b.join(" "))).abs();
    }
    let mean = total / 1000.0;
    assert!(mean < 0.2, "mean |cos| = {mean}");
}

/// Engine over a complete tree: `child{j}` moves to the j-th child until
/// the depth limit, after which every tactic fails.
struct TreeEngine {
    branching: u64,
    max_depth: u32,
    states: Vec<u64>,
}

fn depth_of(mut node: u64, branching: u64) -> u32 {
    let mut d = 0;
    while node > 0 {
        node = (node - 1) / branching;
        d += 1;
    }
    d
}

impl ProofEngine for TreeEngine {
    fn kind(&self) -> BackendKind {
        BackendKind::Builtin
    }
    fn enter(&mut self, _: &str) -> Result<(StateId, String), EngineError> {
        self.states = vec![0];
        Ok((0, "n0".into()))
    }
    fn apply(&mut self, state: StateId, tactic: &str) -> Result<Applied, EngineError> {
        let node = *self.states.get(state as usize).ok_or(EngineError::UnknownState(state))?;
        let j: u64 = tactic.strip_prefix("child").and_then(|s| s.parse().ok()).unwrap_or(u64::MAX);
        if j >= self.branching || depth_of(node, self.branching) >= self.max_depth {
            return Ok(Applied::Failure("no child".into()));
        }
        let child = node * self.branching + j + 1;
        self.states.push(child);
        Ok(Applied::NewState {
            id: self.states.len() as StateId - 1,
            pretty: format!("n{child}"),
        })
    }
    fn pretty(&self, _: StateId) -> Option<&str> {
        None
    }
    fn timing(&self) -> ApplyTiming {
        ApplyTiming::default()
    }
}

struct Children(u64);

impl CandidateSource for Children {
    fn candidates<'a>(&'a self, _: &str) -> Box<dyn Iterator<Item = String> + 'a> {
        Box::new((0..self.0).map(|j| format!("child{j}")))
    }
}

#[test]
fn exploration_order_is_breadth_first() {
    let (branching, max_depth) = (3, 4);
    let mut engine = TreeEngine {
        branching,
        max_depth,
        states: vec![],
    };
    let budget = ExploreBudget {
        max_transitions: 1_000_000,
        max_seconds: None,
        ..ExploreBudget::default()
    };
    let ex = explore("t", &mut engine, &Children(branching), &budget).unwrap();
    let got: Vec<&str> = ex.graph.nodes().iter().map(|n| n.pretty.as_str()).collect();

    // oracle: plain FIFO BFS on the same tree
    let mut expected = Vec::new();
    let mut queue = VecDeque::from([0u64]);
    let mut seen = HashSet::from([0u64]);
    while let Some(n) = queue.pop_front() {
        expected.push(format!("n{n}"));
        if depth_of(n, branching) < max_depth {
            for j in 0..branching {
                let c = n * branching + j + 1;
                if seen.insert(c) {
                    queue.push_back(c);
                }
            }
        }
    }
    assert_eq!(got, expected);
    let depths: Vec<u32> = ex
        .graph
        .nodes()
        .iter()
        .map(|n| depth_of(n.pretty[1..].parse().unwrap(), branching))
        .collect();
    assert!(depths.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(ex.graph.nodes().len(), (0..=max_depth).map(|d| 3usize.pow(d)).sum::<usize>());
    for (i, n) in ex.graph.nodes().iter().enumerate() {
        assert_eq!(n.idx, i);
    }
}

#[test]
fn repeated_states_are_queued_once() {
    // swapping twice returns to the root
    struct Diamond;
    impl CandidateSource for Diamond {
        fn candidates<'a>(&'a self, _: &str) -> Box<dyn Iterator<Item = String> + 'a> {
            Box::new(["rw [mul_comm a b]", "rw [mul_comm b a]", "rw [mul_assoc]"].into_iter().map(String::from))
        }
    }
    let mut engine = navigator::engine::BuiltinSession::builtin(std::sync::Arc::new(Theory::group()));
    let budget = ExploreBudget {
        max_transitions: 10_000,
        max_seconds: None,
        ..ExploreBudget::default()
    };
    let ex = explore("theorem t (a b c : G) : a * b * c = c * b * a", &mut engine, &Diamond, &budget).unwrap();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for n in ex.graph.nodes() {
        *counts.entry(n.key.as_str()).or_default() += 1;
    }
    assert!(counts.values().all(|&c| c == 1));
    // the swap back to the root is an edge, not a new node
    assert!(!ex.graph.parents(0).is_empty());
}
