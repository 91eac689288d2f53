//! Theorem-dataset generation by exploring proof-state transition graphs.
//!
//! Starting from a theorem, the explorer retrieves tactic templates close to
//! each state, instantiates them with the state's variables and hypotheses,
//! applies them through a proof engine and records the resulting graph.
//! Every state from which the proof-finished sink is reachable becomes a new
//! theorem whose proof is the shortest tactic path to the sink.

pub mod embed;
pub mod engine;
pub mod explore;
pub mod extract;
pub mod expr;
pub mod pipeline;
pub mod rewrite;
pub mod search;
pub mod state;
pub mod template;
pub mod theory;
pub mod throughput;

pub use expr::{parse_term, print_term, ExprError, Signature, Term};
pub use rewrite::{apply_tactic, is_tautology, match_pattern, parse_tactic, ApplyResult, TacticAst};
pub use state::{parse_state, parse_theorem, print_state, CanonicalKey, ProofState, StateContext};
pub use theory::{RewriteRule, Theory};
