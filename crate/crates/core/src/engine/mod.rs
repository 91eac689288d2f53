//! Proof-engine sessions.
//!
//! A session owns one backend and a registry of every state it has handed
//! out. State ids are dense, start at 0 for the entered theorem and are never
//! reused. The builtin backend applies rewrites in-process; the external one
//! drives a child process over the line protocol in [`protocol`].

pub mod external;
pub mod protocol;

use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::expr::ExprError;
use crate::rewrite::{apply_text, ApplyResult};
use crate::state::{parse_theorem, CanonicalKey, ProofState};
use crate::theory::Theory;

pub use external::ExternalBackend;

pub type StateId = u64;

/// Environment variable naming the external engine command.
pub const ENGINE_CMD_ENV: &str = "NAVIGATOR_ENGINE_CMD";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("theorem does not parse: {0}")]
    Theorem(#[from] ExprError),
    #[error("engine rejected theorem: {0}")]
    Rejected(String),
    #[error("unknown state id {0}")]
    UnknownState(StateId),
    #[error("session already entered a theorem")]
    AlreadyEntered,
    #[error("engine startup failed: {0}")]
    Startup(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("engine timed out")]
    Timeout,
    #[error("engine process closed its output")]
    Closed,
    #[error("engine i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Builtin,
    External,
}

/// Outcome of one `apply`, as seen by callers of a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Applied {
    NewState { id: StateId, pretty: String },
    ProofFinished,
    Failure(String),
}

/// Uniform interface the explorer and prover drive.
pub trait ProofEngine {
    fn kind(&self) -> BackendKind;

    /// Register the theorem's initial state as id 0 and return its pretty text.
    fn enter(&mut self, theorem: &str) -> Result<(StateId, String), EngineError>;

    fn apply(&mut self, state: StateId, tactic: &str) -> Result<Applied, EngineError>;

    fn pretty(&self, state: StateId) -> Option<&str>;

    fn timing(&self) -> ApplyTiming;
}

impl<E: ProofEngine + ?Sized> ProofEngine for Box<E> {
    fn kind(&self) -> BackendKind {
        (**self).kind()
    }
    fn enter(&mut self, theorem: &str) -> Result<(StateId, String), EngineError> {
        (**self).enter(theorem)
    }
    fn apply(&mut self, state: StateId, tactic: &str) -> Result<Applied, EngineError> {
        (**self).apply(state, tactic)
    }
    fn pretty(&self, state: StateId) -> Option<&str> {
        (**self).pretty(state)
    }
    fn timing(&self) -> ApplyTiming {
        (**self).timing()
    }
}

/// Accumulated wall time spent inside backend `apply` calls.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ApplyTiming {
    pub applies: u64,
    pub total_seconds: f64,
}

impl ApplyTiming {
    pub fn mean_seconds(&self) -> f64 {
        if self.applies == 0 {
            0.0
        } else {
            self.total_seconds / self.applies as f64
        }
    }
}

pub enum BackendOutcome<H> {
    State(H, String),
    ProofFinished,
    Failure(String),
}

/// What a concrete engine must provide; sessions add id bookkeeping on top.
pub trait Backend {
    /// Backend-side reference to a state.
    type Handle;

    fn kind(&self) -> BackendKind;

    fn enter(&mut self, theorem: &str) -> Result<(Self::Handle, String), EngineError>;

    fn apply(
        &mut self,
        state: &Self::Handle,
        tactic: &str,
    ) -> Result<BackendOutcome<Self::Handle>, EngineError>;

    fn close(&mut self) -> Result<(), EngineError> {
        Ok(())
    }
}

struct Registered<H> {
    handle: H,
    pretty: String,
}

pub struct EngineSession<B: Backend> {
    backend: B,
    states: Vec<Registered<B::Handle>>,
    timing: ApplyTiming,
}

impl<B: Backend> EngineSession<B> {
    pub fn new(backend: B) -> Self {
        EngineSession {
            backend,
            states: Vec::new(),
            timing: ApplyTiming::default(),
        }
    }

    pub fn key(&self, state: StateId) -> Option<CanonicalKey> {
        self.pretty(state).map(|p| CanonicalKey(p.to_string()))
    }

    pub fn handle(&self, state: StateId) -> Option<&B::Handle> {
        self.states.get(state as usize).map(|r| &r.handle)
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn close(mut self) -> Result<(), EngineError> {
        self.backend.close()
    }
}

impl<B: Backend> ProofEngine for EngineSession<B> {
    fn kind(&self) -> BackendKind {
        self.backend.kind()
    }

    fn enter(&mut self, theorem: &str) -> Result<(StateId, String), EngineError> {
        if !self.states.is_empty() {
            return Err(EngineError::AlreadyEntered);
        }
        let (handle, pretty) = self.backend.enter(theorem)?;
        self.states.push(Registered {
            handle,
            pretty: pretty.clone(),
        });
        Ok((0, pretty))
    }

    fn apply(&mut self, state: StateId, tactic: &str) -> Result<Applied, EngineError> {
        let handle = &self
            .states
            .get(state as usize)
            .ok_or(EngineError::UnknownState(state))?
            .handle;
        let start = Instant::now();
        let outcome = self.backend.apply(handle, tactic);
        self.timing.applies += 1;
        self.timing.total_seconds += start.elapsed().as_secs_f64();
        Ok(match outcome? {
            BackendOutcome::State(handle, pretty) => {
                let id = self.states.len() as StateId;
                self.states.push(Registered {
                    handle,
                    pretty: pretty.clone(),
                });
                Applied::NewState { id, pretty }
            }
            BackendOutcome::ProofFinished => Applied::ProofFinished,
            BackendOutcome::Failure(reason) => Applied::Failure(reason),
        })
    }

    fn pretty(&self, state: StateId) -> Option<&str> {
        self.states.get(state as usize).map(|r| r.pretty.as_str())
    }

    fn timing(&self) -> ApplyTiming {
        self.timing
    }
}

/// In-process rewrite engine over a theory.
#[derive(Clone)]
pub struct BuiltinBackend {
    theory: Arc<Theory>,
}

impl BuiltinBackend {
    pub fn new(theory: Arc<Theory>) -> Self {
        BuiltinBackend { theory }
    }

    pub fn theory(&self) -> &Theory {
        &self.theory
    }
}

impl Backend for BuiltinBackend {
    type Handle = ProofState;

    fn kind(&self) -> BackendKind {
        BackendKind::Builtin
    }

    fn enter(&mut self, theorem: &str) -> Result<(ProofState, String), EngineError> {
        let header = parse_theorem(theorem, &self.theory.signature)?;
        let pretty = header.state.print(&self.theory.signature);
        Ok((header.state, pretty))
    }

    fn apply(
        &mut self,
        state: &ProofState,
        tactic: &str,
    ) -> Result<BackendOutcome<ProofState>, EngineError> {
        Ok(match apply_text(state, tactic, &self.theory) {
            ApplyResult::NewState(next) => {
                let pretty = next.print(&self.theory.signature);
                BackendOutcome::State(next, pretty)
            }
            ApplyResult::ProofFinished => BackendOutcome::ProofFinished,
            ApplyResult::Failure(f) => BackendOutcome::Failure(f.to_string()),
        })
    }
}

pub type BuiltinSession = EngineSession<BuiltinBackend>;
pub type ExternalSession = EngineSession<ExternalBackend>;

impl BuiltinSession {
    pub fn builtin(theory: Arc<Theory>) -> Self {
        EngineSession::new(BuiltinBackend::new(theory))
    }
}

/// Enter `theorem` on a fresh builtin session and apply `tactics` in order.
/// Returns the 1-based step at which the proof finished, if it did, and
/// `None` if any step fails or the proof is still open at the end.
pub fn replay(theory: Arc<Theory>, theorem: &str, tactics: &[String]) -> Option<usize> {
    let mut session = BuiltinSession::builtin(theory);
    let (mut current, _) = session.enter(theorem).ok()?;
    for (i, t) in tactics.iter().enumerate() {
        match session.apply(current, t).ok()? {
            Applied::NewState { id, .. } => current = id,
            Applied::ProofFinished => return Some(i + 1),
            Applied::Failure(_) => return None,
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> BuiltinSession {
        BuiltinSession::builtin(Arc::new(Theory::group()))
    }

    #[test]
    fn enter_registers_id_zero() {
        let mut s = session();
        let (id, pretty) = s
            .enter("theorem t (a b c : ℝ) : a * b * c = b * (a * c)")
            .unwrap();
        assert_eq!(id, 0);
        assert_eq!(pretty, "a b c : ℝ\n⊢ a * b * c = b * (a * c)");
        assert!(matches!(s.enter("theorem u (a : G) : a = a"), Err(EngineError::AlreadyEntered)));

        let mut s = session();
        let (_, pretty) = s.enter("theorem t (a : G) : a * 1 = a").unwrap();
        assert!(pretty.ends_with("⊢ a * 1 = a"));
    }

    #[test]
    fn malformed_header_is_an_error() {
        let mut s = session();
        match s.enter("theorem t (a : G) : a * = a") {
            Err(EngineError::Theorem(ExprError::Parse { offset, .. })) => assert_eq!(offset, 22),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn apply_assigns_monotone_ids() {
        let mut s = session();
        s.enter("theorem t (a b c : ℝ) : a * b * c = b * (a * c)").unwrap();
        let r = s.apply(0, "rw [mul_comm a b]").unwrap();
        assert_eq!(
            r,
            Applied::NewState {
                id: 1,
                pretty: "a b c : ℝ\n⊢ b * a * c = b * (a * c)".into()
            }
        );
        assert_eq!(s.apply(1, "rw [mul_assoc]").unwrap(), Applied::ProofFinished);
        assert_eq!(
            s.apply(0, "rw [mul_comm x y]").unwrap(),
            Applied::Failure("unbound variable in args".into())
        );
        // revisiting a state still gets a fresh id
        assert!(matches!(
            s.apply(0, "rw [mul_comm a b]").unwrap(),
            Applied::NewState { id: 2, .. }
        ));
        assert!(matches!(s.apply(9, "rw [mul_assoc]"), Err(EngineError::UnknownState(9))));
        assert_eq!(s.timing().applies, 4);
        assert_eq!(s.key(1).unwrap().as_str(), s.pretty(1).unwrap());
    }

    #[test]
    fn replay_counts_steps() {
        let th = Arc::new(Theory::group());
        let proof: Vec<String> = ["rw [mul_comm a b]", "rw [mul_assoc]"]
            .map(String::from)
            .to_vec();
        assert_eq!(
            replay(th.clone(), "theorem t (a b c : ℝ) : a * b * c = b * (a * c)", &proof),
            Some(2)
        );
        assert_eq!(
            replay(th, "theorem t (a b c : ℝ) : a * b * c = b * (a * c)", &proof[..1]),
            None
        );
    }
}
