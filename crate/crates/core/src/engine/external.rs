//! Child-process backend speaking the line protocol over stdin/stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};

use super::protocol::{decode_message, encode_message, EngineMessage, Request, Response};
use super::{Backend, BackendKind, BackendOutcome, EngineError, ENGINE_CMD_ENV};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

pub struct ExternalBackend {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    timeout: Duration,
    engine: String,
}

impl ExternalBackend {
    /// Spawn `command` through `sh -c` and wait for the ready handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, EngineError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EngineError::Startup(format!("spawning `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut backend = ExternalBackend {
            child,
            stdin,
            lines,
            next_id: 1,
            timeout,
            engine: String::new(),
        };
        let first = match backend.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(EngineError::Startup(e.to_string())),
            Err(RecvTimeoutError::Timeout) => {
                return Err(EngineError::Startup("no handshake before timeout".into()))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(EngineError::Startup("engine exited before handshake".into()))
            }
        };
        match decode_message(&first) {
            Ok(EngineMessage::Ready { engine }) => backend.engine = engine,
            Ok(other) => {
                return Err(EngineError::Startup(format!("expected handshake, got {other:?}")))
            }
            Err(e) => return Err(EngineError::Startup(e.to_string())),
        }
        debug!("external engine `{}` ready", backend.engine);
        Ok(backend)
    }

    /// Spawn the command named by `NAVIGATOR_ENGINE_CMD`.
    pub fn from_env(timeout: Duration) -> Result<Self, EngineError> {
        let cmd = std::env::var(ENGINE_CMD_ENV)
            .map_err(|_| EngineError::Startup(format!("{ENGINE_CMD_ENV} is not set")))?;
        ExternalBackend::spawn(&cmd, timeout)
    }

    pub fn engine_name(&self) -> &str {
        &self.engine
    }

    /// Send one request and wait for its response. `Ok(None)` means the
    /// per-request timeout elapsed; a late reply is discarded by id later.
    fn request(&mut self, build: impl FnOnce(u64) -> Request) -> Result<Option<Response>, EngineError> {
        let id = self.next_id;
        self.next_id += 1;
        let line = encode_message(&EngineMessage::Request(build(id)));
        self.stdin.write_all(line.as_bytes())?;
        self.stdin.flush()?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(remaining) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(EngineError::Io(e)),
                Err(RecvTimeoutError::Timeout) => return Ok(None),
                Err(RecvTimeoutError::Disconnected) => return Err(EngineError::Closed),
            };
            let msg = decode_message(&line).map_err(|e| EngineError::Protocol(e.to_string()))?;
            match msg {
                EngineMessage::Response(r) if r.id() == id => return Ok(Some(r)),
                EngineMessage::Response(r) if r.id() < id => {
                    warn!("discarding late response {}", r.id());
                }
                other => {
                    return Err(EngineError::Protocol(format!(
                        "unexpected message while waiting for {id}: {other:?}"
                    )))
                }
            }
        }
    }
}

impl Backend for ExternalBackend {
    type Handle = u64;

    fn kind(&self) -> BackendKind {
        BackendKind::External
    }

    fn enter(&mut self, theorem: &str) -> Result<(u64, String), EngineError> {
        let theorem = theorem.to_string();
        match self.request(|id| Request::Enter { id, theorem })? {
            Some(Response::State {
                state_id, pretty, ..
            }) => Ok((state_id, pretty)),
            Some(Response::Error { error, .. }) => Err(EngineError::Rejected(error)),
            Some(other) => Err(EngineError::Protocol(format!("bad reply to enter: {other:?}"))),
            None => Err(EngineError::Timeout),
        }
    }

    fn apply(&mut self, state: &u64, tactic: &str) -> Result<BackendOutcome<u64>, EngineError> {
        let tactic = tactic.to_string();
        let state_id = *state;
        Ok(
            match self.request(|id| Request::Apply {
                id,
                state_id,
                tactic,
            })? {
                Some(Response::State {
                    state_id, pretty, ..
                }) => BackendOutcome::State(state_id, pretty),
                Some(Response::ProofFinished { .. }) => BackendOutcome::ProofFinished,
                Some(Response::Error { error, .. }) => BackendOutcome::Failure(error),
                Some(Response::Ack { .. }) => {
                    return Err(EngineError::Protocol("bare ack to apply".into()))
                }
                None => BackendOutcome::Failure("timeout".into()),
            },
        )
    }

    fn close(&mut self) -> Result<(), EngineError> {
        let reply = self.request(|id| Request::Close { id });
        let _ = self.child.wait();
        match reply {
            Ok(_) | Err(EngineError::Closed) => Ok(()),
            Err(e) => Err(e),
        }
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
