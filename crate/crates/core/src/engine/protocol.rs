//! Newline-delimited JSON protocol spoken with external engines.
//!
//! ```text
//! <- {"ready":true,"engine":"leandojo"}
//! -> {"id":1,"cmd":"enter","theorem":"theorem t (a : G) : a * 1 = a"}
//! <- {"id":1,"ok":true,"result":"state","state_id":0,"pretty":"a : G\n⊢ a * 1 = a"}
//! -> {"id":2,"cmd":"apply","state_id":0,"tactic":"rw [mul_one]"}
//! <- {"id":2,"ok":true,"result":"proof_finished"}
//! -> {"id":3,"cmd":"close"}
//! <- {"id":3,"ok":true}
//! ```
//!
//! Failures are `{"id":k,"ok":false,"error":"…"}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed message: {0}")]
pub struct DecodeError(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    Enter { id: u64, theorem: String },
    Apply { id: u64, state_id: u64, tactic: String },
    Close { id: u64 },
}

impl Request {
    pub fn id(&self) -> u64 {
        match self {
            Request::Enter { id, .. } | Request::Apply { id, .. } | Request::Close { id } => *id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    State { id: u64, state_id: u64, pretty: String },
    ProofFinished { id: u64 },
    /// Successful reply carrying no result (acknowledges `close`).
    Ack { id: u64 },
    Error { id: u64, error: String },
}

impl Response {
    pub fn id(&self) -> u64 {
        match self {
            Response::State { id, .. }
            | Response::ProofFinished { id }
            | Response::Ack { id }
            | Response::Error { id, .. } => *id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineMessage {
    Ready { engine: String },
    Request(Request),
    Response(Response),
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum Cmd {
    Enter,
    Apply,
    Close,
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum ResultKind {
    State,
    ProofFinished,
}

// Field order in these structs is the wire order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReadyWire {
    ready: bool,
    engine: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestWire {
    id: u64,
    cmd: Cmd,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theorem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tactic: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseWire {
    id: u64,
    ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    result: Option<ResultKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pretty: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Wire {
    Ready(ReadyWire),
    Request(RequestWire),
    Response(ResponseWire),
}

/// Encode as one JSON object followed by `\n`.
pub fn encode_message(m: &EngineMessage) -> String {
    let mut line = match m {
        EngineMessage::Ready { engine } => serde_json::to_string(&ReadyWire {
            ready: true,
            engine: engine.clone(),
        }),
        EngineMessage::Request(r) => serde_json::to_string(&request_wire(r)),
        EngineMessage::Response(r) => serde_json::to_string(&response_wire(r)),
    }
    .expect("wire structs always serialize");
    line.push('\n');
    line
}

fn request_wire(r: &Request) -> RequestWire {
    let mut w = RequestWire {
        id: r.id(),
        cmd: Cmd::Close,
        theorem: None,
        state_id: None,
        tactic: None,
    };
    match r {
        Request::Enter { theorem, .. } => {
            w.cmd = Cmd::Enter;
            w.theorem = Some(theorem.clone());
        }
        Request::Apply {
            state_id, tactic, ..
        } => {
            w.cmd = Cmd::Apply;
            w.state_id = Some(*state_id);
            w.tactic = Some(tactic.clone());
        }
        Request::Close { .. } => {}
    }
    w
}

fn response_wire(r: &Response) -> ResponseWire {
    let mut w = ResponseWire {
        id: r.id(),
        ok: true,
        result: None,
        state_id: None,
        pretty: None,
        error: None,
    };
    match r {
        Response::State {
            state_id, pretty, ..
        } => {
            w.result = Some(ResultKind::State);
            w.state_id = Some(*state_id);
            w.pretty = Some(pretty.clone());
        }
        Response::ProofFinished { .. } => w.result = Some(ResultKind::ProofFinished),
        Response::Ack { .. } => {}
        Response::Error { error, .. } => {
            w.ok = false;
            w.error = Some(error.clone());
        }
    }
    w
}

pub fn decode_message(line: &str) -> Result<EngineMessage, DecodeError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.contains('\n') {
        return Err(DecodeError("embedded newline".into()));
    }
    let wire: Wire = serde_json::from_str(line).map_err(|e| DecodeError(e.to_string()))?;
    let bad = |m: &str| Err(DecodeError(m.to_string()));
    match wire {
        Wire::Ready(r) => {
            if !r.ready {
                return bad("handshake with ready=false");
            }
            Ok(EngineMessage::Ready { engine: r.engine })
        }
        Wire::Request(r) => {
            let req = match (r.cmd, r.theorem, r.state_id, r.tactic) {
                (Cmd::Enter, Some(theorem), None, None) => Request::Enter { id: r.id, theorem },
                (Cmd::Apply, None, Some(state_id), Some(tactic)) => Request::Apply {
                    id: r.id,
                    state_id,
                    tactic,
                },
                (Cmd::Close, None, None, None) => Request::Close { id: r.id },
                (cmd, ..) => return bad(&format!("wrong fields for {cmd:?} request")),
            };
            Ok(EngineMessage::Request(req))
        }
        Wire::Response(r) => {
            let resp = match (r.ok, r.result, r.state_id, r.pretty, r.error) {
                (true, Some(ResultKind::State), Some(state_id), Some(pretty), None) => {
                    Response::State {
                        id: r.id,
                        state_id,
                        pretty,
                    }
                }
                (true, Some(ResultKind::ProofFinished), None, None, None) => {
                    Response::ProofFinished { id: r.id }
                }
                (true, None, None, None, None) => Response::Ack { id: r.id },
                (false, None, None, None, Some(error)) => Response::Error { id: r.id, error },
                _ => return bad("inconsistent response fields"),
            };
            Ok(EngineMessage::Response(resp))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enter_request_layout() {
        let m = EngineMessage::Request(Request::Enter {
            id: 1,
            theorem: "theorem t (a : G) : a * 1 = a".into(),
        });
        assert_eq!(
            encode_message(&m),
            "{\"id\":1,\"cmd\":\"enter\",\"theorem\":\"theorem t (a : G) : a * 1 = a\"}\n"
        );
    }

    #[test]
    fn state_response_layout() {
        let m = EngineMessage::Response(Response::State {
            id: 2,
            state_id: 5,
            pretty: "a : G\n⊢ a = a".into(),
        });
        let line = encode_message(&m);
        assert_eq!(
            line,
            "{\"id\":2,\"ok\":true,\"result\":\"state\",\"state_id\":5,\"pretty\":\"a : G\\n⊢ a = a\"}\n"
        );
        assert_eq!(line.matches('\n').count(), 1);
        assert_eq!(decode_message(&line).unwrap(), m);
    }

    #[test]
    fn other_shapes() {
        let cases = [
            (
                EngineMessage::Ready {
                    engine: "leandojo".into(),
                },
                "{\"ready\":true,\"engine\":\"leandojo\"}",
            ),
            (
                EngineMessage::Response(Response::ProofFinished { id: 7 }),
                "{\"id\":7,\"ok\":true,\"result\":\"proof_finished\"}",
            ),
            (
                EngineMessage::Response(Response::Error {
                    id: 8,
                    error: "no match".into(),
                }),
                "{\"id\":8,\"ok\":false,\"error\":\"no match\"}",
            ),
            (
                EngineMessage::Request(Request::Apply {
                    id: 3,
                    state_id: 0,
                    tactic: "rw [h]".into(),
                }),
                "{\"id\":3,\"cmd\":\"apply\",\"state_id\":0,\"tactic\":\"rw [h]\"}",
            ),
            (
                EngineMessage::Request(Request::Close { id: 4 }),
                "{\"id\":4,\"cmd\":\"close\"}",
            ),
        ];
        for (m, text) in cases {
            assert_eq!(encode_message(&m).trim_end(), text);
            assert_eq!(decode_message(text).unwrap(), m);
        }
    }

    #[test]
    fn rejects_malformed_lines() {
        for line in [
            "",
            "not json",
            "{\"id\":1}",
            "{\"id\":1,\"cmd\":\"enter\"}",
            "{\"id\":1,\"cmd\":\"apply\",\"tactic\":\"rw [h]\"}",
            "{\"id\":1,\"cmd\":\"launch\"}",
            "{\"id\":1,\"ok\":true,\"result\":\"state\"}",
            "{\"id\":1,\"ok\":false}",
            "{\"id\":1,\"ok\":true,\"error\":\"x\"}",
            "{\"ready\":false,\"engine\":\"x\"}",
            "{\"id\":1,\"cmd\":\"close\",\"extra\":1}",
            "{\"id\":-1,\"cmd\":\"close\"}",
        ] {
            assert!(decode_message(line).is_err(), "accepted {line:?}");
        }
    }
}
