#!/usr/bin/env python3
"""Scripted engine for protocol tests.

States are strings; `enter` creates "⊢ <theorem goal>", and tactics act as:
  step     -> new state with a prime appended
  finish   -> proof_finished
  fail     -> error response
  hang     -> sleeps 3 s before answering
  garbage  -> writes a non-JSON line
"""
import json
import sys
import time

MODE = sys.argv[1] if len(sys.argv) > 1 else "ok"


def send(obj):
    sys.stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")
    sys.stdout.flush()


if MODE == "no-handshake":
    time.sleep(30)
    sys.exit(0)
if MODE == "bad-handshake":
    send({"hello": 1})
    sys.exit(0)

send({"ready": True, "engine": "mock"})
states = []
for line in sys.stdin:
    req = json.loads(line)
    rid = req["id"]
    cmd = req["cmd"]
    if cmd == "enter":
        theorem = req["theorem"]
        if "bad" in theorem:
            send({"id": rid, "ok": False, "error": "cannot elaborate"})
            continue
        goal = theorem.split(":", 1)[-1].strip() if ":" in theorem else theorem
        states.append("x y : α\n⊢ " + goal)
        send({"id": rid, "ok": True, "result": "state", "state_id": 0, "pretty": states[0]})
    elif cmd == "apply":
        sid = req["state_id"]
        tactic = req["tactic"]
        if sid >= len(states):
            send({"id": rid, "ok": False, "error": "unknown state"})
        elif tactic == "finish":
            send({"id": rid, "ok": True, "result": "proof_finished"})
        elif tactic == "fail":
            send({"id": rid, "ok": False, "error": "tactic failed"})
        elif tactic == "hang":
            time.sleep(3)
            send({"id": rid, "ok": False, "error": "too slow"})
        elif tactic == "garbage":
            sys.stdout.write("this is not json\n")
            sys.stdout.flush()
        else:
            states.append(states[sid] + "'")
            send({"id": rid, "ok": True, "result": "state",
                  "state_id": len(states) - 1, "pretty": states[-1]})
    elif cmd == "close":
        send({"id": rid, "ok": True})
        sys.exit(0)
