"""Wire protocol between the rollout service and a supervisor console.

Framing: each message is a UTF-8 JSON object prefixed with a 4-byte
big-endian byte length.  Every message carries ``type`` and ``protocol``
fields.  Field reference:

hello                 (console -> service)
    token: str        shared session secret
    console: str      free-form client name

resync                (service -> console, first message after hello)
    session: str
    phase: "idle" | "awaiting_human" | "autonomous_streaming"
    mode: "autonomous" | "supervisor"
    episode, t: int
    state: [float] | null         latest state seen by the service
    scene: dict | null            static geometry for rendering
    counters: {switches, supervisor_actions}
    thresholds: {tau_sup, tau_auto} | null
    a_low, a_high: [float]        action bounds (console-side preview clip)
    pending: request_intervention message | null

request_intervention  (service -> console)
    session: str
    episode, t: int
    state: [float]
    scene: dict
    robot_action: [float]
    thresholds: {tau_sup, tau_auto} | null

human_action          (console -> service)
    session: str
    t: int                        must echo the outstanding request
    action: [float]

mode_update           (service -> console, best effort)
    session: str
    mode: "autonomous" | "supervisor"
    episode, t: int
    counters: {switches, supervisor_actions}
    executed: [float] | null
    episode_end: bool

error                 (either direction)
    code: str         e.g. bad_token, version_mismatch, busy, stale_t,
                      no_pending, bad_action, timeout
    message: str
"""

from __future__ import annotations

import json
import struct

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 1 << 20

MESSAGE_TYPES = (
    "hello",
    "resync",
    "request_intervention",
    "human_action",
    "mode_update",
    "error",
)


class ProtocolError(ValueError):
    """Malformed frame or message."""


def encode_frame(message: dict) -> bytes:
    payload = json.dumps(message, separators=(",", ":"), sort_keys=True).encode("utf-8")
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds {MAX_FRAME_BYTES}")
    return struct.pack(">I", len(payload)) + payload


def decode_payload(payload: bytes) -> dict:
    try:
        message = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"payload is not JSON: {exc}") from exc
    if not isinstance(message, dict):
        raise ProtocolError("message must be a JSON object")
    return message


def _recv_exact(sock, n: int) -> bytes | None:
    """Read exactly n bytes; None on clean EOF at a frame boundary."""
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            if got == 0:
                return None
            raise ProtocolError("connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock) -> dict | None:
    """Read one message from a socket; None when the peer closed cleanly."""
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {length} bytes exceeds {MAX_FRAME_BYTES}")
    payload = _recv_exact(sock, length)
    if payload is None:
        raise ProtocolError("connection closed mid-frame")
    return decode_payload(payload)


def write_frame(sock, message: dict) -> None:
    sock.sendall(encode_frame(message))


def check_message(message: dict, expected_type: str | None = None) -> dict:
    kind = message.get("type")
    if kind not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {kind!r}")
    if message.get("protocol") != PROTOCOL_VERSION:
        raise ProtocolError(
            f"protocol version {message.get('protocol')!r}, expected {PROTOCOL_VERSION}"
        )
    if expected_type is not None and kind != expected_type:
        raise ProtocolError(f"expected {expected_type!r}, got {kind!r}")
    return message


def _base(kind: str) -> dict:
    return {"type": kind, "protocol": PROTOCOL_VERSION}


def hello(token: str, console: str = "console") -> dict:
    return {**_base("hello"), "token": token, "console": console}


def error(code: str, message: str) -> dict:
    return {**_base("error"), "code": code, "message": message}


def human_action(session: str, t: int, action) -> dict:
    return {**_base("human_action"), "session": session, "t": int(t),
            "action": [float(a) for a in action]}


def request_intervention(session, episode, t, state, scene, robot_action, thresholds) -> dict:
    return {
        **_base("request_intervention"),
        "session": session,
        "episode": int(episode),
        "t": int(t),
        "state": [float(s) for s in state],
        "scene": scene,
        "robot_action": None if robot_action is None else [float(a) for a in robot_action],
        "thresholds": thresholds,
    }


def mode_update(session, mode, episode, t, counters, executed=None, episode_end=False) -> dict:
    return {
        **_base("mode_update"),
        "session": session,
        "mode": mode,
        "episode": int(episode),
        "t": int(t),
        "counters": dict(counters),
        "executed": None if executed is None else [float(a) for a in executed],
        "episode_end": bool(episode_end),
    }


def resync(session, phase, mode, episode, t, state, scene, counters,
           thresholds, a_low, a_high, pending) -> dict:
    return {
        **_base("resync"),
        "session": session,
        "phase": phase,
        "mode": mode,
        "episode": int(episode),
        "t": int(t),
        "state": None if state is None else [float(s) for s in state],
        "scene": scene,
        "counters": dict(counters),
        "thresholds": thresholds,
        "a_low": [float(a) for a in a_low],
        "a_high": [float(a) for a in a_high],
        "pending": pending,
    }
