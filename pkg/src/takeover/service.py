"""Network bridge that lets a remote console act as the supervisor.

The service owns one session: a single console may be connected at a
time, the rollout thread blocks in :meth:`InterventionService.request_intervention`
until the console answers (or the timeout fires), and mode changes are
pushed to the console best-effort.  All session state lives behind one
condition variable; network reader threads and the rollout thread only
touch it under that lock.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from . import protocol
from .envs import clip_action
from .meta import Mode, StepContext, StepRecord, SupervisorUnavailable
from .safety import ThresholdPair


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 0
    health_port: int = 0
    token: str = "local"
    session: str = "session-0"
    timeout_s: float = 120.0
    decimation: int = 10
    handshake_timeout_s: float = 5.0


class InterventionService:
    """Serves one console session and exposes the SupervisorHandle calls."""

    def __init__(self, env, config: ServiceConfig | None = None,
                 thresholds: ThresholdPair | None = None):
        self.env = env
        self.config = config or ServiceConfig()
        self.thresholds = thresholds
        self.events: list[dict] = []

        self._cond = threading.Condition()
        self._running = False
        self._console: socket.socket | None = None
        self._console_name = None
        self._pending: dict | None = None
        self._answer: np.ndarray | None = None
        self._phase = "idle"
        self._mode = Mode.AUTONOMOUS
        self._counters = {"switches": 0, "supervisor_actions": 0}
        self._episode = 0
        self._t = 0
        self._last_state = None
        self._auto_steps = 0

        self._listener: socket.socket | None = None
        self._health: ThreadingHTTPServer | None = None
        self._threads: list[threading.Thread] = []

    # -- lifecycle ---------------------------------------------------------

    def serve(self) -> "InterventionService":
        cfg = self.config
        self._listener = socket.create_server((cfg.host, cfg.port))
        self._listener.settimeout(0.25)  # lets stop() interrupt a blocked accept
        self._health = ThreadingHTTPServer((cfg.host, cfg.health_port), self._health_handler())
        self._running = True
        for target in (self._accept_loop, self._health.serve_forever):
            thread = threading.Thread(target=target, daemon=True)
            thread.start()
            self._threads.append(thread)
        return self

    def stop(self) -> None:
        with self._cond:
            self._running = False
            self._cond.notify_all()
            console, self._console = self._console, None
        for sock in (console, self._listener):
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass
        if self._health is not None:
            self._health.shutdown()
            self._health.server_close()
        for thread in self._threads:
            thread.join(timeout=2.0)

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    @property
    def health_address(self) -> tuple[str, int]:
        return self._health.server_address[:2]

    # -- console side ------------------------------------------------------

    def _accept_loop(self) -> None:
        while self._running:
            try:
                conn, _ = self._listener.accept()
            except TimeoutError:
                continue
            except OSError:
                return
            conn.settimeout(None)
            threading.Thread(target=self._handle_console, args=(conn,), daemon=True).start()

    def _handle_console(self, conn: socket.socket) -> None:
        try:
            conn.settimeout(self.config.handshake_timeout_s)
            first = protocol.read_frame(conn)
            if first is None:
                conn.close()
                return
            if first.get("type") != "hello":
                self._refuse(conn, "bad_handshake", "expected hello")
                return
            if first.get("protocol") != protocol.PROTOCOL_VERSION:
                self._refuse(conn, "version_mismatch",
                             f"service speaks protocol {protocol.PROTOCOL_VERSION}")
                return
            if first.get("token") != self.config.token:
                self._refuse(conn, "bad_token", "session token mismatch")
                return
        except (protocol.ProtocolError, OSError):
            conn.close()
            return

        conn.settimeout(None)
        with self._cond:
            if self._console is not None:
                self._refuse(conn, "busy", "another console is already connected")
                return
            self._console = conn
            self._console_name = first.get("console", "console")
            self._log_event("console_connected", name=self._console_name)
            # resync first, then re-prompt if a request is outstanding
            self._send_locked(self._resync_message())
            if self._pending is not None:
                self._send_locked(self._pending)
        self._reader_loop(conn)

    def _refuse(self, conn: socket.socket, code: str, message: str) -> None:
        try:
            protocol.write_frame(conn, protocol.error(code, message))
        except OSError:
            pass
        conn.close()

    def _reader_loop(self, conn: socket.socket) -> None:
        while True:
            try:
                message = protocol.read_frame(conn)
            except (protocol.ProtocolError, OSError):
                message = None
            if message is None:
                break
            try:
                protocol.check_message(message)
            except protocol.ProtocolError as exc:
                with self._cond:
                    self._send_locked(protocol.error("bad_message", str(exc)))
                continue
            if message["type"] == "human_action":
                self._on_human_action(message)
            else:
                with self._cond:
                    self._send_locked(protocol.error(
                        "unexpected", f"service does not accept {message['type']}"))
        with self._cond:
            if self._console is conn:
                self._console = None
                self._log_event("console_disconnected", name=self._console_name)
        try:
            conn.close()
        except OSError:
            pass

    def _on_human_action(self, message: dict) -> None:
        with self._cond:
            if self._pending is None:
                self._send_locked(protocol.error("no_pending", "no outstanding request"))
                return
            expected_t = self._pending["t"]
            if message.get("t") != expected_t:
                self._send_locked(protocol.error(
                    "stale_t", f"expected t={expected_t}, got t={message.get('t')}"))
                self._send_locked(self._pending)  # re-prompt
                self._log_event("stale_reply", t=message.get("t"), expected=expected_t)
                return
            try:
                action = clip_action(np.asarray(message["action"], dtype=float), self.env.spec)
            except (ValueError, TypeError, KeyError) as exc:
                self._send_locked(protocol.error("bad_action", str(exc)))
                self._send_locked(self._pending)
                return
            self._answer = action
            self._pending = None
            self._log_event("action_received", t=expected_t, episode=self._episode)
            self._cond.notify_all()

    # -- rollout (SupervisorHandle) side ------------------------------------

    def request_intervention(self, state, ctx: StepContext) -> np.ndarray:
        cfg = self.config
        thresholds = None
        if self.thresholds is not None:
            thresholds = {"tau_sup": self.thresholds.tau_sup,
                          "tau_auto": self.thresholds.tau_auto}
        request = protocol.request_intervention(
            cfg.session, ctx.episode, ctx.t, state, self.env.scene(),
            ctx.robot_action, thresholds)
        with self._cond:
            if self._pending is not None:
                raise RuntimeError("a request is already outstanding for this session")
            self._pending = request
            self._answer = None
            self._phase = "awaiting_human"
            self._episode = ctx.episode
            self._t = ctx.t
            self._last_state = np.array(state, dtype=float)
            self._log_event("request_sent", t=ctx.t, episode=ctx.episode)
            self._send_locked(request)
            deadline = time.monotonic() + cfg.timeout_s
            while self._answer is None:
                if not self._running:
                    self._pending = None
                    raise SupervisorUnavailable("service stopped while awaiting a human action")
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    self._pending = None
                    self._phase = "autonomous_streaming"
                    self._log_event("request_timeout", t=ctx.t, episode=ctx.episode)
                    self._send_locked(protocol.error(
                        "timeout", f"no action for t={ctx.t} within {cfg.timeout_s}s"))
                    raise SupervisorUnavailable(
                        f"no human action for t={ctx.t} within {cfg.timeout_s}s")
                self._cond.wait(remaining)
            answer, self._answer = self._answer, None
            self._phase = "autonomous_streaming"
            return answer

    # meta.run_online_epoch notifications; also the SupervisorHandle surface
    action = request_intervention

    def notify_step(self, record: StepRecord, counters: dict) -> None:
        with self._cond:
            self._counters = dict(counters)
            self._t = record.t
            flipped = record.mode is not self._mode
            self._mode = record.mode
            if flipped:
                self._auto_steps = 0
            send = flipped
            if record.mode is Mode.AUTONOMOUS:
                self._auto_steps += 1
                send = send or self._auto_steps % self.config.decimation == 0
            if self._pending is None:
                self._phase = "autonomous_streaming"
            if send:
                self._send_locked(protocol.mode_update(
                    self.config.session, record.mode.value, self._episode, record.t,
                    counters, executed=record.executed_action))

    def notify_episode_end(self, counters: dict) -> None:
        with self._cond:
            self._counters = dict(counters)
            self._mode = Mode.AUTONOMOUS
            self._auto_steps = 0
            self._send_locked(protocol.mode_update(
                self.config.session, Mode.AUTONOMOUS.value, self._episode, self._t,
                counters, episode_end=True))
            self._episode += 1

    # -- internals -----------------------------------------------------------

    def _resync_message(self) -> dict:
        thresholds = None
        if self.thresholds is not None:
            thresholds = {"tau_sup": self.thresholds.tau_sup,
                          "tau_auto": self.thresholds.tau_auto}
        spec = self.env.spec
        return protocol.resync(
            self.config.session, self._phase, self._mode.value, self._episode, self._t,
            self._last_state, self.env.scene(), self._counters, thresholds,
            spec.low, spec.high, self._pending)

    def _send_locked(self, message: dict) -> None:
        """Best-effort push to the console; drops the console on failure."""
        if self._console is None:
            return
        try:
            protocol.write_frame(self._console, message)
        except OSError:
            try:
                self._console.close()
            except OSError:
                pass
            self._console = None

    def _log_event(self, kind: str, **detail) -> None:
        self.events.append({"wall": time.time(), "kind": kind, **detail})

    def _health_handler(self):
        service = self

        class HealthHandler(BaseHTTPRequestHandler):
            def do_GET(self):
                if self.path not in ("/", "/health"):
                    self.send_error(404)
                    return
                with service._cond:
                    body = json.dumps({
                        "session": service.config.session,
                        "phase": service._phase,
                        "connected": service._console is not None,
                        "episode": service._episode,
                        "t": service._t,
                        "protocol": protocol.PROTOCOL_VERSION,
                    }).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        return HealthHandler


class RemoteSupervisor:
    """SupervisorHandle that forwards every call to an InterventionService."""

    kind = "remote"

    def __init__(self, service: InterventionService):
        self.service = service

    def set_thresholds(self, thresholds: ThresholdPair) -> None:
        self.service.thresholds = thresholds

    def action(self, state, ctx: StepContext) -> np.ndarray:
        return self.service.request_intervention(state, ctx)

    def notify_step(self, record: StepRecord, counters: dict) -> None:
        self.service.notify_step(record, counters)

    def notify_episode_end(self, counters: dict) -> None:
        self.service.notify_episode_end(counters)


class HybridSupervisor(RemoteSupervisor):
    """Remote supervisor that answers offline demonstration collection with
    the environment's control law instead of bothering the console.

    Offline collection is the only caller that passes no robot action, so
    that's the discriminator."""

    def __init__(self, env, service: InterventionService):
        super().__init__(service)
        self.env = env

    def action(self, state, ctx: StepContext) -> np.ndarray:
        if ctx.robot_action is None:
            return self.env.supervisor_action(state)
        return self.service.request_intervention(state, ctx)


class ConsoleRejected(RuntimeError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class ConsoleClient:
    """Scripted console for tests and protocol-equivalence checks.

    ``policy(state, request) -> action`` decides replies; the default
    echoes the robot's proposed action back.  ``wrong_t_replies`` makes
    the first n replies carry a stale timestep to exercise re-prompts.
    """

    def __init__(self, address, token: str, policy=None, name: str = "scripted",
                 wrong_t_replies: int = 0):
        self.address = address
        self.token = token
        self.policy = policy or (lambda state, request: request["robot_action"])
        self.name = name
        self._wrong_t_left = wrong_t_replies
        self.sock: socket.socket | None = None
        self.resyncs: list[dict] = []
        self.updates: list[dict] = []
        self.errors: list[dict] = []
        self.requests: list[dict] = []
        self.answered: list[int] = []
        self._thread: threading.Thread | None = None

    def connect(self, timeout: float = 5.0) -> dict:
        self.sock = socket.create_connection(self.address, timeout=timeout)
        protocol.write_frame(self.sock, protocol.hello(self.token, self.name))
        first = protocol.read_frame(self.sock)
        if first is None:
            raise ConsoleRejected("closed", "service closed the connection")
        protocol.check_message(first)
        if first["type"] == "error":
            self.sock.close()
            raise ConsoleRejected(first["code"], first["message"])
        if first["type"] != "resync":
            raise protocol.ProtocolError(f"expected resync first, got {first['type']}")
        self.resyncs.append(first)
        self.session = first["session"]
        self.sock.settimeout(None)
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()
        return first

    def _loop(self) -> None:
        while True:
            try:
                message = protocol.read_frame(self.sock)
            except (protocol.ProtocolError, OSError):
                break
            if message is None:
                break
            kind = message.get("type")
            if kind == "request_intervention":
                self.requests.append(message)
                self._answer(message)
            elif kind == "mode_update":
                self.updates.append(message)
            elif kind == "resync":
                self.resyncs.append(message)
            elif kind == "error":
                self.errors.append(message)

    def _answer(self, request: dict) -> None:
        if self._wrong_t_left > 0:
            self._wrong_t_left -= 1
            reply = protocol.human_action(self.session, request["t"] + 1, request["robot_action"])
        else:
            action = self.policy(np.asarray(request["state"], dtype=float), request)
            reply = protocol.human_action(self.session, request["t"], action)
            self.answered.append(request["t"])
        try:
            protocol.write_frame(self.sock, reply)
        except OSError:
            pass

    def close(self) -> None:
        if self.sock is not None:
            try:
                self.sock.close()
            except OSError:
                pass
        if self._thread is not None:
            self._thread.join(timeout=2.0)
