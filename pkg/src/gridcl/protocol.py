"""JSON-lines wire protocol exposing the agent contract to other processes.

One UTF-8 JSON object per line, over the agent subprocess's stdio or a TCP
connection. The harness sends handshake / event / choose_actions /
receive_transitions / shutdown; the agent answers handshake_ack / actions /
ack, echoing the request's seq. Events and shutdown take no reply. Masked
slots travel as JSON null in both directions.
"""

from __future__ import annotations

import json
import selectors
import shlex
import socket
import subprocess
import time

import numpy as np

from .agents import Agent
from .gridworld import NUM_ACTIONS, VIEW_SIZE, Observation

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 60.0


class ProtocolError(RuntimeError):
    """Any violation of the wire protocol; aborts the lifetime."""


def observation_to_wire(obs: Observation | None):
    if obs is None:
        return None
    return {
        "view": obs.view.tolist(),
        "carried_type": obs.carried_type,
        "carried_color": obs.carried_color,
    }


def observation_from_wire(payload) -> Observation | None:
    if payload is None:
        return None
    if not isinstance(payload, dict) or set(payload) != {"view", "carried_type", "carried_color"}:
        raise ProtocolError(f"bad observation payload: {payload!r}")
    view = np.asarray(payload["view"], dtype=np.uint8)
    if view.shape != (VIEW_SIZE, VIEW_SIZE, 3):
        raise ProtocolError(f"observation view has shape {view.shape}, expected (7, 7, 3)")
    return Observation(view, int(payload["carried_type"]), int(payload["carried_color"]))


def transition_to_wire(transition):
    if transition is None:
        return None
    return {
        "observation": observation_to_wire(transition.observation),
        "action": transition.action,
        "reward": transition.reward,
        "done": transition.done,
        "next_observation": observation_to_wire(transition.next_observation),
    }


class _StdioTransport:
    """Line transport over a child process's stdin/stdout."""

    def __init__(self, command: str) -> None:
        argv = shlex.split(command)
        if not argv:
            raise ProtocolError("empty agent command")
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise ProtocolError(f"cannot launch agent {command!r}: {e}") from None
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)

    def send_line(self, line: str) -> None:
        if self._proc.poll() is not None:
            raise ProtocolError(f"agent process exited with code {self._proc.returncode}")
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise ProtocolError("agent process closed its stdin") from None

    def recv_line(self, timeout: float) -> str:
        deadline = time.monotonic() + timeout
        while True:
            budget = deadline - time.monotonic()
            if budget <= 0:
                raise ProtocolError(f"reply timeout after {timeout:g}s")
            if self._selector.select(budget):
                line = self._proc.stdout.readline()
                if line == "":
                    raise ProtocolError("agent process closed its stdout")
                return line.rstrip("\n")

    def close(self) -> None:
        self._selector.close()
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdout is not None:
            self._proc.stdout.close()


class _TcpTransport:
    """Line transport over a TCP connection to a listening agent."""

    def __init__(self, host: str, port: int, connect_timeout: float = 5.0) -> None:
        deadline = time.monotonic() + connect_timeout
        last_error: OSError | None = None
        while time.monotonic() < deadline:
            try:
                self._sock = socket.create_connection((host, port), timeout=1.0)
                break
            except OSError as e:
                last_error = e
                time.sleep(0.05)
        else:
            raise ProtocolError(f"cannot connect to agent at {host}:{port}: {last_error}")
        self._file = self._sock.makefile("rw", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        try:
            self._file.write(line + "\n")
            self._file.flush()
        except OSError as e:
            raise ProtocolError(f"agent connection lost: {e}") from None

    def recv_line(self, timeout: float) -> str:
        self._sock.settimeout(timeout)
        try:
            line = self._file.readline()
        except socket.timeout:
            raise ProtocolError(f"reply timeout after {timeout:g}s") from None
        except OSError as e:
            raise ProtocolError(f"agent connection lost: {e}") from None
        if line == "":
            raise ProtocolError("agent closed the connection")
        return line.rstrip("\n")

    def close(self) -> None:
        try:
            self._file.close()
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass


class ProtocolAgent(Agent):
    """Harness-side handle that drives an external agent over the wire.

    Every outbound message carries a fresh seq; replies must echo it.
    Exchanges on one handle are strictly alternating request/response.
    """

    def __init__(self, transport, num_envs: int, agent_seed: int, timeout: float = DEFAULT_TIMEOUT) -> None:
        super().__init__(agent_seed, num_envs)
        self._transport = transport
        self._timeout = timeout
        self._seq = 0
        self._closed = False
        reply = self._request(
            {
                "type": "handshake",
                "version": PROTOCOL_VERSION,
                "action_space": {"n": NUM_ACTIONS},
                "observation_space": {"view": [VIEW_SIZE, VIEW_SIZE, 3]},
                "num_envs": num_envs,
                "agent_seed": agent_seed,
            },
            expect="handshake_ack",
        )
        agent_name = reply.get("agent_name")
        if not isinstance(agent_name, str) or not agent_name:
            raise ProtocolError("handshake_ack must carry a non-empty agent_name")
        self.name = agent_name

    def _send(self, message: dict) -> int:
        seq = self._seq
        self._seq += 1
        message["seq"] = seq
        self._transport.send_line(json.dumps(message, separators=(",", ":")))
        return seq

    def _request(self, message: dict, expect: str) -> dict:
        seq = self._send(message)
        line = self._transport.recv_line(self._timeout)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(f"malformed reply line: {line[:200]!r}") from None
        if not isinstance(reply, dict):
            raise ProtocolError(f"reply must be an object, got {type(reply).__name__}")
        if reply.get("type") != expect:
            raise ProtocolError(f"expected reply type {expect!r}, got {reply.get('type')!r}")
        if reply.get("seq") != seq:
            raise ProtocolError(f"reply seq mismatch: expected {seq}, got {reply.get('seq')!r}")
        return reply

    def receive_event(self, event) -> None:
        fields: dict = {}
        if event.is_learning_allowed is not None:
            fields["is_learning_allowed"] = event.is_learning_allowed
        if event.task_name is not None:
            fields["task_name"] = event.task_name
        if event.variant_name is not None:
            fields["variant_name"] = event.variant_name
        if event.limit is not None:
            fields["limit"] = {event.limit.kind.value: event.limit.amount}
        self._send({"type": "event", "name": event.kind.value, "fields": fields})

    def choose_actions(self, observations):
        reply = self._request(
            {"type": "choose_actions", "observations": [observation_to_wire(o) for o in observations]},
            expect="actions",
        )
        actions = reply.get("actions")
        if not isinstance(actions, list) or len(actions) != len(observations):
            raise ProtocolError(f"actions must be a list of length {len(observations)}")
        for a in actions:
            if a is not None and (isinstance(a, bool) or not isinstance(a, int)):
                raise ProtocolError(f"action entries must be int or null, got {a!r}")
        return actions

    def receive_transitions(self, transitions) -> None:
        self._request(
            {"type": "receive_transitions", "transitions": [transition_to_wire(t) for t in transitions]},
            expect="ack",
        )

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._send({"type": "shutdown"})
        except ProtocolError:
            pass
        self._transport.close()


def serve_agent(transport_spec: str, num_envs: int, agent_seed: int, timeout: float = DEFAULT_TIMEOUT) -> ProtocolAgent:
    """Connect an external agent and complete the handshake.

    ``transport_spec`` is ``exec:<command line>`` to launch a subprocess
    speaking the protocol on stdio, or ``tcp:<host>:<port>`` to connect to
    an agent already listening there.
    """
    if transport_spec.startswith("exec:"):
        transport = _StdioTransport(transport_spec[len("exec:") :])
    elif transport_spec.startswith("tcp:"):
        rest = transport_spec[len("tcp:") :]
        host, sep, port = rest.rpartition(":")
        if not sep or not port.isdigit():
            raise ProtocolError(f"bad TCP address {rest!r}, expected host:port")
        transport = _TcpTransport(host or "127.0.0.1", int(port))
    else:
        raise ProtocolError(f"unknown transport {transport_spec!r}; use exec:... or tcp:host:port")
    try:
        return ProtocolAgent(transport, num_envs, agent_seed, timeout)
    except ProtocolError:
        transport.close()
        raise
