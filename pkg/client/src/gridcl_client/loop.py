"""The client message loop: validate, dispatch, reply, repeat.

One JSON object per line in each direction. Every server message carries a
seq; replies echo it. Incoming messages are validated against the same
schema the harness enforces on its side, and the user agent's outputs are
checked against the masking contract before anything is sent back.
"""

from __future__ import annotations

import json
import socket
import sys
from typing import Iterable, TextIO

from .agent import NUM_ACTIONS, Agent

PROTOCOL_VERSION = 1

VIEW_SIZE = 7
# Per-channel value ceilings: object type, color, door state.
_CHANNEL_MAX = (8, 6, 3)

_EVENT_NAMES = {
    "block_start",
    "block_end",
    "task_start",
    "task_end",
    "task_variant_start",
    "task_variant_end",
}


class MessageError(ValueError):
    """A message violated the wire schema (either direction)."""


def _fail(message: str) -> MessageError:
    return MessageError(message)


def _check_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _fail(f"{what} must be an integer, got {value!r}")
    return value


def validate_observation(payload, where: str) -> None:
    if payload is None:
        return
    if not isinstance(payload, dict) or set(payload) != {"view", "carried_type", "carried_color"}:
        raise _fail(f"{where}: observation must have view/carried_type/carried_color")
    view = payload["view"]
    if not isinstance(view, list) or len(view) != VIEW_SIZE:
        raise _fail(f"{where}: view must be a {VIEW_SIZE}x{VIEW_SIZE}x3 array")
    for column in view:
        if not isinstance(column, list) or len(column) != VIEW_SIZE:
            raise _fail(f"{where}: view must be a {VIEW_SIZE}x{VIEW_SIZE}x3 array")
        for cell in column:
            if not isinstance(cell, list) or len(cell) != 3:
                raise _fail(f"{where}: view must be a {VIEW_SIZE}x{VIEW_SIZE}x3 array")
            for channel, value in enumerate(cell):
                _check_int(value, f"{where}: view cell")
                if not 0 <= value <= _CHANNEL_MAX[channel]:
                    raise _fail(f"{where}: view channel {channel} value {value} out of range")
    _check_int(payload["carried_type"], f"{where}: carried_type")
    _check_int(payload["carried_color"], f"{where}: carried_color")


def validate_transition(payload, where: str) -> None:
    if payload is None:
        return
    if not isinstance(payload, dict) or set(payload) != {
        "observation",
        "action",
        "reward",
        "done",
        "next_observation",
    }:
        raise _fail(f"{where}: transition must be the five-field tuple")
    validate_observation(payload["observation"], where)
    validate_observation(payload["next_observation"], where)
    if payload["observation"] is None or payload["next_observation"] is None:
        raise _fail(f"{where}: transition observations cannot be null")
    action = _check_int(payload["action"], f"{where}: action")
    if not 0 <= action < NUM_ACTIONS:
        raise _fail(f"{where}: action {action} out of range")
    if payload["reward"] is not None and not isinstance(payload["reward"], (int, float)):
        raise _fail(f"{where}: reward must be a number or null")
    if not isinstance(payload["done"], bool):
        raise _fail(f"{where}: done must be a boolean")


def parse_message(line: str) -> dict:
    try:
        message = json.loads(line)
    except json.JSONDecodeError:
        raise _fail(f"malformed JSON: {line[:120]!r}") from None
    if not isinstance(message, dict):
        raise _fail("message must be a JSON object")
    if "type" not in message:
        raise _fail("message missing 'type'")
    if "seq" not in message:
        raise _fail("message missing 'seq'")
    _check_int(message["seq"], "seq")
    return message


def _validate_actions(actions, observations) -> list[int | None]:
    if not isinstance(actions, list) or len(actions) != len(observations):
        raise _fail(f"agent returned {actions!r}; expected a list of length {len(observations)}")
    for i, (action, obs) in enumerate(zip(actions, observations)):
        if obs is None:
            if action is not None:
                raise _fail(f"agent returned an action for masked slot {i}")
        else:
            if action is None:
                raise _fail(f"agent returned no action for unmasked slot {i}")
            _check_int(action, f"slot {i} action")
            if not 0 <= action < NUM_ACTIONS:
                raise _fail(f"slot {i} action {action} out of range")
    return actions


def _dispatch_event(agent: Agent, message: dict) -> None:
    name = message.get("name")
    if name not in _EVENT_NAMES:
        raise _fail(f"unknown event name {name!r}")
    fields = message.get("fields", {})
    if not isinstance(fields, dict):
        raise _fail("event fields must be an object")
    if name == "block_start":
        if not isinstance(fields.get("is_learning_allowed"), bool):
            raise _fail("block_start requires boolean is_learning_allowed")
        agent.block_start(fields["is_learning_allowed"])
    elif name == "block_end":
        agent.block_end()
    elif name == "task_start":
        agent.task_start(fields.get("task_name"))
    elif name == "task_end":
        agent.task_end()
    elif name == "task_variant_start":
        agent.task_variant_start(fields.get("task_name"), fields.get("variant_name"), fields.get("limit"))
    else:
        agent.task_variant_end()


def run_agent_loop(agent: Agent, transport: "Transport") -> int:
    """Serve one harness connection; returns the process exit status.

    0 after a clean shutdown; 1 on any schema or contract violation, with
    a diagnostic on standard error.
    """
    ready = False
    try:
        for line in transport.lines():
            if not line.strip():
                continue
            message = parse_message(line)
            kind = message["type"]
            seq = message["seq"]
            if kind == "handshake":
                version = message.get("version")
                if version != PROTOCOL_VERSION:
                    raise _fail(f"unsupported protocol version {version!r}")
                num_envs = _check_int(message.get("num_envs"), "num_envs")
                if num_envs < 1:
                    raise _fail(f"num_envs must be >= 1, got {num_envs}")
                agent_seed = _check_int(message.get("agent_seed"), "agent_seed")
                agent.setup(num_envs, agent_seed)
                ready = True
                transport.send({"type": "handshake_ack", "seq": seq, "agent_name": agent.name})
            elif not ready:
                raise _fail(f"{kind!r} before handshake")
            elif kind == "event":
                _dispatch_event(agent, message)
            elif kind == "choose_actions":
                observations = message.get("observations")
                if not isinstance(observations, list):
                    raise _fail("choose_actions requires an observations list")
                for i, obs in enumerate(observations):
                    validate_observation(obs, f"observations[{i}]")
                actions = _validate_actions(agent.choose_actions(observations), observations)
                transport.send({"type": "actions", "seq": seq, "actions": actions})
            elif kind == "receive_transitions":
                transitions = message.get("transitions")
                if not isinstance(transitions, list):
                    raise _fail("receive_transitions requires a transitions list")
                for i, tr in enumerate(transitions):
                    validate_transition(tr, f"transitions[{i}]")
                agent.receive_transitions(transitions)
                transport.send({"type": "ack", "seq": seq})
            elif kind == "shutdown":
                return 0
            else:
                raise _fail(f"unknown message type {kind!r}")
    except MessageError as e:
        print(f"gridcl-client: {e}", file=sys.stderr)
        return 1
    print("gridcl-client: server closed the stream without shutdown", file=sys.stderr)
    return 1


class StdioTransport:
    """Lines over this process's stdin/stdout (the default when launched
    by the harness)."""

    def __init__(self, stdin: TextIO | None = None, stdout: TextIO | None = None) -> None:
        self._in = stdin if stdin is not None else sys.stdin
        self._out = stdout if stdout is not None else sys.stdout

    def lines(self) -> Iterable[str]:
        return self._in

    def send(self, message: dict) -> None:
        self._out.write(json.dumps(message, separators=(",", ":")) + "\n")
        self._out.flush()


class TcpListenTransport:
    """Listen on host:port and serve exactly one harness connection."""

    def __init__(self, host: str, port: int) -> None:
        self._listener = socket.create_server((host, port))
        self._conn = None
        self._file = None

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    def lines(self) -> Iterable[str]:
        self._conn, _ = self._listener.accept()
        self._listener.close()
        self._file = self._conn.makefile("rw", encoding="utf-8", newline="\n")
        return self._file

    def send(self, message: dict) -> None:
        self._file.write(json.dumps(message, separators=(",", ":")) + "\n")
        self._file.flush()

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
        if self._conn is not None:
            self._conn.close()
