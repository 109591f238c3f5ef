"""Message-loop behavior against scripted server transcripts."""

from __future__ import annotations

import io
import json
import socket
import threading

import pytest

from gridcl_client import MessageError, RandomAgent, StdioTransport, TcpListenTransport, run_agent_loop
from gridcl_client.agent import Agent
from gridcl_client.loop import parse_message, validate_observation, validate_transition
from gridcl_client.prng import Pcg32


def _obs(fill=0):
    return {"view": [[[fill % 9, 0, 0] for _ in range(7)] for _ in range(7)], "carried_type": 0, "carried_color": 0}


def _handshake(seq=0, num_envs=1, agent_seed=5):
    return {
        "type": "handshake",
        "seq": seq,
        "version": 1,
        "action_space": {"n": 7},
        "observation_space": {"view": [7, 7, 3]},
        "num_envs": num_envs,
        "agent_seed": agent_seed,
    }


def _run_script(agent, messages):
    """Feed message lines to the loop; return (exit status, reply dicts)."""
    stdin = io.StringIO("".join(json.dumps(m) + "\n" if isinstance(m, dict) else m + "\n" for m in messages))
    stdout = io.StringIO()
    status = run_agent_loop(agent, StdioTransport(stdin, stdout))
    replies = [json.loads(line) for line in stdout.getvalue().splitlines()]
    return status, replies


def test_happy_path_full_exchange():
    agent = RandomAgent()
    obs = _obs()
    status, replies = _run_script(
        agent,
        [
            _handshake(0, num_envs=2, agent_seed=9),
            {"type": "event", "seq": 1, "name": "block_start", "fields": {"is_learning_allowed": True}},
            {"type": "choose_actions", "seq": 2, "observations": [obs, None]},
            {
                "type": "receive_transitions",
                "seq": 3,
                "transitions": [
                    {"observation": obs, "action": 0, "reward": 0.5, "done": False, "next_observation": obs},
                    None,
                ],
            },
            {"type": "event", "seq": 4, "name": "block_end", "fields": {}},
            {"type": "shutdown", "seq": 5},
        ],
    )
    assert status == 0
    assert replies[0] == {"type": "handshake_ack", "seq": 0, "agent_name": "python-client-random"}
    assert replies[1]["type"] == "actions" and replies[1]["seq"] == 2
    assert replies[1]["actions"][1] is None and 0 <= replies[1]["actions"][0] <= 6
    assert replies[2] == {"type": "ack", "seq": 3}


def test_reference_agent_matches_seeded_stream():
    # The reference random agent must reproduce a plain PCG32 stream.
    agent = RandomAgent()
    status, replies = _run_script(
        agent,
        [
            _handshake(0, num_envs=3, agent_seed=1234),
            {"type": "choose_actions", "seq": 1, "observations": [_obs(), _obs(), _obs()]},
            {"type": "choose_actions", "seq": 2, "observations": [_obs(), None, _obs()]},
            {"type": "shutdown", "seq": 3},
        ],
    )
    assert status == 0
    rng = Pcg32(1234)
    expected_first = [rng.below(7) for _ in range(3)]
    expected_second = [rng.below(7), None, rng.below(7)]
    assert replies[1]["actions"] == expected_first
    assert replies[2]["actions"] == expected_second


def test_version_mismatch_exits_nonzero(capsys):
    bad = _handshake()
    bad["version"] = 99
    status, replies = _run_script(RandomAgent(), [bad])
    assert status == 1 and replies == []
    assert "version" in capsys.readouterr().err


def test_messages_before_handshake_are_rejected(capsys):
    status, _ = _run_script(RandomAgent(), [{"type": "choose_actions", "seq": 0, "observations": []}])
    assert status == 1
    assert "before handshake" in capsys.readouterr().err


def test_malformed_lines_exit_nonzero_with_diagnostic(capsys):
    for line in ["not json", "[1,2]", '{"seq": 0}', '{"type": "mystery", "seq": 0}']:
        status, _ = _run_script(RandomAgent(), [_handshake(), line])
        assert status == 1, line
        assert capsys.readouterr().err.strip()


def test_eof_without_shutdown_is_an_error(capsys):
    status, _ = _run_script(RandomAgent(), [_handshake()])
    assert status == 1
    assert "without shutdown" in capsys.readouterr().err


class _WrongLengthAgent(Agent):
    name = "broken"

    def choose_actions(self, observations):
        return [0] * (len(observations) + 1)


class _MaskIgnoringAgent(Agent):
    name = "broken"

    def choose_actions(self, observations):
        return [3 for _ in observations]


def test_user_agent_contract_violations_reported(capsys):
    for cls, pattern in [(_WrongLengthAgent, "length"), (_MaskIgnoringAgent, "masked slot")]:
        status, replies = _run_script(
            cls(),
            [_handshake(), {"type": "choose_actions", "seq": 1, "observations": [None]}],
        )
        assert status == 1
        assert pattern in capsys.readouterr().err
        assert len(replies) == 1  # only the handshake ack went out


# -- schema validators -----------------------------------------------------


def test_observation_validation():
    validate_observation(_obs(), "x")
    validate_observation(None, "x")
    with pytest.raises(MessageError):
        validate_observation({"view": [[0]], "carried_type": 0, "carried_color": 0}, "x")
    bad = _obs()
    bad["view"][0][0][0] = 9  # object type beyond the enum
    with pytest.raises(MessageError):
        validate_observation(bad, "x")
    with pytest.raises(MessageError):
        validate_observation({"view": _obs()["view"]}, "x")


def test_transition_validation():
    obs = _obs()
    good = {"observation": obs, "action": 3, "reward": None, "done": True, "next_observation": obs}
    validate_transition(good, "x")
    validate_transition(None, "x")
    with pytest.raises(MessageError):
        validate_transition({"done": False}, "x")
    bad = dict(good, action=7)
    with pytest.raises(MessageError):
        validate_transition(bad, "x")
    bad = dict(good, reward="lots")
    with pytest.raises(MessageError):
        validate_transition(bad, "x")
    bad = dict(good, observation=None)
    with pytest.raises(MessageError):
        validate_transition(bad, "x")


def test_parse_message_requires_type_and_seq():
    with pytest.raises(MessageError):
        parse_message('{"type": "ack"}')
    with pytest.raises(MessageError):
        parse_message('{"seq": 1}')
    assert parse_message('{"type": "ack", "seq": 1}')["seq"] == 1


# -- TCP listen transport ----------------------------------------------------


def test_tcp_listen_serves_one_connection():
    transport = TcpListenTransport("127.0.0.1", 0)
    host, port = transport.address
    result = {}

    def serve():
        result["status"] = run_agent_loop(RandomAgent(), transport)

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()

    conn = socket.create_connection((host, port), timeout=5)
    f = conn.makefile("rw", encoding="utf-8", newline="\n")
    f.write(json.dumps(_handshake(0, 1, 77)) + "\n")
    f.flush()
    ack = json.loads(f.readline())
    assert ack["type"] == "handshake_ack" and ack["seq"] == 0
    f.write(json.dumps({"type": "choose_actions", "seq": 1, "observations": [_obs()]}) + "\n")
    f.flush()
    actions = json.loads(f.readline())
    assert actions["actions"] == [Pcg32(77).below(7)]
    f.write(json.dumps({"type": "shutdown", "seq": 2}) + "\n")
    f.flush()
    thread.join(5)
    conn.close()
    transport.close()
    assert result["status"] == 0
