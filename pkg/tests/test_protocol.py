"""Wire protocol: handshake, error paths, transport transparency."""

from __future__ import annotations

import json
import socket
import sys
import threading
from pathlib import Path

import pytest

from gridcl.agents import RandomAgent, TabularQAgent
from gridcl.curriculum import Block, BlockType, Curriculum, ExperienceLimit, TaskBlock, TaskVariantSpec
from gridcl.eventlog import lifetime_dirs
from gridcl.protocol import (
    ProtocolError,
    observation_from_wire,
    observation_to_wire,
    serve_agent,
    transition_to_wire,
)
from gridcl.runner import ExperimentConfig, run_experiment

TESTS_DIR = Path(__file__).parent
WIRE_AGENT = f"{sys.executable} {TESTS_DIR / 'wire_agent.py'}"


def _wire_spec(agent="random", misbehave=None):
    cmd = f"exec:{WIRE_AGENT} --agent {agent}"
    if misbehave:
        cmd += f" --misbehave {misbehave}"
    return cmd


def _tiny_curriculum(episodes=3, task="DynamicObstacles", params=None, k=1):
    v = TaskVariantSpec(task, "small", params or {"size": 6, "n_obstacles": 2}, ExperienceLimit.episodes(episodes))
    eval_block = Block(BlockType.EVAL, (TaskBlock(task, (v,)),))
    learn_block = Block(BlockType.LEARN, (TaskBlock(task, (v,)),))
    return Curriculum("tiny", (eval_block, learn_block, eval_block), num_parallel_envs=k)


# -- handshake and happy path ----------------------------------------------


def test_handshake_reports_agent_name():
    handle = serve_agent(_wire_spec(), num_envs=2, agent_seed=9)
    assert handle.name == "wire-random"
    handle.close()


def test_round_trip_choose_actions_with_masking():
    handle = serve_agent(_wire_spec(), num_envs=3, agent_seed=4, timeout=10)
    from gridcl.gridworld import make_env

    env = make_env(_tiny_curriculum().blocks[0].task_blocks[0].variants[0], 1)
    obs = env.reset()
    actions = handle.choose_actions([obs, None, obs])
    assert actions[1] is None
    assert all(isinstance(a, int) and 0 <= a <= 6 for a in (actions[0], actions[2]))
    env.close()
    handle.close()


# -- error paths ------------------------------------------------------------


def test_wrong_seq_reply_is_a_protocol_error():
    handle = serve_agent(_wire_spec(misbehave="wrong-seq"), num_envs=1, agent_seed=0, timeout=10)
    with pytest.raises(ProtocolError, match="seq mismatch"):
        handle.choose_actions([None])
    handle.close()


def test_garbage_reply_is_a_protocol_error():
    handle = serve_agent(_wire_spec(misbehave="garbage"), num_envs=1, agent_seed=0, timeout=10)
    with pytest.raises(ProtocolError, match="malformed reply"):
        handle.choose_actions([None])
    handle.close()


def test_reply_timeout():
    handle = serve_agent(_wire_spec(misbehave="hang"), num_envs=1, agent_seed=0, timeout=0.3)
    with pytest.raises(ProtocolError, match="timeout"):
        handle.choose_actions([None])
    handle.close()


def test_agent_exit_is_a_protocol_error():
    handle = serve_agent(_wire_spec(misbehave="exit"), num_envs=1, agent_seed=0, timeout=10)
    with pytest.raises(ProtocolError, match="stdout|exited"):
        handle.choose_actions([None])
    handle.close()


def test_wrong_action_list_length_is_rejected():
    handle = serve_agent(_wire_spec(misbehave="wrong-length"), num_envs=1, agent_seed=0, timeout=10)
    with pytest.raises(ProtocolError, match="length"):
        handle.choose_actions([None])
    handle.close()


def test_unlaunchable_command_is_a_protocol_error():
    with pytest.raises(ProtocolError, match="cannot launch"):
        serve_agent("exec:/definitely/not/a/binary", num_envs=1, agent_seed=0)


def test_malformed_agent_replies_rejected_from_fixtures(tmp_path):
    fixtures = json.loads((TESTS_DIR / "fixtures" / "protocol_malformed.json").read_text())
    for i, case in enumerate(fixtures["agent_to_server"]):
        # Scripted agent: clean handshake, then the malformed reply line.
        script = tmp_path / f"bad_agent_{i}.py"
        script.write_text(
            "import sys, json\n"
            "hs = json.loads(sys.stdin.readline())\n"
            "print(json.dumps({'type': 'handshake_ack', 'seq': hs['seq'], 'agent_name': 'bad'}), flush=True)\n"
            "sys.stdin.readline()\n"
            f"print({case['line']!r}, flush=True)\n"
            "sys.stdin.read()\n"
        )
        handle = serve_agent(f"exec:{sys.executable} {script}", num_envs=1, agent_seed=0, timeout=5)
        with pytest.raises(ProtocolError):
            handle.choose_actions([None])
        handle.close()


# -- wire forms --------------------------------------------------------------


def test_observation_wire_round_trip():
    from gridcl.gridworld import make_env

    env = make_env(_tiny_curriculum().blocks[0].task_blocks[0].variants[0], 3)
    obs = env.reset()
    payload = observation_to_wire(obs)
    assert set(payload) == {"view", "carried_type", "carried_color"}
    back = observation_from_wire(json.loads(json.dumps(payload)))
    assert back == obs
    assert observation_to_wire(None) is None
    assert observation_from_wire(None) is None
    env.close()


def test_observation_from_wire_validates_shape():
    with pytest.raises(ProtocolError, match="shape"):
        observation_from_wire({"view": [[0]], "carried_type": 0, "carried_color": 0})
    with pytest.raises(ProtocolError, match="payload"):
        observation_from_wire({"view": []})


def test_transition_wire_uses_null_for_masked_and_hidden():
    assert transition_to_wire(None) is None
    from gridcl.agents import Transition
    from gridcl.gridworld import make_env

    env = make_env(_tiny_curriculum().blocks[0].task_blocks[0].variants[0], 3)
    obs = env.reset()
    wire = transition_to_wire(Transition(obs, 2, None, False, obs))
    assert wire["reward"] is None
    assert wire["action"] == 2
    env.close()


# -- transport transparency ---------------------------------------------------


def _run_curriculum(tmp_path, curriculum, agent_factory, agent_name, run_name):
    cfg = ExperimentConfig(
        curriculum=curriculum,
        agent_factory=agent_factory,
        agent_name=agent_name,
        num_lifetimes=1,
        master_seed=1234,
        log_root=tmp_path,
        run_name=run_name,
    )
    summary = run_experiment(cfg)
    assert summary.all_ok, summary.lifetimes[0].error
    blocks = sorted(p for d in lifetime_dirs(summary.run_dir) for p in d.glob("block_*.jsonl"))
    return [p.read_bytes() for p in blocks]


@pytest.mark.parametrize("agent_name,cls", [("random", RandomAgent), ("tabular-q", TabularQAgent)])
def test_protocol_and_inprocess_logs_are_byte_identical(tmp_path, agent_name, cls):
    curriculum = _tiny_curriculum(episodes=4, k=2)
    in_process = _run_curriculum(tmp_path, curriculum, cls, agent_name, "inproc")
    spec = _wire_spec(agent=agent_name)
    over_wire = _run_curriculum(
        tmp_path, curriculum, lambda seed, k: serve_agent(spec, k, seed, timeout=30), agent_name, "wire"
    )
    assert in_process == over_wire


# -- TCP ----------------------------------------------------------------------


def _serve_one_tcp_connection(port_holder, ready):
    """Accept one connection and run a trivial always-action-0 agent."""
    listener = socket.create_server(("127.0.0.1", 0))
    port_holder.append(listener.getsockname()[1])
    ready.set()
    conn, _ = listener.accept()
    f = conn.makefile("rw", encoding="utf-8", newline="\n")
    for line in f:
        message = json.loads(line)
        seq = message.get("seq")
        reply = None
        if message["type"] == "handshake":
            reply = {"type": "handshake_ack", "seq": seq, "agent_name": "tcp-dummy"}
        elif message["type"] == "choose_actions":
            reply = {"type": "actions", "seq": seq, "actions": [0 if o is not None else None for o in message["observations"]]}
        elif message["type"] == "receive_transitions":
            reply = {"type": "ack", "seq": seq}
        elif message["type"] == "shutdown":
            break
        if reply is not None:
            f.write(json.dumps(reply) + "\n")
            f.flush()
    conn.close()
    listener.close()


def test_tcp_transport_round_trip():
    port_holder: list[int] = []
    ready = threading.Event()
    thread = threading.Thread(target=_serve_one_tcp_connection, args=(port_holder, ready), daemon=True)
    thread.start()
    ready.wait(5)
    handle = serve_agent(f"tcp:127.0.0.1:{port_holder[0]}", num_envs=2, agent_seed=0, timeout=10)
    assert handle.name == "tcp-dummy"
    from gridcl.gridworld import make_env

    env = make_env(_tiny_curriculum().blocks[0].task_blocks[0].variants[0], 1)
    obs = env.reset()
    assert handle.choose_actions([obs, None]) == [0, None]
    env.close()
    handle.close()
    thread.join(5)


def test_bad_transport_specs_rejected():
    with pytest.raises(ProtocolError, match="unknown transport"):
        serve_agent("carrier-pigeon:coop", num_envs=1, agent_seed=0)
    with pytest.raises(ProtocolError, match="bad TCP address"):
        serve_agent("tcp:nowhere", num_envs=1, agent_seed=0)
