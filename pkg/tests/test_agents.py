"""Baseline agent behavior: shape/masking contract, learning rules."""

from __future__ import annotations

import numpy as np

from gridcl.agents import AgentEvent, EventKind, RandomAgent, TabularQAgent, Transition, fnv1a64
from gridcl.gridworld import Observation


def _obs(fill=0, carried_type=0, carried_color=0):
    return Observation(np.full((7, 7, 3), fill, dtype=np.uint8), carried_type, carried_color)


def _block_start(agent, learning):
    agent.receive_event(AgentEvent(EventKind.BLOCK_START, is_learning_allowed=learning))


def test_fnv1a64_known_vectors():
    # Published FNV-1a 64-bit test vectors.
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_random_agent_shape_and_range():
    agent = RandomAgent(3, 3)
    actions = agent.choose_actions([_obs(), _obs(), _obs()])
    assert len(actions) == 3
    assert all(isinstance(a, int) and 0 <= a <= 6 for a in actions)


def test_random_agent_masking():
    agent = RandomAgent(3, 2)
    actions = agent.choose_actions([_obs(), None])
    assert actions[1] is None and actions[0] is not None


def test_random_agent_deterministic_given_masking_pattern():
    runs = []
    for _ in range(2):
        agent = RandomAgent(17, 2)
        seq = []
        seq.extend(agent.choose_actions([_obs(), _obs()]))
        seq.extend(agent.choose_actions([_obs(), None]))
        seq.extend(agent.choose_actions([None, _obs()]))
        runs.append(seq)
    assert runs[0] == runs[1]


def test_random_agent_ignores_rewards_and_block_type():
    # Identical observations => identical actions in learn and eval blocks.
    a, b = RandomAgent(5, 1), RandomAgent(5, 1)
    _block_start(a, True)
    _block_start(b, False)
    seq_a = [a.choose_actions([_obs(i % 7)])[0] for i in range(50)]
    seq_b = [b.choose_actions([_obs(i % 7)])[0] for i in range(50)]
    assert seq_a == seq_b


def test_tabular_q_stays_empty_without_learning_blocks():
    agent = TabularQAgent(1, 1)
    _block_start(agent, False)
    obs, nxt = _obs(1), _obs(2)
    agent.choose_actions([obs])
    agent.receive_transitions([Transition(obs, 2, None, False, nxt)])
    assert agent.q_table == {}
    assert agent.learn_steps == 0


def test_tabular_q_ignores_hidden_rewards_even_when_learning():
    agent = TabularQAgent(1, 1)
    _block_start(agent, True)
    obs, nxt = _obs(1), _obs(2)
    agent.receive_transitions([Transition(obs, 2, None, False, nxt)])
    assert agent.q_table == {}


def test_tabular_q_bandit_converges_to_rewarding_action():
    # Single-state two-action bandit: action 1 pays 1, action 0 pays 0.
    agent = TabularQAgent(7, 1)
    _block_start(agent, True)
    obs = _obs(3)
    state = fnv1a64(obs.tobytes())
    for i in range(100):
        action = i % 2
        agent.receive_transitions([Transition(obs, action, float(action), True, obs)])
    values = agent.q_table[state]
    assert values[1] > values[0]
    assert agent._greedy(state) == 1
    # Q(s,1) after 50 updates of reward 1 with alpha 0.1: 1 - 0.9^50.
    assert abs(values[1] - (1.0 - 0.9**50)) < 1e-12


def test_tabular_q_epsilon_anneals_linearly():
    agent = TabularQAgent(0, 1)
    assert agent.epsilon() == 1.0
    agent.learn_steps = 25_000
    assert abs(agent.epsilon() - 0.525) < 1e-12
    agent.learn_steps = 50_000
    assert abs(agent.epsilon() - 0.05) < 1e-12
    agent.learn_steps = 80_000
    assert abs(agent.epsilon() - 0.05) < 1e-12


def test_tabular_q_bootstrap_is_zero_on_terminal():
    agent = TabularQAgent(0, 1)
    _block_start(agent, True)
    obs, nxt = _obs(1), _obs(2)
    # Give the next state a large value; a terminal transition must ignore it.
    agent.q_table[fnv1a64(nxt.tobytes())] = [100.0] * 7
    agent.receive_transitions([Transition(obs, 0, 1.0, True, nxt)])
    assert agent.q_table[fnv1a64(obs.tobytes())][0] == 0.1  # alpha * reward only


def test_tabular_q_uses_discounted_bootstrap_when_not_done():
    agent = TabularQAgent(0, 1)
    _block_start(agent, True)
    obs, nxt = _obs(1), _obs(2)
    agent.q_table[fnv1a64(nxt.tobytes())] = [0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    agent.receive_transitions([Transition(obs, 3, 0.5, False, nxt)])
    expected = 0.1 * (0.5 + 0.95 * 2.0)
    assert abs(agent.q_table[fnv1a64(obs.tobytes())][3] - expected) < 1e-12


def test_tabular_q_identical_runs_identical_tables():
    tables = []
    for _ in range(2):
        agent = TabularQAgent(11, 1)
        _block_start(agent, True)
        rng_obs = [_obs(i % 5, i % 3) for i in range(200)]
        for i in range(199):
            agent.choose_actions([rng_obs[i]])
            agent.receive_transitions([Transition(rng_obs[i], i % 7, float(i % 2), i % 10 == 9, rng_obs[i + 1])])
        tables.append(agent.q_table)
    assert tables[0] == tables[1]


def test_event_dispatch_reaches_handlers():
    seen = []

    class Probe(RandomAgent):
        def block_start(self, is_learning_allowed):
            seen.append(("block_start", is_learning_allowed))

        def task_variant_start(self, task_name, variant_name, limit):
            seen.append(("variant_start", task_name, variant_name))

        def task_variant_end(self):
            seen.append(("variant_end",))

    agent = Probe(0, 1)
    agent.receive_event(AgentEvent(EventKind.BLOCK_START, is_learning_allowed=True))
    agent.receive_event(AgentEvent(EventKind.TASK_VARIANT_START, task_name="T", variant_name="v"))
    agent.receive_event(AgentEvent(EventKind.TASK_VARIANT_END))
    assert seen == [("block_start", True), ("variant_start", "T", "v"), ("variant_end",)]
