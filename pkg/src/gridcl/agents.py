"""Agent contract plus the two in-process baselines.

Agents see vectorized, positionally-masked lists: entry i covers parallel
environment slot i and is None once that slot's budget is exhausted.
Curriculum events arrive through receive_event, which the base class
dispatches to overridable per-event methods.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .curriculum import ExperienceLimit
from .gridworld import NUM_ACTIONS, Observation
from .prng import Pcg32


class EventKind(Enum):
    BLOCK_START = "block_start"
    BLOCK_END = "block_end"
    TASK_START = "task_start"
    TASK_END = "task_end"
    TASK_VARIANT_START = "task_variant_start"
    TASK_VARIANT_END = "task_variant_end"


@dataclass(frozen=True)
class AgentEvent:
    kind: EventKind
    is_learning_allowed: bool | None = None
    task_name: str | None = None
    variant_name: str | None = None
    limit: ExperienceLimit | None = None


@dataclass(slots=True)
class Transition:
    """One step's result: (observation, action, reward, done, next observation).

    reward is None exactly when the enclosing block is an evaluation block.
    """

    observation: Observation
    action: int
    reward: float | None
    done: bool
    next_observation: Observation


class AgentContractError(RuntimeError):
    """An agent broke the choose_actions/receive_transitions contract."""


class Agent:
    """Base agent; subclasses implement choose_actions at minimum."""

    name = "agent"

    def __init__(self, agent_seed: int, num_envs: int) -> None:
        self.agent_seed = agent_seed
        self.num_envs = num_envs

    def receive_event(self, event: AgentEvent) -> None:
        kind = event.kind
        if kind is EventKind.BLOCK_START:
            self.block_start(bool(event.is_learning_allowed))
        elif kind is EventKind.BLOCK_END:
            self.block_end()
        elif kind is EventKind.TASK_START:
            self.task_start(event.task_name)
        elif kind is EventKind.TASK_END:
            self.task_end()
        elif kind is EventKind.TASK_VARIANT_START:
            self.task_variant_start(event.task_name, event.variant_name, event.limit)
        elif kind is EventKind.TASK_VARIANT_END:
            self.task_variant_end()

    def block_start(self, is_learning_allowed: bool) -> None:
        pass

    def block_end(self) -> None:
        pass

    def task_start(self, task_name: str) -> None:
        pass

    def task_end(self) -> None:
        pass

    def task_variant_start(self, task_name: str, variant_name: str, limit: ExperienceLimit | None) -> None:
        pass

    def task_variant_end(self) -> None:
        pass

    def choose_actions(self, observations: list[Observation | None]) -> list[int | None]:
        raise NotImplementedError

    def receive_transitions(self, transitions: list[Transition | None]) -> None:
        pass

    def close(self) -> None:
        pass


class RandomAgent(Agent):
    """Uniform random actions from a seeded PCG32 stream.

    Draws are consumed only for unmasked slots, in slot order, so the
    action sequence is a pure function of (seed, masking pattern).
    """

    name = "random"

    def __init__(self, agent_seed: int, num_envs: int) -> None:
        super().__init__(agent_seed, num_envs)
        self._rng = Pcg32(agent_seed)

    def choose_actions(self, observations: list[Observation | None]) -> list[int | None]:
        return [None if obs is None else self._rng.below(NUM_ACTIONS) for obs in observations]


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


class TabularQAgent(Agent):
    """Epsilon-greedy tabular Q-learning over hashed observations.

    States are 64-bit FNV-1a hashes of the observation bytes. Epsilon
    anneals linearly 1.0 -> 0.05 over the first 50,000 learning steps;
    updates apply only while learning is allowed and the reward is
    visible. A smoke-test baseline, not a competitive agent.
    """

    name = "tabular-q"

    alpha = 0.1
    gamma = 0.95
    epsilon_start = 1.0
    epsilon_end = 0.05
    anneal_steps = 50_000

    def __init__(self, agent_seed: int, num_envs: int) -> None:
        super().__init__(agent_seed, num_envs)
        self._rng = Pcg32(agent_seed)
        self.q_table: dict[int, list[float]] = {}
        self.learn_steps = 0
        self._learning = False

    def block_start(self, is_learning_allowed: bool) -> None:
        self._learning = is_learning_allowed

    def epsilon(self) -> float:
        frac = min(1.0, self.learn_steps / self.anneal_steps)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac

    def _greedy(self, state: int) -> int:
        """Argmax with ties broken uniformly; unseen states tie across all
        actions, so the policy stays exploratory where nothing is learned."""
        values = self.q_table.get(state)
        if values is None:
            return self._rng.below(NUM_ACTIONS)
        top = max(values)
        best = [a for a in range(NUM_ACTIONS) if values[a] == top]
        if len(best) == 1:
            return best[0]
        return best[self._rng.below(len(best))]

    def choose_actions(self, observations: list[Observation | None]) -> list[int | None]:
        eps = self.epsilon()
        actions: list[int | None] = []
        for obs in observations:
            if obs is None:
                actions.append(None)
            elif self._rng.unit() < eps:
                actions.append(self._rng.below(NUM_ACTIONS))
            else:
                actions.append(self._greedy(fnv1a64(obs.tobytes())))
        return actions

    def receive_transitions(self, transitions: list[Transition | None]) -> None:
        if not self._learning:
            return
        for tr in transitions:
            if tr is None or tr.reward is None:
                continue
            state = fnv1a64(tr.observation.tobytes())
            values = self.q_table.get(state)
            if values is None:
                values = [0.0] * NUM_ACTIONS
                self.q_table[state] = values
            if tr.done:
                target = tr.reward
            else:
                next_values = self.q_table.get(fnv1a64(tr.next_observation.tobytes()))
                bootstrap = max(next_values) if next_values is not None else 0.0
                target = tr.reward + self.gamma * bootstrap
            values[tr.action] += self.alpha * (target - values[tr.action])
            self.learn_steps += 1


BUILTIN_AGENTS = {
    RandomAgent.name: RandomAgent,
    TabularQAgent.name: TabularQAgent,
}
