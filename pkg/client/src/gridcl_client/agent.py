"""Agent-side callback surface, mirroring the harness's in-process contract.

Observations and transitions arrive as plain decoded JSON: an observation
is {"view": 7x7x3 nested int lists, "carried_type": int, "carried_color":
int} with the agent at view[3][6] facing toward index 0 of the second
axis; a transition is {"observation", "action", "reward" (None in
evaluation blocks), "done", "next_observation"}. Entry i of every list
covers parallel environment slot i and is None when that slot is masked.
"""

from __future__ import annotations

from .prng import Pcg32

NUM_ACTIONS = 7


class Agent:
    """Subclass and override; setup() runs once after the handshake."""

    name = "agent"

    def setup(self, num_envs: int, agent_seed: int) -> None:
        self.num_envs = num_envs
        self.agent_seed = agent_seed

    def block_start(self, is_learning_allowed: bool) -> None:
        pass

    def block_end(self) -> None:
        pass

    def task_start(self, task_name: str) -> None:
        pass

    def task_end(self) -> None:
        pass

    def task_variant_start(self, task_name: str, variant_name: str, limit: dict | None) -> None:
        pass

    def task_variant_end(self) -> None:
        pass

    def choose_actions(self, observations: list[dict | None]) -> list[int | None]:
        raise NotImplementedError

    def receive_transitions(self, transitions: list[dict | None]) -> None:
        pass


class RandomAgent(Agent):
    """Reference agent: uniform seeded actions, one draw per unmasked slot.

    Matches the harness's in-process random baseline bit for bit, so runs
    through this client reproduce in-process logs exactly.
    """

    name = "python-client-random"

    def setup(self, num_envs: int, agent_seed: int) -> None:
        super().setup(num_envs, agent_seed)
        self._rng = Pcg32(agent_seed)

    def choose_actions(self, observations: list[dict | None]) -> list[int | None]:
        return [None if obs is None else self._rng.below(NUM_ACTIONS) for obs in observations]


class PolicyAdapter(Agent):
    """Skeleton showing where a learning library plugs in.

    Wire your framework into the three hook methods; everything else
    (handshake, masking, sequencing, reward hiding) is handled by the
    message loop. The SDK itself depends on nothing beyond the stdlib.
    """

    name = "policy-adapter"

    def setup(self, num_envs: int, agent_seed: int) -> None:
        super().setup(num_envs, agent_seed)
        self._learning = False
        self.build_policy(num_envs, agent_seed)

    def block_start(self, is_learning_allowed: bool) -> None:
        self._learning = is_learning_allowed

    def choose_actions(self, observations: list[dict | None]) -> list[int | None]:
        return [None if obs is None else self.select_action(obs) for obs in observations]

    def receive_transitions(self, transitions: list[dict | None]) -> None:
        if not self._learning:
            return
        for tr in transitions:
            if tr is not None and tr["reward"] is not None:
                self.observe_transition(tr)

    # -- hooks for the wrapped library -----------------------------------

    def build_policy(self, num_envs: int, agent_seed: int) -> None:
        """Construct models/optimizers here."""
        raise NotImplementedError

    def select_action(self, observation: dict) -> int:
        """Map one observation to an action in [0, 6]."""
        raise NotImplementedError

    def observe_transition(self, transition: dict) -> None:
        """Consume one learnable transition (reward is always visible here)."""
        raise NotImplementedError


BUILTIN_AGENTS = {"random": RandomAgent}
