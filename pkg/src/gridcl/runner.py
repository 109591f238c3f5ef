"""Experiment execution: lifetimes, the vectorized lockstep loop, limits.

Seed derivation (all via split_seed):
    lifetime_seed   = split_seed(master_seed, lifetime_index)
    curriculum_seed = split_seed(lifetime_seed, 1)
    agent_seed      = split_seed(lifetime_seed, 2)
    variant seed j  = split_seed(lifetime_seed, 3 + j)   (j-th variant instantiation)
    slot seed       = split_seed(variant seed, slot)

Limits are totals across slots. Episode limits never reset a finished
environment once completed + in-flight episodes reach the budget; step
limits ration the final round to the lowest slot indices and log cut-off
episodes as truncated.
"""

from __future__ import annotations

import datetime as _dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import __version__
from .agents import Agent, AgentContractError, AgentEvent, EventKind, Transition
from .curriculum import BlockType, Curriculum, LimitKind, TaskVariantSpec, curriculum_to_json
from .eventlog import EpisodeRecord, LifetimeLogWriter, LifetimeMetadata, write_lifetime_metadata, write_run_metadata
from .gridworld import NUM_ACTIONS, make_env
from .prng import split_seed

log = logging.getLogger("gridcl")

AgentFactory = Callable[[int, int], Agent]


@dataclass
class ExperimentConfig:
    curriculum: Curriculum
    agent_factory: AgentFactory
    agent_name: str
    num_lifetimes: int
    master_seed: int
    log_root: Path
    num_parallel_envs: int | None = None  # overrides the curriculum's value
    run_name: str | None = None

    def effective_parallel_envs(self) -> int:
        return self.num_parallel_envs or self.curriculum.num_parallel_envs


@dataclass
class LifetimeContext:
    lifetime_index: int
    lifetime_seed: int
    curriculum_seed: int
    agent_seed: int
    next_variant_ordinal: int = 0
    next_episode_id: int = 0
    live_env_count: int = 0
    peak_live_envs: int = 0

    @classmethod
    def derive(cls, master_seed: int, lifetime_index: int) -> "LifetimeContext":
        lifetime_seed = split_seed(master_seed, lifetime_index)
        return cls(
            lifetime_index=lifetime_index,
            lifetime_seed=lifetime_seed,
            curriculum_seed=split_seed(lifetime_seed, 1),
            agent_seed=split_seed(lifetime_seed, 2),
        )


@dataclass
class LifetimeResult:
    lifetime_index: int
    directory: Path
    status: str  # "ok" | "failed"
    episodes: int = 0
    steps: int = 0
    error: str | None = None


@dataclass
class ExperimentSummary:
    run_dir: Path
    lifetimes: list[LifetimeResult] = field(default_factory=list)
    peak_live_envs: int = 0

    @property
    def all_ok(self) -> bool:
        return all(r.status == "ok" for r in self.lifetimes)


def _now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _unique_run_dir(log_root: Path, run_name: str) -> Path:
    candidate = log_root / run_name
    suffix = 0
    while candidate.exists():
        suffix += 1
        candidate = log_root / f"{run_name}_{suffix}"
    return candidate


def run_experiment(cfg: ExperimentConfig) -> ExperimentSummary:
    """Run every lifetime sequentially; a failed lifetime does not stop the rest."""
    if cfg.num_lifetimes < 1:
        raise ValueError("num_lifetimes must be >= 1")
    run_name = cfg.run_name or f"{cfg.curriculum.name}-{cfg.agent_name}-s{cfg.master_seed}"
    run_dir = _unique_run_dir(Path(cfg.log_root), run_name)
    run_dir.mkdir(parents=True)
    k = cfg.effective_parallel_envs()
    summary = ExperimentSummary(run_dir=run_dir)

    for index in range(cfg.num_lifetimes):
        ctx = LifetimeContext.derive(cfg.master_seed, index)
        lifetime_dir = run_dir / f"lifetime_{index}"
        lifetime_dir.mkdir()
        started = _now_iso()
        result = LifetimeResult(index, lifetime_dir, "ok")
        agent: Agent | None = None
        try:
            agent = cfg.agent_factory(ctx.agent_seed, k)
            with LifetimeLogWriter(lifetime_dir) as writer:
                result.episodes, result.steps = run_lifetime(cfg.curriculum, agent, ctx, writer, k)
        except (RuntimeError, OSError, ValueError) as e:
            log.warning("lifetime %d failed: %s", index, e)
            result.status = "failed"
            result.error = f"{type(e).__name__}: {e}"
        finally:
            if agent is not None:
                try:
                    agent.close()
                except Exception as e:  # agent teardown must not mask the run
                    log.warning("agent close failed for lifetime %d: %s", index, e)
        summary.peak_live_envs = max(summary.peak_live_envs, ctx.peak_live_envs)
        meta = LifetimeMetadata(
            lifetime_index=index,
            master_seed=cfg.master_seed,
            lifetime_seed=ctx.lifetime_seed,
            curriculum_seed=ctx.curriculum_seed,
            agent_seed=ctx.agent_seed,
            curriculum_name=cfg.curriculum.name,
            agent_name=cfg.agent_name,
            harness_version=__version__,
            started_at=started,
            finished_at=_now_iso(),
            status=result.status,
            error=result.error,
        )
        write_lifetime_metadata(lifetime_dir, meta)
        summary.lifetimes.append(result)

    write_run_metadata(
        run_dir,
        {
            "harness_version": __version__,
            "curriculum": curriculum_to_json(cfg.curriculum),
            "agent_name": cfg.agent_name,
            "num_lifetimes": cfg.num_lifetimes,
            "master_seed": cfg.master_seed,
            "num_parallel_envs": k,
            "log_root": str(cfg.log_root),
            "run_name": run_dir.name,
            "lifetimes": [
                {"index": r.lifetime_index, "directory": r.directory.name, "status": r.status, "error": r.error}
                for r in summary.lifetimes
            ],
        },
    )
    return summary


def run_lifetime(
    curriculum: Curriculum,
    agent: Agent,
    ctx: LifetimeContext,
    writer: LifetimeLogWriter,
    num_parallel_envs: int | None = None,
) -> tuple[int, int]:
    """Walk blocks -> task blocks -> task variants, emitting agent events.

    Returns (episodes logged, env steps taken).
    """
    k = num_parallel_envs or curriculum.num_parallel_envs
    episodes = steps = 0
    for block_num, block in enumerate(curriculum.blocks):
        learning = block.block_type is BlockType.LEARN
        agent.receive_event(AgentEvent(EventKind.BLOCK_START, is_learning_allowed=learning))
        for task_block in block.task_blocks:
            agent.receive_event(AgentEvent(EventKind.TASK_START, task_name=task_block.task_name))
            for variant in task_block.variants:
                agent.receive_event(
                    AgentEvent(
                        EventKind.TASK_VARIANT_START,
                        task_name=variant.task_name,
                        variant_name=variant.variant_name,
                        limit=variant.limit,
                    )
                )
                ep, st = run_task_variant(
                    variant,
                    agent,
                    k,
                    ctx,
                    writer,
                    hide_rewards=not learning,
                    block_num=block_num,
                    block_type=block.block_type.value,
                )
                episodes += ep
                steps += st
                agent.receive_event(AgentEvent(EventKind.TASK_VARIANT_END))
            agent.receive_event(AgentEvent(EventKind.TASK_END))
        agent.receive_event(AgentEvent(EventKind.BLOCK_END))
    return episodes, steps


class _Slot:
    __slots__ = ("env", "env_seed", "obs", "steps", "reward_sum", "active")

    def __init__(self, env, env_seed: int) -> None:
        self.env = env
        self.env_seed = env_seed
        self.obs = None
        self.steps = 0
        self.reward_sum = 0.0
        self.active = False

    def begin_episode(self) -> None:
        self.obs = self.env.reset()
        self.steps = 0
        self.reward_sum = 0.0
        self.active = True


def _check_actions(actions, observations, k: int) -> None:
    if not isinstance(actions, list) or len(actions) != k:
        raise AgentContractError(f"choose_actions must return a list of length {k}, got {actions!r}")
    for i, (action, obs) in enumerate(zip(actions, observations)):
        if obs is None:
            if action is not None:
                raise AgentContractError(f"action supplied for masked slot {i}")
        else:
            if action is None:
                raise AgentContractError(f"missing action for unmasked slot {i}")
            if isinstance(action, bool) or not hasattr(action, "__index__") or not 0 <= int(action) < NUM_ACTIONS:
                raise AgentContractError(f"slot {i}: action must be an integer in [0, {NUM_ACTIONS - 1}], got {action!r}")


def run_task_variant(
    spec: TaskVariantSpec,
    agent: Agent,
    k_envs: int,
    ctx: LifetimeContext,
    writer: LifetimeLogWriter,
    hide_rewards: bool,
    block_num: int,
    block_type: str,
) -> tuple[int, int]:
    """Drive one task variant to its experience limit; returns (episodes, steps)."""
    variant_seed = split_seed(ctx.lifetime_seed, 3 + ctx.next_variant_ordinal)
    ctx.next_variant_ordinal += 1

    slots = []
    for slot_index in range(k_envs):
        env_seed = split_seed(variant_seed, slot_index)
        slots.append(_Slot(make_env(spec, env_seed), env_seed))
        ctx.live_env_count += 1
        ctx.peak_live_envs = max(ctx.peak_live_envs, ctx.live_env_count)

    def _log_episode(slot: _Slot, truncated: bool) -> None:
        writer.append_episode(
            EpisodeRecord(
                block_num=block_num,
                block_type=block_type,
                task_name=spec.task_name,
                variant_name=spec.variant_name,
                episode_id=ctx.next_episode_id,
                steps=slot.steps,
                reward=slot.reward_sum,
                truncated=truncated,
                env_seed=slot.env_seed,
            )
        )
        ctx.next_episode_id += 1

    episodes = steps_taken = 0
    try:
        amount = spec.limit.amount
        if spec.limit.kind is LimitKind.EPISODES:
            for slot in slots[: min(k_envs, amount)]:
                slot.begin_episode()
            in_flight = sum(1 for s in slots if s.active)
            while in_flight > 0:
                observations = [s.obs if s.active else None for s in slots]
                actions = agent.choose_actions(observations)
                _check_actions(actions, observations, k_envs)
                transitions: list[Transition | None] = [None] * k_envs
                for i, slot in enumerate(slots):
                    if not slot.active:
                        continue
                    action = int(actions[i])
                    result = slot.env.step(action)
                    steps_taken += 1
                    slot.steps += 1
                    slot.reward_sum += result.reward
                    transitions[i] = Transition(
                        observation=slot.obs,
                        action=action,
                        reward=None if hide_rewards else result.reward,
                        done=result.done,
                        next_observation=result.observation,
                    )
                    if result.done:
                        episodes += 1
                        in_flight -= 1
                        _log_episode(slot, truncated=False)
                        if episodes + in_flight < amount:
                            slot.begin_episode()
                            in_flight += 1
                        else:
                            slot.active = False
                            slot.obs = None
                    else:
                        slot.obs = result.observation
                agent.receive_transitions(transitions)
        else:  # step limit
            for slot in slots:
                slot.begin_episode()
            while steps_taken < amount:
                remaining = amount - steps_taken
                unmasked = 0
                observations: list = [None] * k_envs
                for i, slot in enumerate(slots):
                    if slot.active and unmasked < remaining:
                        observations[i] = slot.obs
                        unmasked += 1
                if unmasked == 0:
                    break
                actions = agent.choose_actions(observations)
                _check_actions(actions, observations, k_envs)
                transitions = [None] * k_envs
                for i, slot in enumerate(slots):
                    if observations[i] is None:
                        continue
                    action = int(actions[i])
                    result = slot.env.step(action)
                    steps_taken += 1
                    slot.steps += 1
                    slot.reward_sum += result.reward
                    transitions[i] = Transition(
                        observation=slot.obs,
                        action=action,
                        reward=None if hide_rewards else result.reward,
                        done=result.done,
                        next_observation=result.observation,
                    )
                    if result.done:
                        episodes += 1
                        _log_episode(slot, truncated=False)
                        if steps_taken < amount:
                            slot.begin_episode()
                        else:
                            slot.active = False
                            slot.obs = None
                    else:
                        slot.obs = result.observation
                agent.receive_transitions(transitions)
            # Episodes cut off by the step budget are logged as truncated.
            for slot in slots:
                if slot.active and slot.steps > 0:
                    episodes += 1
                    _log_episode(slot, truncated=True)
    finally:
        for slot in slots:
            slot.env.close()
            ctx.live_env_count -= 1
    return episodes, steps_taken
