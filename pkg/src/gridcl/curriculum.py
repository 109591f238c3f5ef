"""Curriculum hierarchy: blocks of task blocks of task variants.

Curricula are immutable values with a canonical JSON form; the condensed
and dispersed generators cover the built-in 18-variant benchmark and any
interleaving is available through :func:`generate_interleaved`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from . import gridworld
from .prng import Pcg32


class BlockType(Enum):
    LEARN = "learn"
    EVAL = "eval"


class LimitKind(Enum):
    EPISODES = "episodes"
    STEPS = "steps"


class CurriculumError(ValueError):
    """Raised for malformed curriculum files or generator misuse."""


@dataclass(frozen=True)
class ExperienceLimit:
    kind: LimitKind
    amount: int

    def __post_init__(self) -> None:
        if self.amount < 1:
            raise ValueError(f"limit amount must be >= 1, got {self.amount}")

    @staticmethod
    def episodes(amount: int) -> "ExperienceLimit":
        return ExperienceLimit(LimitKind.EPISODES, amount)

    @staticmethod
    def steps(amount: int) -> "ExperienceLimit":
        return ExperienceLimit(LimitKind.STEPS, amount)


@dataclass(frozen=True)
class TaskVariantSpec:
    task_name: str
    variant_name: str
    params: Mapping[str, int]
    limit: ExperienceLimit
    fixed_layout: bool = False


@dataclass(frozen=True)
class TaskBlock:
    task_name: str
    variants: tuple[TaskVariantSpec, ...]


@dataclass(frozen=True)
class Block:
    block_type: BlockType
    task_blocks: tuple[TaskBlock, ...]


@dataclass(frozen=True)
class Curriculum:
    name: str
    blocks: tuple[Block, ...]
    num_parallel_envs: int = 1
    order_seed: int | None = None


@dataclass(frozen=True)
class ValidationFinding:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def validate_curriculum(curriculum: Curriculum) -> list[ValidationFinding]:
    """Check the full hierarchy; an empty list means the curriculum is valid."""
    findings: list[ValidationFinding] = []
    add = lambda path, msg: findings.append(ValidationFinding(path, msg))

    if curriculum.num_parallel_envs < 1:
        add("num_parallel_envs", f"must be >= 1, got {curriculum.num_parallel_envs}")
    if not curriculum.blocks:
        add("blocks", "curriculum has no blocks")

    spaces_seen: dict[gridworld.SpaceDescriptor, str] = {}
    for b, block in enumerate(curriculum.blocks):
        bpath = f"blocks[{b}]"
        if not block.task_blocks:
            add(bpath, "block has no task blocks")
        for t, task_block in enumerate(block.task_blocks):
            tpath = f"{bpath}.task_blocks[{t}]"
            if not task_block.variants:
                add(tpath, "task block has no variants")
            for v, variant in enumerate(task_block.variants):
                vpath = f"{tpath}.variants[{v}]"
                if variant.task_name != task_block.task_name:
                    add(vpath, f"variant task {variant.task_name!r} does not match task block {task_block.task_name!r}")
                if variant.limit.amount < 1:
                    add(vpath, f"limit amount must be >= 1, got {variant.limit.amount}")
                try:
                    family = gridworld.get_task(variant.task_name)
                except gridworld.TaskConfigError:
                    add(vpath, f"unknown task {variant.task_name!r}")
                    continue
                for problem in family.param_problems(variant.params):
                    add(vpath, problem)
                if family.spaces in spaces_seen:
                    continue
                if spaces_seen:
                    other = next(iter(spaces_seen.values()))
                    add(vpath, f"space mismatch: {variant.task_name} has {family.spaces}, {other} differs")
                spaces_seen.setdefault(family.spaces, variant.task_name)
    return findings


def generate_interleaved(
    learn_blocks: Iterable[Block],
    eval_block: Block,
    name: str = "interleaved",
    num_parallel_envs: int = 1,
    order_seed: int | None = None,
) -> Curriculum:
    """Interleave the same evaluation block around every learning block.

    The result is [E, L1, E, L2, E, ..., Ln, E]: 2n+1 blocks, with the
    evaluation block before the first, between every pair, and after the
    last learning block.
    """
    learn_blocks = list(learn_blocks)
    if not learn_blocks:
        raise CurriculumError("no learning content: learn_blocks is empty")
    if eval_block.block_type is not BlockType.EVAL:
        raise CurriculumError("eval_block must have block_type EVAL")
    blocks = [eval_block]
    for lb in learn_blocks:
        if lb.block_type is not BlockType.LEARN:
            raise CurriculumError("learn_blocks must all have block_type LEARN")
        blocks.append(lb)
        blocks.append(eval_block)
    return Curriculum(name=name, blocks=tuple(blocks), num_parallel_envs=num_parallel_envs, order_seed=order_seed)


def default_variants() -> list[TaskVariantSpec]:
    """The 18 built-in variants (6 tasks x small/medium/large), with a
    placeholder one-episode limit."""
    variants = []
    for task in gridworld.task_names():
        family = gridworld.get_task(task)
        for variant_name, params in family.variants.items():
            variants.append(
                TaskVariantSpec(task, variant_name, dict(params), ExperienceLimit.episodes(1))
            )
    return variants


def _with_limit(variant: TaskVariantSpec, limit: ExperienceLimit) -> TaskVariantSpec:
    return TaskVariantSpec(variant.task_name, variant.variant_name, variant.params, limit, variant.fixed_layout)


def _full_eval_block(eval_episodes: int) -> Block:
    limit = ExperienceLimit.episodes(eval_episodes)
    task_blocks = []
    for task in gridworld.task_names():
        family = gridworld.get_task(task)
        variants = tuple(
            TaskVariantSpec(task, vname, dict(params), limit) for vname, params in family.variants.items()
        )
        task_blocks.append(TaskBlock(task, variants))
    return Block(BlockType.EVAL, tuple(task_blocks))


def _learning_block(variant: TaskVariantSpec, episodes: int) -> Block:
    spec = _with_limit(variant, ExperienceLimit.episodes(episodes))
    return Block(BlockType.LEARN, (TaskBlock(spec.task_name, (spec,)),))


def generate_condensed(episodes_per_lb: int, eval_episodes: int, seed: int) -> Curriculum:
    """18 one-variant learning blocks in a seeded shuffle, evaluation
    interleaved: every variant is trained exactly once."""
    rng = Pcg32(seed)
    order = default_variants()
    rng.shuffle(order)
    learn_blocks = [_learning_block(v, episodes_per_lb) for v in order]
    return generate_interleaved(
        learn_blocks,
        _full_eval_block(eval_episodes),
        name="condensed",
        order_seed=seed,
    )


def generate_dispersed(episodes_per_lb: int, eval_episodes: int, seed: int) -> Curriculum:
    """Three superblocks, each a distinct permutation of all 18 variants
    with learning blocks a third the condensed length: every variant is
    trained exactly three times."""
    rng = Pcg32(seed)
    lb_episodes = math.ceil(episodes_per_lb / 3)
    base = default_variants()
    permutations: list[list[TaskVariantSpec]] = []
    while len(permutations) < 3:
        order = list(base)
        rng.shuffle(order)
        if order not in permutations:
            permutations.append(order)
    learn_blocks = [_learning_block(v, lb_episodes) for perm in permutations for v in perm]
    return generate_interleaved(
        learn_blocks,
        _full_eval_block(eval_episodes),
        name="dispersed",
        order_seed=seed,
    )


# -- JSON serialization --------------------------------------------------

_LIMIT_KEYS = {LimitKind.EPISODES: "episodes", LimitKind.STEPS: "steps"}


def curriculum_to_json(curriculum: Curriculum) -> dict:
    return {
        "name": curriculum.name,
        "num_parallel_envs": curriculum.num_parallel_envs,
        "order_seed": curriculum.order_seed,
        "blocks": [
            {
                "type": block.block_type.value,
                "task_blocks": [
                    {
                        "task": tb.task_name,
                        "variants": [
                            {
                                "variant": v.variant_name,
                                "params": {k: v.params[k] for k in sorted(v.params)},
                                "limit": {_LIMIT_KEYS[v.limit.kind]: v.limit.amount},
                                "fixed_layout": v.fixed_layout,
                            }
                            for v in tb.variants
                        ],
                    }
                    for tb in block.task_blocks
                ],
            }
            for block in curriculum.blocks
        ],
    }


def save_curriculum_file(curriculum: Curriculum, path: str | Path) -> None:
    Path(path).write_text(json.dumps(curriculum_to_json(curriculum), indent=2) + "\n", encoding="utf-8")


def _require(obj: dict, key: str, kind, path: str):
    if key not in obj:
        raise CurriculumError(f"{path}: missing key '{key}'")
    value = obj[key]
    if kind is int and isinstance(value, bool):
        raise CurriculumError(f"{path}.{key}: expected {kind.__name__}, got bool")
    if not isinstance(value, kind):
        raise CurriculumError(f"{path}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise CurriculumError(f"{path}: unknown key '{key}'")


def _parse_limit(obj, path: str) -> ExperienceLimit:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise CurriculumError(f"{path}: limit must be exactly one of {{'episodes': n}} or {{'steps': n}}")
    key, amount = next(iter(obj.items()))
    if key not in ("episodes", "steps"):
        raise CurriculumError(f"{path}: unknown limit kind '{key}'")
    if not isinstance(amount, int) or isinstance(amount, bool) or amount < 1:
        raise CurriculumError(f"{path}.{key}: amount must be a positive integer, got {amount!r}")
    return ExperienceLimit(LimitKind(key), amount)


def curriculum_from_json(data, source: str = "<memory>") -> Curriculum:
    if not isinstance(data, dict):
        raise CurriculumError(f"{source}: top level must be an object")
    _reject_unknown(data, {"name", "num_parallel_envs", "order_seed", "blocks"}, source)
    name = _require(data, "name", str, source)
    parallel = _require(data, "num_parallel_envs", int, source)
    if parallel < 1:
        raise CurriculumError(f"{source}.num_parallel_envs: must be >= 1, got {parallel}")
    order_seed = data.get("order_seed")
    if order_seed is not None and (not isinstance(order_seed, int) or isinstance(order_seed, bool)):
        raise CurriculumError(f"{source}.order_seed: expected int or null")
    raw_blocks = _require(data, "blocks", list, source)

    blocks = []
    for b, raw_block in enumerate(raw_blocks):
        bpath = f"{source}.blocks[{b}]"
        if not isinstance(raw_block, dict):
            raise CurriculumError(f"{bpath}: expected an object")
        _reject_unknown(raw_block, {"type", "task_blocks"}, bpath)
        block_type = _require(raw_block, "type", str, bpath)
        if block_type not in ("learn", "eval"):
            raise CurriculumError(f"{bpath}.type: must be 'learn' or 'eval', got {block_type!r}")
        task_blocks = []
        for t, raw_tb in enumerate(_require(raw_block, "task_blocks", list, bpath)):
            tpath = f"{bpath}.task_blocks[{t}]"
            if not isinstance(raw_tb, dict):
                raise CurriculumError(f"{tpath}: expected an object")
            _reject_unknown(raw_tb, {"task", "variants"}, tpath)
            task = _require(raw_tb, "task", str, tpath)
            try:
                gridworld.get_task(task)
            except gridworld.TaskConfigError:
                raise CurriculumError(f"{tpath}.task: unknown task {task!r}") from None
            variants = []
            for v, raw_v in enumerate(_require(raw_tb, "variants", list, tpath)):
                vpath = f"{tpath}.variants[{v}]"
                if not isinstance(raw_v, dict):
                    raise CurriculumError(f"{vpath}: expected an object")
                _reject_unknown(raw_v, {"variant", "params", "limit", "fixed_layout"}, vpath)
                variant_name = _require(raw_v, "variant", str, vpath)
                params = _require(raw_v, "params", dict, vpath)
                for pk, pv in params.items():
                    if not isinstance(pk, str) or not isinstance(pv, int) or isinstance(pv, bool):
                        raise CurriculumError(f"{vpath}.params: entries must map str to int")
                limit = _parse_limit(_require(raw_v, "limit", dict, vpath), vpath)
                fixed = _require(raw_v, "fixed_layout", bool, vpath)
                variants.append(TaskVariantSpec(task, variant_name, dict(params), limit, fixed))
            task_blocks.append(TaskBlock(task, tuple(variants)))
        blocks.append(Block(BlockType(block_type), tuple(task_blocks)))
    return Curriculum(name=name, blocks=tuple(blocks), num_parallel_envs=parallel, order_seed=order_seed)


def load_curriculum_file(path: str | Path) -> Curriculum:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CurriculumError(f"{path}: malformed JSON at line {e.lineno}: {e.msg}") from None
    return curriculum_from_json(data, source=str(path))
