"""The six built-in task families and their seeded layout builders.

Every builder fills a pre-walled grid, places the agent, and tags the
success condition. All randomness comes from the environment's PCG32
stream, so a (params, seed) pair pins the layout exactly.
"""

from __future__ import annotations

from typing import Mapping

from .gridworld import (
    GOAL_OPEN_DOOR,
    GOAL_PICKUP_YELLOW_KEY,
    GOAL_REACH,
    Color,
    Direction,
    DoorState,
    GridWorld,
    ObjectType,
    ParamSpec,
    TaskFamily,
    register_task,
)
from .prng import Pcg32

VARIANT_NAMES = ("small", "medium", "large")

_REAL_COLORS = (Color.RED, Color.GREEN, Color.BLUE, Color.PURPLE, Color.YELLOW, Color.GREY)


def _free_cells(env: GridWorld, exclude: set[tuple[int, int]] | None = None) -> list[tuple[int, int]]:
    """Interior cells with no object, in row-major (y outer) order."""
    exclude = exclude or set()
    cells = []
    for y in range(1, env.height - 1):
        for x in range(1, env.width - 1):
            if (x, y) not in exclude and env.tile_at(x, y).object_type is ObjectType.EMPTY:
                cells.append((x, y))
    return cells


def _pop_random(cells: list[tuple[int, int]], rng: Pcg32) -> tuple[int, int]:
    return cells.pop(rng.below(len(cells)))


# -- SimpleCrossing -----------------------------------------------------


def _crossing_lines(size: int) -> list[int]:
    return list(range(2, size - 2, 2))


def _check_simple_crossing(params: Mapping[str, int]) -> list[str]:
    problems = []
    size = params["size"]
    if size % 2 == 0:
        problems.append(f"parameter 'size'={size} must be odd")
    else:
        max_crossings = 2 * len(_crossing_lines(size))
        if params["crossings"] > max_crossings:
            problems.append(f"parameter 'crossings'={params['crossings']} exceeds {max_crossings} for size {size}")
    return problems


def _build_simple_crossing(env: GridWorld, rng: Pcg32) -> None:
    size = env.width
    lines = [("v", c) for c in _crossing_lines(size)] + [("h", r) for r in _crossing_lines(size)]
    rng.shuffle(lines)
    chosen = lines[: env.params["crossings"]]
    verticals = sorted(c for o, c in chosen if o == "v")
    horizontals = sorted(r for o, r in chosen if o == "h")

    for c in verticals:
        for y in range(1, size - 1):
            env.set_tile(c, y, ObjectType.WALL, Color.GREY)
    for r in horizontals:
        for x in range(1, size - 1):
            env.set_tile(x, r, ObjectType.WALL, Color.GREY)

    # Carve one gap per wall, walking a staircase from top-left to
    # bottom-right so the maze is always solvable: each gap lies strictly
    # inside the band/strip reachable after the previously-crossed walls.
    order = ["v"] * len(verticals) + ["h"] * len(horizontals)
    rng.shuffle(order)
    vi = hi = 0
    for orientation in order:
        if orientation == "v":
            column = verticals[vi]
            lo = horizontals[hi - 1] if hi > 0 else 0
            hi_bound = horizontals[hi] if hi < len(horizontals) else size - 1
            rows = range(lo + 1, hi_bound)
            env.set_tile(column, rows[rng.below(len(rows))], ObjectType.EMPTY)
            vi += 1
        else:
            row = horizontals[hi]
            lo = verticals[vi - 1] if vi > 0 else 0
            hi_bound = verticals[vi] if vi < len(verticals) else size - 1
            cols = range(lo + 1, hi_bound)
            env.set_tile(cols[rng.below(len(cols))], row, ObjectType.EMPTY)
            hi += 1

    env.set_tile(size - 2, size - 2, ObjectType.GOAL, Color.GREEN)
    env.agent_pos = (1, 1)
    env.agent_dir = Direction.EAST


# -- DistributionalShift ------------------------------------------------

_LAVA_STRIP_LEN = 3


def _build_distributional_shift(env: GridWorld, rng: Pcg32) -> None:
    size = env.width
    row = env.params["lava_row"]
    start = 2 + rng.below(size - 3 - _LAVA_STRIP_LEN)
    for i in range(_LAVA_STRIP_LEN):
        env.set_tile(start + i, row, ObjectType.LAVA, Color.RED)
    env.set_tile(size - 2, 1, ObjectType.GOAL, Color.GREEN)
    env.agent_pos = (1, 1)
    env.agent_dir = Direction.EAST


# -- DynamicObstacles ---------------------------------------------------


def _check_dynamic_obstacles(params: Mapping[str, int]) -> list[str]:
    size, n = params["size"], params["n_obstacles"]
    limit = (size - 2) * (size - 2) // 3
    if n > limit:
        return [f"parameter 'n_obstacles'={n} exceeds {limit} for size {size}"]
    return []


def _build_dynamic_obstacles(env: GridWorld, rng: Pcg32) -> None:
    size = env.width
    env.set_tile(size - 2, size - 2, ObjectType.GOAL, Color.GREEN)
    env.agent_pos = (1, 1)
    env.agent_dir = Direction.EAST
    cells = _free_cells(env, exclude={(1, 1)})
    for _ in range(env.params["n_obstacles"]):
        x, y = _pop_random(cells, rng)
        env.set_tile(x, y, ObjectType.BALL, Color.BLUE)
        env.obstacles.append((x, y))


# -- CustomFetch --------------------------------------------------------


def _check_custom_fetch(params: Mapping[str, int]) -> list[str]:
    size = params["size"]
    capacity = (size - 2) * (size - 2) // 2
    total = params["n_targets"] + params["n_objects"]
    if total > capacity:
        return [f"{total} objects exceed capacity {capacity} for size {size}"]
    return []


def _build_custom_fetch(env: GridWorld, rng: Pcg32) -> None:
    cells = _free_cells(env)
    for _ in range(env.params["n_targets"]):
        x, y = _pop_random(cells, rng)
        env.set_tile(x, y, ObjectType.KEY, Color.YELLOW)
    distractor_types = (ObjectType.KEY, ObjectType.BALL, ObjectType.BOX)
    for _ in range(env.params["n_objects"]):
        while True:
            obj = distractor_types[rng.below(3)]
            color = _REAL_COLORS[rng.below(6)]
            if not (obj is ObjectType.KEY and color is Color.YELLOW):
                break
        x, y = _pop_random(cells, rng)
        env.set_tile(x, y, obj, color)
    env.agent_pos = _pop_random(cells, rng)
    env.agent_dir = Direction(rng.below(4))


# -- Unlock -------------------------------------------------------------


def _unlock_grid_size(params: Mapping[str, int]) -> tuple[int, int]:
    room = params["room_size"]
    return 2 * room - 1, room


def _build_unlock(env: GridWorld, rng: Pcg32) -> None:
    room = env.params["room_size"]
    divider = room - 1
    for y in range(1, env.height - 1):
        env.set_tile(divider, y, ObjectType.WALL, Color.GREY)
    color = _REAL_COLORS[rng.below(6)]
    door_y = 1 + rng.below(env.height - 2)
    env.set_tile(divider, door_y, ObjectType.DOOR, color, DoorState.LOCKED)

    left = [(x, y) for y in range(1, env.height - 1) for x in range(1, divider)]
    key_x, key_y = _pop_random(left, rng)
    env.set_tile(key_x, key_y, ObjectType.KEY, color)
    env.agent_pos = _pop_random(left, rng)
    env.agent_dir = Direction(rng.below(4))


# -- DoorKey ------------------------------------------------------------


def _build_door_key(env: GridWorld, rng: Pcg32) -> None:
    size = env.width
    split = 2 + rng.below(size - 4)
    for y in range(1, size - 1):
        env.set_tile(split, y, ObjectType.WALL, Color.GREY)
    color = _REAL_COLORS[rng.below(6)]
    door_y = 1 + rng.below(size - 2)
    env.set_tile(split, door_y, ObjectType.DOOR, color, DoorState.LOCKED)
    env.set_tile(size - 2, size - 2, ObjectType.GOAL, Color.GREEN)

    left = [(x, y) for y in range(1, size - 1) for x in range(1, split)]
    key_x, key_y = _pop_random(left, rng)
    env.set_tile(key_x, key_y, ObjectType.KEY, color)
    env.agent_pos = _pop_random(left, rng)
    env.agent_dir = Direction(rng.below(4))


def _square(params: Mapping[str, int]) -> tuple[int, int]:
    return params["size"], params["size"]


BUILTIN_TASKS = (
    TaskFamily(
        name="SimpleCrossing",
        params=(ParamSpec("size", 5, 31), ParamSpec("crossings", 1, 12)),
        variants={
            "small": {"size": 9, "crossings": 1},
            "medium": {"size": 11, "crossings": 2},
            "large": {"size": 13, "crossings": 3},
        },
        grid_size=_square,
        build=_build_simple_crossing,
        goal_kind=GOAL_REACH,
        check=_check_simple_crossing,
    ),
    TaskFamily(
        name="DistributionalShift",
        params=(ParamSpec("size", 7, 15), ParamSpec("lava_row", 1, 12)),
        variants={
            "small": {"size": 9, "lava_row": 1},
            "medium": {"size": 9, "lava_row": 2},
            "large": {"size": 9, "lava_row": 3},
        },
        grid_size=_square,
        build=_build_distributional_shift,
        goal_kind=GOAL_REACH,
        check=lambda p: (
            [f"parameter 'lava_row'={p['lava_row']} outside [1, {p['size'] - 3}] for size {p['size']}"]
            if p["lava_row"] > p["size"] - 3
            else []
        ),
    ),
    TaskFamily(
        name="DynamicObstacles",
        params=(ParamSpec("size", 5, 15), ParamSpec("n_obstacles", 1, 56)),
        variants={
            "small": {"size": 6, "n_obstacles": 2},
            "medium": {"size": 8, "n_obstacles": 4},
            "large": {"size": 10, "n_obstacles": 6},
        },
        grid_size=_square,
        build=_build_dynamic_obstacles,
        goal_kind=GOAL_REACH,
        check=_check_dynamic_obstacles,
    ),
    TaskFamily(
        name="CustomFetch",
        params=(ParamSpec("size", 6, 15), ParamSpec("n_targets", 1, 8), ParamSpec("n_objects", 0, 24)),
        variants={
            "small": {"size": 8, "n_targets": 1, "n_objects": 4},
            "medium": {"size": 10, "n_targets": 2, "n_objects": 6},
            "large": {"size": 12, "n_targets": 2, "n_objects": 8},
        },
        grid_size=_square,
        build=_build_custom_fetch,
        goal_kind=GOAL_PICKUP_YELLOW_KEY,
        check=_check_custom_fetch,
    ),
    TaskFamily(
        name="Unlock",
        params=(ParamSpec("room_size", 4, 12),),
        variants={
            "small": {"room_size": 5},
            "medium": {"room_size": 7},
            "large": {"room_size": 9},
        },
        grid_size=_unlock_grid_size,
        build=_build_unlock,
        goal_kind=GOAL_OPEN_DOOR,
    ),
    TaskFamily(
        name="DoorKey",
        params=(ParamSpec("size", 5, 16),),
        variants={
            "small": {"size": 6},
            "medium": {"size": 8},
            "large": {"size": 10},
        },
        grid_size=_square,
        build=_build_door_key,
        goal_kind=GOAL_REACH,
    ),
)

for _family in BUILTIN_TASKS:
    register_task(_family)
