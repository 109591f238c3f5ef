"""Tile-grid environments: seven-action dynamics, sparse rewards, seeded layouts.

The grid is stored as a uint8 array of shape (width, height, 3) with channels
(object type, color, door state), padded with a 6-tile wall ring so the 7x7
egocentric view never needs bounds checks. Task families register themselves
here; the built-in six live in :mod:`gridcl.tasks`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Mapping

import numpy as np

from .prng import Pcg32


class ObjectType(IntEnum):
    EMPTY = 0
    WALL = 1
    FLOOR = 2
    DOOR = 3
    KEY = 4
    BALL = 5
    BOX = 6
    GOAL = 7
    LAVA = 8


class Color(IntEnum):
    NONE = 0
    RED = 1
    GREEN = 2
    BLUE = 3
    PURPLE = 4
    YELLOW = 5
    GREY = 6


class DoorState(IntEnum):
    NONE = 0
    OPEN = 1
    CLOSED = 2
    LOCKED = 3


class Direction(IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3


# Action codes, in protocol order.
TURN_LEFT, TURN_RIGHT, FORWARD, PICKUP, DROP, TOGGLE, DONE = range(7)
NUM_ACTIONS = 7
VIEW_SIZE = 7
_PAD = 6  # wall ring around the stored grid; lets view extraction skip clipping

# (dx, dy) per Direction; x grows east, y grows south.
DIR_VECTORS = ((0, -1), (1, 0), (0, 1), (-1, 0))

# Success condition tags.
GOAL_REACH = "reach_goal"
GOAL_PICKUP_YELLOW_KEY = "pickup_yellow_key"
GOAL_OPEN_DOOR = "open_door"

_WALL_ENCODING = (int(ObjectType.WALL), int(Color.GREY), 0)

_PICKUPABLE = (ObjectType.KEY, ObjectType.BALL, ObjectType.BOX)


class EpisodeFinishedError(RuntimeError):
    """Raised when step() is called after the episode reported done."""


class EnvClosedError(RuntimeError):
    """Raised when a closed environment is used."""


class TaskConfigError(ValueError):
    """Raised for unknown tasks or out-of-bounds task parameters."""


@dataclass(frozen=True)
class Tile:
    object_type: ObjectType = ObjectType.EMPTY
    color: Color = Color.NONE
    state: DoorState = DoorState.NONE

    def __post_init__(self) -> None:
        if self.object_type is not ObjectType.DOOR and self.state is not DoorState.NONE:
            raise ValueError(f"only doors carry a state, got {self.object_type.name} with {self.state.name}")
        if self.object_type is ObjectType.DOOR and self.state is DoorState.NONE:
            raise ValueError("doors must be open, closed, or locked")


@dataclass(slots=True, eq=False)
class Observation:
    """Egocentric 7x7x3 view plus the carried object, all uint8-valued.

    The view is indexed [vx, vy, channel] with the agent at (3, 6) facing
    toward vy=0; channels are (object type, color, door state). Cells
    outside the grid encode as walls.
    """

    view: np.ndarray
    carried_type: int
    carried_color: int

    def tobytes(self) -> bytes:
        return self.view.tobytes() + bytes((self.carried_type, self.carried_color))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Observation):
            return NotImplemented
        return (
            self.carried_type == other.carried_type
            and self.carried_color == other.carried_color
            and np.array_equal(self.view, other.view)
        )


@dataclass(slots=True)
class StepResult:
    observation: Observation
    reward: float
    done: bool


@dataclass(frozen=True)
class ParamSpec:
    name: str
    low: int
    high: int


@dataclass(frozen=True)
class SpaceDescriptor:
    num_actions: int = NUM_ACTIONS
    view_shape: tuple[int, int, int] = (VIEW_SIZE, VIEW_SIZE, 3)


@dataclass(frozen=True)
class TaskFamily:
    """A registered task: parameter bounds, default variants, layout builder."""

    name: str
    params: tuple[ParamSpec, ...]
    variants: Mapping[str, Mapping[str, int]]
    grid_size: Callable[[Mapping[str, int]], tuple[int, int]]
    build: Callable[["GridWorld", Pcg32], None]
    goal_kind: str
    spaces: SpaceDescriptor = field(default_factory=SpaceDescriptor)
    check: Callable[[Mapping[str, int]], list[str]] | None = None

    def param_problems(self, params: Mapping[str, int]) -> list[str]:
        """Validation messages for ``params``; empty means acceptable."""
        problems = []
        known = {p.name for p in self.params}
        for name in params:
            if name not in known:
                problems.append(f"unknown parameter '{name}' for task {self.name}")
        for p in self.params:
            if p.name not in params:
                problems.append(f"missing parameter '{p.name}' for task {self.name}")
                continue
            value = params[p.name]
            if not isinstance(value, int) or isinstance(value, bool):
                problems.append(f"parameter '{p.name}' must be an integer, got {value!r}")
            elif not p.low <= value <= p.high:
                problems.append(f"parameter '{p.name}'={value} outside [{p.low}, {p.high}]")
        if not problems and self.check is not None:
            problems.extend(self.check(params))
        return problems


_REGISTRY: dict[str, TaskFamily] = {}

# Open-environment gauge, used to verify the lazy construct/close lifecycle.
_live_envs = 0
_peak_live_envs = 0


def register_task(family: TaskFamily) -> None:
    if family.name in _REGISTRY:
        raise ValueError(f"task {family.name!r} already registered")
    _REGISTRY[family.name] = family


def unregister_task(name: str) -> None:
    _REGISTRY.pop(name, None)


def get_task(name: str) -> TaskFamily:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise TaskConfigError(f"unknown task {name!r}; registered: {sorted(_REGISTRY)}") from None


def task_names() -> list[str]:
    return list(_REGISTRY)


def live_env_count() -> int:
    return _live_envs


def peak_live_env_count() -> int:
    return _peak_live_envs


def reset_env_peak() -> None:
    global _peak_live_envs
    _peak_live_envs = _live_envs


class GridWorld:
    """One task-variant environment instance.

    Layouts come from the family's seeded builder; with ``fixed_layout``
    every reset restores the construction-time layout, otherwise each
    reset draws a fresh layout from the environment's PCG32 stream.
    """

    def __init__(
        self,
        family: TaskFamily,
        params: Mapping[str, int],
        env_seed: int,
        fixed_layout: bool = False,
    ) -> None:
        problems = family.param_problems(params)
        if problems:
            raise TaskConfigError(f"bad parameters for task {family.name}: " + "; ".join(problems))
        self.task_name = family.name
        self.params = dict(params)
        self.env_seed = env_seed
        self.fixed_layout = fixed_layout
        self.goal_kind = family.goal_kind
        self._build = family.build
        self.width, self.height = family.grid_size(params)
        self.max_steps = 4 * self.width * self.height
        self.rng = Pcg32(env_seed)

        self._grid = np.empty((self.width + 2 * _PAD, self.height + 2 * _PAD, 3), dtype=np.uint8)
        self.agent_pos = (0, 0)
        self.agent_dir = Direction.EAST
        self.carried: Tile | None = None
        self.obstacles: list[tuple[int, int]] = []
        self.step_count = 0
        self.done = True  # episodes start with reset()
        self._closed = False
        self._generate()
        self._snapshot = self._take_snapshot() if fixed_layout else None

        global _live_envs, _peak_live_envs
        _live_envs += 1
        _peak_live_envs = max(_peak_live_envs, _live_envs)

    # -- layout ---------------------------------------------------------

    def _generate(self) -> None:
        grid = self._grid
        grid[:, :, 0] = _WALL_ENCODING[0]
        grid[:, :, 1] = _WALL_ENCODING[1]
        grid[:, :, 2] = _WALL_ENCODING[2]
        grid[_PAD + 1 : _PAD + self.width - 1, _PAD + 1 : _PAD + self.height - 1, :] = 0
        self.carried = None
        self.obstacles = []
        self._build(self, self.rng)

    def _take_snapshot(self):
        return (self._grid.copy(), self.agent_pos, self.agent_dir, list(self.obstacles))

    def _restore_snapshot(self) -> None:
        grid, pos, direction, obstacles = self._snapshot
        np.copyto(self._grid, grid)
        self.agent_pos = pos
        self.agent_dir = direction
        self.obstacles = list(obstacles)
        self.carried = None

    # -- tile access ----------------------------------------------------

    def tile_at(self, x: int, y: int) -> Tile:
        t, c, s = self._grid[x + _PAD, y + _PAD]
        return Tile(ObjectType(int(t)), Color(int(c)), DoorState(int(s)))

    def set_tile(self, x: int, y: int, object_type: ObjectType, color: Color = Color.NONE, state: DoorState = DoorState.NONE) -> None:
        self._grid[x + _PAD, y + _PAD, 0] = int(object_type)
        self._grid[x + _PAD, y + _PAD, 1] = int(color)
        self._grid[x + _PAD, y + _PAD, 2] = int(state)

    def tiles_array(self) -> np.ndarray:
        """Copy of the (width, height, 3) tile encoding, agent excluded."""
        return self._grid[_PAD : _PAD + self.width, _PAD : _PAD + self.height].copy()

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    # -- episode lifecycle ----------------------------------------------

    def reset(self) -> Observation:
        """Start a new episode and return its first observation."""
        if self._closed:
            raise EnvClosedError("environment is closed")
        if self.fixed_layout:
            self._restore_snapshot()
        else:
            self._generate()
        self.step_count = 0
        self.done = False
        return self._encode()

    def step(self, action: int) -> StepResult:
        if self._closed:
            raise EnvClosedError("environment is closed")
        if self.done:
            raise EpisodeFinishedError("episode finished; call reset()")
        if not isinstance(action, (int, np.integer)) or isinstance(action, bool) or not 0 <= action < NUM_ACTIONS:
            raise ValueError(f"action must be an integer in [0, {NUM_ACTIONS - 1}], got {action!r}")

        self.step_count += 1
        grid = self._grid
        reward = 0.0
        done = False
        success = False
        ax, ay = self.agent_pos

        if action == TURN_LEFT:
            self.agent_dir = Direction((self.agent_dir + 3) % 4)
        elif action == TURN_RIGHT:
            self.agent_dir = Direction((self.agent_dir + 1) % 4)
        elif action == FORWARD:
            dx, dy = DIR_VECTORS[self.agent_dir]
            fx, fy = ax + dx + _PAD, ay + dy + _PAD
            obj = grid[fx, fy, 0]
            if obj == 0 or obj == 2 or obj == 7 or obj == 8 or (obj == 3 and grid[fx, fy, 2] == 1):
                self.agent_pos = (ax + dx, ay + dy)
                if obj == 7 and self.goal_kind == GOAL_REACH:
                    success = True
                elif obj == 8:
                    done = True  # lava ends the episode with no reward
        elif action == PICKUP:
            dx, dy = DIR_VECTORS[self.agent_dir]
            fx, fy = ax + dx + _PAD, ay + dy + _PAD
            obj = int(grid[fx, fy, 0])
            if self.carried is None and obj in (4, 5, 6):
                color = Color(int(grid[fx, fy, 1]))
                self.carried = Tile(ObjectType(obj), color)
                grid[fx, fy] = 0
                if obj == 5:
                    pos = (fx - _PAD, fy - _PAD)
                    if pos in self.obstacles:
                        self.obstacles.remove(pos)
                if self.goal_kind == GOAL_PICKUP_YELLOW_KEY and obj == 4 and color is Color.YELLOW:
                    success = True
        elif action == DROP:
            if self.carried is not None:
                dx, dy = DIR_VECTORS[self.agent_dir]
                fx, fy = ax + dx + _PAD, ay + dy + _PAD
                if grid[fx, fy, 0] == 0:
                    grid[fx, fy, 0] = int(self.carried.object_type)
                    grid[fx, fy, 1] = int(self.carried.color)
                    self.carried = None
        elif action == TOGGLE:
            dx, dy = DIR_VECTORS[self.agent_dir]
            fx, fy = ax + dx + _PAD, ay + dy + _PAD
            if grid[fx, fy, 0] == 3:
                state = grid[fx, fy, 2]
                if state == 3:
                    if (
                        self.carried is not None
                        and self.carried.object_type is ObjectType.KEY
                        and int(self.carried.color) == int(grid[fx, fy, 1])
                    ):
                        grid[fx, fy, 2] = 1
                        if self.goal_kind == GOAL_OPEN_DOOR:
                            success = True
                elif state == 2:
                    grid[fx, fy, 2] = 1
                elif state == 1:
                    grid[fx, fy, 2] = 2
        # DONE (6) is accepted but has no effect on the grid.

        if success:
            reward = 1.0 - 0.9 * (self.step_count / self.max_steps)
            done = True

        if not done and self.obstacles:
            if self._move_obstacles():
                reward = -1.0
                done = True

        if not done and self.step_count >= self.max_steps:
            done = True

        self.done = done
        return StepResult(self._encode(), reward, done)

    def _move_obstacles(self) -> bool:
        """Advance every obstacle one cell; True if one lands on the agent."""
        grid = self._grid
        for i, (ox, oy) in enumerate(self.obstacles):
            candidates = []
            for dx, dy in DIR_VECTORS:
                nx, ny = ox + dx, oy + dy
                if grid[nx + _PAD, ny + _PAD, 0] == 0:
                    candidates.append((nx, ny))
            if not candidates:
                continue
            nx, ny = candidates[self.rng.below(len(candidates))]
            grid[nx + _PAD, ny + _PAD, 0] = grid[ox + _PAD, oy + _PAD, 0]
            grid[nx + _PAD, ny + _PAD, 1] = grid[ox + _PAD, oy + _PAD, 1]
            grid[ox + _PAD, oy + _PAD, 0] = 0
            grid[ox + _PAD, oy + _PAD, 1] = 0
            self.obstacles[i] = (nx, ny)
        return self.agent_pos in self.obstacles

    # -- observation ----------------------------------------------------

    def _encode(self) -> Observation:
        ax, ay = self.agent_pos
        window = self._grid[ax : ax + 2 * _PAD + 1, ay : ay + 2 * _PAD + 1]
        rotated = np.rot90(window, (4 - self.agent_dir) % 4, axes=(0, 1))
        view = rotated[3:10, 0:VIEW_SIZE].copy()
        if self.carried is None:
            return Observation(view, 0, 0)
        return Observation(view, int(self.carried.object_type), int(self.carried.color))

    def encode_observation(self) -> Observation:
        """Egocentric view of the current state; pure function of the state."""
        return self._encode()

    def close(self) -> None:
        global _live_envs
        if not self._closed:
            self._closed = True
            _live_envs -= 1

    @property
    def closed(self) -> bool:
        return self._closed


def make_env(spec, env_seed: int) -> GridWorld:
    """Build the environment for one task variant.

    ``spec`` needs ``task_name``, ``params`` and ``fixed_layout`` attributes
    (a :class:`gridcl.curriculum.TaskVariantSpec` in practice). The same
    (spec, env_seed) pair always yields an identical layout.
    """
    family = get_task(spec.task_name)
    return GridWorld(family, spec.params, env_seed, fixed_layout=spec.fixed_layout)


_TILE_CHARS = {
    ObjectType.EMPTY: ".",
    ObjectType.WALL: "#",
    ObjectType.FLOOR: "_",
    ObjectType.KEY: "k",
    ObjectType.BALL: "o",
    ObjectType.BOX: "b",
    ObjectType.GOAL: "G",
    ObjectType.LAVA: "~",
}
_DOOR_CHARS = {DoorState.OPEN: "/", DoorState.CLOSED: "D", DoorState.LOCKED: "L"}
_AGENT_CHARS = "^>v<"


def render_ascii(env: GridWorld) -> str:
    """One character per tile: # wall, . empty, G goal, ~ lava, k key,
    o ball, b box, _ floor; doors are / open, D closed, L locked; the agent
    overlays its tile as ^>v< for north/east/south/west."""
    rows = []
    for y in range(env.height):
        chars = []
        for x in range(env.width):
            tile = env.tile_at(x, y)
            if (x, y) == env.agent_pos:
                chars.append(_AGENT_CHARS[env.agent_dir])
            elif tile.object_type is ObjectType.DOOR:
                chars.append(_DOOR_CHARS[tile.state])
            else:
                chars.append(_TILE_CHARS[tile.object_type])
        rows.append("".join(chars))
    carried = "nothing" if env.carried is None else f"{env.carried.color.name.lower()} {env.carried.object_type.name.lower()}"
    rows.append(f"carrying: {carried}")
    return "\n".join(rows)
