"""Fully observed single-room navigation task: reach the red ball.

Coordinates are (x, y) with y increasing southward. The outer ring of cells
is wall, so a ``width x height`` grid has ``(width-2) * (height-2)`` free
cells. There are no distractor objects.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .errors import ConfigError, EpisodeStateError
from .rng import SplitMix64


class Direction(IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3


# unit vectors indexed by Direction
DIR_VEC = ((0, -1), (1, 0), (0, 1), (-1, 0))


class Action(IntEnum):
    TURN_LEFT = 0
    TURN_RIGHT = 1
    FORWARD = 2


N_ACTIONS = len(Action)


class Heading(IntEnum):
    AHEAD = 0
    LEFT = 1
    RIGHT = 2
    BEHIND = 3


class DistanceBucket(IntEnum):
    ADJACENT = 0
    NEAR = 1
    FAR = 2


@dataclass(frozen=True)
class Observation:
    agent_pos: tuple[int, int]
    agent_dir: Direction
    goal_pos: tuple[int, int]
    steps_remaining: int


@dataclass(frozen=True)
class StepOutcome:
    observation: Observation
    reward: float
    terminated: bool
    truncated: bool


@dataclass(frozen=True)
class RelativeGoal:
    heading: Heading
    distance: DistanceBucket


@dataclass(frozen=True)
class GridConfig:
    width: int = 8
    height: int = 8
    max_steps: int = 64

    def validate(self) -> None:
        if self.width < 4 or self.height < 4:
            raise ConfigError(f"grid must be at least 4x4, got {self.width}x{self.height}")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")


class GridWorld:
    def __init__(self, config: GridConfig | None = None):
        self.config = config or GridConfig()
        self.config.validate()
        self.width = self.config.width
        self.height = self.config.height
        self.max_steps = self.config.max_steps
        self.rng = SplitMix64(0)
        self.agent_pos = (1, 1)
        self.agent_dir = Direction.EAST
        self.goal_pos = (2, 1)
        self.step_count = 0
        self.done = True

    def interior_cells(self) -> list[tuple[int, int]]:
        return [(x, y) for y in range(1, self.height - 1) for x in range(1, self.width - 1)]

    def reset(self, seed: int) -> Observation:
        self.rng = SplitMix64(seed)
        cells = self.interior_cells()
        n = len(cells)
        a = self.rng.randbelow(n)
        g = self.rng.randbelow(n - 1)
        if g >= a:
            g += 1
        self.agent_pos = cells[a]
        self.goal_pos = cells[g]
        self.agent_dir = Direction(self.rng.randbelow(4))
        self.step_count = 0
        self.done = False
        return self.observe()

    def observe(self) -> Observation:
        return Observation(self.agent_pos, self.agent_dir, self.goal_pos,
                           self.max_steps - self.step_count)

    def is_wall(self, x: int, y: int) -> bool:
        return x <= 0 or y <= 0 or x >= self.width - 1 or y >= self.height - 1

    def step(self, action: Action) -> StepOutcome:
        if self.done:
            raise EpisodeStateError("step() called after the episode ended; call reset()")
        if action == Action.TURN_LEFT:
            self.agent_dir = Direction((self.agent_dir - 1) % 4)
        elif action == Action.TURN_RIGHT:
            self.agent_dir = Direction((self.agent_dir + 1) % 4)
        elif action == Action.FORWARD:
            dx, dy = DIR_VEC[self.agent_dir]
            nx, ny = self.agent_pos[0] + dx, self.agent_pos[1] + dy
            if not self.is_wall(nx, ny):
                self.agent_pos = (nx, ny)
        else:
            raise ValueError(f"unknown action {action!r}")
        self.step_count += 1
        terminated = self.agent_pos == self.goal_pos
        reward = 1.0 - 0.9 * (self.step_count / self.max_steps) if terminated else 0.0
        truncated = (not terminated) and self.step_count >= self.max_steps
        self.done = terminated or truncated
        return StepOutcome(self.observe(), reward, terminated, truncated)


def egocentric_offset(obs: Observation) -> tuple[int, int]:
    """Goal offset as (forward, rightward) cell counts in the agent's frame."""
    dx = obs.goal_pos[0] - obs.agent_pos[0]
    dy = obs.goal_pos[1] - obs.agent_pos[1]
    fx, fy = DIR_VEC[obs.agent_dir]
    rx, ry = DIR_VEC[(obs.agent_dir + 1) % 4]
    return dx * fx + dy * fy, dx * rx + dy * ry


def relative_goal(obs: Observation) -> RelativeGoal:
    """Coarse egocentric description of where the goal is.

    The dominant axis of the (forward, lateral) offset picks the heading.
    Exact diagonals resolve to the lateral side, except the two front
    diagonals, which resolve to Ahead (otherwise turning toward the goal
    flips it onto the opposite diagonal and a heading-follower oscillates).
    A zero offset reports Left.
    """
    fwd, lat = egocentric_offset(obs)
    if fwd > abs(lat) or (fwd > 0 and fwd == abs(lat)):
        heading = Heading.AHEAD
    elif abs(lat) > abs(fwd) or (lat != 0 and abs(lat) == abs(fwd)):
        heading = Heading.RIGHT if lat > 0 else Heading.LEFT
    elif fwd < 0:
        heading = Heading.BEHIND
    else:
        heading = Heading.LEFT
    dist = abs(fwd) + abs(lat)
    if dist <= 1:
        bucket = DistanceBucket.ADJACENT
    elif dist <= 4:
        bucket = DistanceBucket.NEAR
    else:
        bucket = DistanceBucket.FAR
    return RelativeGoal(heading, bucket)
