"""Token-conditioned tabular student with TD(0) advantage estimates.

``q[(s, x)]`` holds one value per action for state key ``s`` and token
index ``x``; ``v[s]`` is the state value. Missing entries read as zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .gridworld import N_ACTIONS, Action, GridConfig, Observation
from .rng import SplitMix64

CHECKPOINT_MAGIC = "bifeedback-student-tables"
CHECKPOINT_VERSION = 1

_ZERO_Q = (0.0,) * N_ACTIONS

# action each token index suggests (go_forward, turn_left, turn_right,
# goal_behind, explore); explore suggests nothing
TOKEN_HINT = (int(Action.FORWARD), int(Action.TURN_LEFT), int(Action.TURN_RIGHT),
              int(Action.TURN_LEFT), None)


def state_key(obs: Observation, grid: GridConfig) -> int:
    """Injective integer encoding of (agent_pos, agent_dir, goal_pos)."""
    (ax, ay), (gx, gy) = obs.agent_pos, obs.goal_pos
    cells = grid.width * grid.height
    agent = (ax * grid.height + ay) * 4 + int(obs.agent_dir)
    return agent * cells + gx * grid.height + gy


@dataclass(frozen=True)
class Transition:
    s: int
    x: int
    a: int
    r: float
    s_next: int
    terminal: bool
    x_next: int | None = None


@dataclass(frozen=True)
class AdvantageEstimate:
    value: float


@dataclass
class StudentPolicy:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon: float = 1.0
    follow_hints: bool = True
    q: dict[tuple[int, int], list[float]] = field(default_factory=dict)
    v: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")

    def q_values(self, s: int, x: int):
        return self.q.get((s, x), _ZERO_Q)

    def value(self, s: int) -> float:
        return self.v.get(s, 0.0)

    def copy(self) -> "StudentPolicy":
        return StudentPolicy(self.alpha, self.gamma, self.epsilon,
                             {k: list(row) for k, row in self.q.items()}, dict(self.v))


def greedy_action(q_row, hint: int | None = None) -> Action:
    """Argmax of ``q_row``; ties go to ``hint`` if it is tied, else lowest index."""
    best = 0
    for i in range(1, N_ACTIONS):
        if q_row[i] > q_row[best]:
            best = i
    if hint is not None and q_row[hint] == q_row[best]:
        return Action(hint)
    return Action(best)


def select_action(policy: StudentPolicy, s: int, x: int, rng: SplitMix64,
                  epsilon: float | None = None) -> Action:
    """Epsilon-greedy; ties go to the lowest action index."""
    eps = policy.epsilon if epsilon is None else epsilon
    if eps > 0 and rng.random() < eps:
        return Action(rng.randbelow(N_ACTIONS))
    hint = TOKEN_HINT[x] if policy.follow_hints else None
    return greedy_action(policy.q_values(s, x), hint)


def td_update(policy: StudentPolicy, tr: Transition) -> AdvantageEstimate:
    """One TD(0) step on V and one Q-learning step on Q.

    Returns the TD error of V, computed before either table is written.
    Terminal transitions never read the tables at ``s_next``.
    """
    v_s = policy.value(tr.s)
    q_row = policy.q_values(tr.s, tr.x)
    if tr.terminal:
        v_next = 0.0
        q_next = 0.0
    else:
        v_next = policy.value(tr.s_next)
        q_next = max(policy.q_values(tr.s_next, tr.x if tr.x_next is None else tr.x_next))
    delta = tr.r + policy.gamma * v_next - v_s
    q_err = tr.r + policy.gamma * q_next - q_row[tr.a]
    if delta != 0.0:
        policy.v[tr.s] = v_s + policy.alpha * delta
    if q_err != 0.0:
        row = policy.q.get((tr.s, tr.x))
        if row is None:
            row = policy.q[(tr.s, tr.x)] = list(_ZERO_Q)
        row[tr.a] += policy.alpha * q_err
    return AdvantageEstimate(delta)


def initial_advantage(policy: StudentPolicy, s0: int, x0: int) -> AdvantageEstimate:
    """Mean action value minus state value at the episode's first (s0, x0)."""
    row = policy.q_values(s0, x0)
    return AdvantageEstimate(sum(row) / len(row) - policy.value(s0))


def save_checkpoint(policy: StudentPolicy, path: str | Path) -> None:
    """Write the tables as tab-separated text.

    Layout (version 1)::

        bifeedback-student-tables<TAB>1
        params<TAB>alpha<TAB>gamma<TAB>epsilon
        v<TAB>state<TAB>value
        q<TAB>state<TAB>token<TAB>q0<TAB>q1<TAB>q2

    Floats are written with ``repr`` so they parse back bit-exactly.
    """
    lines = [f"{CHECKPOINT_MAGIC}\t{CHECKPOINT_VERSION}",
             f"params\t{policy.alpha!r}\t{policy.gamma!r}\t{policy.epsilon!r}"]
    for s in sorted(policy.v):
        lines.append(f"v\t{s}\t{policy.v[s]!r}")
    for (s, x) in sorted(policy.q):
        vals = "\t".join(repr(float(q)) for q in policy.q[(s, x)])
        lines.append(f"q\t{s}\t{x}\t{vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> StudentPolicy:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split("\t") != [CHECKPOINT_MAGIC, str(CHECKPOINT_VERSION)]:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} student checkpoint")
    policy = None
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        kind = parts[0]
        if kind == "params":
            policy = StudentPolicy(float(parts[1]), float(parts[2]), float(parts[3]))
        elif policy is None:
            raise ValueError(f"{path}:{lineno}: params line must come first")
        elif kind == "v":
            policy.v[int(parts[1])] = float(parts[2])
        elif kind == "q":
            policy.q[(int(parts[1]), int(parts[2]))] = [float(p) for p in parts[3:]]
        else:
            raise ValueError(f"{path}:{lineno}: unknown record {kind!r}")
    if policy is None:
        raise ValueError(f"{path}: missing params line")
    for row in policy.q.values():
        if len(row) != N_ACTIONS or not all(math.isfinite(q) for q in row):
            raise ValueError(f"{path}: malformed q row {row}")
    return policy
