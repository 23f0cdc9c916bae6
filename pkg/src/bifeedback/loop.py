"""The per-step teacher/student loop with advantage-comparison feedback.

Each step: the teacher reads the coarse goal description and emits a token,
the student acts on (state, token), the environment transitions, the student
takes a TD step whose error is the new advantage estimate, and (when
feedback is enabled) the teacher is told whether that estimate fell below
the previous one. The previous estimate is then replaced by the new one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .gridworld import Action, GridWorld, RelativeGoal, relative_goal
from .rng import SplitMix64
from .student import (AdvantageEstimate, StudentPolicy, Transition, initial_advantage,
                      select_action, state_key, td_update)
from .teacher import FeedbackSignal, Token


def compare_advantage(prev: AdvantageEstimate, new: AdvantageEstimate) -> FeedbackSignal:
    """Negative iff the advantage dropped; ties count as Positive."""
    if prev.value > new.value:
        return FeedbackSignal.NEGATIVE
    return FeedbackSignal.POSITIVE


@dataclass
class LoopState:
    prev_advantage: AdvantageEstimate = AdvantageEstimate(0.0)
    t: int = 0
    episode: int = 0
    feedback_enabled: bool = True


@dataclass(frozen=True)
class StepRecord:
    t: int
    episode: int
    ctx: RelativeGoal
    token: Token
    action: Action
    reward: float
    prev_advantage: float
    advantage: float
    feedback: Optional[FeedbackSignal]
    terminated: bool = False
    truncated: bool = False

    def to_json(self) -> dict:
        return {
            "episode": self.episode,
            "t": self.t,
            "heading": self.ctx.heading.name.capitalize(),
            "distance": self.ctx.distance.name.capitalize(),
            "token": self.token.wire_name,
            "action": self.action.name.lower(),
            "reward": self.reward,
            "prev_advantage": self.prev_advantage,
            "advantage": self.advantage,
            "feedback": None if self.feedback is None else self.feedback.value,
            "terminated": self.terminated,
            "truncated": self.truncated,
        }


Sink = Callable[[StepRecord], None]


class TeacherStudentLoop:
    def __init__(self, env: GridWorld, teacher, student: StudentPolicy, rng: SplitMix64,
                 feedback_enabled: bool = True, sink: Sink | None = None,
                 compare: Callable[[AdvantageEstimate, AdvantageEstimate],
                                   FeedbackSignal] = compare_advantage):
        self.env = env
        self.compare = compare
        self.teacher = teacher
        self.student = student
        self.rng = rng
        self.state = LoopState(feedback_enabled=feedback_enabled)
        self.sink = sink
        self.obs = None
        self.next_token: Token | None = None
        self.lookahead = True

    def run_step(self, token: Token | None = None) -> StepRecord:
        st = self.state
        obs = self.obs
        ctx = relative_goal(obs)
        if token is None:
            token = self.next_token if self.next_token is not None else self.teacher.emit(ctx, st.episode, st.t)
        self.next_token = None
        s = state_key(obs, self.env.config)
        action = select_action(self.student, s, token, self.rng)
        out = self.env.step(action)
        s_next = state_key(out.observation, self.env.config)
        x_next = None
        if not self.env.done and self.lookahead:
            self.next_token = self.teacher.emit(relative_goal(out.observation), st.episode, st.t + 1)
            x_next = int(self.next_token)
        delta = td_update(self.student,
                          Transition(s, int(token), int(action), out.reward, s_next,
                                     out.terminated, x_next))
        signal = None
        prev = st.prev_advantage
        if st.feedback_enabled:
            signal = self.compare(prev, delta)
            self.teacher.feedback(ctx, token, signal)
        st.prev_advantage = delta
        record = StepRecord(st.t, st.episode, ctx, token, action, out.reward, prev.value,
                            delta.value, signal, out.terminated, out.truncated)
        st.t += 1
        self.obs = out.observation
        if self.sink is not None:
            self.sink(record)
        return record

    def run_episode(self, seed: int) -> list[StepRecord]:
        st = self.state
        self.obs = self.env.reset(seed)
        st.t = 0
        ctx = relative_goal(self.obs)
        token = self.teacher.emit(ctx, st.episode, 0)
        st.prev_advantage = initial_advantage(
            self.student, state_key(self.obs, self.env.config), int(token))
        records = [self.run_step(token)]
        while not self.env.done:
            records.append(self.run_step())
        st.episode += 1
        return records


class TraceWriter:
    """Sink writing one JSON object per step record per line."""

    def __init__(self, path):
        self.fh = open(path, "w", encoding="utf-8")

    def __call__(self, record: StepRecord) -> None:
        self.fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")

    def close(self) -> None:
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass(frozen=True)
class SignMismatch:
    line: int
    episode: int
    t: int
    expected: Optional[str]
    recorded: Optional[str]


def verify_trace(rows: Iterable[dict]) -> list[SignMismatch]:
    """Re-derive every recorded feedback sign and check the advantage carry.

    A row is bad when its feedback disagrees with ``compare_advantage`` of
    its recorded advantages, or when its ``prev_advantage`` is not the
    previous row's ``advantage`` within the same episode.
    """
    bad = []
    last = None
    for i, row in enumerate(rows, start=1):
        recorded = row.get("feedback")
        if recorded is None:
            expected = None
        else:
            expected = compare_advantage(AdvantageEstimate(row["prev_advantage"]),
                                         AdvantageEstimate(row["advantage"])).value
        carry_ok = (last is None or last["episode"] != row["episode"] or row["t"] == 0
                    or last["advantage"] == row["prev_advantage"])
        if recorded != expected or not carry_ok:
            bad.append(SignMismatch(i, row["episode"], row["t"], expected, recorded))
        last = row
    return bad


def read_trace(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
