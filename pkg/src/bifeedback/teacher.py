"""Token-emitting teachers and the binary feedback they learn from.

A teacher sees only the :class:`RelativeGoal` abstraction of the state and
answers with one token from a fixed five-word vocabulary. Three teachers
share the ``emit`` / ``feedback`` surface:

* :class:`TabularTeacher` - softmax over a learnable logit table
* :class:`OracleTeacher` - scripted, stateless heading-to-token map
* :class:`ConstantTeacher` - always the same token (the no-teacher ablation)

The remote adapter lives in :mod:`bifeedback.protocol`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from .gridworld import Action, DistanceBucket, Heading, RelativeGoal
from .rng import SplitMix64


class Token(IntEnum):
    GO_FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    GOAL_BEHIND = 3
    EXPLORE = 4

    @property
    def wire_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "Token":
        if not isinstance(name, str) or name != name.lower() or name.upper() not in cls.__members__:
            raise KeyError(f"{name!r} is not in the token vocabulary")
        return cls[name.upper()]


VOCAB = tuple(t.wire_name for t in Token)
VOCAB_SIZE = len(Token)
N_CONTEXTS = len(Heading) * len(DistanceBucket)

# primitive action a token suggests; used only by tests and demos
TOKEN_ACTION = {
    Token.GO_FORWARD: Action.FORWARD,
    Token.TURN_LEFT: Action.TURN_LEFT,
    Token.TURN_RIGHT: Action.TURN_RIGHT,
    Token.GOAL_BEHIND: Action.TURN_LEFT,
}


class FeedbackSignal(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


def context_index(ctx: RelativeGoal) -> int:
    return int(ctx.heading) * len(DistanceBucket) + int(ctx.distance)


def softmax(logits, temperature: float = 1.0) -> list[float]:
    scaled = [l / temperature for l in logits]
    m = max(scaled)
    exps = [math.exp(s - m) for s in scaled]
    z = sum(exps)
    return [e / z for e in exps]


@dataclass
class TeacherPolicy:
    temperature: float = 1.0
    beta: float = 0.1
    logits: list[list[float]] = field(
        default_factory=lambda: [[0.0] * VOCAB_SIZE for _ in range(N_CONTEXTS)])

    def __post_init__(self) -> None:
        if not self.temperature > 0 or not self.beta > 0:
            raise ValueError("temperature and beta must be positive")

    @classmethod
    def with_prior(cls, prior_logit: float, temperature: float = 1.0,
                   beta: float = 0.1) -> "TeacherPolicy":
        """Start from a weak preference for the heading-appropriate token.

        Stands in for a pre-trained model's commonsense. With
        ``prior_logit=0.5`` the heading-appropriate token has probability
        ~0.29 and each of the others ~0.18; at 1.0 it is ~0.40.
        """
        policy = cls(temperature, beta)
        for h in Heading:
            for d in DistanceBucket:
                policy.logits[context_index(RelativeGoal(h, d))][_ORACLE[h]] += prior_logit
        return policy

    def probs(self, ctx: RelativeGoal) -> list[float]:
        return softmax(self.logits[context_index(ctx)], self.temperature)

    def apply_feedback(self, ctx: RelativeGoal, token: Token,
                       signal: FeedbackSignal) -> "TeacherPolicy":
        step = self.beta if signal is FeedbackSignal.POSITIVE else -self.beta
        self.logits[context_index(ctx)][Token(token)] += step
        return self

    def snapshot(self) -> tuple[tuple[float, ...], ...]:
        return tuple(tuple(row) for row in self.logits)


def emit(policy: TeacherPolicy, ctx: RelativeGoal, rng: SplitMix64) -> Token:
    """Sample a token from the policy's softmax for ``ctx``."""
    return Token(rng.categorical(policy.probs(ctx)))


def apply_feedback(policy: TeacherPolicy, ctx: RelativeGoal, token: Token,
                   signal: FeedbackSignal) -> TeacherPolicy:
    return policy.apply_feedback(ctx, token, signal)


_ORACLE = {
    Heading.AHEAD: Token.GO_FORWARD,
    Heading.LEFT: Token.TURN_LEFT,
    Heading.RIGHT: Token.TURN_RIGHT,
    Heading.BEHIND: Token.GOAL_BEHIND,
}


def oracle_token(ctx: RelativeGoal) -> Token:
    return _ORACLE[ctx.heading]


class TabularTeacher:
    learns = True

    def __init__(self, policy: TeacherPolicy, rng: SplitMix64):
        self.policy = policy
        self.rng = rng

    def emit(self, ctx: RelativeGoal, episode: int = 0, t: int = 0) -> Token:
        return emit(self.policy, ctx, self.rng)

    def feedback(self, ctx: RelativeGoal, token: Token, signal: FeedbackSignal) -> None:
        self.policy.apply_feedback(ctx, token, signal)


class OracleTeacher:
    learns = False

    def emit(self, ctx: RelativeGoal, episode: int = 0, t: int = 0) -> Token:
        return oracle_token(ctx)

    def feedback(self, ctx, token, signal) -> None:
        pass


class ConstantTeacher:
    learns = False

    def __init__(self, token: Token = Token.EXPLORE):
        self.token = Token(token)

    def emit(self, ctx: RelativeGoal, episode: int = 0, t: int = 0) -> Token:
        return self.token

    def feedback(self, ctx, token, signal) -> None:
        pass
