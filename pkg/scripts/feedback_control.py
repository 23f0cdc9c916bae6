"""Compare advantage-comparison feedback against uninformative feedback.

Trains the tabular teacher with (a) the real sign rule, (b) always-Positive
and (c) random signs, holding everything else fixed, to show how much of the
Bidirectional gain comes from the sign information itself.

    python scripts/feedback_control.py --episodes 1000 --seeds 1-5
"""
import argparse
import statistics

from bifeedback.config import ExperimentConfig
from bifeedback.gridworld import GridWorld
from bifeedback.harness import build_teacher, evaluate
from bifeedback.loop import TeacherStudentLoop, compare_advantage
from bifeedback.rng import SplitMix64, derive_seed
from bifeedback.student import StudentPolicy
from bifeedback.teacher import FeedbackSignal


def always_positive(prev, new):
    return FeedbackSignal.POSITIVE


def random_sign(seed):
    rng = SplitMix64(seed)
    return lambda prev, new: FeedbackSignal.POSITIVE if rng.random() < 0.5 else FeedbackSignal.NEGATIVE


def train(cfg, seed, compare):
    env = GridWorld(cfg.env.grid())
    sc = cfg.student
    student = StudentPolicy(sc.alpha, sc.gamma, sc.epsilon_start, sc.follow_hints)
    teacher, policy = build_teacher(cfg, seed)
    loop = TeacherStudentLoop(env, teacher, student, SplitMix64(derive_seed(seed, 3)),
                              feedback_enabled=True, compare=compare)
    for ep in range(cfg.episodes):
        student.epsilon = sc.epsilon_at(ep, cfg.episodes)
        loop.run_episode(derive_seed(cfg.env.env_seed, seed, 1, ep))
    return evaluate(cfg, student, teacher, policy)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seeds", default="1-5")
    p.add_argument("--prior", type=float, default=None)
    args = p.parse_args()
    lo, _, hi = args.seeds.partition("-")
    seeds = list(range(int(lo), int(hi or lo) + 1))
    cfg = ExperimentConfig(episodes=args.episodes, seeds=seeds)
    if args.prior is not None:
        cfg.teacher.prior_logit = args.prior
    rules = {"advantage comparison": lambda s: compare_advantage,
             "always positive": lambda s: always_positive,
             "random sign": lambda s: random_sign(derive_seed(s, 99))}
    for name, make in rules.items():
        results = [train(cfg, s, make(s)) for s in seeds]
        sr = [r[0] for r in results]
        ret = [r[1] for r in results]
        print(f"{name:22s} success {statistics.fmean(sr):.3f} ± {statistics.pstdev(sr):.3f}  "
              f"return {statistics.fmean(ret):.3f}")


if __name__ == "__main__":
    main()
