"""Seeded experiment runner for the four teacher/feedback conditions.

Per seed: build environment, teacher and student for the condition, train
for ``episodes`` episodes, and every ``eval_every`` episodes run a greedy,
non-learning evaluation on a fixed set of evaluation episodes. Per-seed rows
are folded into mean / population-std aggregates in sorted seed order, so
aggregates do not depend on the order seeds were listed or finished in.
"""
from __future__ import annotations

import csv
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import Condition, ExperimentConfig
from .gridworld import GridWorld, relative_goal
from .loop import TeacherStudentLoop, TraceWriter
from .rng import SplitMix64, derive_seed
from .student import StudentPolicy, save_checkpoint, select_action, state_key
from .teacher import ConstantTeacher, OracleTeacher, TabularTeacher, TeacherPolicy, Token

log = logging.getLogger(__name__)

CSV_COLUMNS = ["condition", "seed", "episode", "success_rate", "mean_return", "mean_length"]
PLOT_COLUMNS = ["condition", "episode", "success_mean", "success_std", "return_mean",
                "return_std", "length_mean", "length_std", "n_seeds"]

# substream tags
_EPISODE, _TEACHER, _STUDENT, _EVAL_ENV, _EVAL_TEACHER = 1, 2, 3, 0xE7A1, 0xE7A2


@dataclass(frozen=True)
class MetricsRow:
    condition: str
    seed: int
    episode: int
    success_rate: float
    mean_return: float
    mean_length: float


@dataclass(frozen=True)
class AggregateRow:
    condition: str
    episode: int
    success_mean: float
    success_std: float
    return_mean: float
    return_std: float
    length_mean: float
    length_std: float
    n_seeds: int


@dataclass
class MetricsSeries:
    rows: list[MetricsRow] = field(default_factory=list)

    def seeds(self) -> list[int]:
        return sorted({r.seed for r in self.rows})

    def for_seed(self, seed: int) -> list[MetricsRow]:
        return [r for r in self.rows if r.seed == seed]

    def aggregate(self) -> list[AggregateRow]:
        groups: dict[tuple[str, int], list[MetricsRow]] = {}
        for r in sorted(self.rows, key=lambda r: (r.condition, r.episode, r.seed)):
            groups.setdefault((r.condition, r.episode), []).append(r)
        out = []
        for (cond, ep), rows in groups.items():
            s = [r.success_rate for r in rows]
            g = [r.mean_return for r in rows]
            n = [r.mean_length for r in rows]
            out.append(AggregateRow(cond, ep, statistics.fmean(s), statistics.pstdev(s),
                                    statistics.fmean(g), statistics.pstdev(g),
                                    statistics.fmean(n), statistics.pstdev(n), len(rows)))
        return out

    def first_episode_reaching(self, success: float, condition: str | None = None) -> int | None:
        """Earliest eval point whose aggregate success rate is >= ``success``."""
        for a in self.aggregate():
            if (condition is None or a.condition == condition) and a.success_mean >= success:
                return a.episode
        return None

    def final(self, condition: str | None = None) -> AggregateRow:
        rows = [a for a in self.aggregate() if condition is None or a.condition == condition]
        return max(rows, key=lambda a: a.episode)


def eval_seeds(cfg: ExperimentConfig) -> list[int]:
    return [derive_seed(cfg.env.env_seed, _EVAL_ENV, i) for i in range(cfg.eval_episodes)]


def build_teacher(cfg: ExperimentConfig, seed: int):
    """Teacher object and (for tabular teachers) its logit table."""
    cond = Condition(cfg.condition)
    if cond is Condition.ORACLE_TEACHER:
        return OracleTeacher(), None
    if cond is Condition.NO_TEACHER:
        return ConstantTeacher(Token.EXPLORE), None
    t = cfg.teacher
    if t.kind == "oracle":
        return OracleTeacher(), None
    if t.kind == "remote":
        from .protocol import RemoteTeacher
        return RemoteTeacher(t.remote_addr, t.timeout, t.fallback), None
    policy = TeacherPolicy.with_prior(t.prior_logit, t.temperature, t.beta)
    return TabularTeacher(policy, SplitMix64(derive_seed(seed, _TEACHER))), policy


def evaluate(cfg: ExperimentConfig, student: StudentPolicy, teacher,
             policy: TeacherPolicy | None = None) -> tuple[float, float, float]:
    """Greedy evaluation; returns (success rate, mean discounted return, mean length).

    Does not write to the student or teacher tables. A tabular teacher is
    sampled through a fresh per-episode generator so the training stream
    is untouched.
    """
    env = GridWorld(cfg.env.grid())
    gamma = student.gamma
    successes, returns, lengths = 0, 0.0, 0
    for i, seed in enumerate(eval_seeds(cfg)):
        if policy is not None:
            emitter = TabularTeacher(policy, SplitMix64(derive_seed(cfg.env.env_seed,
                                                                   _EVAL_TEACHER, i)))
        else:
            emitter = teacher
        obs = env.reset(seed)
        while not env.done:
            token = emitter.emit(relative_goal(obs), -1 - i, env.step_count)
            action = select_action(student, state_key(obs, env.config), int(token), None,
                                   epsilon=0.0)
            out = env.step(action)
            obs = out.observation
            if out.terminated:
                successes += 1
                returns += gamma ** (env.step_count - 1) * out.reward
        lengths += env.step_count
    n = len(eval_seeds(cfg))
    return successes / n, returns / n, lengths / n


def train_seed(cfg: ExperimentConfig, seed: int, out_dir: str | Path | None = None,
               rows: list | None = None) -> tuple[list[MetricsRow], StudentPolicy, object]:
    """Train one seed; appends each eval row to ``rows`` as soon as it exists."""
    rows = [] if rows is None else rows
    mine: list[MetricsRow] = []
    cond = Condition(cfg.condition)
    env = GridWorld(cfg.env.grid())
    sc = cfg.student
    student = StudentPolicy(sc.alpha, sc.gamma, sc.epsilon_start, sc.follow_hints)
    teacher, policy = build_teacher(cfg, seed)
    feedback = cond is Condition.BIDIRECTIONAL
    trace = None
    if cfg.trace and out_dir is not None:
        trace = TraceWriter(Path(out_dir) / f"trace_{cond.value}_seed{seed}.jsonl")
    loop = TeacherStudentLoop(env, teacher, student, SplitMix64(derive_seed(seed, _STUDENT)),
                              feedback_enabled=feedback, sink=trace)
    try:
        for ep in range(cfg.episodes):
            student.epsilon = sc.epsilon_at(ep, cfg.episodes)
            loop.run_episode(derive_seed(cfg.env.env_seed, seed, _EPISODE, ep))
            if (ep + 1) % cfg.eval_every == 0:
                sr, ret, length = evaluate(cfg, student, teacher, policy)
                row = MetricsRow(cond.value, seed, ep + 1, sr, ret, length)
                mine.append(row)
                rows.append(row)
                log.debug("%s seed %d ep %d success %.2f", cond.value, seed, ep + 1, sr)
    finally:
        if trace is not None:
            trace.close()
        if hasattr(teacher, "close"):
            teacher.close()
    if out_dir is not None:
        save_checkpoint(student, Path(out_dir) / f"student_seed{seed}.tsv")
        if policy is not None:
            (Path(out_dir) / f"teacher_seed{seed}.json").write_text(
                json.dumps({"temperature": policy.temperature, "beta": policy.beta,
                            "logits": policy.logits}), encoding="utf-8")
    return mine, student, policy


def _train_worker(args):
    cfg, seed, out_dir = args
    rows, _, _ = train_seed(cfg, seed, out_dir)
    return rows


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> MetricsSeries:
    """Run every seed and, if ``out_dir`` is given, write CSV, plot data and manifest.

    If a seed fails, rows gathered so far are flushed to the CSV before the
    exception propagates.
    """
    cfg.validate()
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_manifest(cfg, out_dir / "manifest.json")
    series = MetricsSeries()
    try:
        if cfg.workers > 1 and len(cfg.seeds) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = pool.map(_train_worker, [(cfg, s, out_dir) for s in cfg.seeds])
                for rows in results:
                    series.rows.extend(rows)
        else:
            for seed in cfg.seeds:
                train_seed(cfg, seed, out_dir, series.rows)
    except BaseException:
        if out_dir is not None:
            write_csv(series, out_dir / "metrics.csv")
            log.error("run aborted; %d partial rows flushed to %s", len(series.rows),
                      out_dir / "metrics.csv")
        raise
    if out_dir is not None:
        write_csv(series, out_dir / "metrics.csv")
        emit_plot_data(series, out_dir / "plot_data.csv")
    return series


def _io_error(path, e: OSError) -> OSError:
    return OSError(e.errno, f"cannot write {path}: {e.strerror or e}")


def write_csv(series: MetricsSeries, path: str | Path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in series.rows:
                w.writerow([r.condition, r.seed, r.episode, repr(r.success_rate),
                            repr(r.mean_return), repr(r.mean_length)])
    except OSError as e:
        raise _io_error(path, e) from e


def read_csv(path: str | Path) -> MetricsSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = [MetricsRow(d["condition"], int(d["seed"]), int(d["episode"]),
                           float(d["success_rate"]), float(d["mean_return"]),
                           float(d["mean_length"])) for d in reader]
    return MetricsSeries(rows)


def emit_plot_data(series: MetricsSeries, path: str | Path) -> None:
    """Per-condition mean and population std across seeds, one row per eval point."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PLOT_COLUMNS)
            for a in series.aggregate():
                w.writerow([a.condition, a.episode] + [repr(v) for v in (
                    a.success_mean, a.success_std, a.return_mean, a.return_std,
                    a.length_mean, a.length_std)] + [a.n_seeds])
    except OSError as e:
        raise _io_error(path, e) from e


def write_manifest(cfg: ExperimentConfig, path: str | Path) -> None:
    manifest = {"artifact": "bifeedback", "version": __version__, "config": cfg.to_dict()}
    try:
        Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")
    except OSError as e:
        raise _io_error(path, e) from e


def load_teacher_policy(path: str | Path) -> TeacherPolicy:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return TeacherPolicy(data["temperature"], data["beta"], data["logits"])
