"""Run configuration: dataclass tree, TOML loading and ``section.key=value`` overrides.

File format (TOML, ``config_version = 1``)::

    config_version = 1

    [experiment]
    condition = "bidirectional"   # bidirectional | no_feedback | oracle_teacher | no_teacher
    episodes = 2000
    seeds = [1, 2, 3]
    eval_every = 10
    eval_episodes = 20
    trace = false
    workers = 1

    [env]
    grid_width = 8
    grid_height = 8
    max_steps = 64
    env_seed = 0

    [teacher]
    kind = "tabular"              # tabular | oracle | remote
    beta = 0.1
    temperature = 1.0
    prior_logit = 0.5
    remote_addr = ""              # host:port, for kind = "remote"
    timeout = 5.0
    fallback = "oracle"           # oracle | abort

    [student]
    alpha = 0.1
    gamma = 0.99
    epsilon_start = 1.0
    epsilon_end = 0.05
    epsilon_decay_fraction = 0.5
    follow_hints = true

Precedence is defaults < file < overrides.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import tomli

from .errors import ConfigError
from .gridworld import GridConfig

CONFIG_VERSION = 1


class Condition(str, Enum):
    BIDIRECTIONAL = "bidirectional"
    NO_FEEDBACK = "no_feedback"
    ORACLE_TEACHER = "oracle_teacher"
    NO_TEACHER = "no_teacher"


@dataclass
class EnvConfig:
    grid_width: int = 8
    grid_height: int = 8
    max_steps: int = 64
    env_seed: int = 0

    def grid(self) -> GridConfig:
        return GridConfig(self.grid_width, self.grid_height, self.max_steps)


@dataclass
class TeacherConfig:
    kind: str = "tabular"
    beta: float = 0.1
    temperature: float = 1.0
    prior_logit: float = 0.5
    remote_addr: str = ""
    timeout: float = 5.0
    fallback: str = "oracle"


@dataclass
class StudentConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5
    follow_hints: bool = True

    def epsilon_at(self, episode: int, episodes: int) -> float:
        """Linear decay from start to end over the first fraction of training."""
        horizon = self.epsilon_decay_fraction * episodes
        if horizon <= 0 or episode >= horizon:
            return self.epsilon_end
        frac = episode / horizon
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


@dataclass
class ExperimentConfig:
    condition: Condition = Condition.BIDIRECTIONAL
    episodes: int = 2000
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    eval_every: int = 10
    eval_episodes: int = 20
    trace: bool = False
    workers: int = 1
    env: EnvConfig = field(default_factory=EnvConfig)
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    student: StudentConfig = field(default_factory=StudentConfig)

    def validate(self) -> "ExperimentConfig":
        try:
            self.condition = Condition(self.condition)
        except ValueError:
            raise ConfigError(f"unknown condition {self.condition!r}; expected one of "
                              f"{[c.value for c in Condition]}") from None
        if self.episodes < 1:
            raise ConfigError("experiment.episodes must be positive")
        if not self.seeds:
            raise ConfigError("experiment.seeds must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"experiment.seeds must be distinct, got {self.seeds}")
        if not 1 <= self.eval_every <= self.episodes:
            raise ConfigError("experiment.eval_every must be in [1, episodes]")
        if self.eval_episodes < 1 or self.workers < 1:
            raise ConfigError("experiment.eval_episodes and workers must be positive")
        self.env.grid().validate()
        t = self.teacher
        if t.kind not in ("tabular", "oracle", "remote"):
            raise ConfigError(f"teacher.kind must be tabular, oracle or remote, got {t.kind!r}")
        if t.kind == "remote":
            parse_address(t.remote_addr)
        if t.fallback not in ("oracle", "abort"):
            raise ConfigError(f"teacher.fallback must be oracle or abort, got {t.fallback!r}")
        if t.beta <= 0 or t.temperature <= 0 or t.timeout <= 0:
            raise ConfigError("teacher.beta, temperature and timeout must be positive")
        s = self.student
        if not (0 < s.alpha <= 1 and 0 <= s.gamma <= 1 and 0 <= s.epsilon_end <= 1
                and 0 <= s.epsilon_start <= 1):
            raise ConfigError("student hyperparameters out of range")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["condition"] = Condition(self.condition).value
        return d


SECTIONS = {"env": EnvConfig, "teacher": TeacherConfig, "student": StudentConfig}
EXPERIMENT_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - set(SECTIONS)


def known_keys() -> list[str]:
    keys = [f"experiment.{k}" for k in sorted(EXPERIMENT_KEYS)]
    for name, cls in SECTIONS.items():
        keys += [f"{name}.{f.name}" for f in dataclasses.fields(cls)]
    return keys


def parse_address(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not host or not port.isdigit() or not 0 < int(port) < 65536:
        raise ConfigError(f"remote address must be HOST:PORT, got {addr!r}")
    return host, int(port)


def parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"malformed seed list {text!r}; expected e.g. 1,2,3") from None
    if not seeds:
        raise ConfigError(f"malformed seed list {text!r}; expected e.g. 1,2,3")
    return seeds


def _coerce(key: str, current: Any, value: Any) -> Any:
    if isinstance(value, str):
        raw = value.strip()
        if isinstance(current, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
            return raw.lower() in ("true", "1")
        if isinstance(current, list):
            return parse_seeds(raw)
        if isinstance(current, int) and not isinstance(current, bool):
            try:
                return int(raw)
            except ValueError:
                raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
        if isinstance(current, float):
            try:
                return float(raw)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
        return raw
    if isinstance(current, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if isinstance(current, (bool, int, float, list)) and not isinstance(value, type(current)):
        raise ConfigError(f"{key}: expected {type(current).__name__}, got {value!r}")
    return value


def set_key(cfg: ExperimentConfig, dotted: str, value: Any) -> None:
    section, _, name = dotted.partition(".")
    if section == "experiment" and name in EXPERIMENT_KEYS:
        target = cfg
    elif section in SECTIONS and name in {f.name for f in dataclasses.fields(SECTIONS[section])}:
        target = getattr(cfg, section)
    else:
        raise ConfigError(f"unknown config key {dotted!r}")
    current = getattr(target, name)
    if isinstance(current, Condition):
        current = current.value
    setattr(target, name, _coerce(dotted, current, value))


def load_config(path: str | Path | None = None,
                overrides: list[tuple[str, Any]] = ()) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        try:
            data = tomli.loads(Path(path).read_text(encoding="utf-8"))
        except tomli.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
        version = data.pop("config_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"{path}: unsupported config_version {version}")
        for section, table in data.items():
            if not isinstance(table, dict):
                raise ConfigError(f"{path}: top-level key {section!r} must be a table")
            for name, value in table.items():
                set_key(cfg, f"{section}.{name}", value)
    for key, value in overrides:
        set_key(cfg, key, value)
    return cfg.validate()


def dump_toml(cfg: ExperimentConfig) -> str:
    """Serialize a config back to the file format above."""
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, list):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        return repr(v)

    d = cfg.to_dict()
    lines = [f"config_version = {CONFIG_VERSION}", "", "[experiment]"]
    lines += [f"{k} = {fmt(d[k])}" for k in sorted(EXPERIMENT_KEYS)]
    for section in SECTIONS:
        lines += ["", f"[{section}]"]
        lines += [f"{k} = {fmt(v)}" for k, v in d[section].items()]
    return "\n".join(lines) + "\n"
