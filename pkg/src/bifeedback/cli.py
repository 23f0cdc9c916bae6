"""Command-line entry point.

    bifeedback train       --config run.toml --set student.alpha=0.05 --out runs/a
    bifeedback evaluate    --config run.toml --checkpoint runs/a
    bifeedback replay      runs/a/trace_bidirectional_seed1.jsonl
    bifeedback serve-check --teacher remote:127.0.0.1:9000

Exit codes: 0 ok, 1 replay verification failed, 2 config/usage,
3 protocol, 4 I/O.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .config import ExperimentConfig, known_keys, load_config, parse_address, parse_seeds
from .errors import ConfigError, ProtocolError

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_PROTOCOL, EXIT_IO = 0, 1, 2, 3, 4
SUBCOMMANDS = ("train", "evaluate", "replay", "serve-check")

log = logging.getLogger("bifeedback")


@dataclass
class RunSpec:
    subcommand: str
    config_path: str | None = None
    overrides: list[tuple[str, str]] = field(default_factory=list)
    output_dir: str = "runs/latest"
    checkpoint: str | None = None
    traces: list[str] = field(default_factory=list)
    remote_addr: str | None = None

    def load(self) -> ExperimentConfig:
        return load_config(self.config_path, self.overrides)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bifeedback", description="Teacher/student gridworld runs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        s.add_argument("--out")
        s.add_argument("--condition")
        s.add_argument("--episodes")
        s.add_argument("--seeds")
        s.add_argument("--teacher", help="oracle | tabular | remote:HOST:PORT")
        if name == "evaluate":
            s.add_argument("--checkpoint", help="run directory written by train")
        if name == "replay":
            s.add_argument("traces", nargs="+")
    return p


def parse_args(argv) -> RunSpec:
    """Parse argv into a RunSpec; shortcut flags sit between the file and --set."""
    ns = _build_parser().parse_args(argv)
    spec = RunSpec(ns.subcommand, ns.config)
    if ns.out:
        spec.output_dir = ns.out
    spec.checkpoint = getattr(ns, "checkpoint", None)
    spec.traces = getattr(ns, "traces", []) or []
    if ns.condition:
        spec.overrides.append(("experiment.condition", ns.condition))
    if ns.episodes:
        spec.overrides.append(("experiment.episodes", ns.episodes))
    if ns.seeds:
        parse_seeds(ns.seeds)
        spec.overrides.append(("experiment.seeds", ns.seeds))
    if ns.teacher:
        kind, _, addr = ns.teacher.partition(":")
        if kind not in ("oracle", "tabular", "remote") or (kind == "remote") != bool(addr):
            raise ConfigError(f"--teacher must be oracle, tabular or remote:HOST:PORT, "
                              f"got {ns.teacher!r}")
        spec.overrides.append(("teacher.kind", kind))
        if addr:
            parse_address(addr)
            spec.remote_addr = addr
            spec.overrides.append(("teacher.remote_addr", addr))
    keys = set(known_keys())
    for item in ns.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        if key not in keys:
            raise ConfigError(f"unknown config key {key!r}")
        spec.overrides.append((key, value))
    return spec


def _train(spec: RunSpec) -> int:
    from .harness import run_experiment

    cfg = spec.load()
    series = run_experiment(cfg, spec.output_dir)
    final = series.final()
    print(f"{final.condition}: episode {final.episode} success {final.success_mean:.3f}"
          f" ± {final.success_std:.3f}, return {final.return_mean:.3f}"
          f" over {final.n_seeds} seeds -> {spec.output_dir}")
    return EXIT_OK


def _evaluate(spec: RunSpec) -> int:
    from .harness import build_teacher, evaluate, load_teacher_policy
    from .student import load_checkpoint
    from .teacher import TabularTeacher

    cfg = spec.load()
    run_dir = Path(spec.checkpoint or spec.output_dir)
    rows = []
    for seed in cfg.seeds:
        student = load_checkpoint(run_dir / f"student_seed{seed}.tsv")
        teacher, policy = build_teacher(cfg, seed)
        tpath = run_dir / f"teacher_seed{seed}.json"
        if isinstance(teacher, TabularTeacher) and tpath.exists():
            policy = load_teacher_policy(tpath)
        try:
            sr, ret, length = evaluate(cfg, student, teacher, policy)
        finally:
            if hasattr(teacher, "close"):
                teacher.close()
        rows.append((cfg.condition.value, seed, sr, ret, length))
        print(f"seed {seed}: success {sr:.3f} return {ret:.3f} length {length:.1f}")
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "evaluation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["condition", "seed", "success_rate", "mean_return", "mean_length"])
        w.writerows(rows)
    return EXIT_OK


def _replay(spec: RunSpec) -> int:
    from .loop import read_trace, verify_trace

    status = EXIT_OK
    for path in spec.traces:
        try:
            rows = read_trace(path)
        except (json.JSONDecodeError, KeyError) as e:
            raise ConfigError(f"{path}: not a trace file ({e})") from None
        bad = verify_trace(rows)
        for m in bad:
            print(f"{path}:{m.line}: episode {m.episode} step {m.t}: recorded feedback "
                  f"{m.recorded!r}, expected {m.expected!r}")
        print(f"{path}: {len(rows)} steps, {len(bad)} mismatches")
        if bad:
            status = EXIT_VERIFY
    return status


def _serve_check(spec: RunSpec) -> int:
    from .protocol import handshake

    cfg = spec.load()
    addr = spec.remote_addr or cfg.teacher.remote_addr
    if not addr:
        raise ConfigError("serve-check needs --teacher remote:HOST:PORT or teacher.remote_addr")
    token = handshake(addr, cfg.teacher.timeout)
    print(f"teacher at {addr} ok (emitted {token.wire_name})")
    return EXIT_OK


def run(spec: RunSpec) -> int:
    handler = {"train": _train, "evaluate": _evaluate, "replay": _replay,
               "serve-check": _serve_check}[spec.subcommand]
    try:
        return handler(spec)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as e:
        print(f"protocol error: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.DEBUG if "-v" in argv or "--verbose" in argv
                        else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = parse_args(argv)
    except ConfigError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
