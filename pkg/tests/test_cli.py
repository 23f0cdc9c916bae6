import json
import subprocess
import sys
import time

import pytest

from bifeedback.cli import (EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_PROTOCOL, EXIT_VERIFY, main,
                            parse_args)
from bifeedback.errors import ConfigError

SMALL = ["--episodes", "20", "--seeds", "1,2", "--set", "experiment.eval_every=10",
         "--set", "experiment.eval_episodes=5"]


def test_set_override(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[student]\nalpha = 0.3\n")
    spec = parse_args(["train", "--config", str(cfg), "--set", "student.alpha=0.05"])
    assert spec.subcommand == "train"
    assert spec.load().student.alpha == 0.05


def test_unknown_key_is_usage_error(capsys):
    with pytest.raises(ConfigError, match="bogus.key"):
        parse_args(["train", "--set", "bogus.key=1"])
    assert main(["train", "--set", "bogus.key=1"]) == EXIT_CONFIG
    assert "bogus.key" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["train", "--seeds", "1,x"],
    ["train", "--frobnicate"],
    ["launch"],
    ["train", "--teacher", "remote"],
    ["train", "--teacher", "remote:nohost"],
    ["train", "--set", "student.alpha"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_CONFIG


def test_remote_address_parsed():
    spec = parse_args(["evaluate", "--teacher", "remote:127.0.0.1:9000"])
    assert spec.remote_addr == "127.0.0.1:9000"
    cfg = spec.load()
    assert cfg.teacher.kind == "remote" and cfg.teacher.remote_addr == "127.0.0.1:9000"


def test_shortcut_flags():
    cfg = parse_args(["train", "--condition", "oracle_teacher", "--episodes", "30",
                      "--seeds", "4,5", "--teacher", "oracle"]).load()
    assert cfg.condition.value == "oracle_teacher" and cfg.episodes == 30
    assert cfg.seeds == [4, 5] and cfg.teacher.kind == "oracle"


def test_train_evaluate_replay(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", *SMALL, "--set", "experiment.trace=true", "--out", str(out)]) == EXIT_OK
    assert (out / "metrics.csv").exists() and (out / "manifest.json").exists()
    assert main(["evaluate", *SMALL, "--checkpoint", str(out),
                 "--out", str(tmp_path / "ev")]) == EXIT_OK
    assert (tmp_path / "ev" / "evaluation.csv").read_text().count("\n") == 3
    trace = out / "trace_bidirectional_seed1.jsonl"
    assert main(["replay", str(trace)]) == EXIT_OK

    lines = trace.read_text().splitlines()
    row = json.loads(lines[5])
    row["feedback"] = "negative" if row["feedback"] == "positive" else "positive"
    lines[5] = json.dumps(row)
    flipped = tmp_path / "flipped.jsonl"
    flipped.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["replay", str(flipped)]) == EXIT_VERIFY
    msg = capsys.readouterr().out
    assert f"episode {row['episode']} step {row['t']}" in msg and ":6:" in msg


def test_replay_missing_file_is_io_error(tmp_path):
    assert main(["replay", str(tmp_path / "nope.jsonl")]) == EXIT_IO


def test_evaluate_missing_checkpoint(tmp_path):
    assert main(["evaluate", *SMALL, "--checkpoint", str(tmp_path)]) == EXIT_IO


def test_train_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["train", *SMALL, "--out", str(blocker / "sub")]) == EXIT_IO


@pytest.fixture
def stub_process():
    procs = []

    def start(mode):
        proc = subprocess.Popen([sys.executable, "-m", "bifeedback.stub_teacher", "--mode", mode],
                                stdout=subprocess.PIPE, text=True)
        procs.append(proc)
        return proc.stdout.readline().strip()

    yield start
    for p in procs:
        p.terminate()
        p.wait(5)


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "bifeedback", *args], capture_output=True,
                          text=True, timeout=30)


def test_serve_check_conforming_stub(stub_process):
    addr = stub_process("oracle")
    start = time.monotonic()
    res = _cli("serve-check", "--teacher", f"remote:{addr}")
    assert res.returncode == EXIT_OK, res.stderr
    assert time.monotonic() - start < 5.0


def test_serve_check_out_of_vocabulary(stub_process):
    addr = stub_process("bad")
    res = _cli("serve-check", "--teacher", f"remote:{addr}")
    assert res.returncode == EXIT_PROTOCOL
    assert "jump" in res.stderr


def test_serve_check_timeout_is_protocol_error(stub_process):
    addr = stub_process("silent")
    res = _cli("serve-check", "--teacher", f"remote:{addr}", "--set", "teacher.timeout=0.3")
    assert res.returncode == EXIT_PROTOCOL


def test_serve_check_refused_is_io_error():
    import socket
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    assert main(["serve-check", "--teacher", f"remote:127.0.0.1:{port}"]) == EXIT_IO


def test_train_with_remote_teacher(stub_process, tmp_path):
    addr = stub_process("tabular")
    res = _cli("train", *SMALL, "--teacher", f"remote:{addr}", "--out", str(tmp_path))
    assert res.returncode == EXIT_OK, res.stderr
