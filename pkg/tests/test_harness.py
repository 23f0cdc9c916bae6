import csv
import json

import numpy as np
import pytest

from bifeedback.config import ExperimentConfig, TeacherConfig
from bifeedback.errors import ProtocolError
from bifeedback.harness import (CSV_COLUMNS, MetricsRow, MetricsSeries, build_teacher,
                                emit_plot_data, evaluate, read_csv, run_experiment, train_seed,
                                write_csv)
from bifeedback.stub_teacher import StubTeacherServer
from bifeedback.teacher import TeacherPolicy


def small(**kw):
    base = dict(episodes=40, eval_every=10, seeds=[1, 2, 3], eval_episodes=5)
    base.update(kw)
    return ExperimentConfig(**base).validate()


def test_counting_contract():
    series = run_experiment(small())
    assert len(series.rows) == 12
    assert sorted({r.episode for r in series.rows}) == [10, 20, 30, 40]
    agg = series.aggregate()
    assert len(agg) == 4 and all(a.n_seeds == 3 for a in agg)
    for r in series.rows:
        assert 0 <= r.success_rate <= 1 and 0 <= r.mean_return <= 1


def test_empty_series_writes_header_only(tmp_path):
    path = tmp_path / "m.csv"
    write_csv(MetricsSeries(), path)
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_csv_round_trip(tmp_path):
    row = MetricsRow("bidirectional", 7, 40, 0.35, 0.2817193481, 41.45)
    path = tmp_path / "m.csv"
    write_csv(MetricsSeries([row]), path)
    assert read_csv(path).rows == [row]


def test_aggregate_std_matches_independent_recompute(tmp_path):
    run_experiment(small(seeds=[4, 5, 6, 7]), tmp_path)
    with open(tmp_path / "metrics.csv") as fh:
        per_seed = list(csv.DictReader(fh))
    with open(tmp_path / "plot_data.csv") as fh:
        plot = list(csv.DictReader(fh))
    assert len(plot) == 4
    for p in plot:
        rows = [r for r in per_seed if r["episode"] == p["episode"]]
        for col, mean, std in [("success_rate", "success_mean", "success_std"),
                               ("mean_return", "return_mean", "return_std"),
                               ("mean_length", "length_mean", "length_std")]:
            values = np.array([float(r[col]) for r in rows])
            assert float(p[mean]) == pytest.approx(values.mean(), abs=1e-12)
            assert float(p[std]) == pytest.approx(values.std(ddof=0), abs=1e-12)


def test_seed_permutation_only_permutes_rows():
    a = run_experiment(small(seeds=[1, 2, 3]))
    b = run_experiment(small(seeds=[3, 1, 2]))
    assert a.aggregate() == b.aggregate()
    assert sorted(a.rows, key=lambda r: (r.seed, r.episode)) == \
        sorted(b.rows, key=lambda r: (r.seed, r.episode))
    assert [r.seed for r in b.rows][:4] == [3, 3, 3, 3]


def test_no_feedback_teacher_untouched():
    cfg = small(condition="no_feedback")
    _, _, policy = train_seed(cfg, 1)
    assert policy.snapshot() == TeacherPolicy.with_prior(cfg.teacher.prior_logit).snapshot()


def test_bidirectional_teacher_learns():
    cfg = small(condition="bidirectional")
    _, _, policy = train_seed(cfg, 1)
    assert policy.snapshot() != TeacherPolicy.with_prior(cfg.teacher.prior_logit).snapshot()


def test_evaluation_is_side_effect_free():
    cfg = small()
    _, student, policy = train_seed(cfg, 2)
    teacher, _ = build_teacher(cfg, 2)
    teacher.policy = policy
    q_before = {k: list(v) for k, v in student.q.items()}
    v_before = dict(student.v)
    logits_before = policy.snapshot()
    rng_before = teacher.rng.state
    first = evaluate(cfg, student, teacher, policy)
    assert evaluate(cfg, student, teacher, policy) == first
    assert student.q == q_before and student.v == v_before
    assert policy.snapshot() == logits_before and teacher.rng.state == rng_before


@pytest.mark.parametrize("cond", ["oracle_teacher", "no_teacher"])
def test_other_conditions_run(cond):
    series = run_experiment(small(condition=cond, seeds=[1]))
    assert len(series.rows) == 4


def test_outputs_and_manifest(tmp_path):
    cfg = small(trace=True)
    run_experiment(cfg, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"] == cfg.to_dict() and manifest["version"]
    for seed in cfg.seeds:
        assert (tmp_path / f"trace_bidirectional_seed{seed}.jsonl").exists()
        assert (tmp_path / f"student_seed{seed}.tsv").exists()
        assert (tmp_path / f"teacher_seed{seed}.json").exists()


def test_write_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "m.csv"
    with pytest.raises(OSError, match="missing"):
        write_csv(MetricsSeries(), bad)
    with pytest.raises(OSError, match="missing"):
        emit_plot_data(MetricsSeries(), bad)


def test_parallel_workers_match_sequential():
    seq = run_experiment(small())
    par = run_experiment(small(workers=2))
    assert seq.rows == par.rows


def test_partial_results_flushed_on_protocol_failure(tmp_path):
    good = StubTeacherServer(mode="oracle")
    bad = StubTeacherServer(mode="bad")
    for s in (good, bad):
        s.start_background()
    try:
        cfg = small(teacher=TeacherConfig(kind="remote", remote_addr=good.address),
                    seeds=[1])
        assert len(run_experiment(cfg, tmp_path / "ok").rows) == 4
        cfg = small(teacher=TeacherConfig(kind="remote", remote_addr=bad.address))
        with pytest.raises(ProtocolError):
            run_experiment(cfg, tmp_path / "bad")
        assert (tmp_path / "bad" / "metrics.csv").read_text().startswith("condition,")
    finally:
        for s in (good, bad):
            s.shutdown()
            s.server_close()
