"""Run all four conditions on the same seeds and print final aggregates.

    python scripts/run_ablation.py --episodes 2000 --seeds 1-10 --out runs/ablation
"""
import argparse
from pathlib import Path

from bifeedback.config import Condition, load_config
from bifeedback.harness import emit_plot_data, MetricsSeries, run_experiment


def seed_range(text):
    lo, _, hi = text.partition("-")
    return list(range(int(lo), int(hi or lo) + 1))


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--config")
    p.add_argument("--episodes", type=int, default=2000)
    p.add_argument("--seeds", type=seed_range, default=seed_range("1-10"))
    p.add_argument("--eval-every", type=int, default=20)
    p.add_argument("--out", type=Path, default=Path("runs/ablation"))
    args = p.parse_args()

    combined = MetricsSeries()
    for cond in Condition:
        cfg = load_config(args.config, [("experiment.condition", cond.value),
                                        ("experiment.episodes", str(args.episodes)),
                                        ("experiment.seeds", ",".join(map(str, args.seeds))),
                                        ("experiment.eval_every", str(args.eval_every))])
        series = run_experiment(cfg, args.out / cond.value)
        combined.rows.extend(series.rows)
        f = series.final()
        reach = series.first_episode_reaching(0.5)
        print(f"{cond.value:15s} success {f.success_mean:.3f} ± {f.success_std:.3f}  "
              f"return {f.return_mean:.3f} ± {f.return_std:.3f}  "
              f"length {f.length_mean:5.1f}  50% at {reach}")
    emit_plot_data(combined, args.out / "plot_data_all.csv")


if __name__ == "__main__":
    main()
