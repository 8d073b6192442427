"""Fit the corner models and run every experiment on the synthetic plant.

    python scripts/run_experiments.py --out runs/ --seed 0

Writes one directory per run plus ``summary.json`` and prints a table.
"""

import argparse
import logging
import time
from pathlib import Path

from vinetraj import io
from vinetraj.experiments import fit_all_corners, run_growth, run_lemniscate, run_swing
from vinetraj.model import CORNER_NAMES


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", choices=["lemniscate", "swing", "growth"])
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    out = Path(args.out)
    t0 = time.perf_counter()
    fit = fit_all_corners(args.seed, out_dir=out / "models")
    print(f"fitted corners in {time.perf_counter() - t0:.1f} s")
    for name, rep in fit.heldout_reports.items():
        print(f"  {name}: held-out EE RMSE {rep.ee_rmse * 100:.2f} cm, horizon {rep.divergence_horizon}")

    runs = []
    if args.only in (None, "lemniscate"):
        for T in (10.0, 5.0):
            for name in CORNER_NAMES:
                runs.append((f"lemniscate_T{T:g}_{name}",
                             lambda d, n=name, T=T: run_lemniscate(fit.corners, n, T, args.seed, out_dir=d)))
    if args.only in (None, "swing"):
        for name in CORNER_NAMES:
            runs.append((f"swing_{name}", lambda d, n=name: run_swing(fit.corners, n, seed=args.seed, out_dir=d)))
    if args.only in (None, "growth"):
        runs.append(("growth", lambda d: run_growth(fit.corners, seed=args.seed, out_dir=d)))

    summary = {}
    print(f"\n{'run':<22}{'plant EE err [m]':>18}{'model EE err [m]':>18}"
          f"{'swing miss [m]':>16}{'converged':>11}{'time [s]':>10}")
    for label, fn in runs:
        t = time.perf_counter()
        rep = fn(out / label).report
        dt = time.perf_counter() - t
        summary[label] = rep.to_dict()
        miss = rep.metrics.get("plant_miss_distance_m")
        miss = "" if miss is None else f"{miss:.4f}"
        print(f"{label:<22}{rep.mean_ee_error_m:>18.4f}{rep.model_ee_error_m:>18.4f}{miss:>16}"
              f"{str(rep.success):>11}{dt:>10.1f}")
    io.write_json(out / "summary.json", summary)
    print(f"\nall runs in {time.perf_counter() - t0:.1f} s -> {out}")


if __name__ == "__main__":
    main()
