"""Compare interpolated models against models fitted directly at interior configs.

    python scripts/interpolation_sweep.py --seed 0
"""

import argparse

import numpy as np

from vinetraj.core import VineConfig
from vinetraj.experiments import PIPELINE_RIDGE, fit_all_corners, training_logs
from vinetraj.model import interpolate
from vinetraj.sysid import build_dataset, fit_config_model, split_log, validate


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=3, help="interior points per axis")
    args = p.parse_args()

    corners = fit_all_corners(args.seed).corners
    pressures = np.linspace(0.0, 0.4, args.grid + 2)[1:-1]
    lengths = np.linspace(0.7, 1.0, args.grid + 2)[1:-1]
    print(f"{'pressure':>9}{'length':>8}{'interp EE RMSE [cm]':>21}{'direct EE RMSE [cm]':>21}")
    for i, pr in enumerate(pressures):
        for j, ln in enumerate(lengths):
            cfg = VineConfig(float(pr), float(ln))
            parts = [split_log(lg) for lg in training_logs(cfg, args.seed, corner_index=10 + 10 * i + j)]
            held = build_dataset([q[1] for q in parts])
            direct = fit_config_model([q[0] for q in parts], cfg, PIPELINE_RIDGE)
            r_int = validate(interpolate(corners, cfg), held).ee_rmse
            r_dir = validate(direct, held).ee_rmse
            print(f"{pr:>9.2f}{ln:>8.3f}{r_int * 100:>21.3f}{r_dir * 100:>21.3f}")


if __name__ == "__main__":
    main()
