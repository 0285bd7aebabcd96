"""Sweep perturbation size and report how often perturbed ADHM data stops being an instanton.

Run the sweep on the k = 1 instanton and on the k = m = 3 control base, which shows that k = 1
data cannot serve as a negative control.
"""

import argparse
import json

import numpy as np

from hpn_instantons.adhm import core_from_adhm, negative_control_base, one_instanton, perturb, validate
from hpn_instantons.curvature import instanton_residual
from hpn_instantons.geometry import random_harmonic_point


def sweep(base, epsilons, seeds, points, box, threshold):
    rng = np.random.default_rng(0)
    rows = []
    for eps in epsilons:
        broken, raised, medians = 0, 0, []
        for seed in range(seeds):
            data = perturb(base, eps, seed)
            broken += validate(data).max_residual > 1e-3
            core = core_from_adhm(data)
            med = float(np.median([instanton_residual(core, random_harmonic_point(rng, data.n, box=box)) for _ in range(points)]))
            medians.append(med)
            raised += med > threshold
        rows.append(
            {"epsilon": eps, "validate_broken": broken, "above_threshold": raised, "median_residual": float(np.median(medians))}
        )
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--points", type=int, default=3)
    ap.add_argument("--box", type=float, default=2.0)
    ap.add_argument("--threshold", type=float, default=0.05)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.3, 0.5, 1.0])
    args = ap.parse_args()
    out = {}
    for name, base in (("one_instanton(1)", one_instanton(1)), ("control base", negative_control_base())):
        out[name] = sweep(base, args.eps, args.seeds, args.points, args.box, args.threshold)
        for row in out[name]:
            print(
                f"{name:18s} eps={row['epsilon']:<4} broken={row['validate_broken']:3d}/{args.seeds}"
                f" residual>{args.threshold}: {row['above_threshold']:3d}/{args.seeds}"
                f"  median {row['median_residual']:.3e}"
            )
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
