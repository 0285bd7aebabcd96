"""Tabulate instanton residuals and Yang-Mills density for sample ADHM data along a ray in HP^n."""

import argparse

import numpy as np

from hpn_instantons.adhm import core_from_adhm, one_instanton, random_valid_family
from hpn_instantons.curvature import curvature_components, ym_density
from hpn_instantons.geometry import ConePoint, HarmonicPoint


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps", type=int, default=8)
    args = ap.parse_args()
    cases = {
        "one_instanton": one_instanton(args.n),
        f"random family k={args.k}": random_valid_family(args.n, args.k, args.k, np.random.default_rng(args.seed)),
    }
    for name, data in cases.items():
        core = core_from_adhm(data)
        print(f"# {name}")
        print(f"{'t':>6} {'|F|':>10} {'|F2|':>10} {'ym':>10}")
        for t in np.linspace(0.0, 3.0, args.steps):
            zeta = np.zeros(2 * (args.n + 1), dtype=complex)
            zeta[0] = 1.0
            zeta[2] = t
            hp = HarmonicPoint(ConePoint(args.n, zeta))
            s = curvature_components(core, hp)
            print(f"{t:6.2f} {s.F_norm:10.3e} {s.residual:10.3e} {ym_density(core, hp):10.3e}")


if __name__ == "__main__":
    main()
