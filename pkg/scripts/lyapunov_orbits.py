"""Exponents along backward-walk orbits from several starts, against the forward orbit.

The forward orbit of the base falls into the attracting fixed point of f_inf and
reports the basin's exponents, not those of the attracting set.
"""
import argparse

import numpy as np

from alab.lyap import lyapunov_exponents
from alab.fibfam import assemble, make_cascade_pair

ALPHA = (1.40747676 + 0.37057002j, 0.8998064 + 0.09377882j)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--starts", type=int, default=4)
    ap.add_argument("--steps", type=int, default=10_000)
    args = ap.parse_args()
    endo = assemble(make_cascade_pair(2, 2, ALPHA), 0.01)
    rng = np.random.default_rng(5)
    for i in range(args.starts):
        x0 = np.array([rng.standard_normal() + 1j * rng.standard_normal(), 1.0, 0.001])
        for mode in ("backward", "forward"):
            rep = lyapunov_exponents(endo, x0, 1000, args.steps, np.random.default_rng(i), mode)
            print(f"start {i} {mode:>8}: chi = {np.round(rep.exponents, 4)}  converged={rep.converged}  switches={rep.chart_switches}")


if __name__ == "__main__":
    main()
