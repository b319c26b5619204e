"""Trap margins of the tube family over a grid of widths c, for one or more epsilon values."""
import argparse

import numpy as np

from alab.fibfam import TrapRegion, assemble, default_candidates, make_cascade_pair, sample_boundary_lifts, forward_lifts

ALPHA = (1.40747676 + 0.37057002j, 0.8998064 + 0.09377882j)


def margins(endo, c, n, rng):
    eps = abs(endo.epsilon)
    U, Up = TrapRegion(c, eps), TrapRegion(2 * c, eps)
    wi = forward_lifts(endo, sample_boundary_lifts(U, endo.k, n, rng))
    wo = forward_lifts(endo, sample_boundary_lifts(Up, endo.k, n, rng))
    return (np.max(U.ratio(wi)) / U.radius, np.max(Up.ratio(wo)) / Up.radius, np.max(U.ratio(wo)) / U.radius)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, nargs="+", default=[0.05, 0.01, 0.002])
    ap.add_argument("--boundary", type=int, default=5000)
    args = ap.parse_args()
    pair = make_cascade_pair(2, 2, ALPHA)
    for eps in args.eps:
        endo = assemble(pair, eps)
        print(f"epsilon = {eps}")
        print(f"{'c':>10} {'inner':>8} {'outer':>8} {'nest':>8}  pass")
        for c in default_candidates():
            mi, mo, mn = margins(endo, c, args.boundary, np.random.default_rng(0))
            ok = mi <= 0.9 and mo <= 0.9 and mn < 1
            print(f"{c:10.4g} {mi:8.3f} {mo:8.3f} {mn:8.3f}  {'yes' if ok else ''}")


if __name__ == "__main__":
    main()
