"""Potentials of hyperplane currents pushed by the normalized operator, and decay fits.

The operator acts on a potential u by ``u -> d^-s * sum_y m_y u(y)`` over the
weighted preimages of x. It multiplies constants by d, so every quantity below
is either a difference of two sequences anchored at a reference point, or has
its mean removed.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, FitFailedError, SingularEvaluationError
from .fibfam import PerturbedEndo, TrapRegion
from .preimg import DEFAULT_BUDGET, preimages_batch
from .projsp import ProjectivePoint, normalize_lifts, orthogonal_perturbation, sample_uniform_lifts

log = logging.getLogger(__name__)

LOG_FLOOR = -50.0
N_BURN = 2
N_BOOT = 200
ROUNDOFF_FACTOR = 100.0
DEFAULT_DISTANCES = tuple(10.0 ** -e for e in range(2, 13))


@dataclass(frozen=True)
class CurrentSpec:
    """The current of integration on the hyperplane {l = 0}, l = sum a_i z_i."""

    coeffs: tuple
    kind: str = "hyperplane-section"

    def __post_init__(self):
        c = tuple(complex(a) for a in self.coeffs)
        if not any(c):
            raise ValueError("zero linear form")
        object.__setattr__(self, "coeffs", c)

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=complex)

    def u0(self, lifts) -> tuple[np.ndarray, int]:
        """log(|l(x)| / ||x||) with the floor applied; returns values and the clamp count."""
        z = np.atleast_2d(np.asarray(lifts, dtype=complex))
        with np.errstate(divide="ignore"):
            v = np.log(np.abs(z @ self.a)) - np.log(np.linalg.norm(z, axis=1))
        low = v < LOG_FLOOR
        return np.where(low, LOG_FLOOR, v), int(low.sum())

    def inside(self, region: TrapRegion) -> bool:
        """{l = 0} lies in the tube iff sum_{i<k} |a_i| <= c|eps| |a_k| (worst case over the hyperplane)."""
        a = self.a
        if np.isinf(region.c):
            return True
        return bool(np.sum(np.abs(a[:-1])) <= region.radius * abs(a[-1]))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coeffs": [[c.real, c.imag] for c in self.coeffs]}


def hyperplane(k: int, fiber_coeff=1.0, **others) -> CurrentSpec:
    """``hyperplane(2, 1, z0=-0.0005)`` is {z_2 - 0.0005 z_0 = 0}."""
    a = [0j] * (k + 1)
    a[k] = complex(fiber_coeff)
    for key, val in others.items():
        a[int(key.lstrip("z"))] = complex(val)
    return CurrentSpec(tuple(a))


@dataclass
class PotentialSequence:
    endo: PerturbedEndo
    currents: tuple
    budget: int = DEFAULT_BUDGET
    chunk_leaves: int = 1 << 18
    cache: dict = field(default_factory=dict, repr=False)
    clamps: int = 0
    evaluations: int = 0

    def __post_init__(self):
        if isinstance(self.currents, CurrentSpec):
            self.currents = (self.currents,)

    def levels(self, X, n_max: int) -> np.ndarray:
        """Potentials u_n(x) for n = 0..n_max of every current: array (n_max+1, len(currents), N)."""
        X = normalize_lifts(np.atleast_2d(X))
        N = X.shape[0]
        e = self.endo
        if e.d ** (e.k * n_max) > self.budget:
            raise BudgetExceededError(f"d^(kn) = {e.d ** (e.k * n_max)} exceeds budget {self.budget}")
        out = np.zeros((n_max + 1, len(self.currents), N))
        per = max(1, self.chunk_leaves // max(1, e.d ** (e.k * n_max)))
        for start in range(0, N, per):
            block = X[start : start + per]
            out[:, :, start : start + per] = self._levels_block(block, n_max)
        return out

    def _levels_block(self, X, n_max):
        e = self.endo
        N = X.shape[0]
        res = np.zeros((n_max + 1, len(self.currents), N))
        lifts, mult, sid = X, np.ones(N), np.arange(N)
        for n in range(n_max + 1):
            if n:
                b = preimages_batch(e, lifts)
                lifts, mult, sid = b.lifts, b.mult * mult[b.parent], sid[b.parent]
            for j, S in enumerate(self.currents):
                v, nclamp = S.u0(lifts)
                self._record_clamps(nclamp, v.size)
                res[n, j] = np.bincount(sid, weights=mult * v, minlength=N) / float(e.d) ** (n * e.s)
        return res

    def _record_clamps(self, nclamp: int, total: int):
        self.clamps += nclamp
        self.evaluations += total
        if nclamp:
            if nclamp > 0.01 * total:
                raise SingularEvaluationError(f"{nclamp}/{total} leaves hit the singular hyperplane")
            warnings.warn(f"{nclamp} leaf values clamped at {LOG_FLOOR}", RuntimeWarning, stacklevel=3)

    def value(self, x, n: int, which: int = 0) -> float:
        lift = x.lift if isinstance(x, ProjectivePoint) else np.asarray(x, dtype=complex)
        key = (tuple(np.round(normalize_lifts(lift[None])[0], 15)), n, which)
        if key not in self.cache:
            self.cache[key] = float(self.levels(lift[None], n)[n, which, 0])
        return self.cache[key]


def potential_value(seq: PotentialSequence, x, n: int) -> float:
    return seq.value(x, n)


# ---------------------------------------------------------------------------
# fits


@dataclass
class DecayFit:
    """Geometric fit value_n ~ C * rate^n on n >= n_burn (or a log-log slope for the modulus)."""

    name: str
    rate: float
    ci: tuple
    intercept: float
    ns: list
    values: list
    n_burn: int = N_BURN
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        if self.name == "modulus":
            return bool(self.rate > 0 and self.ci[0] > 0)
        return bool(self.rate < 1 and self.ci[1] < 1)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rate": self.rate,
            "ci": list(self.ci),
            "intercept": self.intercept,
            "n": list(self.ns),
            "values": list(self.values),
            "n_burn": self.n_burn,
            "verdict": self.verdict,
            # bulk arrays in ``extra`` go to CSV, not to the report
            **{k: v for k, v in self.extra.items() if not isinstance(v, (np.ndarray, tuple))},
        }


def _loglinear(ns, vals) -> tuple[float, float]:
    ns = np.asarray(ns, dtype=float)
    vals = np.asarray(vals, dtype=float)
    ok = vals > 0
    if ok.sum() < 2:
        raise FitFailedError("fewer than two positive values to fit", raw=list(vals))
    slope, icpt = np.polyfit(ns[ok], np.log(vals[ok]), 1)
    return float(slope), float(icpt)


def _geometric_fit(name, ns, per_sample, reducer, rng, n_burn=N_BURN, n_boot=N_BOOT, floor=None) -> DecayFit:
    """``per_sample`` has shape (len(ns), N); ``reducer`` maps it to one value per n.

    Depths whose value sits below ``floor`` (the roundoff level of the underlying
    potentials) are left out of the fit.
    """
    ns = list(ns)
    vals = reducer(per_sample)
    floor = np.zeros(len(ns)) if floor is None else np.asarray(floor)
    use = [i for i, n in enumerate(ns) if n >= n_burn and vals[i] > floor[i]]
    slope, icpt = _loglinear([ns[i] for i in use], vals[use])
    N = per_sample.shape[1]
    boots = []
    for _ in range(n_boot):
        idx = rng.integers(0, N, N)
        try:
            boots.append(_loglinear([ns[i] for i in use], reducer(per_sample[:, idx])[use])[0])
        except FitFailedError:
            continue
    lo, hi = np.percentile(boots, [2.5, 97.5]) if boots else (slope, slope)
    fit = DecayFit(name, float(np.exp(slope)), (float(np.exp(lo)), float(np.exp(hi))), float(np.exp(icpt)), ns, [float(v) for v in vals], n_burn)
    fit.extra["fitted_n"] = [ns[i] for i in use]
    fit.extra["roundoff_floor"] = [float(f) for f in floor]
    return fit


def roundoff_floor(U: np.ndarray) -> np.ndarray:
    """Per-depth absolute error level of differences of potentials with magnitudes U (n, currents, N)."""
    return ROUNDOFF_FACTOR * np.finfo(float).eps * np.abs(U).max(axis=(1, 2))


def default_anchor(k: int) -> np.ndarray:
    """The pencil center: totally invariant and outside every tube."""
    z = np.zeros(k + 1, dtype=complex)
    z[-1] = 1.0
    return z


def anchored_differences(endo, S, Sp, X, n_max, anchor=None) -> np.ndarray:
    """w_n(x) = [u_n^S - u_n^S'](x) - [u_n^S - u_n^S'](anchor), shape (n_max+1, N)."""
    W, _ = _anchored(endo, S, Sp, X, n_max, anchor)
    return W


def _anchored(endo, S, Sp, X, n_max, anchor):
    anchor = default_anchor(endo.k) if anchor is None else np.asarray(anchor, dtype=complex)
    seq = PotentialSequence(endo, (S, Sp))
    allx = np.concatenate([np.atleast_2d(X), anchor[None]])
    U = seq.levels(allx, n_max)
    gap = U[:, 0] - U[:, 1]
    return gap[:, :-1] - gap[:, -1:], roundoff_floor(U)


def sup_decay(endo, S, Sp, X, n_max, rng, anchor=None, n_burn=N_BURN) -> DecayFit:
    """Geometric rate of max_x |w_n(x)| over the sample set."""
    W, floor = _anchored(endo, S, Sp, X, n_max, anchor)
    fit = _geometric_fit("sup", range(n_max + 1), np.abs(W), lambda A: A.max(axis=1), rng, n_burn, floor=floor)
    fit.extra["per_sample"] = W
    return fit


def l1_decay(endo, S, Sp, n_max, n_samples, rng, n_burn=N_BURN) -> DecayFit:
    """Geometric rate of the omega^k-mean of |u_n^S - u_n^S' - mean gap|."""
    X = sample_uniform_lifts(rng, endo.k, n_samples)
    seq = PotentialSequence(endo, (S, Sp))
    U = seq.levels(X, n_max)
    G = U[:, 0] - U[:, 1]

    def reducer(A):
        return np.abs(A - A.mean(axis=1, keepdims=True)).mean(axis=1)

    fit = _geometric_fit("l1", range(n_max + 1), G, reducer, rng, n_burn, floor=roundoff_floor(U))
    fit.extra["per_sample"] = G
    fit.extra["samples"] = X
    return fit


def modulus_scan(endo, S, n_eval, rng, distances=DEFAULT_DISTANCES, pairs_per_distance: int = 10, lam_hat=None) -> DecayFit:
    """Fit log|u(x) - u(y)| against log|log dist(x, y)|; the rate field holds alpha-hat = -slope."""
    distances = list(distances)
    P = pairs_per_distance
    X = sample_uniform_lifts(rng, endo.k, len(distances) * P)
    Y = np.concatenate([orthogonal_perturbation(X[i * P : (i + 1) * P], dist, rng) for i, dist in enumerate(distances)])
    seq = PotentialSequence(endo, (S,))
    ux = seq.levels(X, n_eval)[n_eval, 0]
    uy = seq.levels(Y, n_eval)[n_eval, 0]
    du = np.abs(ux - uy)
    loglog = np.repeat(np.log(np.abs(np.log(distances))), P)
    ok = du > 0
    if ok.sum() < 3:
        raise FitFailedError("not enough nonzero differences", raw=du.tolist())

    def fit(idx):
        slope, icpt = np.polyfit(loglog[idx], np.log(du[idx]), 1)
        return -slope, icpt

    base = np.flatnonzero(ok)
    alpha, icpt = fit(base)
    boots = []
    for _ in range(N_BOOT):
        idx = base[rng.integers(0, base.size, base.size)]
        if np.ptp(loglog[idx]) > 0:
            boots.append(fit(idx)[0])
    lo, hi = np.percentile(boots, [2.5, 97.5])
    per_d = [float(du[i * P : (i + 1) * P].max()) for i in range(len(distances))]
    out = DecayFit("modulus", float(alpha), (float(lo), float(hi)), float(np.exp(icpt)), distances, per_d, 0)
    if lam_hat is not None and 0 < lam_hat < 1:
        out.extra["alpha_theory"] = float(-np.log(lam_hat) / (2 * endo.k * np.log(endo.d)))
    out.extra["pairs"] = (X, Y, ux, uy)
    return out


def export_potential_csv(path, rows) -> None:
    """rows: iterable of (experiment, n, lift, value)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "n", "x_lift", "value"])
        for exp, n, lift, val in rows:
            coords = ";".join(f"{c.real!r}{c.imag:+.17g}j" for c in normalize_lifts(np.asarray(lift)[None])[0])
            w.writerow([exp, int(n), coords, repr(float(val))])
