"""Preimage counts inside the trapping region and pullback-volume integrals."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError
from .fibfam import WHOLE_SPACE, PerturbedEndo, TrapRegion, forward_lifts, sample_in_region_lifts
from .hpoly import fs_jacobian_lifts
from .preimg import DEFAULT_BUDGET, base_preimages_batch, preimages_batch
from .projsp import normalize_lifts, sample_uniform_lifts


@dataclass
class DepthRow:
    n: int
    max_count: int
    max_count_set: int
    diagram_bound: int
    std_bound: int


@dataclass
class DkRow:
    n: int
    estimate: float
    stderr: float

    @property
    def nth_root(self) -> float:
        return self.estimate ** (1.0 / self.n) if self.n > 0 and self.estimate > 0 else float(self.estimate > 0)


@dataclass
class DegreeReport:
    per_depth: list = field(default_factory=list)
    dkloc: list = field(default_factory=list)
    verdict: bool | None = None
    diagram_bound_ok: bool | None = None
    samples: list = field(default_factory=list)  # (n, sample_id, count_mult, count_set, in_U)

    def to_dict(self) -> dict:
        return {
            "per_depth": [vars(r) for r in self.per_depth],
            "dkloc": [dict(vars(r), nth_root=r.nth_root) for r in self.dkloc],
            "verdict": self.verdict,
            "diagram_bound_ok": self.diagram_bound_ok,
        }

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "sample_id", "count_mult", "count_set", "in_U_flag"])
            for row in self.samples:
                w.writerow([int(v) for v in row])


def in_image_of_region(endo: PerturbedEndo, region: TrapRegion, lifts) -> np.ndarray:
    """y lies in f(U) iff one of its preimages lies in U."""
    b = preimages_batch(endo, lifts)
    flag = np.zeros(np.atleast_2d(lifts).shape[0], dtype=bool)
    np.logical_or.at(flag, b.parent, region.contains_lifts(b.lifts))
    return flag


def target_samples(endo: PerturbedEndo, region: TrapRegion, n_samples: int, rng, stratified_fraction: float = 0.5, push: int = 1):
    """Uniform targets plus a batch inside ``region`` pushed ``push`` times by f.

    Pushed samples lie in f^push(U), near the attracting set, where long backward
    branches inside the region actually occur.
    """
    n_in = int(round(stratified_fraction * n_samples))
    uni = sample_uniform_lifts(rng, endo.k, n_samples - n_in)
    inside, _ = sample_in_region_lifts(region, endo.k, n_in, rng)
    for _ in range(push):
        inside = forward_lifts(endo, inside)
    return normalize_lifts(np.concatenate([uni, inside])) if n_samples else np.zeros((0, endo.k + 1), complex)


def region_counts(endo: PerturbedEndo, region: TrapRegion, X, n_max: int, budget: int = DEFAULT_BUDGET):
    """Counts of f^-n(x) inside f(region) for n = 0..n_max: arrays (n_max+1, N) with and without multiplicity."""
    X = normalize_lifts(np.atleast_2d(X))
    N = X.shape[0]
    cm = np.zeros((n_max + 1, N), dtype=np.int64)
    cs = np.zeros((n_max + 1, N), dtype=np.int64)
    cm[0] = cs[0] = 1
    lifts, mult, sid = X, np.ones(N, dtype=np.int64), np.arange(N)
    for n in range(1, n_max + 1):
        if lifts.shape[0] == 0:
            break
        b = preimages_batch(endo, lifts)
        lifts, mult, sid = b.lifts, b.mult * mult[b.parent], sid[b.parent]
        keep = in_image_of_region(endo, region, lifts)
        lifts, mult, sid = lifts[keep], mult[keep], sid[keep]
        if lifts.shape[0] > budget:
            raise BudgetExceededError(f"{lifts.shape[0]} live nodes exceed budget {budget}")
        cm[n] = np.bincount(sid, weights=mult, minlength=N).astype(np.int64)
        cs[n] = np.bincount(sid, minlength=N)
    return cm, cs


def verify_std(
    endo: PerturbedEndo,
    region: TrapRegion,
    n_max: int,
    n_samples: int,
    rng,
    stratified_fraction: float = 0.5,
    push: int | None = None,
    targets=None,
) -> DegreeReport:
    """Small topological degree on f(U): every depth-n_max count must be < d^(n_max s).

    Counts carry multiplicity. The diagram bound d^((n-1)s) d^(s-1) is checked at
    every depth n >= 1 and reported separately.
    """
    if endo.d ** (endo.k * n_max) > DEFAULT_BUDGET:
        raise BudgetExceededError("d^(k n_max) exceeds the node budget")
    push = n_max + 1 if push is None else push
    X = target_samples(endo, region, n_samples, rng, stratified_fraction, push) if targets is None else normalize_lifts(targets)
    cm, cs = region_counts(endo, region, X, n_max)
    d, s = endo.d, endo.s
    rep = DegreeReport()
    inU = region.contains_lifts(X) if X.shape[0] else np.zeros(0, bool)
    ok_diag = True
    for n in range(n_max + 1):
        diag = d ** ((n - 1) * s + s - 1) if n >= 1 else 1
        mx = int(cm[n].max()) if X.shape[0] else 0
        rep.per_depth.append(DepthRow(n, mx, int(cs[n].max()) if X.shape[0] else 0, diag, d ** (n * s)))
        if n >= 1 and mx > diag:
            ok_diag = False
        for i in range(X.shape[0]):
            rep.samples.append((n, i, cm[n, i], cs[n, i], inU[i]))
    rep.verdict = bool(n_max == 0 or rep.per_depth[-1].max_count < d ** (n_max * s))
    rep.diagram_bound_ok = ok_diag
    return rep


def jacobian_n(endo: PerturbedEndo, lifts, n: int) -> np.ndarray:
    """Volume distortion of f^n at each point (chain rule along the orbit)."""
    z = normalize_lifts(np.atleast_2d(lifts))
    J = np.ones(z.shape[0])
    for _ in range(n):
        J *= fs_jacobian_lifts(endo.map, z)
        z = forward_lifts(endo, z)
    return J


def _fiber_log_factor(endo: PerturbedEndo, b: np.ndarray, t: np.ndarray, n: int) -> np.ndarray:
    """log of the fiber part of Jac(f^n) for the split omega^k = omega_base x rho_k(t) dA(t).

    b are unit base lifts, t the fiber coordinate z_k/|z'|; rho_k is proportional to (1+|t|^2)^-(k+1).
    """
    k, d = endo.k, endo.d
    out = np.zeros(b.shape[0])
    for _ in range(n):
        w = endo.pair.f_inf.lift(b)
        nw = np.linalg.norm(w, axis=1)
        tp = (t**d + endo.epsilon * endo.pair.R(b)) / nw
        with np.errstate(divide="ignore"):
            out += 2 * np.log(d * np.abs(t) ** (d - 1) / nw)
        out += (k + 1) * (np.log1p(np.abs(t) ** 2) - np.log1p(np.abs(tp) ** 2))
        b, t = w / nw[:, None], tp
    return out


def _fibered_values(endo: PerturbedEndo, V: TrapRegion, n: int, Y: np.ndarray, rng) -> np.ndarray:
    k = endo.k
    N = Y.shape[0]
    b, m, sid = Y, np.ones(N), np.arange(N)
    for _ in range(n):
        Z, mult = base_preimages_batch(endo.pair, b)
        keep = mult > 0
        b, m, sid = Z[keep], (m[:, None] * mult)[keep], np.repeat(sid, keep.sum(axis=1))
    b = b / np.linalg.norm(b, axis=1, keepdims=True)
    if np.isinf(V.c):
        P = np.ones(b.shape[0])
    else:
        P = 1.0 - (1.0 + (V.radius * np.abs(b).max(axis=1)) ** 2) ** (-k)
    # |t|^2 drawn from rho_k truncated to the disc over b
    a = (1.0 - rng.uniform(size=b.shape[0]) * P) ** (-1.0 / k) - 1.0
    t = np.sqrt(a) * np.exp(2j * np.pi * rng.uniform(size=b.shape[0]))
    vals = m * P * np.exp(_fiber_log_factor(endo, b, t, n))
    return np.bincount(sid, weights=vals, minlength=N)


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    if v.size < 2:
        return float(v.mean()) if v.size else 0.0, 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def dkloc_values(
    endo: PerturbedEndo,
    V: TrapRegion,
    n: int,
    n_samples: int,
    rng,
    method: str = "fibered",
    chunk: int = 256,
) -> np.ndarray:
    """Per-sample Monte Carlo values whose mean estimates the pullback volume of omega^k over V under f^n.

    ``fibered``: base Jacobian traded for the exact count of base preimages of a
    uniform base target, fiber factor sampled once per branch. Tracks the branches
    that stay near the base Julia set, which dominate the integral but are
    exponentially rare under uniform sampling of V.
    ``jacobian``: weight * Jac(f^n)(x) for x drawn inside V.
    ``count``: multiplicity count of f^-n(y) in V for uniform targets y.
    """
    if n == 0:
        if np.isinf(V.c):
            return np.ones(n_samples)
        return sample_in_region_lifts(V, endo.k, n_samples, rng)[1]
    if method == "fibered":
        Y = sample_uniform_lifts(rng, endo.s, n_samples)
        per = max(1, (1 << 20) // endo.d ** (endo.s * n))
        return np.concatenate([_fibered_values(endo, V, n, Y[i : i + per], rng) for i in range(0, n_samples, per)])
    if method == "jacobian":
        x, w = sample_in_region_lifts(V, endo.k, n_samples, rng)
        return w * jacobian_n(endo, x, n)
    if method != "count":
        raise ValueError(f"unknown method {method!r}")
    if endo.d ** (endo.k * n) > DEFAULT_BUDGET:
        raise BudgetExceededError("d^(kn) exceeds the node budget")
    Y = sample_uniform_lifts(rng, endo.k, n_samples)
    vals = np.zeros(n_samples)
    for start in range(0, n_samples, chunk):
        lifts = Y[start : start + chunk]
        m = lifts.shape[0]
        mult = np.ones(m, dtype=np.int64)
        sid = np.arange(m)
        for _ in range(n):
            b = preimages_batch(endo, lifts)
            lifts, mult, sid = b.lifts, b.mult * mult[b.parent], sid[b.parent]
        inside = V.contains_lifts(lifts)
        vals[start : start + m] = np.bincount(sid[inside], weights=mult[inside], minlength=m)
    return vals


def estimate_dkloc(endo: PerturbedEndo, V: TrapRegion, n: int, n_samples: int, rng, method: str = "fibered") -> tuple[float, float]:
    """(mean, standard error) of :func:`dkloc_values`."""
    if n == 0 and np.isinf(V.c):
        return 1.0, 0.0
    return _mean_se(dkloc_values(endo, V, n, n_samples, rng, method))


@dataclass
class MassCheck:
    estimate: float
    stderr: float
    expected: float

    @property
    def ok(self) -> bool:
        return abs(self.estimate - self.expected) <= 4 * self.stderr or (self.stderr == 0 and self.estimate == self.expected)

    def __iter__(self):
        return iter((self.estimate, self.stderr))


def pullback_mass_check(endo: PerturbedEndo, n: int, n_samples: int, rng) -> MassCheck:
    """Total pullback mass over P^k; must equal d^(kn)."""
    est, se = estimate_dkloc(endo, WHOLE_SPACE, n, n_samples, rng, method="jacobian")
    return MassCheck(est, se, float(endo.d ** (endo.k * n)))


def depth_samples(n_samples: int, leaves_per_sample: int, leaf_budget: int | None, floor: int = 64) -> int:
    """Sample count for one depth: ``n_samples`` capped so the leaves stay near ``leaf_budget``, never below ``floor``."""
    if leaf_budget is None:
        return n_samples
    return min(n_samples, max(floor, leaf_budget // max(1, leaves_per_sample)))


def dkloc_sequence(
    endo: PerturbedEndo, V: TrapRegion, n_max: int, n_samples: int, rng, method: str = "fibered", leaf_budget: int | None = None
) -> list:
    rows = []
    for n in range(1, n_max + 1):
        N = depth_samples(n_samples, endo.d ** (endo.s * n), leaf_budget) if method == "fibered" else n_samples
        rows.append(DkRow(n, *estimate_dkloc(endo, V, n, N, rng, method)))
    return rows


def dkloc_hat(rows: list, n_min: int = 2, how: str = "root") -> float:
    """Finite-depth proxy for the local degree from rows with n >= n_min.

    ``root`` (default): max n-th root. Biased low by the prefactor C of
    I_n ~ C q^n (C^(1/n) -> 1 slowly), so it needs deep rows.
    ``slope``: exp of the least-squares slope of log I_n against n; insensitive
    to the prefactor, used as a diagnostic.
    """
    rows = [r for r in rows if r.n >= n_min and r.estimate > 0]
    if not rows:
        return float("nan")
    if how == "root" or len(rows) == 1:
        return max(r.nth_root for r in rows)
    if how != "slope":
        raise ValueError(f"unknown estimator {how!r}")
    ns = np.array([r.n for r in rows], float)
    slope = np.polyfit(ns, np.log([r.estimate for r in rows]), 1)[0]
    return float(np.exp(slope))
