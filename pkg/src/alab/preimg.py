"""Exact preimages of f_eps with multiplicity, and iterated preimage trees.

The batched solvers return fixed-shape slot arrays: ``lifts[N, m, ...]`` with
integer ``mult[N, m]``; a slot of multiplicity 0 is empty (its point was merged
into another slot). Per row the multiplicities always sum to the degree.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .errors import BudgetExceededError, NumericalPreimageError, UnsupportedError
from .fibfam import MONOMIAL_CASCADE, P1_GENERAL, FiberedPair, PerturbedEndo, TrapRegion, apply_lifts
from .hpoly import group_exponents
from .projsp import PROJ_TOL, ProjectivePoint, fs_distance_lifts, normalize_lifts
from .roots import LEAD_TOL, binary_form_roots, companion_roots, newton_polish

log = logging.getLogger(__name__)

# d-th roots this small (relative) are the zero root with multiplicity d
ZERO_ROOT_REL = PROJ_TOL / 2
# a d-th power this small relative to its inputs is roundoff of an exact zero
ZERO_POWER_REL = 1e-13
VERIFY_TOL = 1e-8
DEFAULT_BUDGET = 2**24
CENTER_TOL = 1e-14


@dataclass(frozen=True)
class WeightedPreimage:
    point: ProjectivePoint
    multiplicity: int


# ---------------------------------------------------------------------------
# base solvers on P^s


def _roots_of_unity(d: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(d) / d)


def _cascade_base(pair: FiberedPair, W: np.ndarray):
    """Preimages under z -> M z^d: chained d-th roots, one slot per element of G^{s+1}."""
    d, n = pair.d, pair.k
    M = pair.f_inf.power_matrix()
    v = np.linalg.solve(M, W.T).T  # (N, n) with M v = w
    r = v ** (1.0 / d)
    rmax = np.max(np.abs(r), axis=1, keepdims=True)
    zero = (np.abs(r) <= ZERO_ROOT_REL * rmax) | (np.abs(v) <= ZERO_POWER_REL * np.max(np.abs(v), axis=1, keepdims=True))
    r = np.where(zero, 0.0, r)
    piv = np.argmax(np.abs(v), axis=1)
    E = group_exponents(d, n)  # (d^n, n)
    xi = _roots_of_unity(d)
    Z = r[:, None, :] * xi[E][None, :, :]
    # per-coordinate slot weights: pivot root fixed, zero coordinates absorb d roots
    e0 = E[None, :, :] == 0
    wts = np.where(zero[:, None, :], d * e0, 1)
    is_piv = np.arange(n)[None, None, :] == piv[:, None, None]
    wts = np.where(is_piv, e0, wts)
    mult = np.prod(wts, axis=2).astype(np.int64)
    return Z, mult


def _binary_coeffs(P) -> np.ndarray:
    """Coefficients c_j of z0^(d-j) z1^j for a binary form."""
    c = np.zeros(P.degree + 1, dtype=complex)
    for (e0, e1), a in P.terms:
        c[e1] += a
    return c


def _p1_base(pair: FiberedPair, W: np.ndarray):
    """Preimages under a general degree-d map of P^1 by companion eigenvalues per chart."""
    d = pair.d
    A0 = _binary_coeffs(pair.f_inf.components[0])
    A1 = _binary_coeffs(pair.f_inf.components[1])
    C = W[:, 1:2] * A0[None, :] - W[:, 0:1] * A1[None, :]  # (N, d+1)
    N = C.shape[0]
    Z = np.zeros((N, d, 2), dtype=complex)
    mult = np.ones((N, d), dtype=np.int64)
    scale = np.max(np.abs(C), axis=1)
    use_u = np.abs(C[:, -1]) >= np.abs(C[:, 0])
    lead = np.where(use_u, np.abs(C[:, -1]), np.abs(C[:, 0]))
    fast = lead > 1e3 * LEAD_TOL * scale
    if np.any(fast & use_u):
        rows = np.flatnonzero(fast & use_u)
        u = companion_roots(C[rows])
        Z[rows, :, 0] = 1.0
        Z[rows, :, 1] = u
    if np.any(fast & ~use_u):
        rows = np.flatnonzero(fast & ~use_u)
        v = companion_roots(C[rows, ::-1])
        Z[rows, :, 0] = v
        Z[rows, :, 1] = 1.0
    for i in np.flatnonzero(~fast):
        roots = binary_form_roots(C[i])
        j = 0
        for lift, m in roots:
            Z[i, j] = lift
            mult[i, j] = m
            mult[i, j + 1 : j + m] = 0
            Z[i, j + 1 : j + m] = lift
            j += m
    # polish far roots in the other chart
    Z = _polish_p1(C, Z)
    Z, mult = _cluster_slots(Z, mult)
    # rescale lifts so that f_inf(z) = w exactly
    img = pair.f_inf.lift(Z)
    piv = np.argmax(np.abs(W), axis=1)
    wp = W[np.arange(N), piv]
    mu = img[np.arange(N), :, piv] / wp[:, None]
    t = mu ** (-1.0 / d)
    return Z * t[:, :, None], mult


def _polish_p1(C: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """One Newton step per root on the binary form, in the chart where it is bounded."""
    Zn = normalize_lifts(Z.reshape(-1, 2)).reshape(Z.shape)
    in_u = np.abs(Zn[..., 0]) == 1.0
    u = np.where(in_u, Zn[..., 1], Zn[..., 0])
    Cu = np.broadcast_to(C[:, None, :], Z.shape[:2] + C.shape[1:])
    coeffs = np.where(in_u[..., None], Cu, Cu[..., ::-1])
    flat_c = coeffs.reshape(-1, C.shape[1])
    flat_u = u.reshape(-1, 1)
    if np.any(np.abs(flat_c[:, -1]) == 0):
        return Zn
    pol = newton_polish(flat_c, flat_u)[:, 0].reshape(u.shape)
    return np.where(in_u[..., None], np.stack([np.ones_like(pol), pol], -1), np.stack([pol, np.ones_like(pol)], -1))


def _cluster_slots(Z: np.ndarray, mult: np.ndarray, radius: float = PROJ_TOL):
    """Merge slots of a row whose points lie within ``radius`` (chordal)."""
    N, m = mult.shape
    if m < 2:
        return Z, mult
    D = fs_distance_lifts(Z[:, :, None, :], Z[:, None, :, :])
    live = mult > 0
    close = (D <= radius) & live[:, :, None] & live[:, None, :]
    np.einsum("nii->ni", close)[:] = False
    rows = np.flatnonzero(close.any(axis=(1, 2)))
    if rows.size:
        mult = mult.copy()
        for i in rows:
            for a in range(m):
                if mult[i, a] == 0:
                    continue
                for b in range(a + 1, m):
                    if mult[i, b] and D[i, a, b] <= radius:
                        mult[i, a] += mult[i, b]
                        mult[i, b] = 0
    near = (D <= 10 * radius) & (D > radius) & live[:, :, None] & live[:, None, :]
    if near.any():
        log.warning("preimage clusters within 10x the merge radius; multiplicities may be unreliable")
    return Z, mult


def base_preimages_batch(pair: FiberedPair, W) -> tuple[np.ndarray, np.ndarray]:
    """Lift-matched base preimages: returns Z (N, m, s+1) with f_inf(Z[i, j]) = W[i]."""
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    if pair.base_kind == MONOMIAL_CASCADE:
        return _cascade_base(pair, W)
    if pair.base_kind == P1_GENERAL and pair.s == 1:
        return _p1_base(pair, W)
    raise UnsupportedError(f"no base solver for {pair.base_kind} with s = {pair.s}")


def _collect(Z: np.ndarray, mult: np.ndarray) -> list[WeightedPreimage]:
    out = []
    for z, m in zip(Z, mult):
        if m > 0:
            out.append(WeightedPreimage(ProjectivePoint(z), int(m)))
    return out


def base_preimages(pair: FiberedPair, w: ProjectivePoint, solver: str | None = None) -> list[WeightedPreimage]:
    """Weighted preimages of ``w`` under f_inf; multiplicities sum to d^s."""
    if solver is not None and solver != pair.base_kind:
        pair = FiberedPair(pair.k, pair.d, pair.f_inf, pair.R, solver, pair.linear_form, pair.power_shift)
    W = normalize_lifts(w.lift[None, :])
    Z, mult = base_preimages_batch(pair, W)
    Z, mult = _cluster_slots(normalize_lifts(Z.reshape(-1, pair.k)).reshape(Z.shape), mult)
    res = _collect(normalize_lifts(Z[0]), mult[0])
    img = normalize_lifts(pair.f_inf.lift(np.array([p.point.lift for p in res])))
    err = fs_distance_lifts(img, W)
    if np.any(err > VERIFY_TOL):
        raise NumericalPreimageError(f"base preimage residual {err.max():.3g} at {w!r}")
    return res


# ---------------------------------------------------------------------------
# full preimages on P^k


@dataclass
class PreimageBatch:
    """Flat list of weighted preimages; ``parent[i]`` indexes the target row."""

    lifts: np.ndarray
    mult: np.ndarray
    parent: np.ndarray


def preimages_batch(endo: PerturbedEndo, X, verify: bool = True) -> PreimageBatch:
    X = normalize_lifts(np.atleast_2d(np.asarray(X, dtype=complex)))
    N, n = X.shape
    d, k = endo.d, endo.k
    xb, xk = X[:, :-1], X[:, -1]
    center = np.max(np.abs(xb), axis=1) <= CENTER_TOL * np.abs(xk)
    rows = np.flatnonzero(~center)
    Zb, mb = base_preimages_batch(endo.pair, xb[rows])  # (Nr, m, k)
    q = xk[rows, None] - endo.epsilon * endo.pair.R(Zb)
    rq = q ** (1.0 / d)
    scale = np.maximum(np.max(np.abs(Zb), axis=2), np.abs(rq))
    eR = np.abs(endo.epsilon * endo.pair.R(Zb))
    fzero = (np.abs(rq) <= ZERO_ROOT_REL * scale) | (np.abs(q) <= ZERO_POWER_REL * (np.abs(xk[rows, None]) + eR))
    rq = np.where(fzero, 0.0, rq)
    xi = _roots_of_unity(d)
    m = Zb.shape[1]
    Y = np.empty((rows.size, m, d, n), dtype=complex)
    Y[..., :-1] = Zb[:, :, None, :]
    Y[..., -1] = rq[:, :, None] * xi[None, None, :]
    e0 = np.arange(d)[None, None, :] == 0
    wf = np.where(fzero[:, :, None], d * e0, 1)
    mult = mb[:, :, None] * wf
    par = np.broadcast_to(rows[:, None, None], mult.shape)
    Y, mult, par = Y.reshape(-1, n), mult.reshape(-1), par.reshape(-1)
    keep = mult > 0
    Y, mult, par = Y[keep], mult[keep], par[keep]
    if center.any():
        crow = np.flatnonzero(center)
        cpt = np.zeros((crow.size, n), dtype=complex)
        cpt[:, -1] = 1.0
        Y = np.concatenate([Y, cpt])
        mult = np.concatenate([mult, np.full(crow.size, d**k, dtype=np.int64)])
        par = np.concatenate([par, crow])
        order = np.argsort(par, kind="stable")
        Y, mult, par = Y[order], mult[order], par[order]
    Y = normalize_lifts(Y)
    if verify:
        err = fs_distance_lifts(normalize_lifts(apply_lifts(endo, Y)), X[par])
        if err.size and np.max(err) > VERIFY_TOL:
            bad = int(np.argmax(err))
            raise NumericalPreimageError(
                f"forward residual {err[bad]:.3g} for target {X[par[bad]]} (preimage {Y[bad]})"
            )
    return PreimageBatch(Y, mult.astype(np.int64), par.astype(np.int64))


def full_preimages(endo: PerturbedEndo, x: ProjectivePoint) -> list[WeightedPreimage]:
    """Weighted preimages of ``x`` under f_eps; multiplicities sum to d^k."""
    b = preimages_batch(endo, x.lift[None, :])
    Z, mult = _cluster_slots(b.lifts[None], b.mult[None])
    return _collect(Z[0], mult[0])


# ---------------------------------------------------------------------------
# trees


@dataclass
class TreeLevel:
    lifts: np.ndarray
    mult: np.ndarray
    parent: np.ndarray
    in_region: np.ndarray | None = None

    @property
    def total(self) -> int:
        return int(self.mult.sum())

    def __len__(self) -> int:
        return self.mult.size


@dataclass
class PreimageTree:
    root: ProjectivePoint
    depth: int
    levels: list[TreeLevel] = field(default_factory=list)
    region: TrapRegion | None = None
    pruned: bool = False

    def count_in_region(self, level: int) -> tuple[int, int]:
        """(with multiplicity, distinct points) inside the region at ``level``."""
        lv = self.levels[level]
        if lv.in_region is None:
            raise ValueError("tree was built without a region")
        return int(lv.mult[lv.in_region].sum()), int(lv.in_region.sum())

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            n = self.root.lift.size
            w.writerow(["level", "parent"] + [f"re{i}" for i in range(n)] + [f"im{i}" for i in range(n)] + ["multiplicity", "in_region"])
            for ell, lv in enumerate(self.levels):
                flags = lv.in_region if lv.in_region is not None else np.zeros(len(lv), bool)
                for z, m, p, f in zip(lv.lifts, lv.mult, lv.parent, flags):
                    w.writerow([ell, int(p)] + [repr(float(v)) for v in z.real] + [repr(float(v)) for v in z.imag] + [int(m), int(f)])


def build_tree(
    endo: PerturbedEndo,
    x: ProjectivePoint,
    n: int,
    region: TrapRegion | None = None,
    prune: bool = False,
    budget: int = DEFAULT_BUDGET,
) -> PreimageTree:
    """All preimages under f_eps^l for l <= n, one level per depth.

    With ``prune`` nodes outside ``region`` are dropped before expansion, so only
    the region counts stay meaningful.
    """
    if n < 0:
        raise ValueError("depth must be >= 0")
    if not prune and endo.d ** (endo.k * n) > budget:
        raise BudgetExceededError(f"d^(kn) = {endo.d ** (endo.k * n)} exceeds node budget {budget}")
    root = normalize_lifts(x.lift[None, :])
    lv = TreeLevel(root, np.ones(1, dtype=np.int64), np.zeros(1, dtype=np.int64))
    if region is not None:
        lv.in_region = region.contains_lifts(root)
    tree = PreimageTree(x, n, [lv], region, prune)
    nodes = 1
    for _ in range(n):
        cur = tree.levels[-1]
        src = np.arange(len(cur))
        if prune and cur.in_region is not None:
            src = src[cur.in_region]
        b = preimages_batch(endo, cur.lifts[src])
        nxt = TreeLevel(b.lifts, b.mult * cur.mult[src][b.parent], src[b.parent])
        if region is not None:
            nxt.in_region = region.contains_lifts(nxt.lifts)
        nodes += len(nxt)
        if nodes > budget:
            raise BudgetExceededError(f"tree exceeded node budget {budget}")
        tree.levels.append(nxt)
    return tree


def leaves_batch(endo: PerturbedEndo, X, n: int, budget: int = DEFAULT_BUDGET):
    """Level-n preimages of many roots at once: (lifts, mult, root index)."""
    X = normalize_lifts(np.atleast_2d(X))
    if X.shape[0] * endo.d ** (endo.k * n) > budget * 16:
        raise BudgetExceededError("batched tree exceeds budget")
    lifts = X
    mult = np.ones(X.shape[0], dtype=np.int64)
    root = np.arange(X.shape[0])
    for _ in range(n):
        b = preimages_batch(endo, lifts)
        lifts, mult, root = b.lifts, b.mult * mult[b.parent], root[b.parent]
    return lifts, mult, root


# ---------------------------------------------------------------------------
# matched preimages


@dataclass
class Matching:
    pairs: list
    distances: np.ndarray

    @property
    def max_distance(self) -> float:
        return float(self.distances.max()) if self.distances.size else 0.0


def _expand(b: PreimageBatch) -> np.ndarray:
    return np.repeat(b.lifts, b.mult, axis=0)


def _perfect_matching(ok: np.ndarray) -> np.ndarray | None:
    """Perfect matching in the bipartite graph ``ok`` by augmenting paths, or None."""
    n = ok.shape[0]
    match_col = -np.ones(n, dtype=np.int64)

    def augment(i, seen):
        for j in np.flatnonzero(ok[i]):
            if not seen[j]:
                seen[j] = True
                if match_col[j] < 0 or augment(match_col[j], seen):
                    match_col[j] = i
                    return True
        return False

    for i in range(n):
        if not augment(i, np.zeros(n, dtype=bool)):
            return None
    perm = np.empty(n, dtype=np.int64)
    perm[match_col] = np.arange(n)
    return perm


def bottleneck_matching(D: np.ndarray) -> np.ndarray:
    """Permutation p minimizing max_i D[i, p[i]]; among those, pairwise swaps reduce the sum.

    Exact: binary search over the distinct entries of D for the smallest threshold
    admitting a perfect matching.
    """
    vals = np.unique(D)
    lo, hi = 0, vals.size - 1
    best = _perfect_matching(D <= vals[hi])
    while lo < hi:
        mid = (lo + hi) // 2
        p = _perfect_matching(D <= vals[mid])
        if p is None:
            lo = mid + 1
        else:
            hi, best = mid, p
    t = vals[hi]
    perm = best
    n = D.shape[0]
    improved = True
    while improved:
        improved = False
        for a in range(n):
            for b in range(a + 1, n):
                if D[a, perm[b]] <= t and D[b, perm[a]] <= t and D[a, perm[b]] + D[b, perm[a]] < D[a, perm[a]] + D[b, perm[b]]:
                    perm[a], perm[b] = perm[b], perm[a]
                    improved = True
    return perm


def exhaustive_bottleneck(D: np.ndarray) -> float:
    n = D.shape[0]
    return min(max(D[i, p[i]] for i in range(n)) for p in permutations(range(n)))


def matched_preimages(endo: PerturbedEndo, x: ProjectivePoint, y: ProjectivePoint, r: float = 0.1) -> Matching:
    """Pair f^{-1}(x) with f^{-1}(y) (multiplicity-expanded) minimizing the largest distance."""
    from .projsp import fs_distance

    if fs_distance(x, y) >= r:
        raise ValueError(f"points farther apart than r = {r}")
    bx = _expand(preimages_batch(endo, x.lift[None, :]))
    by = _expand(preimages_batch(endo, y.lift[None, :]))
    if bx.shape[0] != by.shape[0]:
        raise NumericalPreimageError("preimage cardinalities differ after multiplicity expansion")
    D = fs_distance_lifts(bx[:, None, :], by[None, :, :])
    perm = bottleneck_matching(D)
    pairs = [(ProjectivePoint(bx[i]), ProjectivePoint(by[perm[i]])) for i in range(len(perm))]
    return Matching(pairs, D[np.arange(len(perm)), perm])
