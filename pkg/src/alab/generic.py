"""Exceptional line sets of a fibered pair and the algebraic genericity conditions.

Points of P^s parametrize the lines through the pencil center. For pure-power
base maps the fiber of f_inf through z is the orbit of z under the root-of-unity
group acting on coordinates 1..s, which turns most conditions into finite
linear algebra.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations, product
from math import comb

import numpy as np

from .errors import BudgetExceededError, InfiniteSetError, UnsupportedError
from .fibfam import MONOMIAL_CASCADE, FiberedPair, make_cascade_pair
from .hpoly import HomogeneousPolynomial, ProjectiveMap, group_exponents
from .projsp import PROJ_TOL, ProjectivePoint, fs_distance_lifts, lift_record, normalize_lifts
from .roots import aberth, binary_form_roots

log = logging.getLogger(__name__)

DISJOINT_TOL = 1e-6
RESIDUAL_TOL = 1e-8
# relative tolerance when comparing values of R along a fiber
VALUE_TOL = 1e-9
ENUM_BUDGET = 1_000_000
ORBIT_HORIZON = 50


@dataclass(frozen=True)
class RootOfUnityGroup:
    """(Z/d)^s acting by [z_0 : xi_1 z_1 : ... : xi_s z_s]."""

    d: int
    s: int

    @property
    def elements(self) -> np.ndarray:
        return group_exponents(self.d, self.s)

    @property
    def order(self) -> int:
        return self.d**self.s

    def multipliers(self) -> np.ndarray:
        """Diagonal factors, shape (d^s, s+1) with a leading column of ones."""
        xi = np.exp(2j * np.pi * self.elements / self.d)
        return np.concatenate([np.ones((self.order, 1)), xi], axis=1)

    def orbit(self, lifts) -> np.ndarray:
        z = np.atleast_2d(np.asarray(lifts, dtype=complex))
        return z[:, None, :] * self.multipliers()[None, :, :]

    def compose(self, a, b) -> np.ndarray:
        return (np.asarray(a) + np.asarray(b)) % self.d


@dataclass(frozen=True)
class ExceptionalPoint:
    point: ProjectivePoint
    count: int  # fiber points (with multiplicity) sharing the value of R
    residual: float

    def record(self) -> dict:
        return {"point": lift_record(self.point), "count": self.count, "residual": self.residual}


def _require_cascade(pair: FiberedPair):
    if pair.base_kind != MONOMIAL_CASCADE:
        raise UnsupportedError("exceptional sets need a pure-power base map")


def _abs_scale(P: HomogeneousPolynomial, lifts) -> np.ndarray:
    """Sum of |coefficient * monomial|, the natural size of P(z) for comparisons."""
    absP = HomogeneousPolynomial(P.nvars, P.degree, [(e, abs(c)) for e, c in P.terms])
    return np.real(absP(np.abs(lifts))) + 1e-300


def fiber_value_count(pair: FiberedPair, lifts) -> tuple[np.ndarray, np.ndarray]:
    """Number of group elements g with R(g z) = R(z), and the worst matching residual."""
    G = RootOfUnityGroup(pair.d, pair.s)
    z = normalize_lifts(np.atleast_2d(lifts))
    orb = G.orbit(z)
    r0 = pair.R(z)
    rg = pair.R(orb)
    scale = _abs_scale(pair.R, z)
    rel = np.abs(rg - r0[:, None]) / scale[:, None]
    hit = rel <= VALUE_TOL
    res = np.where(hit, rel, 0.0).max(axis=1)
    return hit.sum(axis=1), res


def _x1_candidates_on_support(beta: np.ndarray, d: int, J: tuple) -> list[np.ndarray]:
    """Interior points of the coordinate stratum J (all J-coordinates nonzero) meeting the
    fiber threshold, from the homogeneous systems L(h z) = eta_h L(z), h in a subset A of
    the effective group containing the identity."""
    sp = len(J) - 1
    if sp == 0:
        z = np.zeros(beta.size, dtype=complex)
        z[J[0]] = 1.0
        return [z]
    bJ = beta[list(J)]
    H = group_exponents(d, sp)[1:]  # non-identity elements, acting on J[1:]
    need = d ** (sp - 1)  # |A| - 1
    n_sys = comb(len(H), need) * d**need
    if n_sys > ENUM_BUDGET:
        raise BudgetExceededError(f"{n_sys} linear systems exceed the enumeration budget")
    xi = np.exp(2j * np.pi * np.arange(d) / d)
    mats = []
    for B in combinations(range(len(H)), need):
        hx = np.concatenate([np.ones((need, 1)), xi[H[list(B)]]], axis=1)  # (need, sp+1)
        for eta in product(range(d), repeat=need):
            mats.append(bJ[None, :] * (hx - xi[list(eta)][:, None]))
    M = np.array(mats)  # (n_sys, need, sp+1)
    if M.shape[1] < M.shape[2]:
        M = np.concatenate([M, np.zeros((M.shape[0], M.shape[2] - M.shape[1], M.shape[2]))], axis=1)
    _, sv, Vh = np.linalg.svd(M)
    tol = 1e-10 * np.maximum(sv[:, :1], 1e-300)
    rank = (sv > tol).sum(axis=1)
    out = []
    for i in np.flatnonzero(rank < len(J)):
        null = Vh[i, rank[i]:].conj()
        if null.shape[0] == 1:
            v = null[0]
            if np.all(np.abs(v) > 1e-10 * np.abs(v).max()):
                z = np.zeros(beta.size, dtype=complex)
                z[list(J)] = v
                out.append(z)
        else:
            # positive-dimensional solution space; infinite unless it lies in the boundary
            if np.all(np.abs(null).max(axis=0) > 1e-10):
                raise InfiniteSetError(f"X_-1 contains a positive-dimensional piece on support {J}")
    return out


def _dedupe(lifts: list[np.ndarray], tol: float = PROJ_TOL) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for z in lifts:
        if not any(fs_distance_lifts(z, w) <= tol for w in kept):
            kept.append(z)
    return kept


def x_minus1(pair: FiberedPair) -> list[ExceptionalPoint]:
    """Lines whose f_inf-fiber contains more than d^(s-1) points with the same value of R.

    Requires ``R = (sum beta_i z_i)^d`` up to a sum of pure powers (which is constant
    along fibers). Each coordinate stratum is solved separately; every candidate is
    verified by counting over the full group orbit.
    """
    _require_cascade(pair)
    if pair.linear_form is None:
        raise UnsupportedError("x_minus1 needs R of the form (sum beta_i z_i)^d")
    beta = np.asarray(pair.linear_form, dtype=complex)
    s, d = pair.s, pair.d
    thresh = d ** (s - 1) + 1
    cands: list[np.ndarray] = []
    for size in range(1, s + 2):
        for J in combinations(range(s + 1), size):
            cands.extend(_x1_candidates_on_support(beta, d, J))
    cands = _dedupe([normalize_lifts(z[None])[0] for z in cands])
    if not cands:
        return []
    counts, res = fiber_value_count(pair, np.array(cands))
    return [
        ExceptionalPoint(ProjectivePoint(z), int(c), float(r))
        for z, c, r in zip(cands, counts, res)
        if c >= thresh
    ]


def x_minus1_fiber_scan(pair: FiberedPair) -> list[ProjectivePoint]:
    """Independent s = 1 route: roots of R(1, xi u) - R(1, u) for each xi != 1."""
    _require_cascade(pair)
    if pair.s != 1:
        raise UnsupportedError("fiber scan is implemented for s = 1")
    d = pair.d
    found = [np.array([0.0, 1.0], dtype=complex)]
    c = np.zeros(d + 1, dtype=complex)
    for (e0, e1), a in pair.R.terms:
        c[e1] += a
    for j in range(1, d):
        xi = np.exp(2j * np.pi * j / d)
        q = c * (xi ** np.arange(d + 1) - 1)
        if np.max(np.abs(q)) <= 1e-14 * np.max(np.abs(c)):
            raise InfiniteSetError("R is constant along fibers: every line is exceptional")
        found.extend(lift for lift, _ in binary_form_roots(q))
    return [ProjectivePoint(z) for z in _dedupe([normalize_lifts(z[None])[0] for z in found])]


def image_points(F: ProjectiveMap, points, n: int = 1) -> list[ProjectivePoint]:
    if not points:
        return []
    z = np.array([p.lift for p in points])
    for _ in range(n):
        z = normalize_lifts(F.lift(normalize_lifts(z)))
    return [ProjectivePoint(w) for w in z]


@dataclass
class ZeroLocus:
    polynomial: HomogeneousPolynomial
    dim: int
    points: list  # (ProjectivePoint, multiplicity) for s = 1

    def record(self) -> dict:
        return {
            "polynomial": self.polynomial.to_records(),
            "dim": self.dim,
            "points": [{"point": lift_record(p), "multiplicity": m} for p, m in self.points],
        }


def _binary(P: HomogeneousPolynomial) -> np.ndarray:
    c = np.zeros(P.degree + 1, dtype=complex)
    for (e0, e1), a in P.terms:
        c[e1] += a
    return c


def _cluster_roots(roots) -> list:
    out: list = []
    for lift, m in roots:
        lift = normalize_lifts(lift[None])[0]
        for i, (q, mq) in enumerate(out):
            if fs_distance_lifts(lift, q) <= PROJ_TOL:
                out[i] = (q, mq + m)
                break
        else:
            out.append((lift, m))
    return out


def _merge_multiple_roots(c: np.ndarray, roots: list, radius: float = 1e-4) -> list:
    """Merge roots of a binary form that sit within ``radius`` when the form and its
    derivatives up to the merged order vanish at the cluster mean (multiple roots are
    only located to about eps^(1/m))."""
    roots = _cluster_roots(roots)
    out: list = []
    used = [False] * len(roots)
    for i, (zi, mi) in enumerate(roots):
        if used[i]:
            continue
        group = [(zi, mi)] + [roots[j] for j in range(i + 1, len(roots)) if not used[j] and fs_distance_lifts(zi, roots[j][0]) <= radius]
        m = sum(g[1] for g in group)
        if len(group) > 1:
            chart = int(np.argmax(np.abs(zi)))
            u = np.mean([g[0][1 - chart] / g[0][chart] for g in group])
            poly = c if chart == 0 else c[::-1]
            scale = np.max(np.abs(poly))
            ok = all(abs(np.polyval(np.polyder(poly[::-1], j), u)) <= 1e-6 * scale * max(1.0, abs(u)) ** len(c) for j in range(m))
            if ok:
                for j in range(i + 1, len(roots)):
                    if any(roots[j] is g for g in group):
                        used[j] = True
                lift = np.array([1.0, u]) if chart == 0 else np.array([u, 1.0])
                out.append((normalize_lifts(lift[None])[0], m))
                continue
        out.append((zi, mi))
    return out


def zero_locus(pair: FiberedPair) -> ZeroLocus:
    if pair.s != 1:
        return ZeroLocus(pair.R, pair.s - 1, [])
    c = _binary(pair.R)
    roots = _merge_multiple_roots(c, binary_form_roots(c))
    return ZeroLocus(pair.R, 0, [(ProjectivePoint(z), int(m)) for z, m in roots])


def pair_condition_points(pair: FiberedPair) -> list[ExceptionalPoint]:
    """Lines z with a distinct fiber partner z' = g z and R(z') = zeta R(z), zeta^d = 1 != zeta."""
    _require_cascade(pair)
    if pair.s != 1:
        raise UnsupportedError("pair-condition enumeration is implemented for s = 1")
    d = pair.d
    c = _binary(pair.R)
    scale = np.max(np.abs(c))
    pts = []
    for j in range(1, d):
        xi = np.exp(2j * np.pi * j / d)
        for m in range(1, d):
            zeta = np.exp(2j * np.pi * m / d)
            q = c * xi ** np.arange(d + 1) - zeta * c
            if np.max(np.abs(q)) <= 1e-14 * scale:
                raise InfiniteSetError("pair condition holds on every line")
            for lift, _ in binary_form_roots(q):
                z = normalize_lifts(lift[None])[0]
                if min(abs(z[0]), abs(z[1])) <= 1e-12:
                    continue  # g fixes z: not a distinct fiber point
                zp = z * np.array([1.0, xi])
                res = abs(pair.R(zp) - zeta * pair.R(z)) / _abs_scale(pair.R, z[None])[0]
                pts.append((z, float(res)))
    kept: list = []
    for z, r in pts:
        if not any(fs_distance_lifts(z, w.point.lift) <= PROJ_TOL for w in kept):
            kept.append(ExceptionalPoint(ProjectivePoint(z), 1, r))
    return kept


def y_minus2(pair: FiberedPair) -> tuple[ZeroLocus, list[ExceptionalPoint]]:
    return zero_locus(pair), pair_condition_points(pair)


def in_y_minus2_residual(pair: FiberedPair, lifts) -> np.ndarray:
    """How far each z is from Y_-2: min of |R(z)| and |R(g z) - zeta R(z)| (relative)."""
    _require_cascade(pair)
    G = RootOfUnityGroup(pair.d, pair.s)
    z = normalize_lifts(np.atleast_2d(lifts))
    scale = _abs_scale(pair.R, z)
    r0 = pair.R(z)
    best = np.abs(r0) / scale
    orb = G.orbit(z)
    rg = pair.R(orb)  # (N, |G|)
    # skip elements fixing z projectively
    moved = fs_distance_lifts(orb, z[:, None, :]) > PROJ_TOL
    for m in range(1, pair.d):
        zeta = np.exp(2j * np.pi * m / pair.d)
        rel = np.abs(rg - zeta * r0[:, None]) / scale[:, None]
        rel = np.where(moved, rel, np.inf)
        best = np.minimum(best, rel.min(axis=1))
    return best


def base_preimage_lifts(pair: FiberedPair, lifts, n: int) -> np.ndarray:
    """All points of f_inf^{-n}(z) (set-wise, normalized), stacked."""
    from .preimg import base_preimages_batch

    z = normalize_lifts(np.atleast_2d(lifts))
    for _ in range(n):
        Z, mult = base_preimages_batch(pair, z)
        z = normalize_lifts(Z[mult > 0])
    return z


# ---------------------------------------------------------------------------
# periodic points on P^1

_ROT = np.array([[np.cos(0.3), -np.sin(0.3) * np.exp(0.7j)], [np.sin(0.3) * np.exp(-0.7j), np.cos(0.3)]])


def _fixed_point_ratio(F: ProjectiveMap, n: int):
    """Newton correction p/p' for p(u) = det[z(u), F^n(z(u))] in a rotated chart."""
    a, b = _ROT[:, 0], _ROT[:, 1]

    def ratio(u):
        u = np.asarray(u, dtype=complex)
        z = a[None, :] + u[:, None] * b[None, :]
        w, dw = z, np.broadcast_to(b, z.shape).astype(complex)
        for _ in range(n):
            J = F.jacobian_lifts(w)
            w, dw = F.lift(w), np.einsum("nij,nj->ni", J, dw)
            sc = np.max(np.abs(w), axis=1, keepdims=True)
            w, dw = w / sc, dw / sc
        p = z[:, 0] * w[:, 1] - z[:, 1] * w[:, 0]
        dp = b[0] * w[:, 1] + z[:, 0] * dw[:, 1] - b[1] * w[:, 0] - z[:, 1] * dw[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return p / dp

    return ratio


def periodic_points(pair_or_map, n: int, max_degree: int = 4097) -> list[tuple[ProjectivePoint, int]]:
    """Fixed points of f_inf^n on P^1 with multiplicity; the multiplicities sum to d^n + 1."""
    F = pair_or_map.f_inf if isinstance(pair_or_map, FiberedPair) else pair_or_map
    if F.dim != 1:
        raise UnsupportedError("periodic points are enumerated on P^1 only")
    if n < 1:
        raise ValueError("period must be >= 1")
    deg = F.degree**n + 1
    if deg > max_degree:
        raise BudgetExceededError(f"degree {deg} exceeds root-finder budget {max_degree}")
    ratio = _fixed_point_ratio(F, n)
    u, ok = aberth(ratio, deg, max_iter=1000)
    for _ in range(3):
        r = ratio(u)
        u = np.where(np.isfinite(r), u - r, u)
    if not ok:
        log.info("Aberth iteration hit its cap for period %d; relying on polish and residual check", n)
    z = normalize_lifts(_ROT[None, :, 0] + u[:, None] * _ROT[None, :, 1])
    img = z
    for _ in range(n):
        img = normalize_lifts(F.lift(img))
    res = fs_distance_lifts(img, z)
    bad = res > RESIDUAL_TOL
    if np.any(bad):
        log.warning("%d period-%d candidates fail the residual check (max %.2g)", bad.sum(), n, res.max())
    clusters = _cluster_roots([(zi, 1) for zi in z])
    return [(ProjectivePoint(q), m) for q, m in clusters]


# ---------------------------------------------------------------------------
# conditions


@dataclass
class GenericityReport:
    x_minus1: list
    x_set: list
    y_zero_locus: ZeroLocus | None
    y_pair_points: list | None
    y_set: list | None
    per_n: dict
    verdicts: dict
    margins: dict
    chain_length: int | None = None
    complete: bool = True
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        vals = [v for v in self.verdicts.values() if v is not None]
        return bool(vals) and all(vals)

    def to_dict(self) -> dict:
        def fin(x):
            return None if x is None or not np.isfinite(x) else float(x)

        return {
            "x_minus1": [p.record() for p in self.x_minus1],
            "x_set": [lift_record(p) for p in self.x_set],
            "y_zero_locus": self.y_zero_locus.record() if self.y_zero_locus else None,
            "y_pair_points": None if self.y_pair_points is None else [p.record() for p in self.y_pair_points],
            "y_set": None if self.y_set is None else [lift_record(p) for p in self.y_set],
            "periodic_points": {
                str(n): [{"point": lift_record(p), "multiplicity": m} for p, m in pts] for n, pts in self.per_n.items()
            },
            "verdicts": dict(self.verdicts),
            "margins": {k: fin(v) for k, v in self.margins.items()},
            "chain_length": self.chain_length,
            "complete": self.complete,
            "passed": self.passed,
            "notes": list(self.notes),
        }


VERDICT_KEYS = ("x_y_disjoint", "z_chain_empty", "x_avoids_per", "y_avoids_per", "x_minus1_not_preperiodic")


def _min_dist(A: list, B: list) -> float:
    if not A or not B:
        return float("inf")
    a = np.array([p.lift for p in A])
    b = np.array([p.lift for p in B])
    return float(fs_distance_lifts(a[:, None, :], b[None, :, :]).min())


def _chain(F: ProjectiveMap, Z: list, n_max: int) -> tuple[int | None, float]:
    """Least n such that no z in Z has f^i(z) in Z for every i <= n, and the exit margin."""
    if not Z:
        return 0, float("inf")
    zl = np.array([p.lift for p in Z])
    cur = normalize_lifts(zl)
    alive = np.ones(len(Z), dtype=bool)
    margin = float("inf")
    for i in range(1, n_max + 1):
        cur = normalize_lifts(F.lift(cur))
        dist = fs_distance_lifts(cur[:, None, :], zl[None, :, :]).min(axis=1)
        leaving = alive & (dist > DISJOINT_TOL)
        if leaving.any():
            margin = min(margin, float(dist[leaving].min()))
        alive &= dist <= DISJOINT_TOL
        if not alive.any():
            return i, margin
    return None, float(fs_distance_lifts(cur[alive][:, None, :], zl[None]).min()) if alive.any() else margin


def _preperiodic_margin(F: ProjectiveMap, pts: list, horizon: int, period_cap: int = ORBIT_HORIZON) -> float:
    """min over preperiods i <= horizon and periods p <= period_cap of dist(f^i z, f^(i+p) z)."""
    if not pts:
        return float("inf")
    z = normalize_lifts(np.array([p.lift for p in pts]))
    orbit = [z]
    for _ in range(horizon + period_cap):
        orbit.append(normalize_lifts(F.lift(orbit[-1])))
    O = np.stack(orbit, axis=1)  # (N, T, s+1)
    best = float("inf")
    for i in range(horizon + 1):
        later = O[:, i + 1 : i + period_cap + 1]
        best = min(best, float(fs_distance_lifts(O[:, i : i + 1], later).min()))
    return best


def check_conditions(pair: FiberedPair, n_max: int = 6) -> GenericityReport:
    """Evaluate the genericity conditions; a verdict that cannot be evaluated is None."""
    F = pair.f_inf
    notes: list = []
    verdicts = dict.fromkeys(VERDICT_KEYS)
    margins = dict.fromkeys(VERDICT_KEYS, float("nan"))
    try:
        X1 = x_minus1(pair)
    except InfiniteSetError as exc:
        notes.append(f"X_-1 is not finite: {exc}")
        verdicts.update(x_y_disjoint=False, z_chain_empty=False, x_avoids_per=False)
        return GenericityReport([], [], None, None, None, {}, verdicts, margins, None, False, notes)
    X = image_points(F, [p.point for p in X1])
    verdicts["x_minus1_not_preperiodic"] = None
    m = _preperiodic_margin(F, [p.point for p in X1], n_max)
    margins["x_minus1_not_preperiodic"] = m
    verdicts["x_minus1_not_preperiodic"] = m > DISJOINT_TOL

    per_n: dict = {}
    if pair.s == 1:
        per_n = {n: periodic_points(F, n) for n in range(1, n_max + 1)}
        per_pts = [p for pts in per_n.values() for p, _ in pts]
        try:
            zl, pairs = y_minus2(pair)
        except InfiniteSetError as exc:
            notes.append(f"Y_-2 is not finite: {exc}")
            verdicts.update(x_y_disjoint=False, z_chain_empty=False, y_avoids_per=False)
            m = _min_dist(X, per_pts)
            margins["x_avoids_per"] = m
            verdicts["x_avoids_per"] = m > DISJOINT_TOL
            return GenericityReport(X1, X, None, None, None, per_n, verdicts, margins, None, True, notes)
        y2 = [p for p, _ in zl.points] + [p.point for p in pairs]
        Y = image_points(F, y2, 2)
        m = _min_dist(X, Y)
        margins["x_y_disjoint"], verdicts["x_y_disjoint"] = m, m > DISJOINT_TOL
        Zs = [ProjectivePoint(z) for z in _dedupe([normalize_lifts(p.lift[None])[0] for p in X + Y])]
        n_chain, m = _chain(F, Zs, n_max)
        margins["z_chain_empty"], verdicts["z_chain_empty"] = m, n_chain is not None
        m = _min_dist(X, per_pts)
        margins["x_avoids_per"], verdicts["x_avoids_per"] = m, m > DISJOINT_TOL
        m = _min_dist(Y, per_pts)
        margins["y_avoids_per"], verdicts["y_avoids_per"] = m, m > DISJOINT_TOL
        return GenericityReport(X1, X, zl, pairs, Y, per_n, verdicts, margins, n_chain, True, notes)

    # s >= 2: Y is a hypersurface; only pointwise membership tests of X are available
    zl = zero_locus(pair)
    if X:
        pre = [base_preimage_lifts(pair, p.lift, 2) for p in X]
        m = min(float(in_y_minus2_residual(pair, z).min()) for z in pre)
    else:
        m = float("inf")
    margins["x_y_disjoint"], verdicts["x_y_disjoint"] = m, m > DISJOINT_TOL
    notes.append("s >= 2: X vs Y tested by residual of Y_-2 equations on f_inf^-2(X); chain and periodic verdicts not evaluated")
    return GenericityReport(X1, X, zl, None, None, per_n, verdicts, margins, None, False, notes)


def sample_alpha(k: int, rng: np.random.Generator) -> np.ndarray:
    mod = rng.uniform(0.5, 2.0, size=k)
    ang = rng.uniform(0.0, 2 * np.pi, size=k)
    return mod * np.exp(1j * ang)


@dataclass
class SearchResult:
    pair: FiberedPair
    report: GenericityReport
    alpha: np.ndarray
    trials: int
    shift: tuple | None = None


def search_generic_pair(
    k: int,
    d: int,
    rng: np.random.Generator,
    budget: int = 100,
    n_max: int = 6,
    shift_trials: int = 2,
    accept=None,
) -> SearchResult:
    """Random alpha (moduli in [1/2, 2], uniform angles) until the conditions pass.

    When only Y-related verdicts fail, a few random pure-power shifts of R are tried
    (they leave X and the periodic points unchanged). ``accept(pair)`` is an optional
    extra filter, e.g. requiring that trapping tubes can be calibrated.
    """
    from .errors import SearchFailedError

    best = None
    for trial in range(1, budget + 1):
        alpha = sample_alpha(k, rng)
        base = make_cascade_pair(k, d, alpha)
        candidates = [(base, None)]
        for _ in range(shift_trials):
            c = 0.25 * (rng.standard_normal(k) + 1j * rng.standard_normal(k))
            candidates.append((base.with_power_shift(c), tuple(complex(x) for x in c)))
        for pair, shift in candidates:
            try:
                rep = check_conditions(pair, n_max)
            except (InfiniteSetError, BudgetExceededError) as exc:
                log.info("trial %d skipped: %s", trial, exc)
                continue
            score = min((v for v in rep.margins.values() if np.isfinite(v)), default=0.0)
            if best is None or score > best[0]:
                best = (score, [complex(a) for a in alpha], rep.to_dict()["margins"])
            if rep.passed and (accept is None or accept(pair)):
                return SearchResult(pair, rep, alpha, trial, shift)
            if rep.verdicts.get("x_avoids_per") is False or rep.verdicts.get("x_minus1_not_preperiodic") is False:
                break  # shifts cannot repair X
    raise SearchFailedError(f"no generic pair within {budget} trials", best)
