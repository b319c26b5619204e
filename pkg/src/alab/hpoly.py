"""Sparse homogeneous polynomials and the projective maps built from them."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import factorial

import numpy as np

from .errors import ChartDegenerateError, DimensionMismatchError, IndeterminacyError
from .projsp import CHART_TOL, ProjectivePoint, normalize_lifts, sample_uniform_lifts

NONDEGENERACY_THRESHOLD = 1e-8
NONDEGENERACY_SAMPLES = 10_000
IMAGE_TOL = 1e-13


def _compositions(total: int, parts: int):
    """All exponent vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class HomogeneousPolynomial:
    nvars: int
    degree: int
    terms: tuple  # ((exponents, coefficient), ...) sorted, merged, nonzero

    def __init__(self, nvars: int, degree: int, terms):
        merged: dict[tuple, complex] = {}
        for exps, coeff in terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise DimensionMismatchError(f"exponent {exps} has wrong length for {nvars} variables")
            if any(e < 0 for e in exps) or sum(exps) != degree:
                raise ValueError(f"exponent {exps} is not homogeneous of degree {degree}")
            merged[exps] = merged.get(exps, 0j) + complex(coeff)
        clean = tuple(sorted((e, c) for e, c in merged.items() if c != 0))
        object.__setattr__(self, "nvars", int(nvars))
        object.__setattr__(self, "degree", int(degree))
        object.__setattr__(self, "terms", clean)
        exps = np.array([e for e, _ in clean], dtype=np.int64).reshape(len(clean), nvars)
        coeffs = np.array([c for _, c in clean], dtype=complex)
        object.__setattr__(self, "_exps", exps)
        object.__setattr__(self, "_coeffs", coeffs)

    # construction helpers -------------------------------------------------

    @classmethod
    def monomial(cls, nvars: int, exps, coeff=1.0) -> HomogeneousPolynomial:
        return cls(nvars, sum(exps), [(exps, coeff)])

    @classmethod
    def pure_power(cls, nvars: int, index: int, degree: int, coeff=1.0) -> HomogeneousPolynomial:
        exps = [0] * nvars
        exps[index] = degree
        return cls(nvars, degree, [(exps, coeff)])

    @classmethod
    def linear_power(cls, coeffs, degree: int) -> HomogeneousPolynomial:
        """Multinomial expansion of ``(sum_i coeffs[i] z_i)^degree``."""
        coeffs = [complex(c) for c in coeffs]
        n = len(coeffs)
        terms = []
        for exps in _compositions(degree, n):
            m = factorial(degree)
            val = 1 + 0j
            for c, e in zip(coeffs, exps):
                m //= factorial(e)
                val *= c**e
            terms.append((exps, m * val))
        return cls(n, degree, terms)

    def __add__(self, other: HomogeneousPolynomial) -> HomogeneousPolynomial:
        if (self.nvars, self.degree) != (other.nvars, other.degree):
            raise DimensionMismatchError("cannot add polynomials of different shape")
        return HomogeneousPolynomial(self.nvars, self.degree, self.terms + other.terms)

    def scale(self, factor) -> HomogeneousPolynomial:
        return HomogeneousPolynomial(self.nvars, self.degree, [(e, factor * c) for e, c in self.terms])

    # evaluation -----------------------------------------------------------

    def __call__(self, lifts) -> np.ndarray:
        return eval_poly(self, lifts)

    def derivative(self, i: int) -> HomogeneousPolynomial:
        """Formal partial derivative with respect to ``z_i``."""
        terms = []
        for exps, c in self.terms:
            if exps[i] == 0:
                continue
            e = list(exps)
            e[i] -= 1
            terms.append((e, c * exps[i]))
        return HomogeneousPolynomial(self.nvars, self.degree - 1, terms)

    def is_pure_power_sum(self) -> bool:
        return all(max(e) == self.degree for e, _ in self.terms)

    def to_records(self) -> list[dict]:
        return [{"exponents": list(e), "re": c.real, "im": c.imag} for e, c in self.terms]

    @classmethod
    def from_records(cls, nvars: int, degree: int, records) -> HomogeneousPolynomial:
        return cls(nvars, degree, [(r["exponents"], complex(r["re"], r.get("im", 0.0))) for r in records])


def eval_poly(P: HomogeneousPolynomial, lifts) -> np.ndarray:
    """Evaluate on a single lift (returns a complex scalar) or on stacked lifts."""
    z = np.asarray(lifts, dtype=complex)
    if z.shape[-1] != P.nvars:
        raise DimensionMismatchError(f"lift length {z.shape[-1]} != {P.nvars}")
    if not P.terms:
        return np.zeros(z.shape[:-1], dtype=complex) if z.ndim > 1 else 0j
    # per-variable power columns by repeated multiplication; complex ** int arrays is far slower
    cols = [z[..., v] for v in range(P.nvars)]
    pw = [[np.ones(z.shape[:-1], dtype=complex), c] for c in cols]
    for v, c in enumerate(cols):
        for _ in range(2, int(P._exps[:, v].max(initial=0)) + 1):
            pw[v].append(pw[v][-1] * c)
    out = np.zeros(z.shape[:-1], dtype=complex)
    for e, a in zip(P._exps, P._coeffs):
        m = a
        for v, ev in enumerate(e):
            if ev:
                m = m * pw[v][ev]
        out = out + m
    return complex(out) if z.ndim == 1 else out


@dataclass(frozen=True)
class ProjectiveMap:
    components: tuple

    def __init__(self, components):
        comps = tuple(components)
        if not comps:
            raise ValueError("a projective map needs components")
        nv = {c.nvars for c in comps}
        dg = {c.degree for c in comps}
        if len(nv) != 1 or len(dg) != 1:
            raise DimensionMismatchError("components must share nvars and degree")
        if len(comps) != comps[0].nvars:
            raise DimensionMismatchError(
                f"{len(comps)} components for {comps[0].nvars} variables: not an endomorphism"
            )
        object.__setattr__(self, "components", comps)
        partials = tuple(tuple(c.derivative(j) for j in range(c.nvars)) for c in comps)
        object.__setattr__(self, "_partials", partials)

    @property
    def nvars(self) -> int:
        return self.components[0].nvars

    @property
    def degree(self) -> int:
        return self.components[0].degree

    @property
    def dim(self) -> int:
        return self.nvars - 1

    def lift(self, lifts) -> np.ndarray:
        """Apply the homogeneous components to stacked lifts."""
        z = np.asarray(lifts, dtype=complex)
        return np.stack([eval_poly(c, z) for c in self.components], axis=-1)

    def jacobian_lifts(self, lifts) -> np.ndarray:
        """Full (k+1)x(k+1) derivative matrices of the homogeneous lift."""
        z = np.asarray(lifts, dtype=complex)
        rows = [np.stack([eval_poly(p, z) for p in row], axis=-1) for row in self._partials]
        return np.stack(rows, axis=-2)

    def is_pure_power_map(self) -> bool:
        return all(c.is_pure_power_sum() for c in self.components)

    def power_matrix(self) -> np.ndarray:
        """Matrix M with F(z) = M (z_0^d, ..., z_s^d); only for pure-power maps."""
        if not self.is_pure_power_map():
            raise ValueError("map is not a sum of pure powers")
        n, d = self.nvars, self.degree
        M = np.zeros((n, n), dtype=complex)
        for i, comp in enumerate(self.components):
            for exps, c in comp.terms:
                M[i, exps.index(d)] += c
        return M


def eval_map_lifts(F: ProjectiveMap, lifts) -> np.ndarray:
    """Normalized images of stacked lifts; raises on indeterminacy."""
    z = normalize_lifts(np.atleast_2d(lifts))
    w = F.lift(z)
    if np.any(np.max(np.abs(w), axis=-1) < IMAGE_TOL):
        raise IndeterminacyError("F vanishes on a lift: not a holomorphic endomorphism there")
    return normalize_lifts(w)


def eval_map(F: ProjectiveMap, p: ProjectivePoint) -> ProjectivePoint:
    if p.lift.size != F.nvars:
        raise DimensionMismatchError(f"P^{p.dim} point for a map on P^{F.dim}")
    return ProjectivePoint(eval_map_lifts(F, p.lift[None, :])[0])


def iterate_lifts(F: ProjectiveMap, lifts, n: int) -> np.ndarray:
    z = normalize_lifts(np.atleast_2d(lifts))
    for _ in range(n):
        z = eval_map_lifts(F, z)
    return z


def jacobian_chart_lifts(F: ProjectiveMap, lifts, src, dst) -> np.ndarray:
    """Chart derivatives of the induced map, stacked ``(N, k, k)``.

    ``src``/``dst`` are integer arrays (or scalars) of chart indices per row.
    The chart representation is ``g(u) = F_rest(z(u)) / F_dst(z(u))`` with
    ``z(u)`` the lift having ``z_src = 1``.
    """
    z = np.atleast_2d(np.asarray(lifts, dtype=complex))
    N, n = z.shape
    src = np.broadcast_to(np.asarray(src), (N,))
    dst = np.broadcast_to(np.asarray(dst), (N,))
    zs = np.take_along_axis(z, src[:, None], axis=1)[:, 0]
    if np.any(np.abs(zs) < CHART_TOL * np.max(np.abs(z), axis=1)):
        raise ChartDegenerateError("source chart coordinate vanishes")
    z = z / zs[:, None]
    w = F.lift(z)
    D = F.jacobian_lifts(z)  # D[:, i, j] = dF_i/dz_j
    wd = np.take_along_axis(w, dst[:, None], axis=1)[:, 0]
    if np.any(np.abs(wd) < CHART_TOL * np.max(np.abs(w), axis=1)):
        raise ChartDegenerateError("target chart coordinate vanishes")
    Dd = np.take_along_axis(D, dst[:, None, None], axis=1)[:, 0, :]
    # quotient rule on all n rows, then drop row dst and column src
    G = (D * wd[:, None, None] - w[:, :, None] * Dd[:, None, :]) / (wd**2)[:, None, None]
    keep_rows = np.ones((N, n), dtype=bool)
    keep_rows[np.arange(N), dst] = False
    keep_cols = np.ones((N, n), dtype=bool)
    keep_cols[np.arange(N), src] = False
    out = G[keep_rows].reshape(N, n - 1, n)
    out = out.transpose(0, 2, 1)[keep_cols].reshape(N, n - 1, n - 1).transpose(0, 2, 1)
    return out


def jacobian_chart(F: ProjectiveMap, p: ProjectivePoint, src_chart: int, dst_chart: int) -> np.ndarray:
    return jacobian_chart_lifts(F, p.lift[None, :], src_chart, dst_chart)[0]


def fs_jacobian_lifts(F: ProjectiveMap, lifts) -> np.ndarray:
    """Volume distortion of the induced map with respect to omega^k.

    For homogeneous F of degree d on C^{k+1} this is
    ``|det DF(z)|^2 ||z||^{2(k+1)} / (d^2 ||F(z)||^{2(k+1)})``;
    it integrates to d^k over P^k.
    """
    z = np.atleast_2d(np.asarray(lifts, dtype=complex))
    z = z / np.linalg.norm(z, axis=1, keepdims=True)
    w = F.lift(z)
    det = np.linalg.det(F.jacobian_lifts(z))
    n = z.shape[1]
    return np.abs(det) ** 2 / (F.degree**2 * np.linalg.norm(w, axis=1) ** (2 * n))


def is_nondegenerate(
    F: ProjectiveMap,
    rng: np.random.Generator | None = None,
    n_samples: int = NONDEGENERACY_SAMPLES,
    threshold: float = NONDEGENERACY_THRESHOLD,
) -> bool:
    """Heuristic: min over sphere samples of max_i |F_i(z)| stays above ``threshold``."""
    rng = np.random.default_rng(0) if rng is None else rng
    z = sample_uniform_lifts(rng, F.dim, n_samples)
    return float(np.min(np.max(np.abs(F.lift(z)), axis=1))) > threshold


def pure_power_map(M, d: int) -> ProjectiveMap:
    """The map z -> M (z_0^d, ..., z_s^d)."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    comps = []
    for i in range(n):
        terms = []
        for j in range(n):
            if M[i, j] != 0:
                e = [0] * n
                e[j] = d
                terms.append((e, M[i, j]))
        comps.append(HomogeneousPolynomial(n, d, terms))
    return ProjectiveMap(comps)


def all_exponent_vectors(n: int, degree: int):
    return list(_compositions(degree, n))


def group_exponents(d: int, s: int) -> np.ndarray:
    """All elements of (Z/d)^s as exponent rows."""
    return np.array(list(product(range(d), repeat=s)), dtype=np.int64).reshape(d**s, s)
