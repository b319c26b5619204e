"""Homogeneous coordinates, the chordal metric and uniform sampling on P^k.

Points are stored as lifts in C^{k+1}. Most heavy work in the package runs on
stacked lifts of shape ``(N, k+1)``; the ``*_lifts`` helpers below are the
vectorized counterparts of the single-point operations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChartDegenerateError, DimensionMismatchError, InvalidPointError

# chordal distance below which two points are considered the same point
PROJ_TOL = 1e-9
# chart coordinate modulus (after normalization) below which a chart is refused
CHART_TOL = 1e-12


def _as_lift(values) -> np.ndarray:
    arr = np.array(values, dtype=complex).reshape(-1)
    if arr.size < 2:
        raise InvalidPointError("a point of P^k needs at least two coordinates")
    if not np.all(np.isfinite(arr)):
        raise InvalidPointError(f"non-finite lift {arr}")
    if not np.any(arr != 0):
        raise InvalidPointError("zero lift does not define a projective point")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    lift: np.ndarray = field(repr=False)

    def __init__(self, lift):
        object.__setattr__(self, "lift", _as_lift(lift))

    @property
    def dim(self) -> int:
        return self.lift.size - 1

    def __repr__(self) -> str:
        coords = ":".join(f"{c:.6g}" for c in normalize(self).lift)
        return f"[{coords}]"

    def __iter__(self):
        return iter(self.lift)


@dataclass(frozen=True)
class ChartCoords:
    chart_index: int
    affine: tuple

    def __post_init__(self):
        object.__setattr__(self, "affine", tuple(complex(a) for a in self.affine))


def point(*coords) -> ProjectivePoint:
    """Shorthand: ``point(1, 2, 3)`` is ``[1:2:3]``."""
    if len(coords) == 1 and np.ndim(coords[0]) == 1:
        coords = coords[0]
    return ProjectivePoint(coords)


def pivot_index(lifts: np.ndarray) -> np.ndarray:
    """Index of the first coordinate of maximal modulus, row-wise."""
    return np.argmax(np.abs(lifts), axis=-1)


def normalize_lifts(lifts: np.ndarray) -> np.ndarray:
    """Divide each row by its pivot coordinate, so the pivot becomes exactly 1."""
    lifts = np.asarray(lifts, dtype=complex)
    idx = pivot_index(lifts)
    piv = np.take_along_axis(lifts, idx[..., None], axis=-1)
    if np.any(piv == 0):
        raise InvalidPointError("zero lift in batch")
    out = lifts / piv
    np.put_along_axis(out, idx[..., None], 1.0 + 0j, axis=-1)
    return out


def normalize(p: ProjectivePoint) -> ProjectivePoint:
    return ProjectivePoint(normalize_lifts(p.lift[None, :])[0])


def wedge_norm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``||a ^ b||`` for stacked vectors, computed from 2x2 minors (no cancellation)."""
    n = a.shape[-1]
    i, j = np.triu_indices(n, k=1)
    minors = a[..., i] * b[..., j] - a[..., j] * b[..., i]
    return np.sqrt(np.sum(np.abs(minors) ** 2, axis=-1))


def fs_distance_lifts(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Chordal distance ``||a ^ b|| / (||a|| ||b||)``, broadcasting over leading axes."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    # rescale first so the minors neither overflow nor underflow
    a = a / np.max(np.abs(a), axis=-1, keepdims=True)
    b = b / np.max(np.abs(b), axis=-1, keepdims=True)
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    return np.minimum(wedge_norm(a, b) / (na * nb), 1.0)


def fs_distance(p: ProjectivePoint, q: ProjectivePoint) -> float:
    if p.dim != q.dim:
        raise DimensionMismatchError(f"P^{p.dim} vs P^{q.dim}")
    return float(fs_distance_lifts(p.lift, q.lift))


def proj_equal(p: ProjectivePoint, q: ProjectivePoint, tol: float = PROJ_TOL) -> bool:
    return fs_distance(p, q) <= tol


def sample_uniform_lifts(rng: np.random.Generator, k: int, n: int) -> np.ndarray:
    """``n`` unit lifts distributed by the Fubini-Study volume of P^k."""
    g = rng.standard_normal((n, k + 1)) + 1j * rng.standard_normal((n, k + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_uniform(rng: np.random.Generator, k: int) -> ProjectivePoint:
    return ProjectivePoint(sample_uniform_lifts(rng, k, 1)[0])


def chart_embed(p: ProjectivePoint, chart_index: int) -> ChartCoords:
    lift = normalize(p).lift
    if not 0 <= chart_index < lift.size:
        raise ChartDegenerateError(f"chart {chart_index} does not exist on P^{p.dim}")
    c = lift[chart_index]
    if abs(c) < CHART_TOL:
        raise ChartDegenerateError(
            f"coordinate {chart_index} vanishes at {p!r}; switch chart"
        )
    affine = np.delete(lift / c, chart_index)
    return ChartCoords(chart_index, tuple(affine))


def chart_extract(c: ChartCoords) -> ProjectivePoint:
    affine = np.asarray(c.affine, dtype=complex)
    return ProjectivePoint(np.insert(affine, c.chart_index, 1.0))


def orthogonal_perturbation(lifts: np.ndarray, dist: float, rng: np.random.Generator) -> np.ndarray:
    """Random points at chordal distance exactly ``dist`` from each row of ``lifts``."""
    x = lifts / np.linalg.norm(lifts, axis=1, keepdims=True)
    v = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    v -= np.sum(np.conj(x) * v, axis=1, keepdims=True) * x
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.sqrt(1.0 - dist**2) * x + dist * v


def lift_record(p) -> list:
    """JSON-friendly normalized coordinates ``[[re, im], ...]``."""
    lift = p.lift if isinstance(p, ProjectivePoint) else np.asarray(p, dtype=complex)
    return [[float(c.real), float(c.imag)] for c in normalize_lifts(lift[None, :])[0]]
