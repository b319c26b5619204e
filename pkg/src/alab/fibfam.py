"""Fibered pairs (f_inf, R), the perturbed endomorphisms f_eps and their trapping tubes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, DimensionMismatchError
from .hpoly import HomogeneousPolynomial, ProjectiveMap, is_nondegenerate
from .projsp import ProjectivePoint, normalize_lifts, sample_uniform_lifts

P1_GENERAL = "p1-general"
MONOMIAL_CASCADE = "monomial-cascade"
BASE_KINDS = (P1_GENERAL, MONOMIAL_CASCADE)

TRAP_MARGIN = 0.9
OUTER_RATIO = 2.0


def default_candidates() -> list[float]:
    # 2^8 down to 2^-20 in half-octave steps
    return [2.0 ** (e / 2) for e in range(16, -41, -1)]


@dataclass(frozen=True)
class FiberedPair:
    """The data (f_inf, R): f_inf acts on P^s, R is a degree-d form in k = s+1 variables.

    ``linear_form`` records beta when R = (sum beta_i z_i)^d + sum c_i z_i^d, with the
    pure-power shift stored in ``power_shift``. Both are optional metadata used by the
    exceptional-set algebra.
    """

    k: int
    d: int
    f_inf: ProjectiveMap
    R: HomogeneousPolynomial
    base_kind: str
    linear_form: tuple | None = None
    power_shift: tuple | None = None

    def __post_init__(self):
        if self.k < 2 or self.d < 2:
            raise ValueError("need k >= 2 and d >= 2")
        if self.f_inf.nvars != self.k or self.R.nvars != self.k:
            raise DimensionMismatchError("f_inf and R must live in k = s+1 variables")
        if self.f_inf.degree != self.d or self.R.degree != self.d:
            raise ValueError("f_inf and R must have degree d")
        if self.base_kind not in BASE_KINDS:
            raise ValueError(f"unknown base_kind {self.base_kind!r}")
        if self.base_kind == MONOMIAL_CASCADE and not self.f_inf.is_pure_power_map():
            raise ValueError("monomial-cascade base maps may only contain pure powers z_i^d")
        if self.base_kind == P1_GENERAL and self.s != 1:
            raise ValueError("p1-general solver needs s = 1")

    @property
    def s(self) -> int:
        return self.k - 1

    def check_nondegenerate(self, rng=None) -> bool:
        return is_nondegenerate(self.f_inf, rng)

    def with_R(self, R: HomogeneousPolynomial, linear_form=None, power_shift=None) -> FiberedPair:
        return FiberedPair(self.k, self.d, self.f_inf, R, self.base_kind, linear_form, power_shift)

    def with_power_shift(self, c) -> FiberedPair:
        """Add sum c_i z_i^d to R (leaves X unchanged)."""
        c = tuple(complex(x) for x in c)
        R = self.R
        for i, ci in enumerate(c):
            if ci != 0:
                R = R + HomogeneousPolynomial.pure_power(self.k, i, self.d, ci)
        old = self.power_shift or (0j,) * self.k
        shift = tuple(a + b for a, b in zip(old, c))
        return FiberedPair(self.k, self.d, self.f_inf, R, self.base_kind, self.linear_form, shift)


def cascade_base_map(s: int, d: int) -> ProjectiveMap:
    """[z_1^d : z_2^d : ... : z_s^d : z_s^d + z_0^d] on P^s."""
    n = s + 1
    comps = [HomogeneousPolynomial.pure_power(n, i + 1, d) for i in range(s)]
    comps.append(HomogeneousPolynomial.pure_power(n, s, d) + HomogeneousPolynomial.pure_power(n, 0, d))
    return ProjectiveMap(comps)


def make_cascade_pair(k: int, d: int, alpha) -> FiberedPair:
    alpha = [complex(a) for a in alpha]
    if len(alpha) != k:
        raise DimensionMismatchError(f"need {k} alpha values, got {len(alpha)}")
    if any(a == 0 for a in alpha):
        raise ValueError("alpha entries must be nonzero")
    beta = tuple(1 / a for a in alpha)
    R = HomogeneousPolynomial.linear_power(beta, d)
    return FiberedPair(k, d, cascade_base_map(k - 1, d), R, MONOMIAL_CASCADE, linear_form=beta)


@dataclass(frozen=True)
class PerturbedEndo:
    pair: FiberedPair
    epsilon: complex
    map: ProjectiveMap = field(repr=False)

    @property
    def k(self) -> int:
        return self.pair.k

    @property
    def d(self) -> int:
        return self.pair.d

    @property
    def s(self) -> int:
        return self.pair.s


def _lift_to(P: HomogeneousPolynomial, nvars: int) -> HomogeneousPolynomial:
    return HomogeneousPolynomial(nvars, P.degree, [(tuple(e) + (0,) * (nvars - P.nvars), c) for e, c in P.terms])


def assemble(pair: FiberedPair, epsilon) -> PerturbedEndo:
    eps = complex(epsilon)
    n = pair.k + 1
    comps = [_lift_to(c, n) for c in pair.f_inf.components]
    last = HomogeneousPolynomial.pure_power(n, pair.k, pair.d)
    if eps != 0:
        last = last + _lift_to(pair.R, n).scale(eps)
    comps.append(last)
    return PerturbedEndo(pair, eps, ProjectiveMap(comps))


def apply_lifts(endo: PerturbedEndo, lifts) -> np.ndarray:
    """Unnormalized image lifts (f_inf(z'), z_k^d + eps R(z'))."""
    z = np.asarray(lifts, dtype=complex)
    zb = z[..., :-1]
    base = endo.pair.f_inf.lift(zb)
    fiber = z[..., -1] ** endo.d + endo.epsilon * endo.pair.R(zb)
    return np.concatenate([base, fiber[..., None]], axis=-1)


def forward_lifts(endo: PerturbedEndo, lifts) -> np.ndarray:
    return normalize_lifts(apply_lifts(endo, normalize_lifts(np.atleast_2d(lifts))))


@dataclass(frozen=True)
class TrapRegion:
    """The tube {|z_k| <= c |eps| max_{i<k} |z_i|}; ``c=inf`` means all of P^k."""

    c: float
    epsilon_mod: float

    @property
    def radius(self) -> float:
        return self.c * self.epsilon_mod

    def ratio(self, lifts) -> np.ndarray:
        z = np.atleast_2d(np.asarray(lifts, dtype=complex))
        base = np.max(np.abs(z[:, :-1]), axis=1)
        fib = np.abs(z[:, -1])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(base > 0, fib / np.where(base > 0, base, 1.0), np.where(fib > 0, np.inf, 0.0))
        return r

    def contains_lifts(self, lifts) -> np.ndarray:
        if np.isinf(self.c):
            return np.ones(np.atleast_2d(lifts).shape[0], dtype=bool)
        return self.ratio(lifts) <= self.radius

    def scaled(self, factor: float) -> TrapRegion:
        return TrapRegion(self.c * factor, self.epsilon_mod)


WHOLE_SPACE = TrapRegion(float("inf"), 1.0)


def trap_contains(region: TrapRegion, p: ProjectivePoint) -> bool:
    return bool(region.contains_lifts(p.lift[None, :])[0])


def sample_boundary_lifts(region: TrapRegion, k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Points with |z_k| = radius * max|z'| exactly."""
    zb = sample_uniform_lifts(rng, k - 1, n)
    zb = zb / np.max(np.abs(zb), axis=1, keepdims=True)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    fib = region.radius * np.exp(1j * theta)
    return np.concatenate([zb, fib[:, None]], axis=1)


def sample_in_region_lifts(region: TrapRegion, k: int, n: int, rng: np.random.Generator):
    """omega^k-uniform samples conditioned on the tube, with their conditional weights.

    For a Gaussian lift (g', g_k) the tube condition only constrains |g_k|^2 ~ Exp(1),
    so g_k is drawn from the truncated law and ``weight = P(tube | g')``. The mean of
    ``weight * h(x)`` is an unbiased estimate of the integral of h over the tube.
    """
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    g /= np.sqrt(2.0)
    u = rng.uniform(size=n)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    if np.isinf(region.c):
        r2 = rng.exponential(size=n)
        weight = np.ones(n)
    else:
        m2 = (region.radius * np.max(np.abs(g), axis=1)) ** 2
        weight = -np.expm1(-m2)
        r2 = -np.log1p(-u * weight)
    fib = np.sqrt(r2) * np.exp(1j * theta)
    lifts = np.concatenate([g, fib[:, None]], axis=1)
    return lifts / np.linalg.norm(lifts, axis=1, keepdims=True), weight


def trap_margin(endo: PerturbedEndo, outer: TrapRegion, inner: TrapRegion, n: int, rng) -> float:
    """Worst ratio (image tube ratio)/(inner radius) over boundary samples of ``outer``."""
    z = sample_boundary_lifts(outer, endo.k, n, rng)
    w = apply_lifts(endo, z)
    return float(np.max(inner.ratio(w)) / inner.radius)


def calibrate_c(endo: PerturbedEndo, candidates=None, n_boundary: int = 10_000, rng=None):
    """Largest candidate c whose tubes U (c) and U' (2c) each trap with margin 0.9.

    On ``n_boundary`` boundary samples: f(dU) inside U and f(dU') inside U' with ratio
    <= 0.9, and f(dU') strictly inside U for the chain f(U) c f(U') cc U cc U'.
    Per fiber the image ratio is subharmonic in z_k, so boundary samples suffice.
    Returns ``(c, 2c)``.
    """
    if endo.epsilon == 0:
        raise CalibrationError("trapping tubes need eps != 0")
    candidates = default_candidates() if candidates is None else list(candidates)
    rng = np.random.default_rng(0) if rng is None else rng
    seed = int(rng.integers(2**63))
    emod = abs(endo.epsilon)
    passing = []
    for c in candidates:
        inner = TrapRegion(c, emod)
        outer = inner.scaled(OUTER_RATIO)
        sub = np.random.default_rng(seed)
        zi = sample_boundary_lifts(inner, endo.k, n_boundary, sub)
        zo = sample_boundary_lifts(outer, endo.k, n_boundary, sub)
        wi, wo = apply_lifts(endo, zi), apply_lifts(endo, zo)
        m_inner = np.max(inner.ratio(wi)) / inner.radius
        m_outer = np.max(outer.ratio(wo)) / outer.radius
        m_nest = np.max(inner.ratio(wo)) / inner.radius
        if m_inner <= TRAP_MARGIN and m_outer <= TRAP_MARGIN and m_nest < 1.0:
            passing.append(c)
    if not passing:
        raise CalibrationError(
            f"no candidate c traps f_eps at |eps|={emod:g}; shrink |eps|"
        )
    c = max(passing)
    return c, OUTER_RATIO * c
