"""Univariate and binary-form root finding (companion matrices, Aberth iteration)."""
from __future__ import annotations

import numpy as np

# relative size under which a leading coefficient is treated as zero
LEAD_TOL = 1e-14


def horner(coeffs: np.ndarray, u: np.ndarray):
    """Value and derivative of sum_j coeffs[..., j] u^j, coefficients ascending."""
    coeffs = np.asarray(coeffs, dtype=complex)
    u = np.asarray(u, dtype=complex)
    deg = coeffs.shape[-1] - 1
    p = np.broadcast_to(coeffs[..., deg, None], u.shape).astype(complex)
    dp = np.zeros_like(p)
    for j in range(deg - 1, -1, -1):
        dp = dp * u + p
        p = p * u + coeffs[..., j, None]
    return p, dp


def companion_roots(coeffs) -> np.ndarray:
    """Roots of polynomials with ascending ``coeffs`` of shape (N, deg+1); leading term nonzero.

    Eigenvalues of the (LAPACK-balanced) companion matrix, then one Newton step.
    """
    a = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    N, n1 = a.shape
    deg = n1 - 1
    if deg == 0:
        return np.zeros((N, 0), dtype=complex)
    monic = a[:, :-1] / a[:, -1:]
    C = np.zeros((N, deg, deg), dtype=complex)
    if deg > 1:
        idx = np.arange(deg - 1)
        C[:, idx + 1, idx] = 1.0
    C[:, :, -1] = -monic
    r = np.linalg.eigvals(C)
    return newton_polish(a, r)


def newton_polish(coeffs, r, steps: int = 1) -> np.ndarray:
    """Newton steps on each root; a step is rejected when it does not reduce |p|."""
    r = np.array(r, dtype=complex)
    for _ in range(steps):
        p, dp = horner(coeffs, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = r - p / dp
        pc, _ = horner(coeffs, cand)
        ok = np.isfinite(cand) & (np.abs(pc) < np.abs(p))
        r = np.where(ok, cand, r)
    return r


def binary_form_roots(coeffs) -> list[tuple[np.ndarray, int]]:
    """Zeros on P^1 of sum_j c_j z0^(deg-j) z1^j, as (lift, multiplicity) pairs.

    Solves in the chart whose leading coefficient is larger; vanishing end
    coefficients give exact roots at [1:0] or [0:1]. Roots are not clustered here.
    """
    c = np.asarray(coeffs, dtype=complex)
    deg = c.size - 1
    scale = np.max(np.abs(c))
    if scale == 0:
        raise ValueError("zero binary form")
    tiny = LEAD_TOL * scale
    out: list[tuple[np.ndarray, int]] = []
    lo = 0
    while lo <= deg and abs(c[lo]) <= tiny:
        lo += 1
    hi = deg
    while hi >= 0 and abs(c[hi]) <= tiny:
        hi -= 1
    # z1^lo divides the form: root [1:0] of multiplicity lo; z0^(deg-hi) gives [0:1]
    if lo:
        out.append((np.array([1.0, 0.0], dtype=complex), lo))
    if deg - hi:
        out.append((np.array([0.0, 1.0], dtype=complex), deg - hi))
    core = c[lo : hi + 1]
    if core.size > 1:
        if abs(core[-1]) >= abs(core[0]):
            u = companion_roots(core[None, :])[0]
            for ui in u:
                if abs(ui) <= 1:
                    out.append((np.array([1.0, ui], dtype=complex), 1))
                else:
                    out.append((np.array([1.0 / ui, 1.0], dtype=complex), 1))
        else:
            v = companion_roots(core[None, ::-1])[0]
            for vi in v:
                if abs(vi) <= 1:
                    out.append((np.array([vi, 1.0], dtype=complex), 1))
                else:
                    out.append((np.array([1.0, 1.0 / vi], dtype=complex), 1))
    return out


def aberth(fn_ratio, degree: int, max_iter: int = 500, tol: float = 1e-14, radius: float = 1.0) -> tuple[np.ndarray, bool]:
    """Aberth-Ehrlich simultaneous iteration for a polynomial known only through p/p'.

    ``fn_ratio(u)`` returns the Newton correction p(u)/p'(u) elementwise.
    Returns (roots, converged).
    """
    k = np.arange(degree)
    u = radius * np.exp(2j * np.pi * (k + 0.25) / degree) * (1 + 0.01 * k / max(degree, 1))
    converged = False
    for _ in range(max_iter):
        ratio = fn_ratio(u)
        diff = u[:, None] - u[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        s = inv.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = ratio / (1.0 - ratio * s)
        w = np.where(np.isfinite(w), w, 0.0)
        u = u - w
        if np.all(np.abs(w) <= tol * np.maximum(1.0, np.abs(u))):
            converged = True
            break
    return u, converged
