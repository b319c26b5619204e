import numpy as np
import pytest
from hypothesis import given, strategies as st

from alab.roots import aberth, binary_form_roots, companion_roots, horner

from strategies import cplx


def test_horner_value_and_derivative():
    p, dp = horner([1, 0, 3], np.array([2.0]))
    assert p[0] == 13 and dp[0] == 12


@given(st.lists(cplx, min_size=1, max_size=8))
def test_companion_roots_reproduce_polynomial(rs):
    coeffs = np.polynomial.polynomial.polyfromroots(rs)
    got = companion_roots(coeffs[None])[0]
    # each true root has a computed root nearby (sensitivity grows with clustering)
    assert got.size == len(rs)
    p, _ = horner(coeffs, got)
    scale = np.polynomial.polynomial.polyval(np.abs(got), np.abs(coeffs))
    assert np.all(np.abs(p) <= 1e-8 * np.maximum(scale, 1))


def test_cubic_oracle_against_numpy():
    ref = np.sort_complex(np.roots([1, -1, 0, -1]))
    got = np.sort_complex(companion_roots(np.array([[-1, 0, -1, 1]]))[0])
    assert np.allclose(got, ref, atol=1e-12)


def test_binary_form_roots_at_infinity():
    # z0 z1^2 : roots [1:0] (from z1^2, double) and [0:1]
    out = binary_form_roots(np.array([0, 0, 1, 0]))
    mults = {}
    for lift, m in out:
        key = "inf" if abs(lift[0]) < 1e-12 else ("zero" if abs(lift[1]) < 1e-12 else "other")
        mults[key] = mults.get(key, 0) + m
    assert mults == {"zero": 2, "inf": 1}


def test_aberth_on_known_polynomial():
    coeffs = np.array([-1, 0, -1, 1], dtype=complex)  # u^3 - u^2 - 1

    def ratio(u):
        p, dp = horner(coeffs, u)
        return p / dp

    r, ok = aberth(ratio, 3)
    assert ok
    assert np.allclose(np.sort_complex(r), np.sort_complex(np.roots([1, -1, 0, -1])), atol=1e-12)
