import numpy as np
import pytest
from hypothesis import given, strategies as st

from alab.errors import DimensionMismatchError, IndeterminacyError
from alab.hpoly import (
    HomogeneousPolynomial as HP,
    ProjectiveMap,
    eval_map,
    eval_poly,
    fs_jacobian_lifts,
    is_nondegenerate,
    jacobian_chart,
    jacobian_chart_lifts,
    pure_power_map,
)
from alab.projsp import fs_distance, point, sample_uniform_lifts

from strategies import lifts, nonzero_scale

BASE = ProjectiveMap([HP.pure_power(2, 1, 2), HP.pure_power(2, 1, 2) + HP.pure_power(2, 0, 2)])
SQUARES3 = pure_power_map(np.eye(3), 2)


def random_map(rng, n, d, terms=4):
    comps = []
    for _ in range(n):
        t = []
        for _ in range(terms):
            e = rng.multinomial(d, np.ones(n) / n)
            t.append((e, complex(*rng.standard_normal(2))))
        t += [(tuple(d if j == i else 0 for j in range(n)), 1.0) for i in range(n)]
        comps.append(HP(n, d, t))
    return ProjectiveMap(comps)


def test_terms_merged_and_zero_dropped():
    P = HP(2, 2, [((1, 1), 2), ((1, 1), -2), ((2, 0), 1), ((2, 0), 1)])
    assert P.terms == (((2, 0), 2 + 0j),)


def test_inhomogeneous_rejected():
    with pytest.raises(ValueError):
        HP(2, 2, [((1, 0), 1)])
    with pytest.raises(DimensionMismatchError):
        HP(2, 2, [((1, 1, 0), 1)])


def test_eval_examples():
    R = HP.linear_power([1, 1], 2)
    assert eval_poly(R, [1, 2]) == pytest.approx(9)
    assert eval_poly(R, [0, 0]) == 0
    P = HP.pure_power(4, 1, 3)
    assert eval_poly(P, [0, 2j, 0, 0]) == pytest.approx((2j) ** 3)
    with pytest.raises(DimensionMismatchError):
        eval_poly(R, [1, 2, 3])


def test_linear_power_expansion():
    R = HP.linear_power([1, 0.5], 2)
    assert dict(R.terms) == pytest.approx({(2, 0): 1, (1, 1): 1, (0, 2): 0.25})


@given(lifts(2), st.integers(1, 5))
def test_euler_identity(z, d):
    rng = np.random.default_rng(d)
    P = random_map(rng, 3, d).components[0]
    lhs = sum(z[i] * eval_poly(P.derivative(i), z) for i in range(3))
    rhs = d * eval_poly(P, z)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, sum(abs(c) for _, c in P.terms) * np.max(np.abs(z)) ** d)


def test_eval_map_examples():
    F = pure_power_map(np.eye(2), 2)
    assert fs_distance(eval_map(F, point(1, 2)), point(1, 4)) < 1e-15
    assert fs_distance(eval_map(BASE, point(1, 1)), point(1, 2)) < 1e-15


@given(lifts(1), nonzero_scale)
def test_eval_map_projectively_well_defined(z, t):
    assert fs_distance(eval_map(BASE, point(t * z)), eval_map(BASE, point(z))) < 1e-12


@given(lifts(2), nonzero_scale)
def test_homogeneity(z, t):
    F = random_map(np.random.default_rng(0), 3, 3)
    assert np.allclose(F.lift(t * z), t**3 * F.lift(z), rtol=1e-9, atol=1e-9 * abs(t) ** 3 * np.max(np.abs(z)) ** 3 * 10)


def test_indeterminacy_raises():
    F = ProjectiveMap([HP.monomial(2, (1, 1)), HP.pure_power(2, 0, 2)])
    with pytest.raises(IndeterminacyError):
        eval_map(F, point(0, 1))
    # the sampling heuristic only sees maps that are small on a set of positive measure
    tiny = ProjectiveMap([c.scale(1e-9) for c in F.components])
    assert not is_nondegenerate(tiny)
    assert is_nondegenerate(BASE)


def test_chart_jacobian_examples():
    # u = z1/z0 on both sides: g(u) = (u^2 + 1) / u^2, g'(1) = -2
    J = jacobian_chart(BASE, point(1, 1), 0, 0)
    assert J.shape == (1, 1) and J[0, 0] == pytest.approx(-2)
    assert np.allclose(jacobian_chart(SQUARES3, point(1, 1, 1), 0, 0), np.diag([2, 2]))


def _chart_map(F, src, dst):
    n = F.nvars

    def g(u):
        z = np.insert(u, src, 1.0)
        w = F.lift(z)
        return np.delete(w / w[dst], dst)

    return g


def _fd_jacobian(F, z, src, dst, h=1e-5):
    z = z / z[src]
    u = np.delete(z, src)
    g = _chart_map(F, src, dst)
    m = u.size
    J = np.zeros((m, m), dtype=complex)
    for j in range(m):
        e = np.zeros(m, dtype=complex)
        e[j] = h
        J[:, j] = (g(u + e) - g(u - e)) / (2 * h)
    return J


@pytest.mark.parametrize("seed", range(3))
def test_chart_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    F = random_map(rng, 3, 2 + seed)
    Z = sample_uniform_lifts(rng, 2, 100)
    for z in Z:
        src = int(np.argmax(np.abs(z)))
        w = F.lift(z)
        dst = int(np.argmax(np.abs(w)))
        J = jacobian_chart_lifts(F, z[None], src, dst)[0]
        fd = _fd_jacobian(F, z, src, dst)
        assert np.linalg.norm(J - fd) <= 1e-6 * max(1.0, np.linalg.norm(fd))


def test_fs_jacobian_integrates_to_topological_degree():
    rng = np.random.default_rng(4)
    F = random_map(rng, 3, 2)
    vals = fs_jacobian_lifts(F, sample_uniform_lifts(rng, 2, 200_000))
    assert abs(vals.mean() - 4) < 4 * vals.std() / np.sqrt(vals.size)
    # identity-like squaring: Jacobian is 4 on average and exactly computable at [1:0:0]
    assert fs_jacobian_lifts(SQUARES3, np.array([[1, 0, 0]]))[0] == pytest.approx(0.0)


def test_power_matrix_round_trip():
    M = np.array([[0, 1], [1, 1]])
    assert np.array_equal(BASE.power_matrix(), M)
    assert pure_power_map(M, 2).components == BASE.components
