import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alab.errors import BudgetExceededError, UnsupportedError
from alab.fibfam import P1_GENERAL, FiberedPair, TrapRegion, apply_lifts, assemble, make_cascade_pair
from alab.hpoly import HomogeneousPolynomial as HP, ProjectiveMap, eval_map
from alab.preimg import (
    base_preimages,
    build_tree,
    bottleneck_matching,
    exhaustive_bottleneck,
    full_preimages,
    leaves_batch,
    matched_preimages,
    preimages_batch,
)
from alab.projsp import fs_distance, fs_distance_lifts, normalize_lifts, point, sample_uniform_lifts

from strategies import lifts, nonzero_scale, seeds

PAIR11 = make_cascade_pair(2, 2, [1, 1])


def as_dict(res):
    return sorted((tuple(np.round(normalize_lifts(p.point.lift[None])[0], 8)), p.multiplicity) for p in res)


def same_weighted_sets(a, b, tol=1e-8):
    if sorted(p.multiplicity for p in a) != sorted(p.multiplicity for p in b):
        return False
    for p in a:
        if not any(fs_distance(p.point, q.point) < tol and q.multiplicity == p.multiplicity for q in b):
            return False
    return True


def test_base_preimage_examples():
    res = base_preimages(PAIR11, point(1, 2))
    assert same_weighted_sets(res, [type(res[0])(point(1, 1), 1), type(res[0])(point(1, -1), 1)])
    res = base_preimages(PAIR11, point(0, 1))
    assert len(res) == 1 and res[0].multiplicity == 2 and fs_distance(res[0].point, point(1, 0)) < 1e-12


@given(lifts(1))
def test_base_multiplicity_and_residual(w):
    res = base_preimages(PAIR11, point(w))
    assert sum(p.multiplicity for p in res) == 2
    for p in res:
        assert fs_distance(eval_map(PAIR11.f_inf, p.point), point(w)) < 1e-8


@given(lifts(2))
@settings(max_examples=20)
def test_base_multiplicity_s2(w):
    pair = make_cascade_pair(3, 2, [1, 0.5, 2j])
    res = base_preimages(pair, point(w))
    assert sum(p.multiplicity for p in res) == 4


def test_solver_cross_check_100_targets():
    rng = np.random.default_rng(0)
    for w in sample_uniform_lifts(rng, 1, 100):
        a = base_preimages(PAIR11, point(w), solver="monomial-cascade")
        b = base_preimages(PAIR11, point(w), solver=P1_GENERAL)
        assert same_weighted_sets(a, b)


def test_unsupported_combination():
    with pytest.raises(ValueError):
        FiberedPair(3, 2, make_cascade_pair(3, 2, [1, 1, 1]).f_inf, make_cascade_pair(3, 2, [1, 1, 1]).R, P1_GENERAL)


def test_p1_general_non_monomial_base():
    F = ProjectiveMap([HP(2, 2, [((2, 0), 1), ((1, 1), 0.5)]), HP(2, 2, [((0, 2), 1), ((1, 1), -0.3j)])])
    pair = FiberedPair(2, 2, F, HP.linear_power([1, 1], 2), P1_GENERAL)
    rng = np.random.default_rng(1)
    for w in sample_uniform_lifts(rng, 1, 30):
        res = base_preimages(pair, point(w))
        assert sum(p.multiplicity for p in res) == 2
        for p in res:
            assert fs_distance(eval_map(F, p.point), point(w)) < 1e-8


def test_eps_zero_generic_target():
    e = assemble(PAIR11, 0)
    res = full_preimages(e, point(0.3, 1, 0.7j))
    assert len(res) == 4 and all(p.multiplicity == 1 for p in res)


def test_eps_zero_hyperplane_target():
    e = assemble(PAIR11, 0)
    res = full_preimages(e, point(0.3, 1, 0))
    assert len(res) == 2 and all(p.multiplicity == 2 for p in res)
    assert all(abs(p.point.lift[2]) == 0 for p in res)


def test_center_is_totally_invariant(endo):
    res = full_preimages(endo, point(0, 0, 1))
    assert len(res) == 1 and res[0].multiplicity == 4


@given(seeds)
@settings(max_examples=20)
def test_full_preimages_bezout_and_forward(seed):
    e = assemble(make_cascade_pair(2, 2, [1.4 + 0.4j, 0.9]), 0.01)
    x = sample_uniform_lifts(np.random.default_rng(seed), 2, 1)[0]
    res = full_preimages(e, point(x))
    assert sum(p.multiplicity for p in res) == 4
    for p in res:
        assert fs_distance(eval_map(e.map, p.point), point(x)) < 1e-8


@given(lifts(2), nonzero_scale)
@settings(max_examples=25)
def test_lift_choice_independence(x, t):
    e = assemble(make_cascade_pair(2, 3, [1.1, 0.8j]), 0.02)
    a = full_preimages(e, point(x))
    b = full_preimages(e, point(t * x))
    assert same_weighted_sets(a, b)


def test_tree_levels_conserve_multiplicity(endo, tubes):
    x = point(sample_uniform_lifts(np.random.default_rng(2), 2, 1)[0])
    tree = build_tree(endo, x, 4, region=tubes[0])
    for ell, lv in enumerate(tree.levels):
        assert lv.total == 4**ell
        if ell:
            parent = tree.levels[ell - 1].lifts[lv.parent]
            assert np.max(fs_distance_lifts(normalize_lifts(apply_lifts(endo, lv.lifts)), parent)) < 1e-8
    assert tree.levels[0].total == 1


def test_tree_eps_zero_hyperplane_counts():
    e = assemble(PAIR11, 0)
    U = TrapRegion(1.0, 0.01)
    tree = build_tree(e, point(0.4, 1, 0), 3, region=U)
    for n in range(4):
        assert tree.count_in_region(n)[0] == 4**n


def test_tree_composition(endo):
    x = point(sample_uniform_lifts(np.random.default_rng(5), 2, 1)[0])
    deep = build_tree(endo, x, 3).levels[3]
    mid = build_tree(endo, x, 1).levels[1]
    lifts_, mult, _ = leaves_batch(endo, mid.lifts, 2)
    parent_mult = np.repeat(mid.mult, 16)
    # same multiset of points: every deep leaf found among composed leaves
    D = fs_distance_lifts(deep.lifts[:, None], lifts_[None])
    assert np.all(D.min(axis=1) < 1e-8)
    assert deep.total == int((mult * mid.mult[_]).sum()) == 64


def test_budget_enforced(endo):
    with pytest.raises(BudgetExceededError):
        build_tree(endo, point(1, 1, 0), 13)


def test_tree_csv(tmp_path, endo, tubes):
    tree = build_tree(endo, point(1, 0.5, 0.001), 2, region=tubes[0])
    tree.export_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 1 + sum(len(lv) for lv in tree.levels)


def test_matching_identity(endo):
    x = point(0.2, 1, 0.3)
    m = matched_preimages(endo, x, x)
    assert m.max_distance == pytest.approx(0, abs=1e-12)


@given(st.lists(st.floats(0, 1), min_size=16, max_size=16))
def test_bottleneck_equals_exhaustive_on_4(vals):
    D = np.array(vals).reshape(4, 4)
    p = bottleneck_matching(D)
    assert sorted(p) == [0, 1, 2, 3]
    assert max(D[i, p[i]] for i in range(4)) == pytest.approx(exhaustive_bottleneck(D))


def test_matched_distance_holder_exponent(endo):
    rng = np.random.default_rng(8)
    dists = np.array([1e-2, 1e-4, 1e-6])
    from alab.projsp import orthogonal_perturbation

    xs = sample_uniform_lifts(rng, 2, 100)
    worst = []
    for d in dists:
        ys = orthogonal_perturbation(xs, d, rng)
        vals = []
        for x, y in zip(xs, ys):
            m = matched_preimages(endo, point(x), point(y))
            D = fs_distance_lifts(np.array([a.lift for a, _ in m.pairs])[:, None], np.array([b.lift for _, b in m.pairs])[None])
            assert m.max_distance == pytest.approx(exhaustive_bottleneck(D), abs=1e-15)
            vals.append(m.max_distance)
        worst.append(max(vals))
    slope = np.polyfit(np.log(dists), np.log(worst), 1)[0]
    assert slope >= 1 / 4 - 0.1
