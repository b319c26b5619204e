import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alab.degree import (
    DkRow,
    dkloc_hat,
    dkloc_sequence,
    dkloc_values,
    estimate_dkloc,
    pullback_mass_check,
    region_counts,
    verify_std,
)
from alab.fibfam import WHOLE_SPACE, TrapRegion, assemble, make_cascade_pair
from alab.projsp import sample_uniform_lifts

from conftest import GENERIC_ALPHA
from strategies import seeds


def test_pullback_mass_is_bezout(endo):
    chk = pullback_mass_check(endo, 2, 10_000, np.random.default_rng(1))
    assert chk.expected == 16
    assert chk.ok, (chk.estimate, chk.stderr)


def test_mass_at_depth_zero_is_one(endo, rng):
    assert estimate_dkloc(endo, WHOLE_SPACE, 0, 10, rng) == (1.0, 0.0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fibered_estimator_exact_total_mass(endo, n):
    est, se = estimate_dkloc(endo, WHOLE_SPACE, n, 4000, np.random.default_rng(n))
    assert abs(est - 4**n) <= 4 * se + 1e-9 * 4**n


def test_count_estimator_exact_on_whole_space(endo, rng):
    vals = dkloc_values(endo, WHOLE_SPACE, 2, 50, rng, method="count")
    assert np.all(vals == 16)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fibered_and_jacobian_agree_inside_tube(endo, tubes, n):
    V = tubes[1]
    a, sa = estimate_dkloc(endo, V, n, 4000, np.random.default_rng(10 + n), "fibered")
    b, sb = estimate_dkloc(endo, V, n, 4000, np.random.default_rng(20 + n), "jacobian")
    assert abs(a - b) <= 4 * np.hypot(sa, sb)


def test_stderr_shrinks_like_inverse_sqrt(endo, tubes):
    V = tubes[1]
    _, s1 = estimate_dkloc(endo, V, 2, 1000, np.random.default_rng(3), "jacobian")
    _, s2 = estimate_dkloc(endo, V, 2, 16000, np.random.default_rng(4), "jacobian")
    assert 2.0 < s1 / s2 < 8.0


def test_unknown_method(endo, tubes, rng):
    with pytest.raises(ValueError):
        dkloc_values(endo, tubes[0], 1, 10, rng, method="bogus")


def test_local_volume_decays_below_top_degree(endo, tubes):
    rows = dkloc_sequence(endo, tubes[1], 5, 2000, np.random.default_rng(5))
    assert all(r.estimate > 0 for r in rows)
    assert dkloc_hat(rows) < 2
    assert dkloc_hat(rows, how="slope") < 2
    assert all(b.estimate < a.estimate for a, b in zip(rows, rows[1:]))


def test_dkloc_hat_on_exact_geometric_rows():
    rows = [DkRow(n, 3.0 * 0.5**n, 0.0) for n in range(1, 8)]
    assert dkloc_hat(rows, how="slope") == pytest.approx(0.5)
    assert dkloc_hat(rows) == pytest.approx(max((3.0 * 0.5**n) ** (1 / n) for n in range(2, 8)))
    with pytest.raises(ValueError):
        dkloc_hat(rows, how="median")


@settings(max_examples=10)
@given(seeds)
def test_counts_monotone_in_region_and_bounded(seed):
    e = assemble(make_cascade_pair(2, 2, GENERIC_ALPHA), 0.01)
    X = sample_uniform_lifts(np.random.default_rng(seed), 2, 8)
    small, _ = region_counts(e, TrapRegion(4.0, 0.01), X, 3)
    big, _ = region_counts(e, TrapRegion(8.0, 0.01), X, 3)
    assert np.all(small <= big)
    for n in range(4):
        assert np.all(big[n] <= 4**n)


def test_set_count_not_above_multiplicity_count(endo, tubes, rng):
    X = sample_uniform_lifts(rng, 2, 20)
    cm, cs = region_counts(endo, tubes[0], X, 3)
    assert np.all(cs <= cm)


def test_verify_std_generic_pair(endo, tubes):
    rep = verify_std(endo, tubes[0], 5, 200, np.random.default_rng(2))
    assert rep.verdict
    assert rep.diagram_bound_ok
    for row in rep.per_depth[1:]:
        assert row.max_count <= 2 ** (row.n - 1) < 2**row.n


def test_verify_std_degenerate_control():
    e0 = assemble(make_cascade_pair(2, 2, GENERIC_ALPHA), 0.0)
    plane = TrapRegion(1.0, 0.0)
    rng = np.random.default_rng(0)
    X = np.concatenate([sample_uniform_lifts(rng, 1, 20), np.zeros((20, 1))], axis=1)
    rep = verify_std(e0, plane, 4, 20, rng, targets=X)
    assert [r.max_count for r in rep.per_depth] == [4**n for n in range(5)]
    assert rep.verdict is False


def test_count_csv_columns(endo, tubes, tmp_path):
    rep = verify_std(endo, tubes[0], 2, 10, np.random.default_rng(0))
    path = tmp_path / "c.csv"
    rep.export_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "sample_id", "count_mult", "count_set", "in_U_flag"]
    assert len(rows) == 1 + 3 * 10


def test_depth_sample_schedule():
    from alab.degree import depth_samples

    assert depth_samples(2000, 4, 1 << 20) == 2000
    assert depth_samples(2000, 1 << 16, 1 << 20) == 64
    assert depth_samples(2000, 1 << 12, 1 << 20) == 256
    assert depth_samples(2000, 1 << 12, None) == 2000


def test_degenerate_fiber_volume_decays_superexponentially():
    # at eps = 0 a preimage stays in the thin tube only if the target's fiber coordinate is doubly-exponentially small
    e0 = assemble(make_cascade_pair(2, 2, GENERIC_ALPHA), 0.0)
    rows = dkloc_sequence(e0, TrapRegion(2.0, 0.01), 6, 1000, np.random.default_rng(0))
    roots = [r.nth_root for r in rows[1:]]
    assert all(b < a for a, b in zip(roots, roots[1:]))
    logs = np.log([r.estimate for r in rows])
    assert np.all(np.diff(np.diff(logs)) < 0)
    assert roots[-1] < 1e-20
