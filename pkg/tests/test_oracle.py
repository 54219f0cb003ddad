import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import within_3sigma
from unifield.errors import ParseError, WindowMismatch
from unifield.kernel import k2_kernel, parent_independent_kernel
from unifield.lattice import Box
from unifield.oracle import (
    EmpiricalJoint,
    compare_report,
    counts_from_grids,
    empirical_joint,
    forward_equilibrium_estimate,
    forward_grids,
    parse_boundary,
    tv_distance,
)
from unifield.sampler import FieldSample

W1 = Box(1, 1)


def grid(rows):
    """FieldSample from rows listed bottom (j = 1) first."""
    v = np.array(rows, dtype=np.int32).T
    return FieldSample(Box(v.shape[0], v.shape[1]), v, {})


def test_empirical_joint_basic():
    s = grid([[0, 1], [1, 1]])
    assert empirical_joint([s]).counts == {(0, 1, 1, 1): 1}
    assert empirical_joint([s, s]).counts == {(0, 1, 1, 1): 2}


def test_empirical_joint_fixture():
    gs = [grid([[0, 1], [1, 0]]), grid([[1, 1], [0, 0]]), grid([[0, 1], [1, 0]]), grid([[0, 0], [0, 0]])]
    j = empirical_joint(gs)
    assert j.total == 4
    assert j.counts == {(0, 1, 1, 0): 2, (1, 1, 0, 0): 1, (0, 0, 0, 0): 1}


def test_window_mismatch():
    with pytest.raises(WindowMismatch):
        empirical_joint([grid([[0, 1]]), grid([[0], [1]])])
    a = EmpiricalJoint(W1, {(0,): 1})
    b = EmpiricalJoint(Box(1, 2), {(0, 0): 1})
    with pytest.raises(WindowMismatch):
        tv_distance(a, b)
    with pytest.raises(WindowMismatch):
        compare_report(a, b)


def test_tv_examples():
    a = EmpiricalJoint(W1, {(0,): 5, (1,): 5})
    assert tv_distance(a, a) == 0
    assert tv_distance(EmpiricalJoint(W1, {(0,): 3}), EmpiricalJoint(W1, {(1,): 7})) == 1
    assert tv_distance(a, EmpiricalJoint(W1, {(0,): 3, (1,): 1})) == pytest.approx(0.25)


tables = st.dictionaries(st.integers(0, 5), st.integers(1, 50), min_size=1)


@settings(max_examples=200)
@given(tables, tables, tables)
def test_tv_is_metric(a, b, c):
    A, B, C = (EmpiricalJoint(W1, {(k,): v for k, v in t.items()}) for t in (a, b, c))
    assert tv_distance(A, B) == pytest.approx(tv_distance(B, A))
    assert 0 <= tv_distance(A, B) <= 1 + 1e-12
    assert tv_distance(A, C) <= tv_distance(A, B) + tv_distance(B, C) + 1e-12


def test_compare_identical():
    a = EmpiricalJoint(W1, {(0,): 40, (1,): 60})
    r = compare_report(a, a)
    assert r.tv == 0 and r.passed and all(z == 0 for z in r.z_scores.values()) and r.chi2 == 0


def test_compare_hand_values():
    a = EmpiricalJoint(W1, {(0,): 30, (1,): 70})
    b = EmpiricalJoint(W1, {(0,): 50, (1,): 50})
    r = compare_report(a, b, tol=0.1)
    assert r.chi2 == pytest.approx(25 / 3)
    assert r.dof == 1
    assert r.z_scores[(0,)] == pytest.approx(-0.2 / math.sqrt(0.24 * 0.02))
    assert r.tv == pytest.approx(0.2) and not r.passed
    a = EmpiricalJoint(W1, {(0,): 10, (1,): 20, (2,): 30})
    b = EmpiricalJoint(W1, {(0,): 20, (1,): 20, (2,): 20})
    r = compare_report(a, b)
    assert r.chi2 == pytest.approx(16 / 3) and r.dof == 2
    assert r.p_value == pytest.approx(math.exp(-8 / 3))  # chi-square with 2 dof


def test_json_roundtrip(tmp_path):
    j = EmpiricalJoint(Box(2, 1), {(0, 1): 3, (1, 1): 4}, meta={"x": 1})
    data = j.to_json()
    assert data["window"] == [2, 1] and data["total"] == 7
    assert data["counts"] == {"0-1": 3, "1-1": 4}
    f = tmp_path / "j.json"
    j.dump(str(f))
    back = EmpiricalJoint.load(str(f))
    assert back.counts == j.counts and back.total == 7
    f.write_text(json.dumps({"window": [1, 1]}))
    with pytest.raises(ParseError):
        EmpiricalJoint.load(str(f))
    with pytest.raises(ValueError):
        EmpiricalJoint(W1, {(0,): 2}, total=3)


def test_counts_from_grids(rng):
    g = rng.integers(0, 3, size=(500, 2, 3)).astype(np.int32)
    ref = {}
    for r in range(500):
        o = tuple(int(x) for x in g[r].T.ravel())
        ref[o] = ref.get(o, 0) + 1
    assert counts_from_grids(g, 3) == ref


def test_boundary_modes():
    assert parse_boundary("const:1", 2) == ("const", 1)
    assert parse_boundary("iid", 2) == ("iid", None)
    for bad in ("const:5", "const:x", "random"):
        with pytest.raises(ParseError):
            parse_boundary(bad, 2)
    from unifield._backend import core
    from unifield.oracle import _boundaries
    b = _boundaries("iid", None, 1, np.arange(2000), 6, 3, "bottom", core)
    assert b.shape == (2000, 6) and set(np.unique(b)) == {0, 1, 2}
    assert within_3sigma(int((b == 2).sum()), b.size, 1 / 3)
    assert np.array_equal(b, _boundaries("iid", None, 1, np.arange(2000), 6, 3, "bottom", core))
    k = k2_kernel()
    a = forward_grids(k, Box(2, 2), 1, 200, 1, "iid")
    assert np.array_equal(a, forward_grids(k, Box(2, 2), 1, 200, 1, "iid"))
    assert not np.array_equal(a, forward_grids(k, Box(2, 2), 1, 200, 1, "const:0"))


def test_parent_independent_product_law():
    k = parent_independent_kernel([0.3, 0.7])
    n = 50_000
    est = forward_equilibrium_estimate(k, Box(2, 1), 2, n, 4)
    for o in [(0, 0), (0, 1), (1, 0), (1, 1)]:
        p = np.prod([0.3 if x == 0 else 0.7 for x in o])
        assert within_3sigma(est.counts.get(o, 0), n, p)


def test_offset_self_consistency():
    k = k2_kernel()
    a = forward_equilibrium_estimate(k, W1, 10, 200_000, 1)
    b = forward_equilibrium_estimate(k, W1, 30, 200_000, 2)
    assert tv_distance(a, b) <= 0.01


def test_boundary_independence_at_offset():
    k = k2_kernel()
    a = forward_equilibrium_estimate(k, W1, 30, 200_000, 1, "const:0")
    b = forward_equilibrium_estimate(k, W1, 30, 200_000, 1, "const:1")
    assert tv_distance(a, b) <= 0.01


def test_chunked_equals_single():
    k = k2_kernel()
    a = forward_grids(k, Box(2, 2), 4, np.arange(0, 5000), 3)
    b = np.concatenate([forward_grids(k, Box(2, 2), 4, np.arange(0, 2500), 3),
                        forward_grids(k, Box(2, 2), 4, np.arange(2500, 5000), 3)])
    assert np.array_equal(a, b)
