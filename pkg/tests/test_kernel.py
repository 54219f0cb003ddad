import json
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_kernel
from unifield.errors import DegenerateDelta, NegativeEntry, NonStochasticRow, ParseError, ShapeMismatch
from unifield.kernel import (
    FiniteKernel,
    cdf_table,
    check_kernel,
    compute_minorization,
    example1_kernel,
    example2_kernel,
    inverse_cdf_sample,
    load_kernel,
    parent_independent_kernel,
    residual_kernel,
    validate_kernel,
)


def test_validate_ok():
    t = np.zeros((2, 2, 2))
    t[..., 0] = 1.0
    validate_kernel(t)
    FiniteKernel(t)


def test_non_stochastic_row_names_the_pair(k2):
    t = k2.table.copy()
    t[1, 0] = [0.5, 0.4]
    with pytest.raises(NonStochasticRow) as e:
        FiniteKernel(t)
    assert e.value.diagnostics[0][:2] == (1, 0)


def test_negative_and_shape():
    t = np.full((2, 2, 2), 0.5)
    t[0, 0] = [1.2, -0.2]
    with pytest.raises(NegativeEntry):
        validate_kernel(t)
    with pytest.raises(ShapeMismatch):
        validate_kernel(np.full((2, 3, 2), 0.5))
    assert check_kernel(np.full((2, 2, 2), 0.5)) == []


def test_k2_minorization(k2):
    m = compute_minorization(k2)
    np.testing.assert_allclose(m.tau, [0.2, 0.3], atol=1e-12)
    assert abs(m.delta - 0.5) < 1e-12
    np.testing.assert_allclose(m.phi, [0.4, 0.6], atol=1e-12)
    H = residual_kernel(k2, m)
    np.testing.assert_allclose(H[0, 0], [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(H[0, 1], [0.8, 0.2], atol=1e-12)
    np.testing.assert_allclose(H[1, 0], [0.8, 0.2], atol=1e-12)
    np.testing.assert_allclose(H[1, 1], [0.0, 1.0], atol=1e-12)
    assert m.assumption1_holds and m.certifies()


def test_example_kernels_fail_assumption1():
    assert compute_minorization(example1_kernel(0.45, 0.45, 0.1)).delta == 0.0
    for p in np.arange(1, 10) / 10:
        m = compute_minorization(example2_kernel(p))
        assert m.delta == 0.0 and not m.assumption1_holds
        with pytest.raises(DegenerateDelta):
            residual_kernel(example2_kernel(p), m)


def test_parent_independent():
    k = parent_independent_kernel([0.3, 0.7])
    m = compute_minorization(k)
    assert m.delta == pytest.approx(1.0) and m.parent_independent
    np.testing.assert_allclose(m.phi, [0.3, 0.7])


def test_inverse_cdf_examples():
    assert inverse_cdf_sample([1, 0], 0.999) == 0
    assert inverse_cdf_sample([0.8, 0.2], 0.95) == 1
    assert inverse_cdf_sample([0.4, 0.6], 0.4) == 1
    # trailing zero-probability states are never returned
    assert inverse_cdf_sample([0.5, 0.5, 0.0], 1 - 1e-16) == 1
    assert cdf_table([0.5, 0.5, 0.0])[-1] > 1


def test_example2_preset():
    k = example2_kernel(1.0)
    assert k.table[2, 2, 2] == 1.0
    for y in range(3):
        assert k.table[0, y, 1] == 1.0
    assert k.table[1, 1, 2] == 1.0 and k.table[1, 2, 2] == 1.0
    for p in (0.1, 0.5, 0.9):
        t = example2_kernel(p).table
        assert t[2, 2, 0] == t[1, 1, 1] == t[0, 0, 2] == 0.0


def test_example1_preset():
    t = example1_kernel(0.45, 0.45, 0.1).table
    for y1 in range(3):
        for y2 in range(3):
            if y1 < 2 and y2 < 2:
                np.testing.assert_allclose(t[y1, y2], [0.45, 0.45, 0.1])
            elif (y1, y2) == (2, 2):
                np.testing.assert_allclose(t[y1, y2], [0, 1, 0])
            else:
                np.testing.assert_allclose(t[y1, y2], [1, 0, 0])


def test_load_kernel_file(tmp_path, k2):
    f = tmp_path / "k.json"
    f.write_text(json.dumps(k2.to_json()))
    k = load_kernel(str(f))
    np.testing.assert_array_equal(k.table, k2.table)
    f.write_text(json.dumps({"states": 3, "table": k2.table.tolist()}))
    with pytest.raises(ShapeMismatch):
        load_kernel(str(f))
    with pytest.raises(ParseError):
        load_kernel("nosuchpreset")
    with pytest.raises(ParseError):
        load_kernel("example2:2.0")


def test_mixture_identity_random_kernels(rng):
    for _ in range(500):
        n = int(rng.integers(2, 6))
        k = random_kernel(rng, n)
        m = compute_minorization(k)
        assert 0 < m.delta < 1
        mix = m.delta * m.phi + (1 - m.delta) * m.residual
        np.testing.assert_allclose(mix, k.table, atol=1e-9)
        assert (m.residual >= 0).all()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_minorization_symmetric_in_parent_pairs(seed):
    rng = np.random.default_rng(seed)
    k = random_kernel(rng, 3)
    m = compute_minorization(k)
    rows = k.table.reshape(9, 3)
    perm = rng.permutation(9)
    m2 = compute_minorization(FiniteKernel(rows[perm].reshape(3, 3, 3)))
    np.testing.assert_allclose(m.tau, m2.tau, atol=1e-15)
    assert m.delta == pytest.approx(m2.delta, abs=1e-15)
    # swapping the two parents changes nothing either
    m3 = compute_minorization(FiniteKernel(np.swapaxes(k.table, 0, 1)))
    np.testing.assert_allclose(m.tau, m3.tau, atol=1e-15)
