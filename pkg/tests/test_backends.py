import os
import subprocess
import sys

import numpy as np
import pytest

from unifield import _backend, _purecore
from unifield.kernel import compute_minorization, k2_kernel, example2_kernel
from unifield.sampler import coupling_tables

compiled = pytest.mark.skipif(_backend.NAME != "compiled", reason="compiled core not built")


def _tables(k):
    return coupling_tables(compute_minorization(k), k)


@compiled
@pytest.mark.parametrize("kernel", [k2_kernel(), example2_kernel(0.3)])
def test_forward_field_identical(kernel, rng):
    from unifield import _core
    d, phi, res = _tables(kernel)
    reps = np.arange(5, 205)
    bottom = rng.integers(0, kernel.n_states, size=(200, 7)).astype(np.int32)
    left = rng.integers(0, kernel.n_states, size=(200, 6)).astype(np.int32)
    a = _core.forward_field(3, reps, 7, 6, bottom, left, d, phi, res, 1)
    b = _purecore.forward_field(3, reps, 7, 6, bottom, left, d, phi, res, 1)
    assert np.array_equal(a, b)


@compiled
@pytest.mark.parametrize("evaluate", [True, False])
def test_perfect_site_identical(evaluate):
    from unifield import _core
    d, phi, res = _tables(k2_kernel())
    reps = np.arange(300)
    a = _core.perfect_site(9, reps, 4, 3, d, phi, res, 10**6, evaluate)
    b = _purecore.perfect_site(9, reps, 4, 3, d, phi, res, 10**6, evaluate)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@compiled
def test_perfect_site_step_limit_identical():
    from unifield import _core
    d, phi, res = _tables(k2_kernel())
    a = _core.perfect_site(1, np.arange(40), 6, 6, 0.25, phi, res, 30, False)
    b = _purecore.perfect_site(1, np.arange(40), 6, 6, 0.25, phi, res, 30, False)
    assert (a[1] < 0).any()
    for x, y in zip(a[1:], b[1:]):
        assert np.array_equal(x, y)


def test_env_selects_fallback():
    env = dict(os.environ, UNIFIELD_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import unifield._backend as b; print(b.NAME)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_get_by_name():
    assert _backend.get("python") is _purecore
    with pytest.raises(ValueError):
        _backend.get("fortran")
