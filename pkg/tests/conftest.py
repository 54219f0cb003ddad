import math

import numpy as np
import pytest

from unifield.kernel import FiniteKernel, k2_kernel


def within_3sigma(count, n, p):
    """Binomial ``count`` out of ``n`` is within three standard deviations of ``n p``."""
    sd = math.sqrt(n * p * (1 - p))
    return abs(count - n * p) <= 3 * sd + 1e-12


def random_kernel(rng, n):
    t = rng.random((n, n, n)) ** 2
    t /= t.sum(axis=-1, keepdims=True)
    return FiniteKernel(t)


class FixedZ:
    """Plan stand-in with a hand-made Z field (1 on ``ones``)."""

    def __init__(self, ones):
        self.ones = set(map(tuple, ones))

    def z(self, s):
        return 1 if tuple(s) in self.ones else 0


@pytest.fixture
def k2():
    return k2_kernel()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


class Criterion:
    """Collects named checks for one acceptance criterion and reports a single line."""

    def __init__(self, store, number, title):
        self.store, self.number, self.title = store, number, title
        self.checks = []

    def check(self, label, ok, detail=""):
        self.checks.append((label, bool(ok), detail))
        return ok

    def __enter__(self):
        import time
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        import time
        dt = time.perf_counter() - self.t0
        if exc is not None:
            self.checks.append(("error", False, f"{exc_type.__name__}: {exc}"))
        ok = all(c[1] for c in self.checks)
        failed = [f"{l} ({d})" for l, o, d in self.checks if not o]
        info = "; ".join(f"{l}: {d}" for l, o, d in self.checks if d) if ok else "; ".join(failed)
        line = f"criterion {self.number} [{'PASS' if ok else 'FAIL'}] {self.title} ({dt:.1f}s) {info}"
        self.store.append((self.number, line))
        print(line)
        if exc is None:
            assert ok, line
        return False


@pytest.fixture
def criterion(request):
    store = request.config.stash.setdefault(_ACCEPTANCE, [])

    def make(number, title):
        return Criterion(store, number, title)

    return make


_ACCEPTANCE = pytest.StashKey()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
