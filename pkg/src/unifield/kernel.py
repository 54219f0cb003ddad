"""Finite-state two-parent transition kernels.

A kernel is a table ``K[y1, y2, z]`` giving the law of a site given the value
``y1`` of its left parent ``(i-1, j)`` and ``y2`` of its lower parent
``(i, j-1)``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateDelta,
    KernelError,
    NegativeEntry,
    NonStochasticRow,
    ParseError,
    ShapeMismatch,
)

STOCHASTIC_TOL = 1e-9
# 1 - p_c for oriented site percolation, using the lower bound p_c >= 0.682.
DEFAULT_DELTA0 = 0.318


def check_kernel(table, tol: float = STOCHASTIC_TOL) -> list[tuple]:
    """Return ``(kind, y1, y2, message)`` for every problem in ``table``."""
    t = np.asarray(table, dtype=float)
    if t.ndim != 3 or t.shape[0] != t.shape[1] or t.shape[1] != t.shape[2]:
        return [("shape", None, None, f"expected an (n, n, n) table, got shape {t.shape}")]
    if t.shape[0] < 2:
        return [("shape", None, None, "need at least 2 states")]
    problems = []
    n = t.shape[0]
    for y1 in range(n):
        for y2 in range(n):
            row = t[y1, y2]
            if not np.all(np.isfinite(row)) or np.any(row < 0) or np.any(row > 1):
                problems.append(("negative", y1, y2, f"entries outside [0, 1]: {row.tolist()}"))
            elif abs(row.sum() - 1.0) > tol:
                problems.append(("stochastic", y1, y2, f"row sums to {row.sum():.12g}"))
    return problems


def validate_kernel(table, tol: float = STOCHASTIC_TOL) -> None:
    """Raise the matching :class:`KernelError` subclass if ``table`` is invalid."""
    problems = check_kernel(table, tol)
    if not problems:
        return
    kinds = {p[0] for p in problems}
    diagnostics = [(y1, y2, msg) for _, y1, y2, msg in problems]
    text = "; ".join(
        msg if y1 is None else f"K(.|{y1},{y2}): {msg}" for y1, y2, msg in diagnostics
    )
    if "shape" in kinds:
        raise ShapeMismatch(text, diagnostics)
    if "negative" in kinds:
        raise NegativeEntry(text, diagnostics)
    raise NonStochasticRow(text, diagnostics)


@dataclass(frozen=True, eq=False)
class FiniteKernel:
    """Validated transition table over the states ``0..n_states-1``."""

    table: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        validate_kernel(t)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def n_states(self) -> int:
        return self.table.shape[0]

    def row(self, y1: int, y2: int) -> np.ndarray:
        return self.table[y1, y2]

    def to_json(self) -> dict:
        return {"states": self.n_states, "table": self.table.tolist()}


@dataclass(frozen=True, eq=False)
class Minorization:
    """Split ``K = delta * phi + (1 - delta) * H`` with the largest possible ``delta``.

    ``phi`` is ``None`` when ``delta == 0`` and ``residual`` is ``None`` unless
    ``0 < delta < 1``.
    """

    tau: np.ndarray
    delta: float
    phi: Optional[np.ndarray]
    residual: Optional[np.ndarray]
    notes: tuple = field(default=())

    @property
    def assumption1_holds(self) -> bool:
        return self.delta > 0

    @property
    def parent_independent(self) -> bool:
        return self.delta >= 1.0

    def certifies(self, delta0: float = DEFAULT_DELTA0) -> bool:
        """True when ``delta`` is large enough for the percolation argument."""
        return self.delta >= delta0


def compute_minorization(k: FiniteKernel) -> Minorization:
    t = k.table
    n = k.n_states
    tau = t.reshape(n * n, n).min(axis=0)
    delta = float(tau.sum())
    if delta <= 0.0:
        return Minorization(tau, 0.0, None, None, ("Assumption 1 fails",))
    phi = tau / delta
    if 1.0 - delta <= STOCHASTIC_TOL:
        return Minorization(tau, 1.0, phi, None, ("parent-independent",))
    # K - tau is exactly nonnegative in floating point; K - delta * phi need not be.
    residual = (t - tau) / (1.0 - delta)
    return Minorization(tau, delta, phi, residual)


def residual_kernel(k: FiniteKernel, m: Minorization) -> np.ndarray:
    if m.residual is None:
        raise DegenerateDelta(f"residual kernel undefined for delta={m.delta}")
    return m.residual


def cdf_table(p) -> np.ndarray:
    """Cumulative sums along the last axis, prepared for :func:`inverse_cdf_sample`.

    The entry of the last positive-probability state (and everything after it)
    is raised to 2.0 so a lookup never falls off the end because of rounding.
    """
    p = np.asarray(p, dtype=float)
    c = np.cumsum(p, axis=-1)
    flat_p = p.reshape(-1, p.shape[-1])
    flat_c = c.reshape(-1, p.shape[-1])
    for row_p, row_c in zip(flat_p, flat_c):
        pos = np.nonzero(row_p > 0)[0]
        last = pos[-1] if len(pos) else p.shape[-1] - 1
        row_c[last:] = 2.0
    return np.ascontiguousarray(flat_c.reshape(p.shape))


def inverse_cdf_sample(p, u: float) -> int:
    """Smallest state whose cumulative probability strictly exceeds ``u``."""
    c = cdf_table(p)
    for z, cz in enumerate(c):
        if cz > u:
            return z
    return len(c) - 1  # unreachable: the sentinel is 2.0


def lookup(cdf_row, u: float) -> int:
    """:func:`inverse_cdf_sample` on a row already prepared by :func:`cdf_table`."""
    z = 0
    while cdf_row[z] <= u:
        z += 1
    return z


# -- presets ---------------------------------------------------------------

def k2_kernel() -> FiniteKernel:
    """Binary reference kernel with ``delta = 0.5``."""
    t = np.zeros((2, 2, 2))
    t[0, 0] = (0.7, 0.3)
    t[0, 1] = t[1, 0] = (0.6, 0.4)
    t[1, 1] = (0.2, 0.8)
    return FiniteKernel(t, name="k2")


def example1_kernel(phi0: float, phi1: float, phi2: float) -> FiniteKernel:
    """Three-state kernel: ``phi`` when both parents are in {0, 1},
    a point mass at 1 when both are 2, a point mass at 0 otherwise."""
    phi = np.array([phi0, phi1, phi2], dtype=float)
    t = np.zeros((3, 3, 3))
    for y1 in range(3):
        for y2 in range(3):
            if y1 < 2 and y2 < 2:
                t[y1, y2] = phi
            elif y1 == 2 and y2 == 2:
                t[y1, y2, 1] = 1.0
            else:
                t[y1, y2, 0] = 1.0
    return FiniteKernel(t, name=f"example1:{phi0:g},{phi1:g},{phi2:g}")


def example2_kernel(p: float) -> FiniteKernel:
    """Three-state kernel moving ``min(y1, y2)`` up with prob. ``p``, down otherwise
    (reflected at 0, and sticking at 2 only from the pair (2, 2))."""
    if not 0.0 <= p <= 1.0:
        raise ParseError(f"example2 needs p in [0, 1], got {p}")
    t = np.zeros((3, 3, 3))
    for y1 in range(3):
        for y2 in range(3):
            lo = min(y1, y2)
            if y1 == 2 and y2 == 2:
                t[y1, y2, 2] += p
                t[y1, y2, 1] += 1 - p
            elif lo == 0:
                t[y1, y2, 1] += p
                t[y1, y2, 0] += 1 - p
            else:
                t[y1, y2, lo + 1] += p
                t[y1, y2, lo - 1] += 1 - p
    return FiniteKernel(t, name=f"example2:{p:g}")


def parent_independent_kernel(phi) -> FiniteKernel:
    phi = np.asarray(phi, dtype=float)
    n = len(phi)
    return FiniteKernel(np.broadcast_to(phi, (n, n, n)).copy(), name="iid")


def _floats(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ParseError(f"bad parameters for preset {name!r}: {text!r}") from exc


def load_kernel(source) -> FiniteKernel:
    """Build a kernel from a preset spec or a JSON file.

    Presets: ``k2``, ``example1:phi0,phi1,phi2``, ``example2:p``,
    ``iid:phi0,phi1,...``.  Files hold ``{"states": n, "table": [[[...]]]}``.
    """
    if isinstance(source, FiniteKernel):
        return source
    source = str(source)
    name, _, params = source.partition(":")
    if name == "k2" and not params:
        return k2_kernel()
    if name == "example1" and params:
        vals = _floats(params, name)
        if len(vals) != 3:
            raise ParseError("example1 needs three weights phi0,phi1,phi2")
        return example1_kernel(*vals)
    if name == "example2" and params:
        vals = _floats(params, name)
        if len(vals) != 1:
            raise ParseError("example2 needs a single probability p")
        return example2_kernel(vals[0])
    if name == "iid" and params:
        return parent_independent_kernel(_floats(params, name))
    if not os.path.exists(source):
        raise ParseError(f"unknown preset and no such file: {source!r}")
    try:
        with open(source) as fh:
            data = json.load(fh)
        table = np.asarray(data["table"], dtype=float)
        states = int(data["states"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"cannot read kernel file {source!r}: {exc}") from exc
    if table.shape != (states, states, states):
        raise ShapeMismatch(
            f"'states' is {states} but table has shape {table.shape}",
            [(None, None, "shape")],
        )
    return FiniteKernel(table, name=os.path.basename(source))


__all__ = [
    "DEFAULT_DELTA0",
    "FiniteKernel",
    "KernelError",
    "Minorization",
    "cdf_table",
    "check_kernel",
    "compute_minorization",
    "example1_kernel",
    "example2_kernel",
    "inverse_cdf_sample",
    "k2_kernel",
    "load_kernel",
    "lookup",
    "parent_independent_kernel",
    "residual_kernel",
    "validate_kernel",
]
