"""Forward simulation and the single-site perfect sampler."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from ._backend import core as _core
from .auxrand import STREAM_U, STREAM_V, SitePlan
from .errors import AssumptionFailed, DegenerateDelta, InternalError, MissingBoundaryValue, StepLimitExceeded
from .kernel import DEFAULT_DELTA0, FiniteKernel, Minorization, cdf_table, compute_minorization, lookup
from .lattice import Box, external_boundary, increasing_order
from .percolation import DEFAULT_STEP_LIMIT, ClusterRegion, build_cluster


@dataclass(eq=False)
class FieldSample:
    """States on a box, indexed ``values[i - 1, j - 1]``."""

    box: Box
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, FieldSample):
            return NotImplemented
        return (self.box == other.box and np.array_equal(self.values, other.values)
                and self.meta == other.meta)

    def at(self, i: int, j: int) -> int:
        return int(self.values[i - 1, j - 1])

    def outcome(self) -> tuple:
        """Row-major state tuple (rows ``j = 1..n``, columns ``i = 1..m``)."""
        return tuple(int(x) for x in self.values.T.ravel())


def coupling_tables(m: Minorization, k: FiniteKernel):
    """``(delta, phi_cdf, res_cdf)`` consumed by the batch kernels.

    With ``delta == 0`` the residual is the kernel itself (every site has Z = 1).
    """
    n = k.n_states
    if m.delta <= 0.0:
        return 0.0, cdf_table(np.full(n, 1.0 / n)), cdf_table(k.table)
    if m.residual is None:
        return 1.0, cdf_table(m.phi), cdf_table(k.table)
    return m.delta, cdf_table(m.phi), cdf_table(m.residual)


def matched_plan(plan: SitePlan, m: Minorization) -> SitePlan:
    """``plan`` with ``delta``/``phi`` taken from the minorization."""
    phi = tuple(m.phi) if m.phi is not None else None
    if plan.delta == m.delta and plan.phi == phi:
        return plan
    return SitePlan(plan.seed, plan.replicate, m.delta, phi, plan.namespace)


def coupling_step(z: int, v: int, u: float, y1: int, y2: int, m: Minorization) -> int:
    """``v`` when ``z = 0``, otherwise a residual-kernel draw driven by ``u``."""
    if m.delta <= 0.0:
        raise DegenerateDelta("no minorization: delta = 0")
    if z == 0 or m.residual is None:
        return v
    return lookup(cdf_table(m.residual[y1, y2]), u)


def forward_sample(plan: SitePlan, k: FiniteKernel, region, boundary: dict) -> dict:
    """Run the coupled recursion over ``region`` from values on its external boundary."""
    m = compute_minorization(k)
    plan = matched_plan(plan, m)
    delta, phi_cdf, res_cdf = coupling_tables(m, k)
    values = {}
    for s in external_boundary(region):
        try:
            values[s] = boundary[s]
        except KeyError:
            raise MissingBoundaryValue(f"no boundary value at {tuple(s)}") from None
    for s in increasing_order(region):
        i, j = s
        if plan.z(s) == 0:
            values[s] = lookup(phi_cdf, plan.uniform(STREAM_V, s))
        else:
            values[s] = lookup(res_cdf[values[(i - 1, j)], values[(i, j - 1)]],
                               plan.uniform(STREAM_U, s))
    return {s: values[s] for s in region}


def evaluate_cluster(plan: SitePlan, c: ClusterRegion, phi_cdf, res_cdf) -> dict:
    """Values on ``B`` without any boundary condition.

    ``Z = 0`` sites take ``V``; ``Z = 1`` sites need both parents, which the
    cluster construction guarantees are in ``B``.
    """
    values = {}
    for s in increasing_order(c.b_of_lambda):
        i, j = s
        if plan.z(s) == 0:
            values[s] = lookup(phi_cdf, plan.uniform(STREAM_V, s))
            continue
        try:
            y1, y2 = values[(i - 1, j)], values[(i, j - 1)]
        except KeyError:
            raise InternalError(f"parent of {tuple(s)} missing from B") from None
        values[s] = lookup(res_cdf[y1, y2], plan.uniform(STREAM_U, s))
    return values


def check_assumption(m: Minorization, delta0: float = DEFAULT_DELTA0, force: bool = False):
    if m.delta <= 0.0:
        raise AssumptionFailed(
            "Assumption 1 fails: delta = sum_z min_{y1,y2} K(z|y1,y2) = 0, "
            "the site algorithm cannot couple; try the block algorithm")
    if m.delta < delta0 and not force:
        raise AssumptionFailed(
            f"delta = {m.delta:.6g} < delta0 = {delta0:g}: finiteness of the backward "
            "cluster (Z=1 density 1-delta below the oriented percolation threshold) is not "
            "certified; pass force=True / --force to run anyway under the step limit")


def perfect_sample(plan: SitePlan, k: FiniteKernel, box: Box,
                   step_limit: int = DEFAULT_STEP_LIMIT, delta0: float = DEFAULT_DELTA0,
                   force: bool = False) -> FieldSample:
    """One exact draw of the equilibrium field on ``box``."""
    m = compute_minorization(k)
    check_assumption(m, delta0, force)
    plan = matched_plan(plan, m)
    _, phi_cdf, res_cdf = coupling_tables(m, k)
    c = build_cluster(plan, box, step_limit)
    vals = evaluate_cluster(plan, c, phi_cdf, res_cdf)
    out = np.empty((box.m, box.n), dtype=np.int32)
    for i in range(1, box.m + 1):
        for j in range(1, box.n + 1):
            out[i - 1, j - 1] = vals[(i, j)]
    meta = {"seed": plan.seed, "replicate": plan.replicate,
            "b_size": len(c.b_of_lambda), "kmax": c.kmax}
    return FieldSample(box, out, meta)


def _replicate_keys(reps: Union[int, Sequence[int]], first: int = 0) -> np.ndarray:
    if isinstance(reps, (int, np.integer)):
        return np.arange(first, first + int(reps), dtype=np.int64)
    return np.asarray(reps, dtype=np.int64)


def perfect_batch(k: FiniteKernel, box: Box, seed: int, reps, step_limit: int = DEFAULT_STEP_LIMIT,
                  delta0: float = DEFAULT_DELTA0, force: bool = False, backend=None):
    """Many replicates at once through the active kernel backend.

    Returns ``(values[r, i-1, j-1], b_size, kmax)``.
    """
    m = compute_minorization(k)
    check_assumption(m, delta0, force)
    delta, phi_cdf, res_cdf = coupling_tables(m, k)
    keys = _replicate_keys(reps)
    core = backend or _core
    values, b, _, km = core.perfect_site(seed, keys, box.m, box.n, delta, phi_cdf, res_cdf,
                                         step_limit, True)
    bad = np.nonzero(b < 0)[0]
    if len(bad):
        raise StepLimitExceeded(
            f"{len(bad)} of {len(keys)} replicates exceeded the step limit "
            f"(first: replicate {int(keys[bad[0]])})",
            {"aborted": int(len(bad))})
    return values, b, km


def perfect_samples(k: FiniteKernel, box: Box, seed: int, reps, **kwargs) -> list[FieldSample]:
    keys = _replicate_keys(reps)
    values, b, km = perfect_batch(k, box, seed, keys, **kwargs)
    return [FieldSample(box, values[r], {"seed": seed, "replicate": int(keys[r]),
                                         "b_size": int(b[r]), "kmax": int(km[r])})
            for r in range(len(keys))]
