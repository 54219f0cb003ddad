"""Backward oriented-percolation clusters of the ``Z = 1`` sites.

Starting from the box's internal boundary, the construction walks to parents
while ``Z = 1``.  The visited sites together with their external boundary form
``omega``; ``B = box | omega`` is what the perfect sampler must evaluate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._backend import core as _core
from .errors import StepLimitExceeded
from .lattice import Box, Site, external_boundary, internal_boundary

DEFAULT_STEP_LIMIT = 10**6


@dataclass(frozen=True)
class ClusterRegion:
    box: Box
    layers: tuple
    omega: frozenset
    b_of_lambda: frozenset
    kmax: int

    @property
    def open_sites(self) -> frozenset:
        """Union of the layers: every site reached with ``Z = 1``."""
        return frozenset().union(*self.layers) if self.layers else frozenset()


def build_cluster(plan, box: Box, step_limit: int = DEFAULT_STEP_LIMIT,
                  z: Optional[Callable] = None) -> ClusterRegion:
    """Layered backward search.

    ``z`` overrides ``plan.z`` (tests use it to impose hand-made fields).
    Each site taken off a layer counts as one step against ``step_limit``.
    """
    if step_limit < 1:
        raise ValueError("step_limit must be >= 1")
    z_of = z if z is not None else plan.z
    layer = [s for s in box.internal_boundary() if z_of(s) == 1]
    visited = set(layer)
    layers = []
    steps = 0
    while layer:
        layers.append(frozenset(layer))
        nxt = []
        for i, j in layer:
            steps += 1
            if steps > step_limit:
                raise StepLimitExceeded(
                    f"cluster still growing after {step_limit} steps "
                    f"({len(visited)} sites, {len(layers)} layers); "
                    "delta is probably below the percolation threshold",
                    {"visited": len(visited), "layers": len(layers) - 1, "steps": steps},
                )
            for p in (Site(i - 1, j), Site(i, j - 1)):
                if p not in visited and z_of(p) == 1:
                    visited.add(p)
                    nxt.append(p)
        layer = nxt
    omega = frozenset(visited) | external_boundary(visited)
    return ClusterRegion(
        box=box,
        layers=tuple(layers),
        omega=omega,
        b_of_lambda=box.region | omega,
        kmax=max(len(layers) - 1, 0),
    )


def assert_frontier_zero(c: ClusterRegion, plan, z: Optional[Callable] = None) -> list:
    """Sites of the internal boundary of ``B`` that carry ``Z = 1`` (should be none)."""
    z_of = z if z is not None else plan.z
    return sorted(s for s in internal_boundary(c.b_of_lambda) if z_of(s) == 1)


def cluster_stats(delta: float, sizes, reps: int, seed: int,
                  step_limit: int = DEFAULT_STEP_LIMIT, backend=None,
                  first_replicate: int = 0) -> list[dict]:
    """Monte Carlo summary of ``|omega|``, ``|B|`` and ``kmax`` on ``L x L`` boxes.

    Also checks the lower bound ``E|omega| >= (1 - delta) |internal boundary|``
    allowing three standard errors.
    """
    if not sizes:
        raise ValueError("sizes must be nonempty")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    core = backend or _core
    dummy = np.zeros(1)
    dummy3 = np.zeros((1, 1, 1))
    rows = []
    for L in sizes:
        keys = np.arange(first_replicate, first_replicate + reps, dtype=np.int64)
        _, b, om, km = core.perfect_site(seed, keys, L, L, delta, dummy, dummy3,
                                         step_limit, False)
        aborted = int((b < 0).sum())
        if aborted:
            raise StepLimitExceeded(
                f"{aborted} of {reps} replicates exceeded the step limit at L={L}",
                {"L": L, "aborted": aborted, "rows": rows},
            )
        om = om.astype(float)
        se = float(om.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan")
        boundary = 2 * L - 1
        lower = (1.0 - delta) * boundary
        rows.append({
            "L": L,
            "reps": reps,
            "mean_omega": float(om.mean()),
            "se_omega": se,
            "mean_B": float(b.mean()),
            "mean_kmax": float(km.mean()),
            "max_kmax": int(km.max()),
            "lower_bound": lower,
            "lower_bound_ok": bool(om.mean() >= lower - 3 * (se if reps > 1 else 0.0)),
        })
    return rows
