"""Counter-based per-site randomness.

Every uniform is a pure function of ``(seed, replicate, stream, i, j)`` so a
site revisited in any order, by any worker, sees the same draw.  The exact
bit-level derivation is in ``docs/determinism.md``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from ._backend import core
from .kernel import cdf_table, lookup

STREAM_Z = 1
STREAM_V = 2
STREAM_U = 3
STREAM_U1 = 4
STREAM_U2 = 5
STREAM_BOUNDARY = 6
STREAM_STRIDE = 16

# Stream namespaces keep independent consumers of one seed apart.
NS_SAMPLER = 0
NS_ORACLE = 1
NS_CALIBRATION = 2


class SiteDraws(NamedTuple):
    z: int
    v: int
    u: float
    u1: float
    u2: float


@dataclass(frozen=True)
class SitePlan:
    """Source of the auxiliary fields for one replicate.

    ``Z = 0`` with probability ``delta``; ``V`` follows ``phi``.
    """

    seed: int
    replicate: int
    delta: float = 1.0
    phi: Optional[tuple] = None
    namespace: int = NS_SAMPLER

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.phi is not None:
            phi = tuple(float(x) for x in self.phi)
            if min(phi) < 0 or abs(sum(phi) - 1.0) > 1e-9:
                raise ValueError(f"phi is not a probability vector: {phi}")
            object.__setattr__(self, "phi", phi)

    @cached_property
    def _prefixes(self):
        base = self.namespace * STREAM_STRIDE
        return {
            s: core.prefix(self.seed, self.replicate, base + s)
            for s in (STREAM_Z, STREAM_V, STREAM_U, STREAM_U1, STREAM_U2, STREAM_BOUNDARY)
        }

    @cached_property
    def _phi_cdf(self):
        return cdf_table(self.phi) if self.phi is not None else None

    def uniform(self, stream: int, s) -> float:
        return core.uniform_at(self._prefixes[stream], s[0], s[1])

    def z(self, s) -> int:
        if self.delta >= 1.0:
            return 0
        if self.delta <= 0.0:
            return 1
        return 0 if self.uniform(STREAM_Z, s) < self.delta else 1

    def v(self, s) -> int:
        if self._phi_cdf is None:
            raise ValueError("plan has no phi; V is undefined")
        return lookup(self._phi_cdf, self.uniform(STREAM_V, s))

    def draws(self, s) -> SiteDraws:
        return draws_at(self, s)

    def with_replicate(self, replicate: int) -> "SitePlan":
        return SitePlan(self.seed, replicate, self.delta, self.phi, self.namespace)


def draws_at(plan: SitePlan, s) -> SiteDraws:
    """All auxiliary variables at site ``s``.  ``v`` is -1 when the plan has no ``phi``."""
    return SiteDraws(
        z=plan.z(s),
        v=plan.v(s) if plan.phi is not None else -1,
        u=plan.uniform(STREAM_U, s),
        u1=plan.uniform(STREAM_U1, s),
        u2=plan.uniform(STREAM_U2, s),
    )


def uniform_grid(plan: SitePlan, stream: int, i, j) -> np.ndarray:
    """Uniforms of one stream at the sites given by broadcastable ``i``, ``j`` arrays."""
    return core.uniform_array(plan._prefixes[stream], i, j)
