"""Block algorithm: coalescence detected on blocks of ``l`` sites.

Blocks sit on anti-diagonals ``(d - 1) * l`` apart.  ``B[h, k]`` is the block
``{(1, l), (2, l - 1), ..., (l, 1)} + (l*h, l*k)`` for block-lattice vertices
with ``h + k = 0 (mod d - 1)``.  The values on ``B[h, k]`` depend on the
boundary only through the ``d`` parent blocks ``B[h - i, k + i - d + 1]``,
via the sites of the trapezoid ``R[h, k]``.  A binary field ``W`` marks the
vertices whose block values are certified boundary-free (``W = 0``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Optional

import numpy as np

from .auxrand import NS_CALIBRATION, NS_SAMPLER, SitePlan
from .errors import (
    Assumption3Failed,
    AssumptionFailed,
    InternalError,
    MissingBoundaryValue,
    NotABlockVertex,
    StepLimitExceeded,
)
from .kernel import FiniteKernel, cdf_table, compute_minorization, lookup
from .lattice import Box, Site, external_boundary, increasing_order
from .percolation import DEFAULT_STEP_LIMIT
from .sampler import FieldSample, coupling_step, matched_plan

CALIBRATION_DRAWS = 10_000


def _vertex_key(v):
    return v[0] + v[1], v[0]


@dataclass(frozen=True)
class BlockGeometry:
    l: int
    d: int

    def __post_init__(self):
        if self.l < 1 or self.d < 2:
            raise ValueError(f"need l >= 1 and d >= 2, got l={self.l}, d={self.d}")

    @property
    def period(self) -> int:
        """Distance between consecutive block diagonals."""
        return (self.d - 1) * self.l

    @property
    def threshold(self) -> float:
        """``P(W = 0)`` must exceed this for the block clusters to be finite."""
        return (self.d - 1) / self.d

    def is_vertex(self, h: int, k: int) -> bool:
        return (h + k) % (self.d - 1) == 0

    def _require(self, h, k):
        if not self.is_vertex(h, k):
            raise NotABlockVertex(f"({h}, {k}) is not a block vertex for d={self.d}")

    def block_sites(self, h: int, k: int) -> tuple:
        self._require(h, k)
        l = self.l
        return tuple(Site(l * h + a, l * k + l + 1 - a) for a in range(1, l + 1))

    def block_parents(self, h: int, k: int) -> list:
        return [(h - i, k + i - self.d + 1) for i in range(self.d)]

    @cached_property
    def _origin_region(self) -> tuple:
        # R[h, k] = R[0, 0] + (l*h, l*k); stored in increasing order.
        l, d = self.l, self.d
        lo = (2 - d) * l + 2
        sites = [
            Site(i, j)
            for i in range((1 - d) * l + 2, l + 1)
            for j in range((1 - d) * l + 2, l + 1)
            if lo <= i + j <= l + 1
        ]
        return tuple(increasing_order(sites))

    def region_order(self, h: int, k: int) -> list:
        """Sites of ``R[h, k]`` in increasing order."""
        self._require(h, k)
        dh, dk = self.l * h, self.l * k
        return [Site(i + dh, j + dk) for i, j in self._origin_region]

    def region_sites(self, h: int, k: int) -> frozenset:
        return frozenset(self.region_order(h, k))

    def diagonal_index(self, s) -> int:
        return (s[0] + s[1] - self.l - 1) % self.period

    def cover_vertex(self, s) -> tuple:
        """A vertex whose region contains ``s``; the block's own vertex for block sites."""
        i, j = s
        h = (i - 1) // self.l
        t = -((self.l + 1 - i - j) // self.period)  # ceil((i + j - l - 1) / period)
        return h, t * (self.d - 1) - h

    def regions_overlap(self, v1, v2) -> bool:
        return bool(self.region_sites(*v1) & self.region_sites(*v2))


# -- coupling families -------------------------------------------------------

class CouplingFamily:
    """Functions ``s_m(draws; y1, y2)``, one per diagonal index ``m``.

    Each ``s_m`` applied to fresh draws must have law ``K(.|y1, y2)``.
    """

    tag = "custom"

    def __init__(self, n_states: int):
        self.n_states = n_states

    def apply(self, m: int, draws, y1: int, y2: int) -> int:
        raise NotImplementedError

    def plan_for(self, seed: int, replicate: int, namespace: int = NS_SAMPLER) -> SitePlan:
        return SitePlan(seed, replicate, namespace=namespace)

    def prepare(self, plan):
        """Adapt a caller's plan to the draws this family reads."""
        return plan


class CallableFamily(CouplingFamily):
    def __init__(self, fn: Callable, n_states: int, tag: str = "custom"):
        super().__init__(n_states)
        self.fn = fn
        self.tag = tag

    def apply(self, m, draws, y1, y2):
        return self.fn(m, draws, y1, y2)


class MinorizationFamily(CouplingFamily):
    """The single-site coupling at every diagonal."""

    tag = "minorization"

    def __init__(self, kernel: FiniteKernel):
        super().__init__(kernel.n_states)
        self.kernel = kernel
        self.minorization = compute_minorization(kernel)
        if self.minorization.delta <= 0:
            raise AssumptionFailed("minorization family needs delta > 0")

    def apply(self, m, draws, y1, y2):
        return coupling_step(draws.z, draws.v, draws.u, y1, y2, self.minorization)

    def plan_for(self, seed, replicate, namespace=NS_SAMPLER):
        return matched_plan(SitePlan(seed, replicate, namespace=namespace), self.minorization)

    def prepare(self, plan):
        if isinstance(plan, SitePlan):
            return matched_plan(plan, self.minorization)
        return plan


class InverseCDFFamily(CouplingFamily):
    """``s(u; y1, y2)`` = inverse CDF of ``K(.|y1, y2)`` at ``u``, on every diagonal."""

    tag = "inverse-cdf"

    def __init__(self, kernel: FiniteKernel):
        super().__init__(kernel.n_states)
        self.kernel = kernel
        self._cdf = cdf_table(kernel.table)

    def apply(self, m, draws, y1, y2):
        return lookup(self._cdf[y1, y2], draws.u)


class Example2Family(CouplingFamily):
    """Natural coupling of the up/down kernel: up iff ``u < p``."""

    tag = "example2"

    def __init__(self, p: float):
        super().__init__(3)
        self.p = p

    def apply(self, m, draws, y1, y2):
        lo = y1 if y1 < y2 else y2
        if draws.u < self.p:
            return lo + 1 if lo < 2 else 2
        return lo - 1 if lo > 0 else 0


class Example1Family(CouplingFamily):
    """Two mixture decompositions of ``K``, for even (``m = 0``) and odd (``m = 1``)
    diagonals of the ``l = 1, d = 3`` geometry.

    Even diagonals: with parents in ``C x C`` draw ``phi`` when ``u2 < rho2``,
    otherwise the residual ``(K - rho2 phi) / (1 - rho2)``; with other parents
    draw ``K``.  Odd diagonals: ``K`` conditioned on ``C`` when ``u2 < rho1``,
    otherwise the complementary residual.  ``u1`` drives the inverse CDFs.
    """

    tag = "example1"

    def __init__(self, kernel: FiniteKernel, rho1: float, rho2: float,
                 C: Iterable[int] = (0, 1), phi=None, tol: float = 1e-12):
        super().__init__(kernel.n_states)
        self.kernel = kernel
        self.rho1 = float(rho1)
        self.rho2 = float(rho2)
        self.C = frozenset(int(c) for c in C)
        K = kernel.table
        n = kernel.n_states
        inC = np.zeros(n, dtype=bool)
        inC[list(self.C)] = True
        if phi is None:
            phi = default_example1_phi(kernel, self.C)
        self.phi = np.asarray(phi, dtype=float)
        problems = assumption3_violations(kernel, self.C, self.phi, self.rho1, self.rho2, tol)
        if problems:
            raise Assumption3Failed("; ".join(problems))

        f1 = K.copy()
        if self.rho2 < 1.0:
            for y1 in self.C:
                for y2 in self.C:
                    f1[y1, y2] = np.clip((K[y1, y2] - self.rho2 * self.phi) / (1 - self.rho2), 0, None)
        mass_C = K[:, :, inC].sum(axis=-1, keepdims=True)
        f3 = np.where(inC, K, 0.0) / mass_C
        if self.rho1 < 1.0:
            # K(. & C^c) + (1 - rho1 / K(C)) K(. & C), which is nonnegative term by term
            f4 = (np.where(inC, 0.0, K) + (1 - self.rho1 / mass_C) * np.where(inC, K, 0.0)) / (1 - self.rho1)
        else:
            f4 = K.copy()
        self.f1, self.f3, self.f4 = f1, f3, f4
        self._phi_cdf = cdf_table(self.phi)
        self._k_cdf = cdf_table(K)
        self._f1_cdf = cdf_table(f1)
        self._f3_cdf = cdf_table(f3)
        self._f4_cdf = cdf_table(f4)
        self._inC = inC

    def apply(self, m, draws, y1, y2):
        if m % 2 == 0:
            if self._inC[y1] and self._inC[y2]:
                if draws.u2 < self.rho2:
                    return lookup(self._phi_cdf, draws.u1)
                return lookup(self._f1_cdf[y1, y2], draws.u1)
            return lookup(self._k_cdf[y1, y2], draws.u1)
        if draws.u2 < self.rho1:
            return lookup(self._f3_cdf[y1, y2], draws.u1)
        return lookup(self._f4_cdf[y1, y2], draws.u1)


def default_example1_phi(kernel: FiniteKernel, C) -> np.ndarray:
    """Normalised infimum of ``K(.|y1, y2)`` over parents in ``C x C``."""
    idx = sorted(C)
    rows = kernel.table[np.ix_(idx, idx)].reshape(-1, kernel.n_states)
    tau = rows.min(axis=0)
    if tau.sum() <= 0:
        raise Assumption3Failed(f"K has no common mass over parents in C={sorted(C)}")
    return tau / tau.sum()


def assumption3_violations(kernel: FiniteKernel, C, phi, rho1, rho2, tol=1e-12,
                           require_bound: bool = True) -> list[str]:
    """Check the three inequalities of the two-set minorization; return the failures."""
    K = kernel.table
    n = kernel.n_states
    phi = np.asarray(phi, dtype=float)
    C = sorted(C)
    out = []
    if not (0 < rho1 <= 1 and 0 < rho2 <= 1):
        out.append(f"need 0 < rho1, rho2 <= 1 (got {rho1}, {rho2})")
        return out
    if not C or min(C) < 0 or max(C) >= n:
        out.append(f"C={C} is not a nonempty subset of the states")
        return out
    mass_C = K[:, :, C].sum(axis=-1)
    worst = np.unravel_index(np.argmin(mass_C), mass_C.shape)
    if mass_C[worst] < rho1 - tol:
        out.append(f"K(C|y1,y2) >= rho1 fails: K(C|{worst[0]},{worst[1]}) = {mass_C[worst]:.6g} < {rho1}")
    slack = K[np.ix_(C, C)] - rho2 * phi
    if slack.min() < -tol:
        a, b, z = np.unravel_index(np.argmin(slack), slack.shape)
        out.append(f"K >= rho2*phi on CxC fails at K({z}|{C[a]},{C[b]}) = {K[C[a], C[b], z]:.6g} "
                   f"< {rho2 * phi[z]:.6g}")
    if require_bound and not rho1 ** 2 * rho2 > 2 / 3:
        out.append(f"rho1^2*rho2 = {rho1 ** 2 * rho2:.6g} is not > 2/3")
    return out


def set_valued_step(fam: CouplingFamily, m: int, draws, I1, I2) -> frozenset:
    """Image of ``s_m(draws; ., .)`` over ``I1 x I2``."""
    return frozenset(fam.apply(m, draws, a, b) for a in I1 for b in I2)


# -- coalescence detectors ----------------------------------------------------

class WDetector:
    """``evaluate(plan, h, k) -> (w, phi)``; ``phi`` maps block sites to their
    boundary-free values when ``w == 0``."""

    method = "explicit"
    delta_tilde: float

    def evaluate(self, plan, h: int, k: int):
        raise NotImplementedError


class SetValuedDetector(WDetector):
    """Propagate the set of reachable states through ``R[h, k]`` from ``E`` on its
    boundary; ``W = 0`` iff every block site ends with a single state."""

    method = "setvalued"

    def __init__(self, fam: CouplingFamily, geom: BlockGeometry,
                 calibration: int = CALIBRATION_DRAWS, calibration_seed: int = 0):
        self.fam = fam
        self.geom = geom
        self.full = frozenset(range(fam.n_states))
        self.calibration = calibration
        self.calibration_seed = calibration_seed

    def sets(self, plan, h, k) -> dict:
        geom = self.geom
        I = {}
        full = self.full
        for s in geom.region_order(h, k):
            i, j = s
            I[s] = set_valued_step(self.fam, geom.diagonal_index(s), plan.draws(s),
                                   I.get((i - 1, j), full), I.get((i, j - 1), full))
        return I

    def evaluate(self, plan, h, k):
        I = self.sets(plan, h, k)
        block = self.geom.block_sites(h, k)
        if all(len(I[b]) == 1 for b in block):
            return 0, {b: next(iter(I[b])) for b in block}
        return 1, None

    @cached_property
    def delta_tilde(self) -> float:
        """Monte Carlo estimate of ``P(W = 0)`` from fixed calibration draws."""
        zeros = 0
        for r in range(self.calibration):
            plan = self.fam.plan_for(self.calibration_seed, r, NS_CALIBRATION)
            zeros += self.evaluate(plan, 0, 0)[0] == 0
        return zeros / self.calibration


class Example2Detector(WDetector):
    """``W = 0`` iff ``u > p`` at the three sites of ``R`` just below and on the
    block (``l = 2, d = 2``); the block is then all zeros."""

    def __init__(self, p: float, geom: BlockGeometry):
        if (geom.l, geom.d) != (2, 2):
            raise ValueError("the explicit example2 detector needs l=2, d=2")
        self.p = p
        self.geom = geom

    @property
    def delta_tilde(self) -> float:
        return (1 - self.p) ** 3

    def evaluate(self, plan, h, k):
        a, b = 2 * h, 2 * k
        for s in ((a + 1, b + 2), (a + 1, b + 1), (a + 2, b + 1)):
            if not plan.draws(s).u > self.p:
                return 1, None
        return 0, {s: 0 for s in self.geom.block_sites(h, k)}


class Example1Detector(WDetector):
    """``l = 1, d = 3``: the block of vertex ``(h, k)`` is the site ``(h+1, k+1)``.
    ``W = 0`` iff both parents drew from ``K`` conditioned on ``C`` and the site
    itself drew from ``phi``; the value is then ``phi``'s inverse CDF at ``u1``."""

    def __init__(self, fam: Example1Family, geom: BlockGeometry):
        if (geom.l, geom.d) != (1, 3):
            raise ValueError("the explicit example1 detector needs l=1, d=3")
        self.fam = fam
        self.geom = geom

    @property
    def delta_tilde(self) -> float:
        return self.fam.rho1 ** 2 * self.fam.rho2

    def evaluate(self, plan, h, k):
        a, b = h + 1, k + 1
        f = self.fam
        if (plan.draws((a - 1, b)).u2 < f.rho1 and plan.draws((a, b - 1)).u2 < f.rho1):
            d = plan.draws((a, b))
            if d.u2 < f.rho2:
                return 0, {Site(a, b): lookup(f._phi_cdf, d.u1)}
        return 1, None


class MinorizationDetector(WDetector):
    """``l = 1, d = 2``: ``W`` is the site's own ``Z`` and the block value is ``V``."""

    def __init__(self, fam: MinorizationFamily, geom: BlockGeometry):
        if (geom.l, geom.d) != (1, 2):
            raise ValueError("the explicit minorization detector needs l=1, d=2")
        self.fam = fam
        self.geom = geom

    @property
    def delta_tilde(self) -> float:
        return self.fam.minorization.delta

    def evaluate(self, plan, h, k):
        d = plan.draws((h + 1, k + 1))
        if d.z == 0:
            return 0, {Site(h + 1, k + 1): d.v}
        return 1, None


class TableDetector(WDetector):
    """Fixed ``W`` pattern (vertices not listed have ``W = 0``); for tests."""

    method = "table"

    def __init__(self, ones, geom: BlockGeometry, value: int = 0):
        self.ones = frozenset(ones)
        self.geom = geom
        self.value = value
        self.delta_tilde = 1.0

    def evaluate(self, plan, h, k):
        if (h, k) in self.ones:
            return 1, None
        return 0, {s: self.value for s in self.geom.block_sites(h, k)}


def w_value(det: WDetector, fam, geom, plan, v):
    """``(w, phi)`` at block vertex ``v``."""
    geom._require(*v)
    return det.evaluate(fam.prepare(plan), *v)


# -- presets ------------------------------------------------------------------

@dataclass
class BlockSystem:
    geometry: BlockGeometry
    family: CouplingFamily
    detector: WDetector

    @property
    def delta_tilde(self) -> float:
        return self.detector.delta_tilde

    def gate(self, force: bool = False):
        dt = self.delta_tilde
        if not dt > self.geometry.threshold and not force:
            raise AssumptionFailed(
                f"P(W=0) = {dt:.6g} is not > (d-1)/d = {self.geometry.threshold:.6g} "
                f"for l={self.geometry.l}, d={self.geometry.d}: finiteness of the block "
                "clusters is not certified; pass --force to run under the step limit")


def example1_family(kernel: FiniteKernel, rho1: float, rho2: float, C=(0, 1), phi=None,
                    geometry: Optional[BlockGeometry] = None) -> BlockSystem:
    geom = geometry or BlockGeometry(1, 3)
    fam = Example1Family(kernel, rho1, rho2, C, phi)
    if (geom.l, geom.d) == (1, 3):
        det = Example1Detector(fam, geom)
    else:
        raise ValueError("the example1 family is defined for l=1, d=3 only")
    return BlockSystem(geom, fam, det)


def example2_family(p: float, geometry: Optional[BlockGeometry] = None) -> BlockSystem:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    geom = geometry or BlockGeometry(2, 2)
    fam = Example2Family(p)
    det = Example2Detector(p, geom) if (geom.l, geom.d) == (2, 2) else SetValuedDetector(fam, geom)
    return BlockSystem(geom, fam, det)


def minorization_family(kernel: FiniteKernel, geometry: Optional[BlockGeometry] = None) -> BlockSystem:
    geom = geometry or BlockGeometry(1, 2)
    fam = MinorizationFamily(kernel)
    det = MinorizationDetector(fam, geom) if (geom.l, geom.d) == (1, 2) else SetValuedDetector(fam, geom)
    return BlockSystem(geom, fam, det)


def setvalued_family(kernel: FiniteKernel, geometry: BlockGeometry,
                     fam: Optional[CouplingFamily] = None) -> BlockSystem:
    fam = fam or InverseCDFFamily(kernel)
    return BlockSystem(geometry, fam, SetValuedDetector(fam, geometry))


# -- clusters and sampling ----------------------------------------------------

@dataclass(frozen=True)
class BlockCluster:
    entry: frozenset        # vertices whose regions/blocks cover the box
    layers: tuple           # backward layers; layer 0 is inside ``entry``
    sigma: frozenset        # layered vertices plus the W = 0 vertices bounding them
    frontier: frozenset     # W = 0 vertices outside ``entry`` where the search stopped
    covered: frozenset      # entry | sigma
    needs_parents: frozenset
    d_of_lambda: frozenset  # every site whose value the sampler determines
    kmax: int
    w: dict = field(repr=False, compare=False, default_factory=dict)


def build_block_cluster(system: BlockSystem, plan, box: Box,
                        step_limit: int = DEFAULT_STEP_LIMIT, force: bool = True) -> BlockCluster:
    """Backward search on the block graph from the vertices covering ``box``.

    A vertex needs its parent blocks when ``W = 1`` or when it must supply a
    non-block site of the box.  The search walks into parents with ``W = 1``
    and stops at ``W = 0`` parents, which form the frontier.
    """
    system.gate(force)
    geom, det = system.geometry, system.detector
    plan = system.family.prepare(plan)
    entry, nonblock = set(), set()
    for s in box.sites():
        v = geom.cover_vertex(s)
        entry.add(v)
        if geom.diagonal_index(s) != 0:
            nonblock.add(v)

    wcache = {}

    def W(v):
        if v not in wcache:
            wcache[v] = det.evaluate(plan, *v)
        return wcache[v][0]

    needs = {v for v in entry if v in nonblock or W(v) == 1}
    layer = sorted((v for v in needs if any(p not in entry for p in geom.block_parents(*v))),
                   key=_vertex_key)
    visited = set(layer)
    frontier = set()
    layers = []
    steps = 0
    while layer:
        layers.append(frozenset(layer))
        nxt = []
        for v in layer:
            steps += 1
            if steps > step_limit:
                raise StepLimitExceeded(
                    f"block cluster still growing after {step_limit} steps "
                    f"({len(visited)} vertices, {len(layers)} layers)",
                    {"visited": len(visited), "layers": len(layers) - 1, "steps": steps})
            for p in geom.block_parents(*v):
                if p in entry or p in visited or p in frontier:
                    continue
                if W(p) == 1:
                    visited.add(p)
                    needs.add(p)
                    nxt.append(p)
                else:
                    frontier.add(p)
        layer = nxt
    covered = frozenset(entry) | visited | frontier
    sites = set(box.sites())
    for v in covered:
        sites.update(geom.block_sites(*v))
        if v in needs:
            sites.update(geom.region_order(*v))
    return BlockCluster(
        entry=frozenset(entry),
        layers=tuple(layers),
        sigma=frozenset(visited) | frozenset(frontier),
        frontier=frozenset(frontier),
        covered=covered,
        needs_parents=frozenset(needs),
        d_of_lambda=frozenset(sites),
        kmax=max(len(layers) - 1, 0),
        w=wcache,
    )


def block_frontier_violations(system: BlockSystem, plan, c: BlockCluster) -> list:
    """Covered vertices used without their parents yet having ``W = 1``."""
    plan = system.family.prepare(plan)
    return sorted(v for v in c.covered - c.needs_parents
                  if system.detector.evaluate(plan, *v)[0] != 0)


def evaluate_block_cluster(system: BlockSystem, plan, c: BlockCluster) -> dict:
    geom, fam = system.geometry, system.family
    plan = fam.prepare(plan)
    values = {}
    for v in sorted(c.covered, key=_vertex_key):
        w, phi = c.w[v] if v in c.w else system.detector.evaluate(plan, *v)
        if v not in c.needs_parents:
            if w != 0:
                raise InternalError(f"vertex {v} used as frontier with W=1")
            values.update(phi)
            continue
        for p in geom.block_parents(*v):
            if p not in c.covered:
                raise InternalError(f"parent block {p} of {v} is not covered")
        for s in geom.region_order(*v):
            if s in values:
                continue
            i, j = s
            try:
                y1, y2 = values[(i - 1, j)], values[(i, j - 1)]
            except KeyError:
                raise InternalError(f"parent of {tuple(s)} missing in region {v}") from None
            values[s] = fam.apply(geom.diagonal_index(s), plan.draws(s), y1, y2)
        if w == 0:
            for s, x in phi.items():
                if values[s] != x:
                    raise InternalError(f"W=0 at {v} but block value at {tuple(s)} depends on the boundary")
    return values


def block_perfect_sample(system: BlockSystem, plan, box: Box,
                         step_limit: int = DEFAULT_STEP_LIMIT, force: bool = False) -> FieldSample:
    """One exact draw on ``box`` using the block coupling."""
    c = build_block_cluster(system, plan, box, step_limit, force)
    values = evaluate_block_cluster(system, plan, c)
    out = np.empty((box.m, box.n), dtype=np.int32)
    for i in range(1, box.m + 1):
        for j in range(1, box.n + 1):
            out[i - 1, j - 1] = values[(i, j)]
    meta = {"seed": plan.seed, "replicate": plan.replicate,
            "b_size": len(c.d_of_lambda), "kmax": c.kmax}
    return FieldSample(box, out, meta)


def block_samples(system: BlockSystem, box: Box, seed: int, reps, step_limit=DEFAULT_STEP_LIMIT,
                  force: bool = False) -> list[FieldSample]:
    system.gate(force)
    keys = range(reps) if isinstance(reps, int) else reps
    return [block_perfect_sample(system, system.family.plan_for(seed, int(r)), box, step_limit,
                                 force=True)
            for r in keys]


def forward_family(fam: CouplingFamily, geom: BlockGeometry, plan, region, boundary: dict) -> dict:
    """Recursion with the diagonal-dependent couplings from boundary values."""
    plan = fam.prepare(plan)
    values = {}
    for s in external_boundary(region):
        try:
            values[s] = boundary[s]
        except KeyError:
            raise MissingBoundaryValue(f"no boundary value at {tuple(s)}") from None
    for s in increasing_order(region):
        i, j = s
        values[s] = fam.apply(geom.diagonal_index(s), plan.draws(s),
                              values[(i - 1, j)], values[(i, j - 1)])
    return {s: values[s] for s in region}


def cluster_diameter(system: BlockSystem, plan, v=(0, 0), step_limit: int = DEFAULT_STEP_LIMIT) -> int:
    """Longest open path ending at ``v``: the number of backward layers of ``W = 1``
    vertices starting from ``v`` itself (0 when ``W(v) = 0``)."""
    det, geom = system.detector, system.geometry
    plan = system.family.prepare(plan)
    if det.evaluate(plan, *v)[0] == 0:
        return 0
    layer, seen, depth, steps = [v], {v}, 0, 0
    while layer:
        depth += 1
        nxt = []
        for u in layer:
            steps += 1
            if steps > step_limit:
                raise StepLimitExceeded("diameter search exceeded the step limit", {"depth": depth})
            for p in geom.block_parents(*u):
                if p not in seen:
                    seen.add(p)
                    if det.evaluate(plan, *p)[0] == 1:
                        nxt.append(p)
        layer = nxt
    return depth
