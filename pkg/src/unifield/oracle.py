"""Independent ground truth: forward simulation far from the boundary.

The window sits in the top-right corner of a box whose boundary is ``offset``
sites away, so its law is within a geometrically small distance of the
equilibrium law.  Draws use the oracle namespace and never share a key with
the perfect sampler.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy import stats

from . import __version__
from ._backend import core as default_core, get as get_backend
from .auxrand import NS_ORACLE, STREAM_BOUNDARY, STREAM_STRIDE
from .errors import ParseError, WindowMismatch
from .kernel import FiniteKernel, compute_minorization
from .lattice import Box
from .sampler import FieldSample, coupling_tables

DEFAULT_TOL = 0.02
CHUNK = 4096


@dataclass
class EmpiricalJoint:
    """Counts of row-major window outcomes (row ``j = 1`` first, ``i`` fastest)."""

    window: Box
    counts: dict = field(default_factory=dict)
    total: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = {tuple(int(x) for x in k): int(c) for k, c in self.counts.items() if c}
        s = sum(self.counts.values())
        if self.total == 0:
            self.total = s
        if s != self.total:
            raise ValueError(f"counts sum to {s}, total is {self.total}")
        size = self.window.m * self.window.n
        for k in self.counts:
            if len(k) != size:
                raise ValueError(f"outcome {k} does not have {size} entries")

    def freq(self, outcome) -> float:
        return self.counts.get(tuple(outcome), 0) / self.total if self.total else 0.0

    def merge(self, other: "EmpiricalJoint") -> "EmpiricalJoint":
        _same_window(self, other)
        c = dict(self.counts)
        for k, v in other.counts.items():
            c[k] = c.get(k, 0) + v
        return EmpiricalJoint(self.window, c, self.total + other.total, dict(self.meta))

    def to_json(self) -> dict:
        counts = {"-".join(map(str, k)): v for k, v in sorted(self.counts.items())}
        out = {"window": [self.window.m, self.window.n], "total": self.total, "counts": counts}
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_json(cls, data: dict) -> "EmpiricalJoint":
        try:
            m, n = data["window"]
            counts = {tuple(int(x) for x in k.split("-")): int(v) for k, v in data["counts"].items()}
            return cls(Box(int(m), int(n)), counts, int(data["total"]), data.get("meta", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"not an empirical joint: {exc}") from exc

    def dump(self, path: str):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "EmpiricalJoint":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ParseError(f"cannot read {path!r}: {exc}") from exc
        return cls.from_json(data)


def _same_window(a: EmpiricalJoint, b: EmpiricalJoint):
    if (a.window.m, a.window.n) != (b.window.m, b.window.n):
        raise WindowMismatch(f"windows differ: {a.window.m}x{a.window.n} vs {b.window.m}x{b.window.n}")


def counts_from_grids(grids: np.ndarray, n_states: int) -> dict:
    """Count outcomes of an ``[r, i-1, j-1]`` stack of window grids."""
    r = grids.shape[0]
    flat = np.transpose(grids, (0, 2, 1)).reshape(r, -1).astype(np.int64)
    size = flat.shape[1]
    if n_states ** size < 2 ** 62:
        weights = n_states ** np.arange(size - 1, -1, -1, dtype=np.int64)
        codes, cnt = np.unique(flat @ weights, return_counts=True)
        out = {}
        for code, c in zip(codes.tolist(), cnt.tolist()):
            digits = []
            for _ in range(size):
                code, d = divmod(code, n_states)
                digits.append(d)
            out[tuple(reversed(digits))] = c
        return out
    rows, cnt = np.unique(flat, axis=0, return_counts=True)
    return {tuple(row.tolist()): c for row, c in zip(rows, cnt.tolist())}


def parse_boundary(mode: str, n_states: int):
    """``const:z`` or ``iid``; returns ``("const", z)`` or ``("iid", None)``."""
    if mode in ("iid", "iid-uniform"):
        return "iid", None
    kind, _, val = mode.partition(":")
    if kind == "const":
        try:
            z = int(val)
        except ValueError:
            raise ParseError(f"bad boundary mode {mode!r}") from None
        if not 0 <= z < n_states:
            raise ParseError(f"boundary state {z} outside 0..{n_states - 1}")
        return "const", z
    raise ParseError(f"boundary mode must be const:z or iid, got {mode!r}")


def _boundaries(kind, z, seed, reps, width, n_states, which, core):
    if kind == "const":
        return np.full((len(reps), width), z, dtype=np.int32)
    out = np.empty((len(reps), width), dtype=np.int32)
    idx = np.arange(1, width + 1)
    zeros = np.zeros(width, dtype=np.int64)
    for r, rep in enumerate(reps):
        pre = core.prefix(seed, int(rep), NS_ORACLE * STREAM_STRIDE + STREAM_BOUNDARY)
        # bottom row sits at j = 0, left column at i = 0
        u = core.uniform_array(pre, idx, zeros) if which == "bottom" else core.uniform_array(pre, zeros, idx)
        out[r] = np.minimum((np.asarray(u) * n_states).astype(np.int32), n_states - 1)
    return out


def forward_grids(k: FiniteKernel, window: Box, offset: int, reps, seed: int,
                  boundary_mode: str = "const:0", backend=None) -> np.ndarray:
    """Window grids ``[r, i-1, j-1]`` from forward simulation at the given offset."""
    if offset < 1:
        raise ValueError("offset must be >= 1")
    core = get_backend(backend) if isinstance(backend, str) else (backend or default_core)
    keys = np.arange(reps, dtype=np.int64) if isinstance(reps, int) else np.asarray(reps, dtype=np.int64)
    kind, z = parse_boundary(boundary_mode, k.n_states)
    delta, phi_cdf, res_cdf = coupling_tables(compute_minorization(k), k)
    M, N = offset + window.m, offset + window.n
    out = np.empty((len(keys), window.m, window.n), dtype=np.int32)
    for a in range(0, len(keys), CHUNK):
        chunk = keys[a:a + CHUNK]
        bottom = _boundaries(kind, z, seed, chunk, M, k.n_states, "bottom", core)
        left = _boundaries(kind, z, seed, chunk, N, k.n_states, "left", core)
        full = core.forward_field(seed, chunk, M, N, bottom, left, delta, phi_cdf, res_cdf, NS_ORACLE)
        out[a:a + len(chunk)] = full[:, offset:, offset:]
    return out


def forward_equilibrium_estimate(k: FiniteKernel, window: Box, offset: int, reps, seed: int,
                                 boundary_mode: str = "const:0", backend=None) -> EmpiricalJoint:
    grids = forward_grids(k, window, offset, reps, seed, boundary_mode, backend)
    meta = {"source": "forward", "kernel": k.name, "offset": offset, "seed": seed,
            "boundary": boundary_mode, "version": __version__}
    return EmpiricalJoint(window, counts_from_grids(grids, k.n_states), grids.shape[0], meta)


def empirical_joint(samples: Iterable[FieldSample]) -> EmpiricalJoint:
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    w = samples[0].box
    counts = {}
    for s in samples:
        if (s.box.m, s.box.n) != (w.m, w.n):
            raise WindowMismatch(f"sample window {s.box.m}x{s.box.n} differs from {w.m}x{w.n}")
        o = s.outcome()
        counts[o] = counts.get(o, 0) + 1
    return EmpiricalJoint(w, counts, len(samples))


def joint_from_grids(grids: np.ndarray, n_states: int, meta: Optional[dict] = None) -> EmpiricalJoint:
    window = Box(grids.shape[1], grids.shape[2])
    return EmpiricalJoint(window, counts_from_grids(grids, n_states), grids.shape[0], meta or {})


def tv_distance(a: EmpiricalJoint, b: EmpiricalJoint) -> float:
    _same_window(a, b)
    keys = set(a.counts) | set(b.counts)
    return 0.5 * sum(abs(a.freq(x) - b.freq(x)) for x in keys)


@dataclass
class CompareReport:
    tv: float
    tol: float
    chi2: float
    dof: int
    p_value: float
    z_scores: dict
    passed: bool

    @property
    def max_abs_z(self) -> float:
        return max((abs(z) for z in self.z_scores.values()), default=0.0)

    def to_json(self) -> dict:
        return {
            "tv": self.tv, "tol": self.tol, "pass": self.passed,
            "chi2": self.chi2, "dof": self.dof, "p_value": self.p_value,
            "max_abs_z": self.max_abs_z,
            "z_scores": {"-".join(map(str, k)): v for k, v in sorted(self.z_scores.items())},
        }


def compare_report(a: EmpiricalJoint, b: EmpiricalJoint, tol: float = DEFAULT_TOL) -> CompareReport:
    """TV distance, two-sample z-scores per outcome and the homogeneity chi-square.

    The z-score of an outcome is ``(p_a - p_b) / sqrt(p (1 - p) (1/N_a + 1/N_b))``
    with ``p`` the pooled frequency; the chi-square is the 2 x K contingency
    statistic over outcomes seen in either sample.
    """
    _same_window(a, b)
    keys = sorted(set(a.counts) | set(b.counts))
    Na, Nb = a.total, b.total
    z = {}
    chi2 = 0.0
    for x in keys:
        ca, cb = a.counts.get(x, 0), b.counts.get(x, 0)
        p = (ca + cb) / (Na + Nb)
        var = p * (1 - p) * (1 / Na + 1 / Nb)
        z[x] = 0.0 if var == 0 else (ca / Na - cb / Nb) / math.sqrt(var)
        ea, eb = Na * p, Nb * p
        chi2 += (ca - ea) ** 2 / ea + (cb - eb) ** 2 / eb
    dof = max(len(keys) - 1, 0)
    pval = float(stats.chi2.sf(chi2, dof)) if dof else 1.0
    tv = tv_distance(a, b)
    return CompareReport(tv, tol, chi2, dof, pval, z, tv <= tol)
