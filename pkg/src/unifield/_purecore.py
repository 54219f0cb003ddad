"""Pure-Python/numpy kernels; the fallback for ``unifield._core``.

Every function here returns exactly what its compiled twin returns.
"""
import numpy as np

MASK = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15
C1 = 0xBF58476D1CE4E5B9
C2 = 0x94D049BB133111EB
STREAM_Z, STREAM_V, STREAM_U = 1, 2, 3
STREAM_STRIDE = 16
UNIT = 2.0 ** -52


def mix64(x):
    x ^= x >> 30
    x = (x * C1) & MASK
    x ^= x >> 27
    x = (x * C2) & MASK
    x ^= x >> 31
    return x


def absorb(h, w):
    return mix64(((h ^ w) + GAMMA) & MASK)


def zigzag(x):
    return (x << 1) & MASK if x >= 0 else ((-x) << 1) - 1


def prefix(seed, rep, stream):
    return absorb(absorb(mix64((seed + GAMMA) & MASK), rep & MASK), stream & MASK)


def uniform_at(pre, i, j):
    w = absorb(absorb(pre, zigzag(i)), zigzag(j))
    return ((w >> 12) + 0.5) * UNIT


# -- numpy versions ----------------------------------------------------------

_S30, _S27, _S31, _S12, _ONE = (np.uint64(v) for v in (30, 27, 31, 12, 1))
_C1, _C2, _G = np.uint64(C1), np.uint64(C2), np.uint64(GAMMA)


def _mix64_np(x):
    x = x ^ (x >> _S30)
    x = x * _C1
    x = x ^ (x >> _S27)
    x = x * _C2
    return x ^ (x >> _S31)


def _absorb_np(h, w):
    return _mix64_np((h ^ w) + _G)


def _zigzag_np(x):
    x = np.asarray(x, dtype=np.int64)
    return (x.astype(np.uint64) << _ONE) ^ (x >> np.int64(63)).astype(np.uint64)


def uniform_array(pre, i, j):
    with np.errstate(over="ignore"):
        pre = np.asarray(pre, dtype=np.uint64)
        w = _absorb_np(_absorb_np(pre, _zigzag_np(i)), _zigzag_np(j))
    return ((w >> _S12).astype(np.float64) + 0.5) * UNIT


def _lookup_np(cdf_rows, u):
    # cdf_rows[..., z]; first z with cdf > u (the sentinel guarantees one exists)
    return np.argmax(cdf_rows > u[..., None], axis=-1).astype(np.int32)


def forward_field(seed, reps, m, n, bottom, left, delta, phi_cdf, res_cdf, namespace=0):
    reps = np.asarray(reps, dtype=np.int64)
    nrep = len(reps)
    base = namespace * STREAM_STRIDE
    pz = np.array([prefix(seed, int(r), base + STREAM_Z) for r in reps], dtype=np.uint64)
    pv = np.array([prefix(seed, int(r), base + STREAM_V) for r in reps], dtype=np.uint64)
    pu = np.array([prefix(seed, int(r), base + STREAM_U) for r in reps], dtype=np.uint64)
    phi_cdf = np.asarray(phi_cdf, dtype=np.float64)
    res_cdf = np.asarray(res_cdf, dtype=np.float64)
    X = np.zeros((nrep, m + 1, n + 1), dtype=np.int32)
    X[:, 1:, 0] = np.asarray(bottom, dtype=np.int32)
    X[:, 0, 1:] = np.asarray(left, dtype=np.int32)
    # one anti-diagonal at a time, all replicates at once
    for s in range(2, m + n + 1):
        ii = np.arange(max(1, s - n), min(m, s - 1) + 1)
        jj = s - ii
        shape = (nrep, len(ii))
        I = np.broadcast_to(ii, shape)
        J = np.broadcast_to(jj, shape)
        if delta <= 0.0:
            z = np.ones(shape, dtype=bool)
        elif delta >= 1.0:
            z = np.zeros(shape, dtype=bool)
        else:
            z = uniform_array(pz[:, None], I, J) >= delta
        val = np.empty(shape, dtype=np.int32)
        if (~z).any():
            uv = uniform_array(pv[:, None], I, J)
            val[~z] = _lookup_np(phi_cdf[None, :], uv[~z])
        if z.any():
            uu = uniform_array(pu[:, None], I, J)
            y1 = X[:, ii - 1, jj]
            y2 = X[:, ii, jj - 1]
            val[z] = _lookup_np(res_cdf[y1[z], y2[z]], uu[z])
        X[:, ii, jj] = val
    return X[:, 1:, 1:].copy()


def perfect_site(seed, reps, m, n, delta, phi_cdf, res_cdf, step_limit, evaluate=True,
                 namespace=0):
    from .auxrand import SitePlan
    from .errors import StepLimitExceeded
    from .lattice import Box
    from .percolation import build_cluster
    from .sampler import evaluate_cluster

    reps = np.asarray(reps, dtype=np.int64)
    nrep = len(reps)
    values = np.zeros((nrep, m, n) if evaluate else (nrep, 0, 0), dtype=np.int32)
    b_size = np.empty(nrep, dtype=np.int64)
    omega_size = np.empty(nrep, dtype=np.int64)
    kmax = np.empty(nrep, dtype=np.int64)
    box = Box(m, n)
    for r, rep in enumerate(reps):
        plan = SitePlan(seed, int(rep), delta, namespace=namespace)
        try:
            c = build_cluster(plan, box, step_limit)
        except StepLimitExceeded as exc:
            b_size[r] = -1
            omega_size[r] = exc.stats["visited"]
            kmax[r] = exc.stats["layers"]
            continue
        b_size[r] = len(c.b_of_lambda)
        omega_size[r] = len(c.omega)
        kmax[r] = c.kmax
        if evaluate:
            vals = evaluate_cluster(plan, c, phi_cdf, res_cdf)
            for (i, j), x in vals.items():
                if i >= 1 and j >= 1:
                    values[r, i - 1, j - 1] = x
    return values, b_size, omega_size, kmax
