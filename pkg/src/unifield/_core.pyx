# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled kernels: keyed uniforms, forward fields and the site perfect sampler.

Mirrors ``unifield._purecore`` function for function; both must return
bit-identical results.
"""
from libc.stdint cimport int32_t, int64_t, uint32_t, uint64_t
from libcpp.algorithm cimport sort
from libcpp.pair cimport pair
from libcpp.unordered_map cimport unordered_map
from libcpp.unordered_set cimport unordered_set
from libcpp.vector cimport vector

import numpy as np

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef int STREAM_Z = 1
cdef int STREAM_V = 2
cdef int STREAM_U = 3
cdef int STREAM_STRIDE = 16


cdef inline uint64_t mix64(uint64_t x) noexcept nogil:
    x ^= x >> 30
    x *= 0xBF58476D1CE4E5B9ULL
    x ^= x >> 27
    x *= 0x94D049BB133111EBULL
    x ^= x >> 31
    return x


cdef inline uint64_t absorb(uint64_t h, uint64_t w) noexcept nogil:
    return mix64((h ^ w) + GAMMA)


cdef inline uint64_t zigzag(int64_t x) noexcept nogil:
    return (<uint64_t>x << 1) ^ <uint64_t>(x >> 63)


cdef inline double to_unit(uint64_t w) noexcept nogil:
    return (<double>(w >> 12) + 0.5) * 2.220446049250313e-16


cdef inline uint64_t c_prefix(uint64_t seed, uint64_t rep, uint64_t stream) noexcept nogil:
    return absorb(absorb(mix64(seed + GAMMA), rep), stream)


cdef inline double c_uniform(uint64_t pre, int64_t i, int64_t j) noexcept nogil:
    return to_unit(absorb(absorb(pre, zigzag(i)), zigzag(j)))


cdef inline int c_lookup(const double* row, double u) noexcept nogil:
    cdef int z = 0
    while row[z] <= u:
        z += 1
    return z


cdef inline uint64_t pack(int64_t i, int64_t j) noexcept nogil:
    return (<uint64_t>(<uint32_t>i) << 32) | <uint64_t>(<uint32_t>j)


cdef inline int64_t unpack_i(uint64_t key) noexcept nogil:
    return <int32_t>(key >> 32)


cdef inline int64_t unpack_j(uint64_t key) noexcept nogil:
    return <int32_t>(key & 0xFFFFFFFFULL)


def prefix(seed, rep, stream):
    M = 0xFFFFFFFFFFFFFFFF
    return c_prefix(seed & M, rep & M, stream & M)


def uniform_at(uint64_t pre, int64_t i, int64_t j):
    return c_uniform(pre, i, j)


def uniform_array(pre, i, j):
    """Vectorised :func:`uniform_at`; ``pre`` may be a scalar or an array."""
    pre = np.asarray(pre, dtype=np.uint64)
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    shape = np.broadcast_shapes(pre.shape, i.shape, j.shape)
    cdef const uint64_t[:] P = np.ascontiguousarray(np.broadcast_to(pre, shape)).ravel()
    cdef const int64_t[:] I = np.ascontiguousarray(np.broadcast_to(i, shape)).ravel()
    cdef const int64_t[:] J = np.ascontiguousarray(np.broadcast_to(j, shape)).ravel()
    out = np.empty(P.shape[0], dtype=np.float64)
    cdef double[:] O = out
    cdef Py_ssize_t k
    with nogil:
        for k in range(P.shape[0]):
            O[k] = c_uniform(P[k], I[k], J[k])
    return out.reshape(shape)


def forward_field(seed, reps, int m, int n, bottom, left, double delta,
                  phi_cdf, res_cdf, int namespace=0):
    """Forward recursion on ``{1..m} x {1..n}`` for each replicate key in ``reps``.

    ``bottom[r, i-1]`` is the value at ``(i, 0)`` and ``left[r, j-1]`` at ``(0, j)``.
    Returns an ``int32`` array indexed ``[r, i-1, j-1]``.
    """
    M = 0xFFFFFFFFFFFFFFFF
    cdef uint64_t useed = seed & M
    cdef const int64_t[:] R = np.ascontiguousarray(reps, dtype=np.int64)
    cdef const int32_t[:, :] B = np.ascontiguousarray(bottom, dtype=np.int32)
    cdef const int32_t[:, :] L = np.ascontiguousarray(left, dtype=np.int32)
    cdef int ns = phi_cdf.shape[0]
    cdef const double[:] PHI = np.ascontiguousarray(phi_cdf, dtype=np.float64)
    cdef const double[:, :, :] RES = np.ascontiguousarray(res_cdf, dtype=np.float64)
    out = np.empty((R.shape[0], m, n), dtype=np.int32)
    cdef int32_t[:, :, :] O = out
    cdef int32_t[:, :] X = np.empty((m + 1, n + 1), dtype=np.int32)
    cdef Py_ssize_t r, i, j
    cdef uint64_t pz, pv, pu, rk
    cdef int z
    cdef uint64_t sz = namespace * STREAM_STRIDE + STREAM_Z
    cdef uint64_t sv = namespace * STREAM_STRIDE + STREAM_V
    cdef uint64_t su = namespace * STREAM_STRIDE + STREAM_U
    with nogil:
        for r in range(R.shape[0]):
            rk = <uint64_t>R[r]
            pz = c_prefix(useed, rk, sz)
            pv = c_prefix(useed, rk, sv)
            pu = c_prefix(useed, rk, su)
            for i in range(1, m + 1):
                X[i, 0] = B[r, i - 1]
            for j in range(1, n + 1):
                X[0, j] = L[r, j - 1]
            for i in range(1, m + 1):
                for j in range(1, n + 1):
                    if delta <= 0.0:
                        z = 1
                    elif delta >= 1.0:
                        z = 0
                    else:
                        z = c_uniform(pz, i, j) >= delta
                    if z == 0:
                        X[i, j] = c_lookup(&PHI[0], c_uniform(pv, i, j))
                    else:
                        X[i, j] = c_lookup(&RES[X[i - 1, j], X[i, j - 1], 0],
                                           c_uniform(pu, i, j))
                    O[r, i - 1, j - 1] = X[i, j]
    return out


cdef inline int z_at(uint64_t pz, double delta, int64_t i, int64_t j) noexcept nogil:
    if delta >= 1.0:
        return 0
    if delta <= 0.0:
        return 1
    return c_uniform(pz, i, j) >= delta


def perfect_site(seed, reps, int m, int n, double delta, phi_cdf, res_cdf,
                 int64_t step_limit, bint evaluate=True, int namespace=0):
    """Backward cluster construction plus evaluation for every replicate.

    Returns ``(values, b_size, omega_size, kmax)``; replicates that hit the
    step limit get ``b_size = -1`` and undefined values.
    """
    M = 0xFFFFFFFFFFFFFFFF
    cdef uint64_t useed = seed & M
    cdef const int64_t[:] R = np.ascontiguousarray(reps, dtype=np.int64)
    cdef Py_ssize_t nrep = R.shape[0]
    cdef const double[:] PHI = np.ascontiguousarray(phi_cdf, dtype=np.float64)
    cdef const double[:, :, :] RES = np.ascontiguousarray(res_cdf, dtype=np.float64)
    if evaluate:
        values = np.zeros((nrep, m, n), dtype=np.int32)
    else:
        values = np.zeros((nrep, 0, 0), dtype=np.int32)
    b_size = np.empty(nrep, dtype=np.int64)
    omega_size = np.empty(nrep, dtype=np.int64)
    kmax_out = np.empty(nrep, dtype=np.int64)
    cdef int32_t[:, :, :] V = values
    cdef int64_t[:] BS = b_size
    cdef int64_t[:] OS = omega_size
    cdef int64_t[:] KM = kmax_out
    cdef int32_t[:, :] X = np.empty((m + 1, n + 1), dtype=np.int32)

    cdef unordered_set[uint64_t] visited
    cdef unordered_set[uint64_t] ext
    cdef unordered_map[uint64_t, int32_t] outside
    cdef vector[uint64_t] cur, nxt
    cdef vector[pair[uint64_t, uint64_t]] order
    cdef pair[uint64_t, uint64_t] item
    cdef uint64_t key, pkey, pz, pv, pu, rk
    cdef int64_t i, j, pi, pj, steps, layer, kmax, n_out
    cdef Py_ssize_t r, t, q
    cdef int a, y1, y2
    cdef bint failed
    cdef int64_t OFF = 1 << 30
    cdef uint64_t sz = namespace * STREAM_STRIDE + STREAM_Z
    cdef uint64_t sv = namespace * STREAM_STRIDE + STREAM_V
    cdef uint64_t su = namespace * STREAM_STRIDE + STREAM_U

    with nogil:
        for r in range(nrep):
            rk = <uint64_t>R[r]
            pz = c_prefix(useed, rk, sz)
            pv = c_prefix(useed, rk, sv)
            pu = c_prefix(useed, rk, su)
            visited.clear()
            ext.clear()
            outside.clear()
            cur.clear()
            nxt.clear()
            # layer 0: internal boundary of the box with Z = 1
            for j in range(1, n + 1):
                if z_at(pz, delta, 1, j):
                    key = pack(1, j)
                    visited.insert(key)
                    cur.push_back(key)
            for i in range(2, m + 1):
                if z_at(pz, delta, i, 1):
                    key = pack(i, 1)
                    visited.insert(key)
                    cur.push_back(key)
            steps = 0
            layer = 0
            kmax = 0
            failed = False
            while cur.size() > 0:
                kmax = layer
                nxt.clear()
                for t in range(<Py_ssize_t>cur.size()):
                    steps += 1
                    if steps > step_limit:
                        failed = True
                        break
                    key = cur[t]
                    i = unpack_i(key)
                    j = unpack_j(key)
                    for a in range(2):
                        pi = i - 1 if a == 0 else i
                        pj = j if a == 0 else j - 1
                        pkey = pack(pi, pj)
                        if visited.count(pkey) == 0 and z_at(pz, delta, pi, pj):
                            visited.insert(pkey)
                            nxt.push_back(pkey)
                if failed:
                    break
                cur.swap(nxt)
                layer += 1
            if failed:
                BS[r] = -1
                OS[r] = <int64_t>visited.size()
                KM[r] = layer
                continue
            for key in visited:
                i = unpack_i(key)
                j = unpack_j(key)
                for a in range(2):
                    pi = i - 1 if a == 0 else i
                    pj = j if a == 0 else j - 1
                    pkey = pack(pi, pj)
                    if visited.count(pkey) == 0:
                        ext.insert(pkey)
            order.clear()
            for key in visited:
                i = unpack_i(key)
                j = unpack_j(key)
                if i < 1 or j < 1:
                    item.first = (<uint64_t>(i + j + OFF) << 32) | <uint64_t>(i + OFF)
                    item.second = key
                    order.push_back(item)
            for key in ext:
                i = unpack_i(key)
                j = unpack_j(key)
                if i < 1 or j < 1:
                    item.first = (<uint64_t>(i + j + OFF) << 32) | <uint64_t>(i + OFF)
                    item.second = key
                    order.push_back(item)
            n_out = <int64_t>order.size()
            BS[r] = m * n + n_out
            OS[r] = <int64_t>(visited.size() + ext.size())
            KM[r] = kmax
            if not evaluate:
                continue
            sort(order.begin(), order.end())
            for q in range(<Py_ssize_t>order.size()):
                key = order[q].second
                i = unpack_i(key)
                j = unpack_j(key)
                if z_at(pz, delta, i, j) == 0:
                    outside[key] = c_lookup(&PHI[0], c_uniform(pv, i, j))
                else:
                    y1 = outside[pack(i - 1, j)]
                    y2 = outside[pack(i, j - 1)]
                    outside[key] = c_lookup(&RES[y1, y2, 0], c_uniform(pu, i, j))
            for i in range(1, m + 1):
                for j in range(1, n + 1):
                    if z_at(pz, delta, i, j) == 0:
                        X[i, j] = c_lookup(&PHI[0], c_uniform(pv, i, j))
                    else:
                        y1 = X[i - 1, j] if i > 1 else outside[pack(0, j)]
                        y2 = X[i, j - 1] if j > 1 else outside[pack(i, 0)]
                        X[i, j] = c_lookup(&RES[y1, y2, 0], c_uniform(pu, i, j))
                    V[r, i - 1, j - 1] = X[i, j]
    return values, b_size, omega_size, kmax_out
