# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. See ``_fallback`` for the reference semantics."""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt, tanh

cnp.import_array()

cdef int MAX_SWEEPS = 100
cdef Py_ssize_t RESYNC = 1024


def jacobi_eigh(A, double tol=1e-14):
    cdef double[:, ::1] a = np.array(A, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = a.shape[0]
    V_arr = np.eye(n)
    cdef double[:, ::1] V = V_arr
    cdef Py_ssize_t p, q, k
    cdef double fro = 0.0, off = 0.0, apq, diff, theta, t, c, s, x0, x1
    cdef int sweeps = 0
    for p in range(n):
        for q in range(n):
            fro += a[p, q] * a[p, q]
            if p != q:
                off += a[p, q] * a[p, q]
    off = sqrt(off)
    fro = sqrt(fro)
    while off > tol * fro and sweeps < MAX_SWEEPS:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if fabs(apq) < 1e-36 * fabs(diff):
                    t = apq / diff  # tiny angle, avoids overflow in theta**2
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    x0 = a[k, p]
                    x1 = a[k, q]
                    a[k, p] = c * x0 - s * x1
                    a[k, q] = s * x0 + c * x1
                for k in range(n):
                    x0 = a[p, k]
                    x1 = a[q, k]
                    a[p, k] = c * x0 - s * x1
                    a[q, k] = s * x0 + c * x1
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    x0 = V[k, p]
                    x1 = V[k, q]
                    V[k, p] = c * x0 - s * x1
                    V[k, q] = s * x0 + c * x1
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += a[p, q] * a[p, q]
        off = sqrt(off)
    w = np.empty(n)
    for p in range(n):
        w[p] = a[p, p]
    order = np.argsort(w, kind="stable")
    return w[order], V_arr[:, order], sweeps, off


cdef double _energy(const double[:, ::1] J, const double[::1] h, double[::1] x, Py_ssize_t n) noexcept nogil:
    cdef double e = 0.0, acc
    cdef Py_ssize_t i, j
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += J[i, j] * x[j]
        e += 0.5 * x[i] * acc + h[i] * x[i]
    return e


def log_weights(J, h):
    """Gray-code enumeration of 0.5<x,Jx> + <h,x>, resynchronised every 1024 states."""
    cdef const double[:, ::1] Jv = np.ascontiguousarray(J, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t n = hv.shape[0]
    cdef Py_ssize_t N = (<Py_ssize_t>1) << n
    out_arr = np.empty(N)
    cdef double[::1] out = out_arr
    cdef double[::1] x = np.ones(n)
    cdef double[::1] m = np.empty(n)
    cdef Py_ssize_t g, prev, cur, i, k, idx, bit
    cdef double e, xi
    with nogil:
        for i in range(n):
            m[i] = hv[i]
            for k in range(n):
                if k != i:
                    m[i] += Jv[i, k] * x[k]
        e = _energy(Jv, hv, x, n)
        out[0] = e
        prev = 0
        for g in range(1, N):
            cur = g ^ (g >> 1)
            bit = cur ^ prev
            i = 0
            while (bit >> i) != 1:
                i += 1
            xi = x[i]
            e -= 2.0 * xi * m[i]
            x[i] = -xi
            for k in range(n):
                if k != i:
                    m[k] -= 2.0 * xi * Jv[k, i]
            if (g & (RESYNC - 1)) == 0:
                e = _energy(Jv, hv, x, n)
                for k in range(n):
                    m[k] = hv[k]
                    for idx in range(n):
                        if idx != k:
                            m[k] += Jv[k, idx] * x[idx]
            out[cur] = e
            prev = cur
    return out_arr


def glauber_run(J, h, cnp.int8_t[::1] x, const cnp.int64_t[::1] sites, const double[::1] uniforms, Py_ssize_t record_every):
    cdef const double[:, ::1] Jv = np.ascontiguousarray(J, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t T = sites.shape[0]
    cdef Py_ssize_t nrec = T // record_every
    mags_arr = np.empty(nrec, dtype=np.int64)
    idxs_arr = np.full(nrec, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] mags = mags_arr
    cdef cnp.int64_t[::1] idxs = idxs_arr
    cdef double[::1] m = np.empty(n)
    cdef Py_ssize_t i, j, k, r = 0
    cdef cnp.int64_t idx = 0, mag = 0
    cdef bint track = n <= 62
    cdef cnp.int8_t new, old
    cdef double diff, p_plus
    with nogil:
        for i in range(n):
            m[i] = hv[i]
            for j in range(n):
                if j != i:
                    m[i] += Jv[i, j] * (<double>x[j])
                else:
                    m[i] += 0.0
            mag += x[i]
            if track and x[i] < 0:
                idx |= (<cnp.int64_t>1) << i
        for k in range(T):
            i = sites[k]
            p_plus = 0.5 * (1.0 + tanh(m[i]))
            new = 1 if uniforms[k] < p_plus else -1
            old = x[i]
            if new != old:
                x[i] = new
                diff = 2.0 * new
                for j in range(n):
                    if j != i:
                        m[j] += Jv[j, i] * diff
                mag += 2 * new
                if track:
                    idx ^= (<cnp.int64_t>1) << i
            if (k + 1) % record_every == 0:
                mags[r] = mag
                if track:
                    idxs[r] = idx
                r += 1
    return mags_arr, idxs_arr


def influence_max(w, double b, double c):
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t m = wv.shape[0]
    cdef Py_ssize_t N = (<Py_ssize_t>1) << m
    cdef Py_ssize_t g, cur, prev = 0, i, bit
    cdef double s = 0.0, best, val
    with nogil:
        for i in range(m):
            s += wv[i]
        best = fabs(tanh(s + b + c) - tanh(s + b - c))
        for g in range(1, N):
            cur = g ^ (g >> 1)
            bit = cur ^ prev
            i = 0
            while (bit >> i) != 1:
                i += 1
            if cur & bit:
                s -= 2.0 * wv[i]
            else:
                s += 2.0 * wv[i]
            val = fabs(tanh(s + b + c) - tanh(s + b - c))
            if val > best:
                best = val
            prev = cur
    return best
