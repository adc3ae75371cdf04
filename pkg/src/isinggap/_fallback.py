"""Pure-Python/numpy implementations of the hot kernels.

Signatures and results match ``_kernels.pyx``; these are selected when the
compiled module is unavailable or ``ISINGGAP_PURE=1``.
"""
import math

import numpy as np

MAX_SWEEPS = 100


def _off_norm(a):
    # summed directly; fro^2 - diag^2 cancels to ~1e-8 relative and stalls the sweep loop
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def jacobi_eigh(A, tol=1e-14):
    """Cyclic Jacobi rotations on a copy of symmetric ``A``.

    Returns ``(w, V, sweeps, off)`` with ``w`` ascending, eigenvectors in the
    columns of ``V`` and ``off`` the final off-diagonal Frobenius norm.
    """
    a = np.array(A, dtype=np.float64, copy=True)
    n = a.shape[0]
    V = np.eye(n)
    fro = math.sqrt(float(np.sum(a * a)))
    off = _off_norm(a)
    sweeps = 0
    while off > tol * fro and sweeps < MAX_SWEEPS:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-36 * abs(diff):
                    t = apq / diff  # tiny angle, avoids overflow in theta**2
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp = a[:, p].copy()
                colq = a[:, q]
                a[:, p] = c * colp - s * colq
                a[:, q] = s * colp + c * colq
                rowp = a[p, :].copy()
                rowq = a[q, :]
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
                a[p, q] = a[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        off = _off_norm(a)
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order], sweeps, off


def log_weights(J, h):
    """0.5<x,Jx> + <h,x> for every state index, bit i = 1 meaning x_i = -1."""
    J = np.asarray(J, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n = h.shape[0]
    N = 1 << n
    out = np.empty(N)
    chunk = 1 << 16
    bits = np.arange(n)
    for start in range(0, N, chunk):
        idx = np.arange(start, min(N, start + chunk))
        X = 1.0 - 2.0 * ((idx[:, None] >> bits) & 1)
        out[start:start + len(idx)] = 0.5 * np.einsum("ki,ij,kj->k", X, J, X) + X @ h
    return out


def glauber_run(J, h, x, sites, uniforms, record_every):
    """Heat-bath updates at the given sites, in place on the int8 spin array ``x``.

    Site k is set to +1 iff ``uniforms[k] < (1 + tanh(m)) / 2`` with
    ``m = sum_{j != i} J_ij x_j + h_i``. After every ``record_every`` updates
    the magnetization and (for n <= 62) the state index are recorded.
    """
    J = np.asarray(J, dtype=np.float64)
    n = x.shape[0]
    xs = x.astype(np.float64)
    m = np.array(h, dtype=np.float64, copy=True)
    for j in range(n):
        contrib = J[:, j] * xs[j]
        contrib[j] = 0.0
        m += contrib
    idx = 0
    if n <= 62:
        for i in range(n):
            if x[i] < 0:
                idx |= 1 << i
    mag = int(np.sum(x, dtype=np.int64))
    nrec = len(sites) // record_every
    mags = np.empty(nrec, dtype=np.int64)
    idxs = np.full(nrec, -1, dtype=np.int64)
    r = 0
    col = J.T
    for k in range(len(sites)):
        i = sites[k]
        p_plus = 0.5 * (1.0 + math.tanh(m[i]))
        new = 1 if uniforms[k] < p_plus else -1
        old = x[i]
        if new != old:
            x[i] = new
            diff = 2.0 * new
            mi = m[i]
            m += col[i] * diff
            m[i] = mi
            mag += 2 * new
            if n <= 62:
                idx ^= 1 << i
        if (k + 1) % record_every == 0:
            mags[r] = mag
            if n <= 62:
                idxs[r] = idx
            r += 1
    return mags, idxs


def influence_max(w, b, c):
    """max over s in {sum_k +-w_k} of |tanh(s + b + c) - tanh(s + b - c)|."""
    sums = np.zeros(1)
    for wk in np.asarray(w, dtype=np.float64):
        sums = np.concatenate((sums + wk, sums - wk))
    return float(np.max(np.abs(np.tanh(sums + b + c) - np.tanh(sums + b - c))))
