# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same signatures and semantics as ``_pykernels``.

Dense products go through BLAS and transcendental activations through numpy's
SIMD ufuncs; the loops here fuse the remaining work (bias, output layer,
squared-error reduction, Jacobian assembly, circular filter bank) without
allocating temporaries.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF LINEAR = 0
DEF TANH = 1
DEF SIGMOID = 2


cdef _activate(Z, int code):
    if code == TANH:
        np.tanh(Z, out=Z)
    elif code == SIGMOID:
        np.negative(Z, out=Z)
        np.exp(Z, out=Z)
        Z += 1.0
        np.reciprocal(Z, out=Z)


cdef inline double _dact(double a, int code) noexcept nogil:
    if code == TANH:
        return 1.0 - a * a
    if code == SIGMOID:
        return a * (1.0 - a)
    return 1.0


def dwt_periodic(x, lo, hi):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = n // 2, L = lv.shape[0]
    a = np.empty(m)
    d = np.empty(m)
    cdef double[::1] av = a, dv = d
    cdef Py_ssize_t i, k, j
    cdef double sa, sd, v
    with nogil:
        for i in range(m):
            sa = 0.0
            sd = 0.0
            j = 2 * i
            for k in range(L):
                v = xv[(j + k) % n]
                sa = sa + lv[k] * v
                sd = sd + hv[k] * v
            av[i] = sa
            dv[i] = sd
    return a, d


def idwt_periodic(a, d, lo, hi):
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t m = av.shape[0], n = 2 * m, L = lv.shape[0]
    x = np.zeros(n)
    cdef double[::1] xv = x
    cdef Py_ssize_t i, k
    with nogil:
        for i in range(m):
            for k in range(L):
                xv[(2 * i + k) % n] += av[i] * lv[k] + dv[i] * hv[k]
    return x


def _split(params, sizes):
    layers = []
    off = 0
    for l in range(1, len(sizes)):
        fin, fout = sizes[l - 1], sizes[l]
        W = params[off:off + fout * fin].reshape(fout, fin)
        off += fout * fin
        layers.append((W, params[off:off + fout]))
        off += fout
    return layers


def _forward_all(params, sizes, acts, X):
    activ = [X]
    for l, (W, b) in enumerate(_split(params, sizes)):
        Z = activ[l] @ W.T
        Z += b
        _activate(Z, acts[l])
        activ.append(Z)
    return activ


def mlp_forward(params, sizes, acts, X):
    params = np.ascontiguousarray(params, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    return _forward_all(params, sizes, acts, X)[len(sizes) - 1]


def swarm_mse(positions, sizes, acts, X, Y):
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t P = positions.shape[0], n = X.shape[0]
    out = np.empty(P)
    cdef double[::1] ov = out
    cdef Py_ssize_t p, i, j, k, m, h, o
    cdef double s, r, acc
    if len(sizes) != 3:
        for p in range(P):
            res = _forward_all(positions[p], sizes, acts, X)[len(sizes) - 1] - Y
            out[p] = np.mean(res * res)
        return out
    fin, h, m = sizes
    o = h * fin + h
    # hidden layer of every particle in one GEMM, laid out (P*h) x n so the
    # output layer becomes a batched product over contiguous rows
    # biases ride along as an extra input column of ones, saving a pass over Zt
    Wb = np.empty((P * h, fin + 1))
    Wb[:, :fin] = positions[:, :h * fin].reshape(P * h, fin)
    Wb[:, fin] = positions[:, h * fin:o].reshape(-1)
    X1 = np.ones((fin + 1, n))
    X1[:fin] = X.T
    Zt = Wb @ X1
    _activate(Zt, acts[0])
    O = np.matmul(positions[:, o:o + m * h].reshape(P, m, h), Zt.reshape(P, h, n))
    O += positions[:, o + m * h:o + m * h + m][:, :, None]
    _activate(O, acts[1])
    cdef const double[:, :, ::1] Ov = O
    with nogil:
        for p in range(P):
            acc = 0.0
            for j in range(m):
                for i in range(n):
                    r = Ov[p, j, i] - Yv[i, j]
                    acc = acc + r * r
            ov[p] = acc / (n * m)
    return out


def mlp_jacobian(params, sizes, acts, X):
    params = np.ascontiguousarray(params, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    activ = _forward_all(params, sizes, acts, X)
    cdef int L = len(sizes) - 1
    cdef int[::1] sz = np.asarray(sizes, dtype=np.intc)
    cdef int[::1] ac = np.asarray(acts, dtype=np.intc)
    cdef Py_ssize_t n = X.shape[0], m = sz[L]
    cdef Py_ssize_t l
    sz_np = np.asarray(sizes, dtype=np.intp)
    offs_np = np.zeros(L + 1, dtype=np.intp)
    offs_np[1:] = np.cumsum(sz_np[1:] * sz_np[:-1] + sz_np[1:])
    aoffs_np = np.zeros(L + 2, dtype=np.intp)
    aoffs_np[1:] = np.cumsum(sz_np)
    # all activations of a sample laid out contiguously: row i of A
    A_np = np.ascontiguousarray(np.hstack(activ))
    cdef Py_ssize_t[::1] offs = offs_np, aoffs = aoffs_np
    cdef Py_ssize_t n_params = offs[L]
    cdef int widest = max(sizes)
    J_np = np.zeros((n * m, n_params))
    delta_np = np.empty(widest)
    prev_np = np.empty(widest)
    cdef const double[::1] pv = params
    cdef const double[:, ::1] A = A_np
    cdef double[:, ::1] J = J_np
    cdef double[::1] delta = delta_np, prev = prev_np
    cdef Py_ssize_t i, j, k, q, fin, fout, wo, row
    cdef double s
    with nogil:
        for i in range(n):
            for j in range(m):
                row = i * m + j
                for q in range(m):
                    delta[q] = 0.0
                delta[j] = _dact(A[i, aoffs[L] + j], ac[L - 1])
                for l in range(L, 0, -1):
                    fin = sz[l - 1]
                    fout = sz[l]
                    wo = offs[l - 1]
                    for q in range(fout):
                        if delta[q] != 0.0:
                            for k in range(fin):
                                J[row, wo + q * fin + k] = delta[q] * A[i, aoffs[l - 1] + k]
                        J[row, wo + fout * fin + q] = delta[q]
                    if l > 1:
                        for k in range(fin):
                            s = 0.0
                            for q in range(fout):
                                s = s + delta[q] * pv[wo + q * fin + k]
                            prev[k] = s * _dact(A[i, aoffs[l - 1] + k], ac[l - 2])
                        for k in range(fin):
                            delta[k] = prev[k]
    return activ[L], J_np
