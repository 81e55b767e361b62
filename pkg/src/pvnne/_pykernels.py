"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` one for one and are used when the compiled
extension is unavailable (or when ``PVNNE_PURE_PYTHON=1``).

Parameter layout shared by every MLP kernel: for each layer transition the
weight matrix (fan_out x fan_in, row-major) followed by the bias vector.
Activation codes: 0 linear, 1 tanh, 2 logistic sigmoid.
"""

import numpy as np

LINEAR, TANH, SIGMOID = 0, 1, 2


def _act(z, code):
    if code == TANH:
        return np.tanh(z)
    if code == SIGMOID:
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _act_inplace(z, code):
    if code == TANH:
        return np.tanh(z, out=z)
    if code == SIGMOID:
        return _act(z, code)
    return z


def _dact(a, code):
    # derivative expressed through the activation value
    if code == TANH:
        return 1.0 - a * a
    if code == SIGMOID:
        return a * (1.0 - a)
    return np.ones_like(a)


def dwt_periodic(x, lo, hi):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    m = n // 2
    idx = (2 * np.arange(m)[:, None] + np.arange(len(lo))[None, :]) % n
    seg = x[idx]
    return seg @ lo, seg @ hi


def idwt_periodic(a, d, lo, hi):
    a = np.asarray(a, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    m = a.shape[0]
    n = 2 * m
    idx = (2 * np.arange(m)[:, None] + np.arange(len(lo))[None, :]) % n
    contrib = a[:, None] * lo[None, :] + d[:, None] * hi[None, :]
    return np.bincount(idx.ravel(), weights=contrib.ravel(), minlength=n)


def mlp_forward(params, sizes, acts, X):
    A = np.ascontiguousarray(X, dtype=np.float64)
    off = 0
    for l in range(1, len(sizes)):
        fin, fout = sizes[l - 1], sizes[l]
        W = params[off:off + fout * fin].reshape(fout, fin)
        off += fout * fin
        b = params[off:off + fout]
        off += fout
        A = _act(A @ W.T + b, acts[l - 1])
    return A


def swarm_mse(positions, sizes, acts, X, Y):
    """Mean squared error of every particle's network on (X, Y)."""
    P = positions.shape[0]
    if len(sizes) == 3:
        fin, h, m = sizes
        n = X.shape[0]
        o = h * fin + h
        # hidden layer of every particle in one GEMM, (P*h) x n, with the
        # biases folded in as a column of ones
        Wb = np.empty((P * h, fin + 1))
        Wb[:, :fin] = positions[:, :h * fin].reshape(P * h, fin)
        Wb[:, fin] = positions[:, h * fin:o].reshape(-1)
        X1 = np.ones((fin + 1, n))
        X1[:fin] = X.T
        H = _act_inplace(Wb @ X1, acts[0]).reshape(P, h, n)
        out = np.matmul(positions[:, o:o + m * h].reshape(P, m, h), H)
        out += positions[:, o + m * h:o + m * h + m][:, :, None]
        r = _act(out, acts[1]) - Y.T[None, :, :]
        return np.mean(r * r, axis=(1, 2))
    A = np.broadcast_to(np.asarray(X, dtype=np.float64), (P,) + X.shape)
    off = 0
    for l in range(1, len(sizes)):
        fin, fout = sizes[l - 1], sizes[l]
        W = positions[:, off:off + fout * fin].reshape(P, fout, fin)
        off += fout * fin
        b = positions[:, off:off + fout]
        off += fout
        A = _act(np.matmul(A, W.transpose(0, 2, 1)) + b[:, None, :], acts[l - 1])
    r = A - Y[None, :, :]
    return np.mean(r * r, axis=(1, 2))


def mlp_jacobian(params, sizes, acts, X):
    """Network output and d(output)/d(params).

    Rows of the Jacobian are ordered sample-major: row ``i * n_out + j`` is
    output ``j`` of sample ``i``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    L = len(sizes) - 1
    Ws, offs = [], []
    off = 0
    for l in range(1, L + 1):
        fin, fout = sizes[l - 1], sizes[l]
        offs.append(off)
        Ws.append(params[off:off + fout * fin].reshape(fout, fin))
        off += fout * fin
        Ws.append(params[off:off + fout])
        off += fout
    n_params = off
    activ = [X]
    for l in range(L):
        W, b = Ws[2 * l], Ws[2 * l + 1]
        activ.append(_act(activ[-1] @ W.T + b, acts[l]))
    out = activ[-1]
    m = sizes[-1]
    J = np.zeros((n, m, n_params))
    for j in range(m):
        delta = np.zeros((n, m))
        delta[:, j] = _dact(out[:, j], acts[L - 1])
        for l in range(L - 1, -1, -1):
            fin, fout = sizes[l], sizes[l + 1]
            o = offs[l]
            J[:, j, o:o + fout * fin] = (delta[:, :, None] * activ[l][:, None, :]).reshape(n, -1)
            J[:, j, o + fout * fin:o + fout * fin + fout] = delta
            if l > 0:
                delta = (delta @ Ws[2 * l]) * _dact(activ[l], acts[l - 1])
    return out, J.reshape(n * m, n_params)
