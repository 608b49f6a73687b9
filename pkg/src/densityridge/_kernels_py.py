"""Pure-numpy Gaussian KDE derivative kernels (fallback for ``_kernels``).

With ``u = x - x_i`` and ``K = exp(-|u|^2 / 2 s2)``::

    p(x) = 1/n sum K
    g(x) = -1/n sum K u / s2
    H(x) = 1/n sum K (u u^T / s2^2 - I / s2)

Queries are processed in fixed-size chunks; each query's sums only touch its
own row, so results are independent of chunking.
"""

import numpy as np

_CHUNK = 256


def kde_eval(data, sigma2, queries, order=2, cutoff=0.0):
    data = np.ascontiguousarray(data, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    n, dim = data.shape
    m = queries.shape[0]
    dens = np.empty(m)
    grad = np.empty((m, dim)) if order >= 1 else None
    hess = np.empty((m, dim, dim)) if order >= 2 else None
    cut2 = cutoff * cutoff * sigma2

    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        u = queries[lo:hi, None, :] - data[None, :, :]
        r2 = np.einsum("qnd,qnd->qn", u, u)
        w = np.exp(-0.5 * r2 / sigma2)
        if cut2 > 0.0:
            w[r2 > cut2] = 0.0
        ksum = w.sum(axis=1)
        dens[lo:hi] = ksum / n
        if order >= 1:
            grad[lo:hi] = -np.einsum("qn,qnd->qd", w, u) / (sigma2 * n)
        if order >= 2:
            wu = w[:, :, None] * u
            h = np.einsum("qna,qnb->qab", wu, u) / (sigma2 * sigma2 * n)
            h -= (ksum / (sigma2 * n))[:, None, None] * np.eye(dim)
            hess[lo:hi] = h
    return dens, grad, hess
