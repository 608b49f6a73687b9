# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Gaussian KDE derivative kernels.

Mirrors :mod:`densityridge._kernels_py` exactly; see that module for the
formulas. Every query is summed sequentially over the data, so results do
not depend on how queries are batched.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def kde_eval(const double[:, ::1] data, double sigma2, const double[:, ::1] queries,
             int order=2, double cutoff=0.0):
    cdef Py_ssize_t n = data.shape[0]
    cdef Py_ssize_t dim = data.shape[1]
    cdef Py_ssize_t m = queries.shape[0]
    cdef Py_ssize_t q, i, a, b
    cdef double r2, w, inv_s2 = 1.0 / sigma2, inv_s4 = inv_s2 * inv_s2
    cdef double cut2 = cutoff * cutoff * sigma2
    cdef double inv_n = 1.0 / n
    cdef double ksum, wsum

    dens_arr = np.zeros(m, dtype=np.float64)
    grad_arr = np.zeros((m, dim), dtype=np.float64)
    hess_arr = np.zeros((m, dim, dim), dtype=np.float64)
    cdef double[::1] dens = dens_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double[:, :, ::1] hess = hess_arr
    cdef double[::1] u = np.empty(dim, dtype=np.float64)

    with nogil:
        for q in range(m):
            ksum = 0.0
            for i in range(n):
                r2 = 0.0
                for a in range(dim):
                    u[a] = queries[q, a] - data[i, a]
                    r2 = r2 + u[a] * u[a]
                if cut2 > 0.0 and r2 > cut2:
                    continue
                w = exp(-0.5 * r2 * inv_s2)
                ksum = ksum + w
                if order >= 1:
                    for a in range(dim):
                        grad[q, a] -= w * u[a]
                if order >= 2:
                    for a in range(dim):
                        wsum = w * u[a]
                        for b in range(a, dim):
                            hess[q, a, b] += wsum * u[b]
            dens[q] = ksum * inv_n
            if order >= 1:
                for a in range(dim):
                    grad[q, a] = grad[q, a] * inv_s2 * inv_n
            if order >= 2:
                for a in range(dim):
                    for b in range(a, dim):
                        hess[q, a, b] = hess[q, a, b] * inv_s4 * inv_n
                    hess[q, a, a] -= ksum * inv_s2 * inv_n
                    for b in range(a + 1, dim):
                        hess[q, b, a] = hess[q, a, b]

    return (dens_arr,
            grad_arr if order >= 1 else None,
            hess_arr if order >= 2 else None)
