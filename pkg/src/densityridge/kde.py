"""Gaussian kernel density estimate with analytic gradient and Hessian.

The estimate is left unnormalized::

    p(x) = 1/n sum_i exp(-|x - x_i|^2 / 2 s2)

where ``s2`` is the kernel variance (the squared length scale). Gradient and
Hessian are the exact derivatives of this expression, so all three are
mutually consistent. Only directions and ratios are used downstream, so the
missing normalizing constant is irrelevant.

Eigenvector convention
----------------------
Eigenvalues are sorted in descending order. At a point on a ``d``-dimensional
density ridge the ``d`` largest eigenvalues belong to directions *along* the
ridge (the density is nearly flat there) and the ``D - d`` smallest, most
negative eigenvalues belong to directions *across* it. Accordingly::

    q_par  = eigenvectors of the d largest eigenvalues      (tangent space)
    q_perp = eigenvectors of the D - d smallest eigenvalues (normal space)

Repeated eigenvalues get an arbitrary orthonormal basis of their eigenspace;
callers must not rely on a unique basis in that case.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InputError, NumericalError

__all__ = [
    "PointCloud",
    "DensityModel",
    "HessianSpectrum",
    "as_point_cloud",
    "density",
    "gradient",
    "hessian",
    "spectrum",
    "decompose",
    "bandwidth_heuristic",
]


@dataclass(frozen=True)
class PointCloud:
    """An ``(n, D)`` array of finite sample points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InputError(f"point cloud must be a non-empty (n, D) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InputError("point cloud contains non-finite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.count


def as_point_cloud(data) -> PointCloud:
    if isinstance(data, PointCloud):
        return data
    return PointCloud(np.asarray(data, dtype=np.float64))


@dataclass(frozen=True)
class DensityModel:
    """Immutable KDE: reference points plus kernel variance ``bandwidth``.

    Parameters
    ----------
    data : PointCloud or array_like
        Reference points, shape ``(n, D)``.
    bandwidth : float
        Kernel variance s2 (squared length units). Use
        ``bandwidth_heuristic(data) ** 2`` for the nearest-neighbour rule.
    cutoff : float, optional
        If positive, kernel terms further than ``cutoff * sqrt(bandwidth)``
        from the query are skipped. Off by default.
    """

    data: PointCloud
    bandwidth: float
    cutoff: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "data", as_point_cloud(self.data))
        bw = float(self.bandwidth)
        if not np.isfinite(bw) or bw <= 0.0:
            raise InputError(f"bandwidth must be positive and finite, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", bw)
        if self.cutoff < 0:
            raise InputError("cutoff must be non-negative")

    @property
    def dim(self) -> int:
        return self.data.dim

    @property
    def sigma(self) -> float:
        """Kernel length scale ``sqrt(bandwidth)``."""
        return float(np.sqrt(self.bandwidth))

    def _queries(self, x) -> tuple[np.ndarray, bool]:
        q = np.asarray(x, dtype=np.float64)
        if q.ndim == 0:
            q = q.reshape(1)
        single = q.ndim == 1
        if single:
            q = q[None, :]
        if q.ndim != 2 or q.shape[1] != self.dim:
            raise InputError(f"query dimension mismatch: model has D={self.dim}, got shape {np.shape(x)}")
        if not np.all(np.isfinite(q)):
            raise InputError("query contains non-finite coordinates")
        return np.ascontiguousarray(q), single

    def evaluate(self, x, order: int = 2):
        """Return ``(density, gradient, hessian)`` at one or many queries.

        A 1-D ``x`` is one query and gives a scalar, a ``(D,)`` vector and a
        ``(D, D)`` matrix. A 2-D ``x`` of shape ``(m, D)`` gives stacked
        results. Entries beyond ``order`` are ``None``.
        """
        q, single = self._queries(x)
        dens, grad, hess = _backend.kde_eval(
            self.data.points, self.bandwidth, q, int(order), float(self.cutoff)
        )
        if single:
            return (
                float(dens[0]),
                None if grad is None else grad[0],
                None if hess is None else hess[0],
            )
        return dens, grad, hess

    def density(self, x):
        return self.evaluate(x, order=0)[0]

    def gradient(self, x):
        return self.evaluate(x, order=1)[1]

    def hessian(self, x):
        return self.evaluate(x, order=2)[2]

    def mean_shift(self, x):
        """Gradient rescaled by ``bandwidth / density``: the mean-shift vector."""
        dens, grad, _ = self.evaluate(x, order=1)
        dens = np.maximum(dens, np.finfo(float).tiny)
        if np.ndim(dens) == 0:
            return grad * (self.bandwidth / dens)
        return grad * (self.bandwidth / dens)[:, None]

    def spectrum(self, x, d: int) -> "HessianSpectrum":
        return spectrum(self, x, d)


def density(model: DensityModel, x) -> float:
    return model.density(x)


def gradient(model: DensityModel, x) -> np.ndarray:
    return model.gradient(x)


def hessian(model: DensityModel, x) -> np.ndarray:
    return model.hessian(x)


@dataclass(frozen=True)
class HessianSpectrum:
    """Sorted eigendecomposition of a symmetric matrix split at ``d``.

    ``eigenvectors[:, k]`` pairs with ``eigenvalues[k]``; eigenvalues are
    non-increasing. ``q_par`` holds the first ``d`` columns and ``q_perp`` the
    remaining ``D - d``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    d: int
    q_par: np.ndarray = field(init=False, repr=False)
    q_perp: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "q_par", self.eigenvectors[..., :, : self.d])
        object.__setattr__(self, "q_perp", self.eigenvectors[..., :, self.d :])

    @property
    def perp_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[..., self.d :]

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues[..., None, :]) @ np.swapaxes(q, -1, -2)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column positive; argmax picks the first on ties
    idx = np.argmax(np.abs(vecs), axis=-2)
    pivot = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    signs = np.where(pivot < 0, -1.0, 1.0)
    return vecs * signs


def decompose(matrix, d: int, query=None) -> HessianSpectrum:
    """Eigen-split one symmetric matrix, or a stack of them, at ``d``.

    Raises
    ------
    NumericalError
        If the eigensolver fails or the input is not finite; ``query`` is
        attached to the error for diagnosis.
    """
    h = np.asarray(matrix, dtype=np.float64)
    dim = h.shape[-1]
    if not 0 <= d <= dim:
        raise InputError(f"split index d={d} outside [0, {dim}]")
    if not np.all(np.isfinite(h)):
        raise NumericalError("non-finite Hessian", point=query)
    try:
        vals, vecs = np.linalg.eigh(0.5 * (h + np.swapaxes(h, -1, -2)))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}", point=query) from exc
    vals = vals[..., ::-1]
    vecs = _fix_signs(vecs[..., :, ::-1])
    return HessianSpectrum(eigenvalues=vals, eigenvectors=vecs, d=d)


def spectrum(model: DensityModel, x, d: int) -> HessianSpectrum:
    """Hessian spectrum at ``x`` with the tangent block of size ``d``.

    Requires ``1 <= d < D``.
    """
    if not 1 <= d < model.dim:
        raise InputError(f"intrinsic dimension must satisfy 1 <= d < {model.dim}, got {d}")
    return decompose(model.hessian(x), d, query=np.asarray(x))


def bandwidth_heuristic(data, k: int = 12) -> float:
    """Mean distance from each point to its ``k``-th nearest neighbour.

    The result is a kernel *length*; square it before passing it to
    :class:`DensityModel`.
    """
    pts = as_point_cloud(data).points
    n = pts.shape[0]
    if k < 1 or n <= k:
        raise InputError(f"need more than k={k} points for the bandwidth heuristic, got {n}")
    from scipy.spatial import cKDTree

    dist, _ = cKDTree(pts).query(pts, k=k + 1)
    # column 0 is the point itself
    return float(np.mean(dist[:, k]))
