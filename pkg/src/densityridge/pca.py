"""Centered PCA used as a linear reduction step before ridge estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kde import PointCloud, as_point_cloud

__all__ = ["PcaResult", "pca_reduce"]


@dataclass(frozen=True)
class PcaResult:
    """Scores plus what is needed to map them back.

    ``components`` has shape ``(target_dim, D)`` with orthonormal rows; the
    reconstruction of the scores is ``scores @ components + mean``.
    """

    points: PointCloud
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def inverse(self, scores=None) -> np.ndarray:
        s = self.points.points if scores is None else np.asarray(scores, dtype=np.float64)
        return s @ self.components + self.mean


def pca_reduce(data, target_dim: int) -> PcaResult:
    """Project centered data onto its first ``target_dim`` principal axes.

    Component signs follow the same rule as Hessian eigenvectors: the
    largest-magnitude entry of each component is positive.
    """
    pts = as_point_cloud(data).points
    n, dim = pts.shape
    if not 1 <= target_dim < dim:
        raise InputError(f"target_dim must satisfy 1 <= target_dim < {dim}, got {target_dim}")
    mean = pts.mean(axis=0)
    centered = pts - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:target_dim]
    pivot = comps[np.arange(target_dim), np.argmax(np.abs(comps), axis=1)]
    comps = comps * np.where(pivot < 0, -1.0, 1.0)[:, None]
    var = s[:target_dim] ** 2 / max(n - 1, 1)
    return PcaResult(PointCloud(centered @ comps.T), mean, comps, var)
