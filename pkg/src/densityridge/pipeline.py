"""End-to-end runs shared by the command line and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .charts import Atlas, translate_1d, unfold_atlas
from .datasets import make_sphere
from .flow import FlowConfig, LocalUnwrap, find_modes, unwrap_local_1d
from .geodesic import GeodesicConfig
from .kde import DensityModel, bandwidth_heuristic
from .ridge import RidgeConfig, RidgeEstimate, project_cloud

__all__ = [
    "TABLE_BANDWIDTHS",
    "TABLE_NOISE",
    "resolve_bandwidth",
    "UnwrapRun",
    "run_unwrap",
    "sphere_mse",
    "mse_table",
]

TABLE_BANDWIDTHS = (0.1, 0.25, 0.5, 0.7, 1.0, 2.0)
TABLE_NOISE = (0.05, 0.1)


def resolve_bandwidth(data, bandwidth: Optional[float] = None, k: int = 12) -> float:
    """Explicit kernel variance, or the squared k-th neighbour heuristic."""
    if bandwidth is not None:
        return float(bandwidth)
    return bandwidth_heuristic(data, k) ** 2


@dataclass
class UnwrapRun:
    model: DensityModel
    estimate: RidgeEstimate
    local: LocalUnwrap
    atlas: Atlas
    d: int


def run_unwrap(data, d: int, bandwidth: float, knn: int = 12, ridge: RidgeConfig = RidgeConfig(),
               flow: FlowConfig = FlowConfig(), geo: GeodesicConfig = GeodesicConfig(),
               reference: Optional[int] = None) -> UnwrapRun:
    """Project, find modes and build global coordinates.

    ``d = 1`` uses arc-length charts stitched by translation; ``d >= 2``
    uses tangent charts, geodesics, transport and unfolding. Worker threads
    follow ``ridge.threads``.
    """
    model = DensityModel(data, bandwidth)
    est = project_cloud(model, model.data, d, ridge)
    if d == 1:
        local = unwrap_local_1d(model, est, flow)
        atlas = translate_1d(local, k=knn, reference=reference)
    else:
        modes, labels, trajs = find_modes(model, est, flow)
        local = LocalUnwrap(modes, [], labels, np.full((len(est), d), np.nan), np.flatnonzero(labels < 0),
                            trajs, est)
        atlas = unfold_atlas(model, local, k=knn, reference=reference, config=geo, threads=ridge.threads)
    return UnwrapRun(model, est, local, atlas, d)


@dataclass
class MseCell:
    bandwidth: float
    noise: float
    mse: float
    converged_fraction: float
    n_converged: int


def sphere_mse(points, bandwidth: float, ridge: RidgeConfig = RidgeConfig()) -> MseCell:
    """Mean of ``(|p| - 1)^2`` over converged ridge points of a sphere sample."""
    model = DensityModel(points, bandwidth)
    est = project_cloud(model, model.data, 2, ridge)
    conv = est.converged
    pos = est.positions[conv]
    mse = float(np.mean((np.linalg.norm(pos, axis=1) - 1.0) ** 2)) if len(pos) else float("nan")
    return MseCell(bandwidth, float("nan"), mse, float(conv.mean()), int(conv.sum()))


def mse_table(n: int = 1000, seed: int = 0, bandwidths=TABLE_BANDWIDTHS, noises=TABLE_NOISE,
              ridge: RidgeConfig = RidgeConfig()) -> list:
    """Ridge MSE on the unit sphere over a bandwidth by noise grid.

    The noise level is the standard deviation of the additive Gaussian
    noise; one sphere sample per noise level is shared by all bandwidths.
    """
    cells = []
    for eps in noises:
        ds = make_sphere(n=n, noise_sd=eps, seed=seed)
        for bw in bandwidths:
            cell = sphere_mse(ds.points, bw, ridge)
            cell.noise = float(eps)
            cells.append(cell)
    return cells
