"""Shortest paths constrained to a density ridge.

A graph path between two ridge points is resampled to equally spaced
waypoints and then improved by alternating two steps: an explicit descent
step on the path energy ``sum |g_l - g_{l-1}|^2`` (a discrete Laplacian
smoothing of the interior waypoints) and re-projection of the interior
waypoints onto the ridge. Plain explicit smoothing needs ``O(n^2)``
iterations to straighten a path of ``n`` waypoints, so the scheme runs
coarse to fine: it starts with few waypoints and doubles their number by
midpoint insertion after each level has converged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .graph import NeighborGraph, path_length, shortest_path
from .kde import DensityModel, decompose
from .ridge import (
    RidgeConfig,
    RidgeEstimate,
    _project_block,
    _tangent_descent,
    orthogonality_residual,
    parallel_indices,
)

__all__ = ["GeodesicConfig", "GeodesicPath", "geodesic", "resample_polyline", "path_energy"]


@dataclass(frozen=True)
class GeodesicConfig:
    """Settings of the alternating shortening and projection scheme.

    ``max_outer_iters`` bounds the iterations of each level. A level counts
    as converged once the relative length decrease drops below ``tol`` and
    no waypoint moves further than ``move_tol * sigma`` in one iteration;
    the length alone reacts only quadratically to lateral wiggles.
    The first level spaces waypoints about ``coarse_spacing * sigma`` apart
    (at least 5 waypoints); ``coarse_spacing=None`` disables the
    coarse-to-fine schedule.
    """

    n_waypoints: int = 50
    max_outer_iters: int = 200
    eta: float = 0.25
    tol: float = 1e-5
    move_tol: float = 1e-4
    coarse_spacing: float | None = 2.0
    monotone_slack: float = 1e-4
    oos_step: float = 0.5
    oos_iters: int = 50
    oos_tol: float = 1e-9
    ridge: RidgeConfig = field(default_factory=RidgeConfig)

    def __post_init__(self):
        if self.n_waypoints < 2:
            raise InputError("n_waypoints must be at least 2")
        if not 0 < self.eta <= 0.5:
            raise InputError("eta must lie in (0, 0.5]")


@dataclass
class GeodesicPath:
    """Waypoints of an approximate geodesic with diagnostics.

    ``energy_history`` holds the normalized path energy
    ``(n - 1) * sum |g_l - g_{l-1}|^2`` after every outer iteration; the
    normalization makes values comparable across waypoint counts.
    """

    waypoints: np.ndarray
    length: float
    initial_length: float
    iterations_used: int
    converged: bool
    node_path: list
    energy_history: list = field(default_factory=list)
    length_history: list = field(default_factory=list)
    residuals: np.ndarray = None

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def end(self) -> np.ndarray:
        return self.waypoints[-1]

    def reversed(self) -> "GeodesicPath":
        return GeodesicPath(
            waypoints=self.waypoints[::-1].copy(),
            length=self.length,
            initial_length=self.initial_length,
            iterations_used=self.iterations_used,
            converged=self.converged,
            node_path=self.node_path[::-1],
            energy_history=list(self.energy_history),
            length_history=list(self.length_history),
            residuals=None if self.residuals is None else self.residuals[::-1].copy(),
        )


def path_energy(points: np.ndarray) -> float:
    """Normalized discrete energy ``(n - 1) * sum |p_l - p_{l-1}|^2``."""
    diff = np.diff(points, axis=0)
    return float((len(points) - 1) * np.sum(diff * diff))


def resample_polyline(points, n: int) -> np.ndarray:
    """``n`` points at equal arc-length fractions along a polyline.

    End points are copied exactly.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) == 1:
        return np.repeat(pts, n, axis=0)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total == 0.0:
        return np.repeat(pts[:1], n, axis=0)
    s = np.linspace(0.0, total, n)
    out = np.empty((n, pts.shape[1]))
    for k in range(pts.shape[1]):
        out[:, k] = np.interp(s, cum, pts[:, k])
    out[0], out[-1] = pts[0], pts[-1]
    return out


def _refine(points: np.ndarray, n_target: int) -> np.ndarray:
    """Double the waypoint count by midpoints, or resample to ``n_target``."""
    n = len(points)
    if 2 * n - 1 <= n_target:
        out = np.empty((2 * n - 1, points.shape[1]))
        out[0::2] = points
        out[1::2] = 0.5 * (points[:-1] + points[1:])
        return out
    return resample_polyline(points, n_target)


def _levels(n_target: int, coarse) -> list:
    if coarse is None or coarse >= n_target:
        return [n_target]
    sizes = [max(5, int(coarse))]
    while 2 * sizes[-1] - 1 < n_target:
        sizes.append(2 * sizes[-1] - 1)
    if sizes[-1] != n_target:
        sizes.append(n_target)
    return sizes


def _residuals(model, pts, d, par):
    _, grad, hess = model.evaluate(pts, order=2)
    spec = decompose(hess, d)
    perp = np.setdiff1d(np.arange(model.dim), par)
    return orthogonality_residual(grad, spec.eigenvectors[:, :, perp])


def _reproject(model, targets, starts, d, par, cfg: GeodesicConfig):
    """Tangent-space projection of ``targets`` with ridge-flow fallback."""
    out = _tangent_descent(model, d, par, targets, starts, cfg.oos_step, cfg.oos_iters, cfg.oos_tol)
    res = _residuals(model, out, d, par)
    bad = np.flatnonzero(res > 10 * cfg.ridge.ridge_tol)
    if bad.size:
        _, finals = _project_block(model, out[bad], d, par, cfg.ridge)
        out[bad] = finals
    return out


def geodesic(model: DensityModel, estimate: RidgeEstimate, graph: NeighborGraph, x: int, y: int,
             config: GeodesicConfig = GeodesicConfig()) -> GeodesicPath:
    """Approximate the ridge geodesic between graph nodes ``x`` and ``y``.

    Parameters
    ----------
    model, estimate
        The density model and its ridge estimate (for the tangent split).
    graph
        Neighbour graph whose nodes are ridge points (and possibly modes).
    x, y : int
        Node indices of the end points; both stay fixed.

    Raises
    ------
    ConnectivityError
        If ``x`` and ``y`` lie in different graph components.
    """
    d = estimate.d
    par = estimate.tangent_indices if estimate.tangent_indices is not None else parallel_indices(model.dim, d)
    nodes = shortest_path(graph, x, y)
    init = graph.nodes[nodes]
    init_len = path_length(init)
    x0, y0 = graph.nodes[x].copy(), graph.nodes[y].copy()
    if len(nodes) == 1 or init_len == 0.0:
        pts = np.repeat(x0[None], config.n_waypoints, axis=0)
        return GeodesicPath(pts, 0.0, 0.0, 0, True, nodes, [0.0], [0.0], np.zeros(config.n_waypoints))

    coarse = None
    if config.coarse_spacing is not None:
        coarse = int(np.ceil(init_len / (config.coarse_spacing * model.sigma))) + 1
    levels = _levels(config.n_waypoints, coarse)
    move_limit = config.move_tol * model.sigma
    pts = resample_polyline(init, levels[0])
    if len(pts) > 2:
        # interpolated waypoints sit on chords; start from a path on the ridge
        _, pts[1:-1] = _project_block(model, pts[1:-1], d, par, config.ridge)
    energies, lengths = [], []
    iters = 0
    converged = True
    monotone = True
    for li, n in enumerate(levels):
        if li > 0:
            prev = pts
            pts = _refine(prev, n)
            if n > 2:
                # new waypoints start from the previous path, then get projected
                pts[1:-1] = _reproject(model, pts[1:-1], pts[1:-1], d, par, config)
        pts[0], pts[-1] = x0, y0
        energies.append(path_energy(pts))
        lengths.append(path_length(pts))
        level_done = n <= 2
        for _ in range(config.max_outer_iters if n > 2 else 0):
            iters += 1
            lap = pts[:-2] - 2.0 * pts[1:-1] + pts[2:]
            smooth = pts[1:-1] + config.eta * lap
            new = pts.copy()
            new[1:-1] = _reproject(model, smooth, pts[1:-1], d, par, config)
            e_new = path_energy(new)
            if e_new > energies[-1] * (1.0 + config.monotone_slack):
                monotone = False
                break
            old_len = lengths[-1]
            moved = float(np.max(np.linalg.norm(new - pts, axis=1)))
            pts = new
            energies.append(e_new)
            lengths.append(path_length(pts))
            if old_len - lengths[-1] < config.tol * old_len and moved < move_limit:
                level_done = True
                break
        if not monotone:
            break
        if not level_done and li == len(levels) - 1:
            converged = False
    converged = converged and monotone
    res = _residuals(model, pts, d, par)
    return GeodesicPath(
        waypoints=pts,
        length=path_length(pts),
        initial_length=init_len,
        iterations_used=iters,
        converged=converged,
        node_path=nodes,
        energy_history=energies,
        length_history=lengths,
        residuals=res,
    )
