"""Gradient flow along the ridge, mode finding and arc-length charts.

Ridge points are moved along the density gradient until they stop at a
local mode. The flow integrates the mean-shift field ``s2 g / p``, a positive
rescaling of ``g`` with the same integral curves, so trajectory geometry and
end points are those of the plain gradient flow. The polyline length of a
trajectory is the point's distance to its mode; for a one-dimensional ridge
this gives a signed chart coordinate around each mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _sparse_components
from scipy.spatial import cKDTree

from .errors import InputError
from .kde import DensityModel, _fix_signs, decompose
from .ode import SolverOptions, Termination, Trajectory, integrate_batch
from .ridge import RidgeConfig, RidgeEstimate, parallel_indices, project_cloud

__all__ = [
    "FlowConfig",
    "Mode",
    "ChartCoords",
    "LocalUnwrap",
    "mode_field",
    "flow_to_mode",
    "refine_modes",
    "trace_flows",
    "arc_length",
    "cluster_modes",
    "find_modes",
    "unwrap_local_1d",
    "orthogonal_unwrap_1d",
]


@dataclass(frozen=True)
class FlowConfig:
    """Settings for mode-seeking flows.

    Tolerances are relative to the kernel length ``sigma``. A flow stops once
    the mean-shift step is shorter than ``flow_tol * sigma``; its end point is
    then refined by Newton steps until the step is below ``mode_tol * sigma``.
    ``merge_radius`` defaults to ``0.1 * sigma`` when left as ``None``.
    """

    mode_tol: float = 1e-6
    flow_tol: float = 1e-4
    newton_iters: int = 50
    merge_radius: Optional[float] = None
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(h_max=10.0))
    chunk: int = 256

    def radius(self, model: DensityModel) -> float:
        return 0.1 * model.sigma if self.merge_radius is None else float(self.merge_radius)


@dataclass
class Mode:
    """A local density maximum with its attraction basin.

    ``basin`` holds indices into the ridge estimate; ``basis`` holds the
    tangent eigenvectors at the mode as columns, shape ``(D, d)``.
    """

    position: np.ndarray
    basin: np.ndarray
    basis: Optional[np.ndarray] = None
    density: float = float("nan")

    @property
    def size(self) -> int:
        return len(self.basin)


@dataclass
class ChartCoords:
    """Chart coordinates of one basin; ``coords`` has shape ``(k, d)``."""

    mode_id: int
    indices: np.ndarray
    coords: np.ndarray
    lengths: np.ndarray


@dataclass
class LocalUnwrap:
    """Result of local unwrapping: modes, per-mode charts and bookkeeping.

    ``labels[i]`` is the mode of ridge point ``i`` or ``-1`` when the point
    was excluded (ridge projection or flow did not converge).
    """

    modes: list
    charts: list
    labels: np.ndarray
    coords: np.ndarray
    excluded: np.ndarray
    trajectories: list = field(repr=False, default_factory=list)
    estimate: Optional[RidgeEstimate] = field(repr=False, default=None)


def mode_field(model: DensityModel, states: np.ndarray) -> np.ndarray:
    """Mean-shift field ``s2 g / p`` for stacked states."""
    return model.mean_shift(np.atleast_2d(states))


def _mode_stop(model, mode_tol):
    limit = mode_tol * model.sigma

    def stop(states, derivs):
        return np.linalg.norm(derivs, axis=1) < limit

    return stop


def trace_flows(model: DensityModel, starts, config: FlowConfig = FlowConfig()) -> list:
    """Integrate the gradient flow from every row of ``starts``.

    Rows are processed in blocks of ``config.chunk``; each row keeps its own
    step size so blocking never changes a trajectory.
    """
    pts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    if pts.shape[1] != model.dim:
        raise InputError(f"start dimension {pts.shape[1]} does not match model dimension {model.dim}")
    out = []
    for lo in range(0, len(pts), config.chunk):
        out.extend(
            integrate_batch(
                lambda s: mode_field(model, s),
                pts[lo:lo + config.chunk],
                _mode_stop(model, config.flow_tol),
                config.solver,
                on_error="flag",
            )
        )
    return out


def refine_modes(model: DensityModel, points, mode_tol: float = 1e-6, max_iters: int = 50) -> np.ndarray:
    """Polish approximate modes with safeguarded Newton steps.

    Where the Hessian is negative definite the Newton step ``-H^-1 g`` is
    taken, limited to one kernel length; elsewhere the mean-shift step is
    used. Rows stop once their mean-shift step is below ``mode_tol * sigma``.
    """
    x = np.array(np.atleast_2d(points), dtype=np.float64, copy=True)
    limit = mode_tol * model.sigma
    active = np.ones(len(x), dtype=bool)
    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        dens, grad, hess = model.evaluate(x[idx], order=2)
        shift = grad * (model.bandwidth / np.maximum(dens, np.finfo(float).tiny))[:, None]
        size = np.linalg.norm(shift, axis=1)
        done = size < limit
        active[idx[done]] = False
        idx, grad, hess, shift = idx[~done], grad[~done], hess[~done], shift[~done]
        if idx.size == 0:
            break
        vals, vecs = np.linalg.eigh(hess)
        neg = np.all(vals < 0, axis=1)
        step = shift.copy()
        if neg.any():
            coef = np.einsum("mdk,md->mk", vecs[neg], grad[neg]) / vals[neg]
            newton = -np.einsum("mdk,mk->md", vecs[neg], coef)
            length = np.linalg.norm(newton, axis=1)
            scale = np.minimum(1.0, model.sigma / np.maximum(length, np.finfo(float).tiny))
            step[neg] = newton * scale[:, None]
        x[idx] += step
    return x


def flow_to_mode(model: DensityModel, start, config: FlowConfig = FlowConfig()) -> Trajectory:
    """Follow the gradient from ``start`` until the flow reaches a mode.

    A start that already sits on a mode yields a single-state trajectory.
    The flow stops at ``flow_tol``; use :func:`refine_modes` to polish the
    end point.
    """
    x = np.asarray(start, dtype=np.float64).reshape(1, -1)
    return trace_flows(model, x, config)[0]


def arc_length(trajectory) -> float:
    """Polyline length ``sum_j |z_j - z_{j+1}|`` of a trajectory or state array."""
    states = trajectory.states if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=np.float64)
    if len(states) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(states, axis=0), axis=1)))


def cluster_modes(endpoints, merge_radius: float, origins=None) -> list:
    """Single-linkage merge of flow end points.

    End points closer than ``merge_radius`` are linked and linking is
    transitive. Each cluster becomes a :class:`Mode` at the mean of its end
    points; ``basin`` collects the matching ``origins`` (row indices by
    default). Modes are ordered by their smallest member row.
    """
    ends = np.atleast_2d(np.asarray(endpoints, dtype=np.float64))
    m = len(ends)
    if m == 0:
        return []
    if merge_radius < 0:
        raise InputError("merge_radius must be non-negative")
    origins = np.arange(m) if origins is None else np.asarray(origins)
    pairs = cKDTree(ends).query_pairs(merge_radius, output_type="ndarray") if merge_radius > 0 else np.empty((0, 2), int)
    if merge_radius == 0:
        # exact duplicates still merge
        _, inv = np.unique(ends, axis=0, return_inverse=True)
        labels = np.asarray(inv).ravel()
    else:
        adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m)) if len(pairs) else coo_matrix((m, m))
        _, labels = _sparse_components(adj, directed=False)
    # relabel by first occurrence so the output order is deterministic
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first, kind="stable")
    modes = []
    for lab in np.unique(labels)[order]:
        members = np.flatnonzero(labels == lab)
        modes.append(Mode(position=ends[members].mean(axis=0), basin=origins[members]))
    return modes


def _annotate(model, modes, d, par):
    if not modes:
        return
    pos = np.array([mo.position for mo in modes])
    dens, _, hess = model.evaluate(pos, order=2)
    spec = decompose(hess, d)
    for k, mo in enumerate(modes):
        mo.basis = _fix_signs(spec.eigenvectors[k][:, par])
        mo.density = float(dens[k])


def find_modes(model: DensityModel, estimate: RidgeEstimate, config: FlowConfig = FlowConfig()):
    """Flow every converged ridge point to its mode and group the end points.

    Returns
    -------
    modes : list of Mode
    labels : ndarray of int
        Mode index per ridge point, ``-1`` if excluded.
    trajectories : list
        One trajectory per ridge point (``None`` for excluded inputs).
    """
    par = estimate.tangent_indices
    if par is None:
        par = parallel_indices(model.dim, estimate.d)
    positions = estimate.positions
    ok = estimate.converged.copy()
    idx = np.flatnonzero(ok)
    trajs = [None] * len(positions)
    if idx.size:
        for i, tr in zip(idx, trace_flows(model, positions[idx], config)):
            trajs[i] = tr
            if tr.terminated != Termination.CONVERGED:
                ok[i] = False
    good = np.flatnonzero(ok)
    labels = np.full(len(positions), -1, dtype=int)
    if good.size == 0:
        return [], labels, trajs
    ends = refine_modes(model, np.array([trajs[i].final for i in good]), config.mode_tol, config.newton_iters)
    modes = cluster_modes(ends, config.radius(model), origins=good)
    if modes:
        centers = refine_modes(model, np.array([mo.position for mo in modes]), config.mode_tol, config.newton_iters)
        for mo, c in zip(modes, centers):
            mo.position = c
    for k, mo in enumerate(modes):
        labels[mo.basin] = k
    _annotate(model, modes, estimate.d, par)
    return modes, labels, trajs


def unwrap_local_1d(model: DensityModel, estimate: RidgeEstimate, config: FlowConfig = FlowConfig()) -> LocalUnwrap:
    """Signed arc-length coordinates around each mode of a 1-D ridge.

    The magnitude of a coordinate is the length of the point's flow to its
    mode. The sign is ``+`` when the point lies on the side the mode's basis
    vector points to, read from the first step of the flow (which points back
    towards the mode). Points that start on their mode get exactly ``0``.
    """
    if estimate.d != 1:
        raise InputError(f"unwrap_local_1d needs a 1-D ridge estimate, got d={estimate.d}")
    modes, labels, trajs = find_modes(model, estimate, config)
    n = len(estimate)
    coords = np.full(n, np.nan)
    lengths = np.full(n, np.nan)
    for i in np.flatnonzero(labels >= 0):
        tr = trajs[i]
        c = arc_length(tr)
        lengths[i] = c
        if len(tr) < 2 or c == 0.0:
            coords[i] = 0.0
            continue
        b = modes[labels[i]].basis[:, 0]
        first = tr.states[1] - tr.states[0]
        coords[i] = -c if float(first @ b) > 0 else c
    charts = []
    for k, mo in enumerate(modes):
        members = np.sort(mo.basin)
        charts.append(ChartCoords(mode_id=k, indices=members, coords=coords[members][:, None],
                                  lengths=lengths[members]))
    return LocalUnwrap(
        modes=modes,
        charts=charts,
        labels=labels,
        coords=coords[:, None],
        excluded=np.flatnonzero(labels < 0),
        trajectories=trajs,
        estimate=estimate,
    )


def orthogonal_unwrap_1d(model: DensityModel, data, direction: int, ridge_config: RidgeConfig = RidgeConfig(),
                         config: FlowConfig = FlowConfig()) -> LocalUnwrap:
    """Unwrap along the ``direction``-th local one-dimensional ridge.

    ``direction`` indexes the Hessian eigenvalues in descending order: ``0``
    follows the principal ridge, ``1`` the first orthogonal one, and so on.
    """
    if model.dim < 2:
        raise InputError("orthogonal ridges need an ambient dimension of at least 2")
    if not 0 <= int(direction) < model.dim:
        raise InputError(f"direction must lie in [0, {model.dim}), got {direction}")
    est = project_cloud(model, data, 1, ridge_config, along=[int(direction)])
    return unwrap_local_1d(model, est, config)
