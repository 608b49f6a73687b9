"""Projection of points onto a d-dimensional density ridge.

A point is moved along ``V V^T g`` where ``V`` spans the normal space of the
ridge (the Hessian eigenvectors with the ``D - d`` most negative
eigenvalues) until the gradient has no normal component left. The field is
integrated after dividing by ``density / bandwidth``; this positive rescaling
turns the gradient into the mean-shift vector, which leaves the integral
curves and their end points unchanged but makes the time scale comparable
across bandwidths.

The projector ``V V^T`` does not depend on eigenvector signs or on the basis
chosen inside an eigenspace, so no sign tracking is needed along the flow.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .kde import DensityModel, HessianSpectrum, as_point_cloud, decompose
from .ode import SolverOptions, Termination, integrate_batch

__all__ = [
    "RidgeConfig",
    "RidgePoint",
    "RidgeEstimate",
    "parallel_indices",
    "ridge_field",
    "orthogonality_residual",
    "project_to_ridge",
    "project_cloud",
    "out_of_sample_project",
]

GRAD_FLOOR = 1e-12


@dataclass(frozen=True)
class RidgeConfig:
    """Solver settings for ridge projection.

    ``ridge_tol`` bounds the relative normal gradient ``|V^T g| / |g|``.
    ``mode_tol`` bounds the mean-shift length relative to the kernel scale;
    below it a point counts as sitting on a mode. Much smaller values sit
    under the integrator's own resolution (``abs_tol``) and make flows that
    end on a mode stall instead of stopping.
    """

    ridge_tol: float = 1e-4
    mode_tol: float = 1e-4
    solver: SolverOptions = field(default_factory=SolverOptions)
    threads: int = 1
    chunk: int = 256


def parallel_indices(dim: int, d: int, along: Optional[Sequence[int]] = None) -> np.ndarray:
    """Eigen-indices (descending order) that span the ridge tangent space.

    Default is the first ``d``. ``along`` selects other columns, e.g. ``[1]``
    for the second orthogonal one-dimensional ridge.
    """
    if along is None:
        if not 1 <= d < dim:
            raise InputError(f"intrinsic dimension must satisfy 1 <= d < {dim}, got {d}")
        return np.arange(d)
    idx = np.asarray(along, dtype=int).ravel()
    if idx.size != d or np.any(idx < 0) or np.any(idx >= dim) or len(set(idx.tolist())) != idx.size:
        raise InputError(f"invalid tangent eigen-indices {list(idx)} for D={dim}, d={d}")
    return np.sort(idx)


def _split(spec: HessianSpectrum, par: np.ndarray):
    dim = spec.eigenvectors.shape[-1]
    perp = np.setdiff1d(np.arange(dim), par)
    vecs = spec.eigenvectors
    return vecs[..., :, par], vecs[..., :, perp], spec.eigenvalues[..., perp]


def ridge_field(model: DensityModel, states: np.ndarray, d: int, par=None) -> np.ndarray:
    """Rescaled ridge-projection field ``V V^T (s2 g / p)`` for stacked states."""
    par = parallel_indices(model.dim, d, par)
    dens, grad, hess = model.evaluate(np.atleast_2d(states), order=2)
    spec = decompose(hess, d)
    _, v, _ = _split(spec, par)
    shift = grad * (model.bandwidth / np.maximum(dens, np.finfo(float).tiny))[:, None]
    coef = np.einsum("mdk,md->mk", v, shift)
    return np.einsum("mdk,mk->md", v, coef)


def orthogonality_residual(grad: np.ndarray, q_perp: np.ndarray) -> np.ndarray:
    """``|Q_perp^T g| / max(|g|, 1e-12)`` for one or many points."""
    g = np.atleast_2d(grad)
    v = q_perp if q_perp.ndim == 3 else q_perp[None]
    num = np.linalg.norm(np.einsum("mdk,md->mk", v, g), axis=1)
    res = num / np.maximum(np.linalg.norm(g, axis=1), GRAD_FLOOR)
    return res if np.ndim(grad) > 1 else float(res[0])


@dataclass
class RidgePoint:
    position: np.ndarray
    origin_index: int
    spectrum: HessianSpectrum
    gradient: np.ndarray
    converged: bool
    residual: float
    at_mode: bool = False
    termination: Termination = Termination.CONVERGED
    steps: int = 0
    tangent_indices: np.ndarray = field(default=None, repr=False)

    @property
    def q_par(self) -> np.ndarray:
        return self.spectrum.eigenvectors[:, self.tangent_indices]

    @property
    def q_perp(self) -> np.ndarray:
        perp = np.setdiff1d(np.arange(len(self.position)), self.tangent_indices)
        return self.spectrum.eigenvectors[:, perp]


@dataclass
class RidgeEstimate:
    points: list
    d: int
    model: DensityModel
    tangent_indices: np.ndarray = None

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.points])

    @property
    def converged(self) -> np.ndarray:
        return np.array([p.converged for p in self.points], dtype=bool)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([p.residual for p in self.points])

    def __len__(self):
        return len(self.points)


def _classify(model, positions, d, par, cfg):
    """Ridge diagnostics at final positions: spectrum, residual, convergence."""
    dens, grad, hess = model.evaluate(positions, order=2)
    spec = decompose(hess, d)
    _, v, perp_vals = _split(spec, par)
    res = orthogonality_residual(grad, v)
    shift = np.linalg.norm(grad, axis=1) * model.bandwidth / np.maximum(dens, np.finfo(float).tiny)
    at_mode = (shift < cfg.mode_tol * model.sigma) & np.all(spec.eigenvalues < 0, axis=1)
    on_ridge = (res < cfg.ridge_tol) & np.all(perp_vals < 0, axis=1)
    return spec, grad, res, on_ridge | at_mode, at_mode


def _stop_test(model, d, par, cfg):
    def stop(states, derivs):
        # derivs = V V^T shift, so |derivs| = |V^T shift|
        dens, grad, _ = model.evaluate(states, order=1)
        shift_norm = np.linalg.norm(grad, axis=1) * model.bandwidth / np.maximum(dens, np.finfo(float).tiny)
        normal = np.linalg.norm(derivs, axis=1)
        rel = normal / np.maximum(shift_norm, GRAD_FLOOR)
        return (rel < cfg.ridge_tol) | (shift_norm < cfg.mode_tol * model.sigma)

    return stop


def _project_block(model, starts, d, par, cfg):
    trajs = integrate_batch(
        lambda s: ridge_field(model, s, d, par),
        starts,
        _stop_test(model, d, par, cfg),
        cfg.solver,
        on_error="flag",
        record=False,
    )
    finals = np.array([t.final for t in trajs])
    return trajs, finals


def _build_points(model, trajs, finals, origins, d, par, cfg):
    spec, grad, res, conv, at_mode = _classify(model, finals, d, par, cfg)
    pts = []
    for j, tr in enumerate(trajs):
        ok = bool(conv[j]) and tr.terminated != Termination.NUMERICAL_ERROR
        pts.append(
            RidgePoint(
                position=finals[j],
                origin_index=int(origins[j]),
                spectrum=HessianSpectrum(spec.eigenvalues[j], spec.eigenvectors[j], d),
                gradient=grad[j],
                converged=ok,
                residual=float(res[j]),
                at_mode=bool(at_mode[j]),
                termination=tr.terminated,
                steps=len(tr.times) - 1 if len(tr.times) > 1 else 0,
                tangent_indices=par,
            )
        )
    return pts


def project_to_ridge(model: DensityModel, x, d: int, config: RidgeConfig = RidgeConfig(),
                     along=None, origin_index: int = -1) -> RidgePoint:
    """Project one point onto the ``d``-dimensional ridge.

    Non-convergence is reported through ``RidgePoint.converged``; it is not
    an error.
    """
    par = parallel_indices(model.dim, d, along)
    x = np.asarray(x, dtype=np.float64).reshape(1, model.dim)
    trajs, finals = _project_block(model, x, d, par, config)
    return _build_points(model, trajs, finals, [origin_index], d, par, config)[0]


def project_cloud(model: DensityModel, data, d: int, config: RidgeConfig = RidgeConfig(),
                  along=None) -> RidgeEstimate:
    """Project every point of ``data``; order is preserved.

    Points are integrated in blocks of ``config.chunk``. Each row evolves
    independently, so blocking and threading do not change any result.
    """
    pts = as_point_cloud(data).points
    if pts.shape[1] != model.dim:
        raise InputError(f"data has dimension {pts.shape[1]}, model has {model.dim}")
    par = parallel_indices(model.dim, d, along)
    blocks = [np.arange(lo, min(lo + config.chunk, len(pts))) for lo in range(0, len(pts), config.chunk)]

    def run(idx):
        trajs, finals = _project_block(model, pts[idx], d, par, config)
        return _build_points(model, trajs, finals, idx, d, par, config)

    if config.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    out = [p for block in results for p in block]
    return RidgeEstimate(points=out, d=d, model=model, tangent_indices=par)


def out_of_sample_project(estimate: RidgeEstimate, x_o, step: float = 0.5, max_iters: int = 200,
                          tol: float = 1e-6, init=None) -> np.ndarray:
    """Move a ridge point inside its tangent space towards ``x_o``.

    Starts at the nearest converged ridge point (or ``init``) and repeats
    ``x_r += step * Q_par Q_par^T (x_o - x_r)`` with ``Q_par`` re-evaluated
    at ``x_r``, until the update is shorter than ``tol``.
    """
    if len(estimate) == 0:
        raise InputError("ridge estimate is empty")
    model = estimate.model
    x_o = np.asarray(x_o, dtype=np.float64).reshape(-1)
    if init is None:
        pos = estimate.positions
        conv = estimate.converged
        cand = pos[conv] if conv.any() else pos
        x_r = cand[np.argmin(np.sum((cand - x_o) ** 2, axis=1))].copy()
    else:
        x_r = np.asarray(init, dtype=np.float64).reshape(-1).copy()
    return _tangent_descent(model, estimate.d, estimate.tangent_indices, x_o[None], x_r[None],
                            step, max_iters, tol)[0]


def _tangent_descent(model, d, par, targets, starts, step, max_iters, tol):
    """Vectorized tangent-space descent for many (target, start) pairs."""
    par = parallel_indices(model.dim, d, None if par is None else par)
    x_r = np.array(starts, dtype=np.float64, copy=True)
    active = np.ones(len(x_r), dtype=bool)
    for _ in range(max_iters):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        spec = decompose(model.hessian(x_r[idx]), d)
        q = spec.eigenvectors[:, :, par]
        diff = targets[idx] - x_r[idx]
        upd = step * np.einsum("mdk,mk->md", q, np.einsum("mdk,md->mk", q, diff))
        x_r[idx] += upd
        active[idx[np.linalg.norm(upd, axis=1) < tol]] = False
    return x_r
