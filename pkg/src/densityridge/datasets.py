"""Seeded synthetic datasets with ground-truth parameterizations.

Every generator adds isotropic Gaussian noise with standard deviation
``noise_sd`` to noiseless samples; ``clean_points`` keeps the noiseless
positions. All randomness comes from ``numpy.random.default_rng(seed)`` so a
given ``(parameters, seed)`` always reproduces the same arrays bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .kde import PointCloud

__all__ = [
    "LabeledDataset",
    "make_spiral",
    "make_swiss_roll",
    "make_helix",
    "make_half_cylinder",
    "make_sphere",
    "make_hemisphere",
    "make_crescent",
    "make_line",
    "make_plane",
    "spiral_arc_length",
    "swiss_roll_arc_length",
    "DATASETS",
    "generate",
]

SWISS_ROLL_T_RANGE = (1.5 * np.pi, 4.5 * np.pi)
SWISS_ROLL_HEIGHT = 21.0
HELIX_PITCH = 0.3
HELIX_T_RANGE = (0.0, 4.0 * np.pi)
HALF_CYLINDER_HEIGHT = 3.0
CRESCENT_HALF_WIDTH = 2.0
CRESCENT_HALF_HEIGHT = 0.25
CRESCENT_BEND = 0.5


@dataclass(frozen=True)
class LabeledDataset:
    points: PointCloud
    truth: np.ndarray
    clean_points: np.ndarray
    seed: int
    name: str = ""
    params: dict = field(default_factory=dict)

    @property
    def X(self) -> np.ndarray:
        return self.points.points


def _check(n, noise_sd):
    if int(n) < 1:
        raise InputError(f"n must be positive, got {n}")
    if noise_sd < 0:
        raise InputError("noise_sd must be non-negative")


def _finish(name, clean, truth, noise_sd, rng, seed, **params):
    noisy = clean + noise_sd * rng.standard_normal(clean.shape) if noise_sd > 0 else clean.copy()
    truth = np.asarray(truth, dtype=np.float64)
    if truth.ndim == 1:
        truth = truth[:, None]
    return LabeledDataset(
        points=PointCloud(noisy),
        truth=truth,
        clean_points=clean,
        seed=seed,
        name=name,
        params=dict(params, noise_sd=noise_sd),
    )


def spiral_arc_length(theta, r_max: float = 2.0) -> np.ndarray:
    """Arc length of ``r = a * theta`` (``a = r_max / 2 pi``) from the origin."""
    a = r_max / (2 * np.pi)
    th = np.asarray(theta, dtype=np.float64)
    return 0.5 * a * (th * np.sqrt(1 + th**2) + np.arcsinh(th))


def make_spiral(n: int = 1000, r_max: float = 2.0, noise_sd: float = 0.1, seed: int = 0) -> LabeledDataset:
    """Planar spiral ``(r cos t, r sin t)``, ``t ~ U[0, 2 pi]``, ``r = r_max t / 2 pi``.

    ``truth[:, 0]`` is the angle ``t``.
    """
    _check(n, noise_sd)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, size=n)
    r = r_max * theta / (2 * np.pi)
    clean = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return _finish("spiral", clean, theta, noise_sd, rng, seed, n=n, r_max=r_max)


def swiss_roll_arc_length(t, t0: float = SWISS_ROLL_T_RANGE[0]) -> np.ndarray:
    """Length of the roll curve ``(t cos t, t sin t)`` measured from ``t0``."""
    def prim(s):
        return 0.5 * (s * np.sqrt(1 + s**2) + np.arcsinh(s))

    return prim(np.asarray(t, dtype=np.float64)) - prim(t0)


def make_swiss_roll(n: int = 2000, noise_sd: float = 0.1, seed: int = 0,
                    t_range=SWISS_ROLL_T_RANGE, height: float = SWISS_ROLL_HEIGHT) -> LabeledDataset:
    """Swiss roll ``(t cos t, h, t sin t)`` with ``t``, ``h`` uniform.

    ``truth`` columns are (arc length along the roll from ``t_range[0]``, h).
    """
    _check(n, noise_sd)
    rng = np.random.default_rng(seed)
    t = rng.uniform(t_range[0], t_range[1], size=n)
    h = rng.uniform(0.0, height, size=n)
    clean = np.column_stack([t * np.cos(t), h, t * np.sin(t)])
    truth = np.column_stack([swiss_roll_arc_length(t, t_range[0]), h])
    return _finish("swiss_roll", clean, truth, noise_sd, rng, seed, n=n,
                   t_range=list(t_range), height=height)


def make_helix(n: int = 1000, noise_sd: float = 0.05, seed: int = 0, pitch: float = HELIX_PITCH,
               t_range=HELIX_T_RANGE) -> LabeledDataset:
    """Helix ``(cos t, sin t, pitch * t)``; ``truth[:, 0] = t``."""
    _check(n, noise_sd)
    rng = np.random.default_rng(seed)
    t = rng.uniform(t_range[0], t_range[1], size=n)
    clean = np.column_stack([np.cos(t), np.sin(t), pitch * t])
    return _finish("helix", clean, t, noise_sd, rng, seed, n=n, pitch=pitch, t_range=list(t_range))


def make_half_cylinder(n: int = 1000, noise_sd: float = 0.05, seed: int = 0,
                       height: float = HALF_CYLINDER_HEIGHT) -> LabeledDataset:
    """Half cylinder ``(cos phi, sin phi, h)``, ``phi ~ U[0, pi]``; truth ``(phi, h)``."""
    _check(n, noise_sd)
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, np.pi, size=n)
    h = rng.uniform(0.0, height, size=n)
    clean = np.column_stack([np.cos(phi), np.sin(phi), h])
    return _finish("half_cylinder", clean, np.column_stack([phi, h]), noise_sd, rng, seed,
                   n=n, height=height)


def _sphere_points(rng, n):
    g = rng.standard_normal((n, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _angles(p):
    theta = np.arccos(np.clip(p[:, 2], -1.0, 1.0))
    phi = np.arctan2(p[:, 1], p[:, 0])
    return np.column_stack([theta, phi])


def make_sphere(n: int = 1000, noise_sd: float = 0.05, seed: int = 0) -> LabeledDataset:
    """Uniform unit sphere via normalized Gaussian draws; truth (polar, azimuth)."""
    _check(n, noise_sd)
    rng = np.random.default_rng(seed)
    clean = _sphere_points(rng, n)
    return _finish("sphere", clean, _angles(clean), noise_sd, rng, seed, n=n)


def make_hemisphere(n: int = 1000, noise_sd: float = 0.05, seed: int = 0) -> LabeledDataset:
    """Upper unit hemisphere (``z >= 0``) obtained by reflecting lower samples."""
    _check(n, noise_sd)
    rng = np.random.default_rng(seed)
    clean = _sphere_points(rng, n)
    clean[:, 2] = np.abs(clean[:, 2])
    return _finish("hemisphere", clean, _angles(clean), noise_sd, rng, seed, n=n)


def make_crescent(n: int = 1000, noise_sd: float = 0.05, seed: int = 0, bend: float = CRESCENT_BEND,
                  half_width: float = CRESCENT_HALF_WIDTH,
                  half_height: float = CRESCENT_HALF_HEIGHT) -> LabeledDataset:
    """Uniform strip ``(u, v)`` bent to ``(u, v - bend * u**2)``; truth ``(u, v)``."""
    _check(n, noise_sd)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-half_width, half_width, size=n)
    v = rng.uniform(-half_height, half_height, size=n)
    clean = np.column_stack([u, v - bend * u**2])
    return _finish("crescent", clean, np.column_stack([u, v]), noise_sd, rng, seed, n=n, bend=bend,
                   half_width=half_width, half_height=half_height)


def make_line(n: int = 500, noise_sd: float = 0.05, seed: int = 0, length: float = 4.0,
              dim: int = 2) -> LabeledDataset:
    """Segment ``[0, length]`` on the first axis of R^dim; truth is the position."""
    _check(n, noise_sd)
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.0, length, size=n)
    clean = np.zeros((n, dim))
    clean[:, 0] = s
    return _finish("line", clean, s, noise_sd, rng, seed, n=n, length=length, dim=dim)


def make_plane(n: int = 800, noise_sd: float = 0.0, seed: int = 0, size=(4.0, 2.0)) -> LabeledDataset:
    """Uniform rectangle in the ``z = 0`` plane of R^3; truth ``(x, y)``."""
    _check(n, noise_sd)
    rng = np.random.default_rng(seed)
    xy = rng.uniform((0.0, 0.0), size, size=(n, 2))
    clean = np.column_stack([xy, np.zeros(n)])
    return _finish("plane", clean, xy, noise_sd, rng, seed, n=n, size=list(size))


DATASETS = {
    "spiral": make_spiral,
    "swiss_roll": make_swiss_roll,
    "helix": make_helix,
    "half_cylinder": make_half_cylinder,
    "sphere": make_sphere,
    "hemisphere": make_hemisphere,
    "crescent": make_crescent,
    "line": make_line,
    "plane": make_plane,
}


def generate(name: str, **kwargs) -> LabeledDataset:
    """Build a dataset by registry name, e.g. ``generate("spiral", n=500)``."""
    try:
        fn = DATASETS[name]
    except KeyError:
        raise InputError(f"unknown dataset {name!r}; choose from {sorted(DATASETS)}") from None
    return fn(**kwargs)
