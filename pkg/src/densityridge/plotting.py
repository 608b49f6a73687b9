"""Static SVG scatter plots with reproducible bytes."""

from __future__ import annotations

import numpy as np

__all__ = ["scatter_svg", "overlay_svg"]

_SALT = "densityridge"


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = _SALT
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _xy(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[1] == 1:
        return np.column_stack([pts[:, 0], np.zeros(len(pts))])
    if pts.shape[1] == 2:
        return pts
    # oblique view of the first three axes
    return np.column_stack([pts[:, 0] + 0.35 * pts[:, 1], pts[:, 2] + 0.2 * pts[:, 1]])


def _colors(labels, n):
    import matplotlib

    if labels is None:
        return np.tile([0.12, 0.47, 0.71, 1.0], (n, 1))
    labels = np.asarray(labels)
    cmap = matplotlib.colormaps["tab20"]
    uniq = sorted(set(int(v) for v in labels if v >= 0))
    index = {v: k for k, v in enumerate(uniq)}
    out = np.empty((n, 4))
    for i, v in enumerate(labels):
        out[i] = (0.6, 0.6, 0.6, 1.0) if v < 0 else cmap(index[int(v)] % 20)
    return out


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def scatter_svg(path, points, labels=None, title: str = "", size: float = 6.0) -> None:
    """One marker per point; points with the same label share a colour."""
    plt = _pyplot()
    xy = _xy(points)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(xy[:, 0], xy[:, 1], s=size, c=_colors(labels, len(xy)), linewidths=0)
    ax.set_title(title)
    ax.set_aspect("equal", adjustable="datalim")
    _save(fig, path)
    plt.close(fig)


def overlay_svg(path, points, curve, title: str = "") -> None:
    """Point cloud in grey with a polyline on top."""
    plt = _pyplot()
    xy = _xy(points)
    cv = _xy(curve)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(xy[:, 0], xy[:, 1], s=4.0, c=_colors(None, len(xy)) * [1, 1, 1, 0.3], linewidths=0)
    ax.plot(cv[:, 0], cv[:, 1], color="#d62728", linewidth=1.5)
    ax.set_title(title)
    ax.set_aspect("equal", adjustable="datalim")
    _save(fig, path)
    plt.close(fig)
