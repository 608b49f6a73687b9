"""Local charts at modes and their assembly into global coordinates.

One-dimensional ridges: arc-length charts around each mode are shifted
along the ridge by the graph-path length to a reference mode
(:func:`translate_1d`).

Higher-dimensional ridges: each basin is projected onto the tangent space
of its mode (:func:`build_tangent_chart`), charts are moved to the reference
mode by approximate parallel transport along ridge geodesics
(:func:`parallel_transport`) and laid out in the reference tangent plane by
developing the geodesics into it (:func:`isometric_unfold`).

Transport acts on ambient offset vectors. A vector is carried along a path
by repeatedly projecting it onto the tangent space of the next waypoint.
Plain repeated projection shrinks vectors by ``cos`` of the turning angle at
every step, so by default the transported frame is re-orthonormalized after
each step (the nearest orthonormal frame, via polar decomposition). This
keeps transport an isometry; ``renormalize=False`` gives the plain scheme.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConnectivityError, InputError, NumericalError
from .flow import LocalUnwrap, Mode
from .geodesic import GeodesicConfig, GeodesicPath, geodesic
from .graph import NeighborGraph, build_knn, connected_components, path_tangents, shortest_path, shortest_path_lengths
from .kde import DensityModel, _fix_signs, decompose
from .ridge import RidgeEstimate, parallel_indices

__all__ = [
    "Chart",
    "Atlas",
    "ridge_graph",
    "tangent_basis",
    "build_tangent_chart",
    "orientation_align",
    "select_reference",
    "translate_1d",
    "transport_frame",
    "parallel_transport",
    "develop_path",
    "isometric_unfold",
]


@dataclass
class Chart:
    """Coordinates of one basin around its mode.

    ``local_coords[k]`` belongs to ridge point ``indices[k]``; the mode sits
    at the origin. ``basis`` (``(D, d)``, may be ``None`` for arc-length
    charts) maps coordinates to ambient offsets from ``mode.position``.
    """

    mode_id: int
    mode: Mode
    indices: np.ndarray
    local_coords: np.ndarray
    basis: Optional[np.ndarray] = None
    source: str = "tangent-projection"

    @property
    def d(self) -> int:
        return self.local_coords.shape[1]

    def offsets(self) -> np.ndarray:
        """Ambient offsets ``basis @ c`` of the chart points from the mode."""
        if self.basis is None:
            raise InputError("chart has no ambient basis")
        return self.local_coords @ self.basis.T


@dataclass
class Atlas:
    """Charts stitched into one global coordinate system.

    ``global_coords`` has one row per ridge point; rows of excluded points
    are ``NaN``. ``offsets`` holds the placement of each chart origin.
    """

    charts: list
    reference_mode_id: int
    global_coords: np.ndarray
    labels: np.ndarray
    offsets: np.ndarray
    geodesics: dict = field(default_factory=dict)
    graph: Optional[NeighborGraph] = field(default=None, repr=False)
    orientation: dict = field(default_factory=dict)


def ridge_graph(estimate: RidgeEstimate, modes: list, k: int = 12, labels=None) -> NeighborGraph:
    """kNN graph over ridge points followed by the modes.

    Node ``i < n`` is ridge point ``i``; node ``n + j`` is mode ``j``.
    Non-converged ridge points are kept as nodes; pass their positions
    through unchanged so indices stay aligned with the estimate.
    """
    pts = estimate.positions
    if modes:
        pts = np.vstack([pts, np.array([m.position for m in modes])])
    return build_knn(pts, k)


def tangent_basis(model: DensityModel, x, d: int, par=None) -> np.ndarray:
    """Tangent eigenvectors ``(D, d)`` of the Hessian at ``x``."""
    par = parallel_indices(model.dim, d, par)
    spec = decompose(model.hessian(np.asarray(x, dtype=np.float64)), d)
    return _fix_signs(spec.eigenvectors[:, par])


def build_tangent_chart(model: DensityModel, mode: Mode, estimate: RidgeEstimate, mode_id: int = 0) -> Chart:
    """Project a basin onto the tangent space of its mode: ``Q^T (x_i - m)``."""
    if len(mode.basin) == 0:
        raise InputError("mode has an empty basin")
    basis = mode.basis
    if basis is None:
        basis = tangent_basis(model, mode.position, estimate.d, estimate.tangent_indices)
    idx = np.sort(np.asarray(mode.basin))
    coords = (estimate.positions[idx] - mode.position) @ basis
    return Chart(mode_id=mode_id, mode=mode, indices=idx, local_coords=coords, basis=basis,
                 source="tangent-projection")


def _polar(m: np.ndarray) -> np.ndarray:
    """Nearest matrix with orthonormal columns (polar factor)."""
    u, _, vt = np.linalg.svd(m, full_matrices=False)
    return u @ vt


def orientation_align(charts: list, reference_basis: np.ndarray, transported: list) -> tuple[list, list]:
    """Match each chart's basis to the reference basis.

    ``transported[i]`` is chart ``i``'s basis carried to the reference mode.
    Columns are paired with the reference columns by maximal absolute
    overlap and flipped where the overlap is negative; the chart coordinates
    are permuted and flipped accordingly.

    Returns
    -------
    charts : list of Chart
        Re-expressed charts (bases replaced by the aligned ones).
    report : list of dict
        Per chart: ``permutation``, ``signs`` and ``orientation`` (the sign
        of the determinant of the overlap, ``-1`` meaning a reflection).
    """
    out, report = [], []
    for ch, b in zip(charts, transported):
        overlap = reference_basis.T @ b
        rows, cols = linear_sum_assignment(-np.abs(overlap))
        perm = cols[np.argsort(rows)]
        signs = np.sign(overlap[np.arange(len(perm)), perm])
        signs[signs == 0] = 1.0
        det = float(np.sign(np.linalg.det(overlap))) if overlap.size else 1.0
        coords = ch.local_coords[:, perm] * signs
        basis = None if ch.basis is None else ch.basis[:, perm] * signs
        out.append(Chart(ch.mode_id, ch.mode, ch.indices, coords, basis, ch.source))
        report.append({"permutation": perm.tolist(), "signs": signs.tolist(), "orientation": det})
    return out, report


def select_reference(graph: NeighborGraph, mode_nodes, sizes=None) -> int:
    """Index (into ``mode_nodes``) of the mode with least total path length
    to the other modes; ties go to the larger basin, then the lower index."""
    mode_nodes = list(mode_nodes)
    if len(mode_nodes) == 1:
        return 0
    totals = []
    for a in mode_nodes:
        dist = shortest_path_lengths(graph, a)
        totals.append(float(np.sum(dist[mode_nodes])))
    sizes = np.zeros(len(mode_nodes)) if sizes is None else np.asarray(sizes, dtype=float)
    order = sorted(range(len(mode_nodes)), key=lambda j: (totals[j], -sizes[j], j))
    return order[0]


def _check_connected(graph: NeighborGraph, nodes):
    labels = connected_components(graph)
    comps = sorted(set(int(labels[n]) for n in nodes))
    if len(comps) > 1:
        raise ConnectivityError(
            f"ridge is disconnected: modes fall into components {comps}; "
            "increase the neighbour count or treat the pieces separately",
            components=tuple(comps),
        )


def translate_1d(unwrap: LocalUnwrap, graph: Optional[NeighborGraph] = None, reference: Optional[int] = None,
                 k: int = 12) -> Atlas:
    """Stitch 1-D arc-length charts by translation along the ridge.

    Every chart is shifted by the graph-path length from the reference mode
    to its mode, with the sign given by the travel direction. The reference
    direction is oriented so that the nearest other mode lies on the
    positive side, and each chart is flipped if needed so its coordinates
    grow in the same direction as the global ones.

    Raises
    ------
    ConnectivityError
        If the modes do not all lie in one graph component.
    """
    modes = unwrap.modes
    est = unwrap.estimate
    if est is None or est.d != 1:
        raise InputError("translate_1d needs a 1-D local unwrapping")
    n = len(est)
    if graph is None:
        graph = ridge_graph(est, modes, k)
    mode_nodes = [n + j for j in range(len(modes))]
    charts = [
        Chart(c.mode_id, modes[c.mode_id], c.indices, c.coords.copy(), modes[c.mode_id].basis, "arc-length")
        for c in unwrap.charts
    ]
    global_coords = np.full((n, 1), np.nan)
    offsets = np.zeros((len(modes), 1))
    if not modes:
        return Atlas([], -1, global_coords, unwrap.labels, offsets, graph=graph)
    _check_connected(graph, mode_nodes)
    if reference is None:
        reference = select_reference(graph, mode_nodes, [m.size for m in modes])
    ref_node = mode_nodes[reference]
    dist = shortest_path_lengths(graph, ref_node)

    paths = {}
    for j in range(len(modes)):
        if j != reference:
            paths[j] = shortest_path(graph, ref_node, mode_nodes[j])

    ref_basis = modes[reference].basis[:, 0]
    ref_sign = 1.0
    orientation = {reference: 1.0}
    if paths:
        closest = min(paths, key=lambda j: (dist[mode_nodes[j]], j))
        t0 = _leading_tangent(graph.nodes[paths[closest]])
        # nearest mode defines the positive direction
        ref_sign = 1.0 if float(t0 @ ref_basis) >= 0 else -1.0
    charts[reference].local_coords *= ref_sign
    orientation[reference] = ref_sign

    for j, path in paths.items():
        pos = graph.nodes[path]
        lead = _leading_tangent(pos)
        side = 1.0 if float(ref_sign * ref_basis @ lead) >= 0 else -1.0
        length = float(np.sum(np.linalg.norm(path_tangents(pos), axis=1)))
        offsets[j, 0] = side * length
        arrive = _leading_tangent(pos[::-1])  # points from mode j back towards the reference
        flip = 1.0 if float(modes[j].basis[:, 0] @ (-arrive) * side) >= 0 else -1.0
        charts[j].local_coords *= flip
        orientation[j] = flip

    for ch in charts:
        global_coords[ch.indices] = ch.local_coords + offsets[ch.mode_id]
    return Atlas(charts, reference, global_coords, unwrap.labels, offsets,
                 geodesics={j: p for j, p in paths.items()}, graph=graph, orientation=orientation)


def _leading_tangent(pos: np.ndarray, span: int = 3) -> np.ndarray:
    """Unit direction from ``pos[0]`` towards the first few path nodes."""
    if len(pos) < 2:
        return np.zeros(pos.shape[1])
    v = pos[min(span, len(pos) - 1)] - pos[0]
    nv = np.linalg.norm(v)
    return v / nv if nv > 0 else v


def transport_frame(model: DensityModel, frame: np.ndarray, waypoints, d: int, par=None,
                    renormalize: bool = True) -> np.ndarray:
    """Carry ``frame`` (``(D, k)`` tangent vectors) along ``waypoints``.

    At each waypoint ``F <- Q Q^T F`` with ``Q`` the tangent basis there,
    optionally followed by re-orthonormalization.
    """
    par = parallel_indices(model.dim, d, par)
    wp = np.asarray(waypoints, dtype=np.float64)
    f = np.array(frame, dtype=np.float64, copy=True)
    if len(wp) < 2:
        return f
    spec = decompose(model.hessian(wp[1:]), d)
    qs = spec.eigenvectors[:, :, par]
    for q in qs:
        f = q @ (q.T @ f)
        if renormalize:
            if np.linalg.matrix_rank(f) < f.shape[1]:
                raise NumericalError("transported frame collapsed", point=None)
            f = _polar(f)
    return f


def parallel_transport(model: DensityModel, chart: Chart, path: GeodesicPath, d: Optional[int] = None,
                       par=None, renormalize: bool = True, target_basis: Optional[np.ndarray] = None) -> Chart:
    """Move a tangent chart along ``path`` by translate-then-project steps.

    Chart points are represented by ambient offsets from the current path
    point; each step translates them with the path and projects the offsets
    onto the tangent space at the new waypoint. The result is expressed in
    ``target_basis`` (default: tangent basis at the path end).

    A zero-length path returns the chart unchanged.
    """
    d = chart.d if d is None else d
    wp = path.waypoints if isinstance(path, GeodesicPath) else np.asarray(path, dtype=np.float64)
    if chart.basis is None:
        raise InputError("parallel transport needs a chart with an ambient basis")
    if len(wp) < 2 or np.all(wp == wp[0]):
        return Chart(chart.mode_id, chart.mode, chart.indices, chart.local_coords.copy(), chart.basis, chart.source)
    frame = transport_frame(model, chart.basis, wp, d, par, renormalize)
    offsets = chart.local_coords @ frame.T
    if target_basis is None:
        target_basis = tangent_basis(model, wp[-1], d, par)
    coords = offsets @ target_basis
    return Chart(chart.mode_id, chart.mode, chart.indices, coords, target_basis, "transported")


def develop_path(model: DensityModel, waypoints, frame: np.ndarray, d: int, par=None,
                 renormalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Lay a ridge path out in the tangent coordinates of its first point.

    Each step ``Δν_t`` keeps its length and takes its direction from the
    tangent frame transported along the path, so a geodesic on a flat
    surface develops into a straight segment.

    Returns
    -------
    end : ndarray, shape (d,)
        Developed position of the last waypoint.
    frame : ndarray, shape (D, d)
        The frame after transport to the last waypoint.
    """
    par = parallel_indices(model.dim, d, par)
    wp = np.asarray(waypoints, dtype=np.float64)
    f = np.array(frame, dtype=np.float64, copy=True)
    pos = np.zeros(d)
    if len(wp) < 2:
        return pos, f
    spec = decompose(model.hessian(wp[1:]), d)
    qs = spec.eigenvectors[:, :, par]
    for t, step in enumerate(np.diff(wp, axis=0)):
        size = float(np.linalg.norm(step))
        if size > 0:
            a = f.T @ step
            na = float(np.linalg.norm(a))
            if na <= 1e-12 * size:
                raise NumericalError(f"path step {t} is normal to the ridge; cannot develop it", point=wp[t])
            pos = pos + size * a / na
        q = qs[t]
        f = q @ (q.T @ f)
        if renormalize:
            f = _polar(f)
    return pos, f


def isometric_unfold(model: DensityModel, charts: list, paths: dict, reference: int, d: int, par=None,
                     n_points: Optional[int] = None, renormalize: bool = True,
                     labels: Optional[np.ndarray] = None) -> Atlas:
    """Lay all tangent charts out in the reference mode's tangent plane.

    ``paths[j]`` is the geodesic from mode ``j`` to the reference mode.
    Chart ``j`` is first transported to the reference along it (its
    coordinates then live in the reference basis) and then placed at the
    development of the reversed path, walked from the reference out to mode
    ``j``. The reference chart keeps its own coordinates.
    """
    ref = charts[reference]
    ref_basis = ref.basis
    total = n_points if n_points is not None else 1 + max(int(c.indices.max()) for c in charts if len(c.indices))
    global_coords = np.full((total, d), np.nan)
    offsets = np.zeros((len(charts), d))
    out_charts = list(charts)
    for j, ch in enumerate(charts):
        if j == reference:
            continue
        path = paths[j]
        moved = parallel_transport(model, ch, path, d, par, renormalize, target_basis=ref_basis)
        back = path.reversed().waypoints if isinstance(path, GeodesicPath) else np.asarray(path)[::-1]
        offsets[j], _ = develop_path(model, back, ref_basis, d, par, renormalize)
        out_charts[j] = moved
    for j, ch in enumerate(out_charts):
        global_coords[ch.indices] = ch.local_coords + offsets[j]
    if labels is None:
        labels = np.full(total, -1, dtype=int)
        for j, ch in enumerate(charts):
            labels[ch.indices] = j
    return Atlas(out_charts, reference, global_coords, labels, offsets, geodesics=dict(paths))


def unfold_atlas(model: DensityModel, unwrap: LocalUnwrap, k: int = 12, reference: Optional[int] = None,
                 config: GeodesicConfig = GeodesicConfig(), renormalize: bool = True, threads: int = 1) -> Atlas:
    """Tangent charts, geodesics to the reference mode, transport and unfolding.

    The mode-to-reference geodesics are independent and run on ``threads``
    worker threads; results do not depend on the thread count.
    """
    est = unwrap.estimate
    modes = unwrap.modes
    n = len(est)
    d = est.d
    par = est.tangent_indices
    if not modes:
        return Atlas([], -1, np.full((n, d), np.nan), unwrap.labels, np.zeros((0, d)))
    charts = [build_tangent_chart(model, mo, est, j) for j, mo in enumerate(modes)]
    graph = ridge_graph(est, modes, k)
    mode_nodes = [n + j for j in range(len(modes))]
    _check_connected(graph, mode_nodes)
    if reference is None:
        reference = select_reference(graph, mode_nodes, [m.size for m in modes])
    others = [j for j in range(len(modes)) if j != reference]

    def solve(j):
        return geodesic(model, est, graph, mode_nodes[j], mode_nodes[reference], config)

    if threads > 1 and len(others) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            paths = dict(zip(others, pool.map(solve, others)))
    else:
        paths = {j: solve(j) for j in others}
    atlas = isometric_unfold(model, charts, paths, reference, d, par, n_points=n, renormalize=renormalize,
                             labels=unwrap.labels)
    atlas.graph = graph
    return atlas
