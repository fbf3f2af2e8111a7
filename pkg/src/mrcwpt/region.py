"""Achievable power regions, sampled on load-resistance grids.

Without time sharing the region is the image of the load box under the
per-load power map (generally nonconvex). With time sharing it is the set
of convex mixtures, with total weight at most one, of points drawn from
every switch configuration's region; since mixtures are linear in the
sampled vertices, the convex hull of the pooled samples plus the origin
realizes that set exactly on the sample vertices.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .circuit import SwitchState, SystemConfig
from .errors import ValidationError
from .timeshare import enumerate_configs

DEFAULT_GRID_2D = 200
DEFAULT_GRID_3D = 60

WITHOUT_TS = "without-ts"
WITH_TS = "with-ts"


@dataclass(frozen=True)
class PowerRegionSample:
    """A sampled power region.

    ``points`` holds one achievable power tuple per row. ``boundary`` is
    the outer frontier: the componentwise-maximal (Pareto) samples for the
    concurrent region, or the hull vertices for the time-shared region.
    """

    points: np.ndarray
    mode: str
    grid_points: int
    bounds: tuple[tuple[float, float], ...]
    boundary: np.ndarray


def _grid_axes(sys: SystemConfig, connected, grid_points: int):
    return [
        np.geomspace(sys.x_lo[k], sys.x_hi[k], grid_points) for k in connected
    ]


def _power_samples(sys: SystemConfig, sw: SwitchState, grid_points: int) -> np.ndarray:
    """Power tuples for every grid combination of the connected loads."""
    conn = list(sw.connected)
    axes = _grid_axes(sys, conn, grid_points)
    mesh = np.meshgrid(*axes, indexing="ij")
    w2 = sys.w**2
    half_v2 = 0.5 * abs(sys.v_tx) ** 2
    denom = np.full(mesh[0].shape, sys.transmitter.resistance)
    for j, k in enumerate(conn):
        denom = denom + w2 * sys.h[k] ** 2 / (sys.receivers[k].resistance + mesh[j])
    out = np.zeros(mesh[0].shape + (sys.n_receivers,))
    for j, k in enumerate(conn):
        series = sys.receivers[k].resistance + mesh[j]
        out[..., k] = half_v2 * w2 * sys.h[k] ** 2 * mesh[j] / (series**2 * denom**2)
    return out.reshape(-1, sys.n_receivers)


def pareto_boundary(points: np.ndarray) -> np.ndarray:
    """Componentwise-maximal (Pareto) points in lexicographic order.

    Two- and three-dimensional inputs use O(n log n) sweeps; higher
    dimensions fall back to an iterative dominance filter, so keep those
    sample sets moderate.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if pts.size == 0:
        return pts.reshape(0, pts.shape[1] if pts.ndim == 2 else 0)
    if pts.shape[1] == 1:
        return pts[[-1]]
    if pts.shape[1] == 2:
        # scan by first coordinate descending; a point survives when its
        # second coordinate beats everything seen so far
        order = np.lexsort((-pts[:, 1], -pts[:, 0]))
        best = -np.inf
        keep = []
        for i in order:
            if pts[i, 1] > best:
                keep.append(i)
                best = pts[i, 1]
        frontier = pts[sorted(keep, key=lambda i: pts[i, 0])]
        return frontier
    if pts.shape[1] == 3:
        frontier = pts[_maxima_3d(pts)]
        return frontier[np.lexsort(frontier.T[::-1])]
    # visiting candidates in decreasing coordinate sum prunes the cloud fast
    order = np.argsort(-pts.sum(axis=1))
    pts = pts[order]
    efficient = np.ones(len(pts), dtype=bool)
    for i in range(len(pts)):
        if not efficient[i]:
            continue
        survivors = np.any(pts[efficient] > pts[i], axis=1)
        efficient[efficient] = survivors
        efficient[i] = True
    frontier = pts[efficient]
    return frontier[np.lexsort(frontier.T[::-1])]


def _maxima_3d(pts: np.ndarray) -> np.ndarray:
    """Indices of componentwise-maximal rows among deduplicated 3-D points.

    Plane sweep in decreasing first coordinate with a staircase of the
    (second, third)-coordinate frontier seen so far: ascending second
    coordinate, strictly descending third. O(n log n).
    """
    import bisect

    order = np.lexsort((-pts[:, 2], -pts[:, 1], -pts[:, 0]))
    stair_y: list[float] = []
    stair_z: list[float] = []
    keep = np.zeros(len(pts), dtype=bool)
    i = 0
    n = len(order)
    while i < n:
        j = i
        x0 = pts[order[i], 0]
        while j < n and pts[order[j], 0] == x0:
            j += 1
        group = order[i:j]  # second coordinate descending, third descending
        survivors = []
        best_z = -np.inf
        for idx in group:
            if pts[idx, 2] > best_z:
                survivors.append(idx)
                best_z = pts[idx, 2]
        for idx in survivors:
            y = float(pts[idx, 1])
            z = float(pts[idx, 2])
            pos = bisect.bisect_left(stair_y, y)
            if pos < len(stair_y) and stair_z[pos] >= z:
                continue  # dominated by an earlier (strictly larger x) point
            keep[idx] = True
            # splice the new step in, dropping the steps it dominates
            lo = pos
            while lo > 0 and stair_z[lo - 1] <= z:
                lo -= 1
            hi = pos
            while hi < len(stair_y) and stair_y[hi] == y and stair_z[hi] <= z:
                hi += 1
            stair_y[lo:hi] = [y]
            stair_z[lo:hi] = [z]
        i = j
    return np.nonzero(keep)[0]


def hull_2d(points: np.ndarray) -> np.ndarray:
    """Convex hull of planar points, counterclockwise (monotone chain).

    Only exactly collinear vertices are dropped; keeping near-collinear
    ones costs a few extra vertices but guarantees every input point stays
    inside the hull to float accuracy.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts

    def build(sequence):
        chain = []
        for p in sequence:
            while len(chain) >= 2:
                a, b = chain[-2], chain[-1]
                cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
                if cross <= 0.0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = build(pts)
    upper = build(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        return np.array([pts[0], pts[-1]])
    return hull


def hull_area_2d(vertices: np.ndarray) -> float:
    """Shoelace area of a counterclockwise polygon (0 for degenerate hulls)."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.abs(x @ np.roll(y, -1) - y @ np.roll(x, -1)))


def point_in_hull_2d(point, vertices: np.ndarray, tol: float = 1e-6) -> bool:
    """Whether a point lies in a counterclockwise convex polygon within tol."""
    v = np.asarray(vertices, dtype=float)
    p = np.asarray(point, dtype=float)
    if len(v) == 0:
        return False
    if len(v) == 1:
        return bool(np.linalg.norm(p - v[0]) <= tol)
    if len(v) == 2:
        a, b = v
        ab = b - a
        length = np.linalg.norm(ab)
        if length == 0.0:
            return bool(np.linalg.norm(p - a) <= tol)
        t = float(np.clip((p - a) @ ab / (length * length), 0.0, 1.0))
        return bool(np.linalg.norm(a + t * ab - p) <= tol)
    for i in range(len(v)):
        a = v[i]
        b = v[(i + 1) % len(v)]
        edge = b - a
        norm = np.linalg.norm(edge)
        if norm == 0.0:
            continue
        # signed distance to the edge line; negative means outside (CCW hull)
        if ((edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])) / norm) < -tol:
            return False
    return True


def points_in_hull_2d(points, vertices: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Vectorized :func:`point_in_hull_2d` over many points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return np.array([point_in_hull_2d(p, v, tol) for p in pts])
    inside = np.ones(len(pts), dtype=bool)
    for i in range(len(v)):
        a = v[i]
        b = v[(i + 1) % len(v)]
        edge = b - a
        norm = float(np.hypot(edge[0], edge[1]))
        if norm == 0.0:
            continue
        signed = (edge[0] * (pts[:, 1] - a[1]) - edge[1] * (pts[:, 0] - a[0])) / norm
        inside &= signed >= -tol
    return inside


def _hull_nd(points: np.ndarray):
    """Hull vertices and facet equations for 3-D point clouds (via qhull)."""
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(points)
    except QhullError:
        return None
    return hull


def points_in_hull_nd(points, hull, tol: float = 1e-6) -> np.ndarray:
    """Vectorized facet test against a scipy ConvexHull."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    normals = hull.equations[:, :-1]
    offsets = hull.equations[:, -1]
    return np.all(pts @ normals.T + offsets <= tol, axis=1)


def sample_region_without_ts(
    sys: SystemConfig, sw: SwitchState | None = None, grid_points: int | None = None
) -> PowerRegionSample:
    """Concurrent-transfer region: power tuples over a log grid of the load box."""
    if sw is None:
        sw = SwitchState.all_closed(sys.n_receivers)
    if grid_points is None:
        grid_points = DEFAULT_GRID_2D if len(sw.connected) <= 2 else DEFAULT_GRID_3D
    if grid_points < 2:
        raise ValidationError("grid_points must be at least 2")
    points = _power_samples(sys, sw, grid_points)
    return PowerRegionSample(
        points=points,
        mode=WITHOUT_TS,
        grid_points=grid_points,
        bounds=tuple((sys.x_lo[k], sys.x_hi[k]) for k in range(sys.n_receivers)),
        boundary=pareto_boundary(points),
    )


def sample_region_with_ts(
    sys: SystemConfig, grid_points: int | None = None, tau_grid=None
) -> PowerRegionSample:
    """Time-shared region: hull of all per-configuration samples plus the origin.

    ``tau_grid`` is accepted for interface symmetry but unused: mixtures
    are linear in the sampled vertices, so the hull needs no explicit
    time-fraction grid.
    """
    n = sys.n_receivers
    if grid_points is None:
        grid_points = DEFAULT_GRID_2D if n <= 2 else DEFAULT_GRID_3D
    if grid_points < 2:
        raise ValidationError("grid_points must be at least 2")
    del tau_grid

    pools = [np.zeros((1, n))]
    for sw in enumerate_configs(n):
        pools.append(_power_samples(sys, sw, grid_points))
    points = np.vstack(pools)

    if n == 1:
        boundary = np.array([[0.0], [float(points.max())]])
    elif n == 2:
        boundary = hull_2d(points)
    elif n == 3:
        hull = _hull_nd(points)
        boundary = points[hull.vertices] if hull is not None else np.zeros((0, n))
    else:
        boundary = np.zeros((0, n))
    return PowerRegionSample(
        points=points,
        mode=WITH_TS,
        grid_points=grid_points,
        bounds=tuple((sys.x_lo[k], sys.x_hi[k]) for k in range(n)),
        boundary=boundary,
    )


def region_to_csv(sample: PowerRegionSample, path) -> None:
    """Write points then boundary as CSV sections, deterministically ordered."""
    n = sample.points.shape[1]
    header = [f"p_{k + 1}" for k in range(n)] + ["section"]
    try:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for row in sample.points:
                writer.writerow([f"{v:.11e}" for v in row] + ["points"])
            for row in sample.boundary:
                writer.writerow([f"{v:.11e}" for v in row] + ["boundary"])
    except OSError as exc:
        raise OSError(f"cannot write region CSV to {path}: {exc}") from exc


def read_region_csv(path):
    """Parse a region CSV back into (points, boundary) arrays."""
    points = []
    boundary = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        n = len(header) - 1
        for row in reader:
            values = [float(v) for v in row[:n]]
            (points if row[n] == "points" else boundary).append(values)
    return (
        np.array(points).reshape(-1, n),
        np.array(boundary).reshape(-1, n),
    )
