"""Scalar-field reconstruction from perturbation vectors and isoline extraction.

The projection plane is covered by a regular grid whose squares are split
along the same diagonal into two triangles. A piecewise-linear field on that
mesh is fitted so its gradient matches each point's perturbation vector in
the least-squares sense; its isolines are the generalised axes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .exceptions import EmptyConstraints
from .linalg import MatVecOracle, conjugate_gradients
from .validation import check_points_2d

PADDING = 0.05


@dataclass
class ScalarGrid:
    """Vertex values of a triangulated ``resolution x resolution`` grid.

    ``values[iy, ix]`` sits at ``(xs[ix], ys[iy])``. Every square is split by
    the diagonal from its lower-left to its upper-right corner.
    """

    resolution: int
    bounds: tuple
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        g = self.resolution
        if self.values.shape != (g + 1, g + 1):
            raise ValueError(f"values must be {(g + 1, g + 1)}, got {self.values.shape}")
        self.bounds = tuple(float(b) for b in self.bounds)

    @property
    def xs(self):
        x0, x1, _, _ = self.bounds
        return np.linspace(x0, x1, self.resolution + 1)

    @property
    def ys(self):
        _, _, y0, y1 = self.bounds
        return np.linspace(y0, y1, self.resolution + 1)

    @property
    def spacing(self):
        x0, x1, y0, y1 = self.bounds
        return (x1 - x0) / self.resolution, (y1 - y0) / self.resolution

    def locate(self, points):
        """Cell indices, in-cell fractions and upper-triangle flags of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x0, _, y0, _ = self.bounds
        hx, hy = self.spacing
        fx = (points[:, 0] - x0) / hx
        fy = (points[:, 1] - y0) / hy
        cx = np.clip(np.floor(fx).astype(int), 0, self.resolution - 1)
        cy = np.clip(np.floor(fy).astype(int), 0, self.resolution - 1)
        u, v = fx - cx, fy - cy
        return cx, cy, u, v, v > u

    def gradient_at(self, points):
        """Gradient of the triangle containing each point."""
        cx, cy, _, _, upper = self.locate(points)
        f = self.values
        hx, hy = self.spacing
        f00, f10 = f[cy, cx], f[cy, cx + 1]
        f01, f11 = f[cy + 1, cx], f[cy + 1, cx + 1]
        gx = np.where(upper, (f11 - f01) / hx, (f10 - f00) / hx)
        gy = np.where(upper, (f01 - f00) / hy, (f11 - f10) / hy)
        return np.stack([gx, gy], axis=1)

    def value_at(self, points):
        """Piecewise-linear interpolation on the triangulation."""
        cx, cy, u, v, upper = self.locate(points)
        f = self.values
        f00, f10 = f[cy, cx], f[cy, cx + 1]
        f01, f11 = f[cy + 1, cx], f[cy + 1, cx + 1]
        lower_val = f00 + u * (f10 - f00) + v * (f11 - f10)
        upper_val = f00 + v * (f01 - f00) + u * (f11 - f01)
        return np.where(upper, upper_val, lower_val)

    def triangle_gradients(self):
        """``(g, g, 2, 2)``: gradient of the lower [..., 0, :] and upper [..., 1, :] triangles."""
        f = self.values
        hx, hy = self.spacing
        f00, f10, f01, f11 = f[:-1, :-1], f[:-1, 1:], f[1:, :-1], f[1:, 1:]
        lower = np.stack([(f10 - f00) / hx, (f11 - f10) / hy], axis=-1)
        upper = np.stack([(f11 - f01) / hx, (f01 - f00) / hy], axis=-1)
        return np.stack([lower, upper], axis=-2)

    def to_dict(self):
        return {
            "resolution": self.resolution,
            "bounds": list(self.bounds),
            "values": self.values.tolist(),
        }


def padded_bounds(points, padding=PADDING):
    """Bounding box grown by ``padding`` of its extent on every side."""
    points = np.asarray(points, dtype=float)
    lo, hi = points.min(axis=0), points.max(axis=0)
    extent = hi - lo
    extent = np.where(extent > 0, extent, np.maximum(np.abs(hi), 1.0))
    lo, hi = lo - padding * extent, hi + padding * extent
    return (lo[0], hi[0], lo[1], hi[1])


def _vid(ix, iy, g):
    return iy * (g + 1) + ix


def _gradient_rows(grid, points):
    """Sparse ``2n x N`` operator mapping vertex values to per-point gradients."""
    g = grid.resolution
    hx, hy = grid.spacing
    cx, cy, _, _, upper = grid.locate(points)
    n = len(points)
    v00, v10 = _vid(cx, cy, g), _vid(cx + 1, cy, g)
    v01, v11 = _vid(cx, cy + 1, g), _vid(cx + 1, cy + 1, g)
    # d/dx: lower (f10 - f00)/hx, upper (f11 - f01)/hx
    # d/dy: lower (f11 - f10)/hy, upper (f01 - f00)/hy
    xp = np.where(upper, v11, v10)
    xm = np.where(upper, v01, v00)
    yp = np.where(upper, v01, v11)
    ym = np.where(upper, v00, v10)
    rows = np.concatenate([np.repeat(2 * np.arange(n), 2), np.repeat(2 * np.arange(n) + 1, 2)])
    cols = np.concatenate([np.stack([xp, xm], 1).ravel(), np.stack([yp, ym], 1).ravel()])
    vals = np.concatenate([np.tile([1 / hx, -1 / hx], n), np.tile([1 / hy, -1 / hy], n)])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(2 * n, (g + 1) ** 2))


def _smoothness_rows(grid):
    """Second differences of the field along rows, columns and cell diagonals.

    Each row is ``(f_a - 2 f_b + f_c) / h`` for three consecutive collinear
    vertices at spacing ``h``: the change in slope between two adjacent grid
    edges. Linear fields have none, so the penalty never biases a ramp.
    """
    g = grid.resolution
    hx, hy = grid.spacing
    hd = float(np.hypot(hx, hy))
    idx = np.arange((g + 1) ** 2).reshape(g + 1, g + 1)
    triples = [
        (idx[:, :-2], idx[:, 1:-1], idx[:, 2:], hx),
        (idx[:-2, :], idx[1:-1, :], idx[2:, :], hy),
        (idx[:-2, :-2], idx[1:-1, 1:-1], idx[2:, 2:], hd),
    ]
    blocks = []
    for a, b, c, h in triples:
        a, b, c = a.ravel(), b.ravel(), c.ravel()
        m = len(a)
        rows = np.repeat(np.arange(m), 3)
        cols = np.stack([a, b, c], 1).ravel()
        vals = np.tile([1.0, -2.0, 1.0], m) / h
        blocks.append(sparse.csr_matrix((vals, (rows, cols)), shape=(m, (g + 1) ** 2)))
    return sparse.vstack(blocks).tocsr()


def fit_scalar_field(points, vectors, resolution=10, reg_weight=0.01, bounds=None) -> ScalarGrid:
    """Least-squares scalar field whose gradient matches the vectors.

    Every point contributes two rows asking the gradient of its containing
    triangle to equal its vector. ``reg_weight`` scales smoothness rows that
    penalise changes of slope across adjacent grid edges; a mean-zero row
    fixes the additive constant. The normal equations are solved by
    conjugate gradients.
    """
    points = check_points_2d(points)
    vectors = np.asarray(getattr(vectors, "vectors", vectors), dtype=float)
    if vectors.shape != points.shape:
        raise ValueError(f"vectors shape {vectors.shape} does not match points {points.shape}")
    if bounds is None:
        bounds = padded_bounds(points)
    g = int(resolution)
    if g < 1:
        raise ValueError("resolution must be at least 1")
    grid = ScalarGrid(g, bounds, np.zeros((g + 1, g + 1)))
    if not np.any(vectors != 0.0):
        warnings.warn("all perturbation vectors are zero; returning a flat field", EmptyConstraints, stacklevel=2)
        return grid
    N = (g + 1) ** 2
    G = _gradient_rows(grid, points)
    S = _smoothness_rows(grid) * reg_weight if g >= 2 else sparse.csr_matrix((0, N))
    gauge = sparse.csr_matrix(np.full((1, N), 1.0 / N))
    A = sparse.vstack([G, S, gauge]).tocsr()
    b = np.concatenate([vectors.ravel(), np.zeros(S.shape[0] + 1)])
    AtA = (A.T @ A).tocsr()
    f = conjugate_gradients(MatVecOracle(N, AtA.dot), A.T @ b, tol=1e-12, max_iter=20 * N)
    f = f - f.mean()
    grid.values = f.reshape(g + 1, g + 1)
    return grid


# ---------------------------------------------------------------- isolines


@dataclass
class Isoline:
    level: float
    polyline: np.ndarray
    closed: bool = False

    def to_dict(self):
        return {"level": float(self.level), "polyline": np.asarray(self.polyline).tolist()}


@dataclass
class IsolineSet:
    levels: np.ndarray
    lines: list = field(default_factory=list)

    def __len__(self):
        return len(self.lines)

    def __iter__(self):
        return iter(self.lines)

    def to_list(self):
        return [line.to_dict() for line in self.lines]


def default_levels(grid: ScalarGrid, n_levels=10):
    """``n_levels`` values evenly spaced strictly inside the field's range."""
    lo, hi = float(grid.values.min()), float(grid.values.max())
    if not hi > lo:
        return np.array([])
    return np.linspace(lo, hi, n_levels + 2)[1:-1]


# Each cell is split into a lower triangle (LL, LR, UR) and an upper one
# (LL, UR, UL). Edges: 0 bottom, 1 right, 2 top, 3 left, "d" the diagonal.
# For a triangle whose corners straddle the level, the segment joins the two
# edges next to the corner on its own side.
_TRIANGLES = (
    (("ll", "lr", "ur"), {"ll": (0, "d"), "lr": (0, 1), "ur": (1, "d")}),
    (("ll", "ur", "ul"), {"ll": (3, "d"), "ur": (2, "d"), "ul": (2, 3)}),
)


def _edge_key(ix, iy, e):
    # Horizontal edges ("h", ix, iy) run from vertex (ix, iy) to (ix+1, iy);
    # vertical edges ("v", ix, iy) from (ix, iy) to (ix, iy+1); diagonals
    # ("d", ix, iy) from (ix, iy) to (ix+1, iy+1).
    if e == 0:
        return ("h", ix, iy)
    if e == 1:
        return ("v", ix + 1, iy)
    if e == 2:
        return ("h", ix, iy + 1)
    if e == 3:
        return ("v", ix, iy)
    return ("d", ix, iy)


def _crossing(grid, key, level):
    kind, ix, iy = key
    xs, ys, f = grid.xs, grid.ys, grid.values
    dx, dy = {"h": (1, 0), "v": (0, 1), "d": (1, 1)}[kind]
    fa, fb = f[iy, ix], f[iy + dy, ix + dx]
    t = (level - fa) / (fb - fa)
    return np.array([xs[ix] + t * (xs[ix + dx] - xs[ix]), ys[iy] + t * (ys[iy + dy] - ys[iy])])


def _cell_segments(grid, level):
    f = grid.values
    g = grid.resolution
    segments = []
    for iy in range(g):
        for ix in range(g):
            corner = {"ll": f[iy, ix], "lr": f[iy, ix + 1], "ur": f[iy + 1, ix + 1], "ul": f[iy + 1, ix]}
            for names, edges in _TRIANGLES:
                above = [corner[c] >= level for c in names]
                if all(above) or not any(above):
                    continue
                lone = next(c for c, a in zip(names, above) if above.count(a) == 1)
                ea, eb = edges[lone]
                segments.append((_edge_key(ix, iy, ea), _edge_key(ix, iy, eb)))
    return segments


def _join(segments):
    """Chain segments sharing edge crossings into polylines (deterministic)."""
    adj = {}
    for s, (a, b) in enumerate(segments):
        adj.setdefault(a, []).append(s)
        adj.setdefault(b, []).append(s)
    used = [False] * len(segments)
    chains = []

    def walk(start_key, first_seg):
        keys = [start_key]
        seg, key = first_seg, start_key
        while seg is not None and not used[seg]:
            used[seg] = True
            a, b = segments[seg]
            key = b if a == key else a
            keys.append(key)
            nxt = [t for t in adj[key] if not used[t]]
            seg = nxt[0] if nxt else None
        return keys

    ends = sorted(k for k, segs in adj.items() if len(segs) == 1)
    for k in ends:
        s = adj[k][0]
        if not used[s]:
            chains.append((walk(k, s), False))
    for s in range(len(segments)):
        if not used[s]:
            keys = walk(segments[s][0], s)
            chains.append((keys, keys[0] == keys[-1]))
    return chains


def marching_squares(grid: ScalarGrid, n_levels=10, levels=None) -> IsolineSet:
    """Isolines of the grid field by marching squares over the triangulation.

    Each square is processed as its two triangles, so a polyline is the exact
    level set of the piecewise-linear field: vertices sit on cell edges or on
    the cell diagonal, and each segment is perpendicular to the gradient of
    the triangle it crosses. This also settles the saddle cases without a
    tie-break.
    """
    if levels is None:
        levels = default_levels(grid, n_levels)
    levels = np.asarray(levels, dtype=float)
    lines = []
    for level in levels:
        for keys, closed in _join(_cell_segments(grid, level)):
            pts = np.array([_crossing(grid, k, level) for k in keys])
            lines.append(Isoline(float(level), pts, closed))
    return IsolineSet(levels, lines)
