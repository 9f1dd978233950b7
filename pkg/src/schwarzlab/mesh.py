"""Structured triangulation of the unit square and per-element coefficient fields.

Each grid square is split along the diagonal from its lower-left to upper-right
corner, which yields the classical 5-point stencil for a homogeneous
coefficient. Node ids are lexicographic by (row, column).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError


@dataclass(frozen=True, eq=False)
class Mesh:
    n: int                      # cells per side
    h: float                    # 1/n
    vertices: np.ndarray        # ((n+1)^2, 2)
    triangles: np.ndarray       # (2 n^2, 3) node ids
    centroids: np.ndarray       # (2 n^2, 2)
    boundary_mask: np.ndarray   # ((n+1)^2,) bool, True on the domain boundary

    @property
    def n_nodes(self):
        return self.vertices.shape[0]

    @property
    def n_elements(self):
        return self.triangles.shape[0]

    @property
    def interior_nodes(self):
        return np.flatnonzero(~self.boundary_mask)

    def node_id(self, ix, iy):
        """Global id of grid node (ix, iy); ix is the column, iy the row."""
        return iy * (self.n + 1) + ix


def build_structured_mesh(n):
    """Triangulate (0,1)^2 with n x n squares, each split lower-left to upper-right."""
    if n < 2:
        raise UsageError(f"need at least 2 cells per side, got {n}")
    h = 1.0 / n
    ix, iy = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    vertices = np.column_stack([ix.ravel() * h, iy.ravel() * h])

    cx, cy = np.meshgrid(np.arange(n), np.arange(n))
    cx = cx.ravel()
    cy = cy.ravel()
    ll = cy * (n + 1) + cx
    lr = ll + 1
    ul = ll + (n + 1)
    ur = ul + 1
    # element 2*c is the lower (right-of-diagonal) triangle, 2*c+1 the upper
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([ll, lr, ur])
    triangles[1::2] = np.column_stack([ll, ur, ul])

    centroids = vertices[triangles].mean(axis=1)
    gx = np.round(vertices[:, 0] / h).astype(int)
    gy = np.round(vertices[:, 1] / h).astype(int)
    boundary_mask = (gx == 0) | (gx == n) | (gy == 0) | (gy == n)
    return Mesh(n=n, h=h, vertices=vertices, triangles=triangles,
                centroids=centroids, boundary_mask=boundary_mask)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle carrying a coefficient value."""
    x0: float
    y0: float
    x1: float
    y1: float
    value: float


@dataclass(frozen=True, eq=False)
class CoefficientField:
    values: np.ndarray  # one positive value per element

    def __post_init__(self):
        if np.any(self.values <= 0.0):
            raise UsageError("coefficient values must be strictly positive")


def build_coefficient_field(mesh, background, inclusions=()):
    """Background value everywhere; the last listed rectangle containing an
    element centroid wins."""
    if background <= 0.0:
        raise UsageError("background coefficient must be positive")
    rects = [r if isinstance(r, Rect) else Rect(*r) for r in inclusions]
    for r in rects:
        if r.value <= 0.0:
            raise UsageError(f"inclusion value must be positive, got {r.value}")
    values = np.full(mesh.n_elements, float(background))
    cx = mesh.centroids[:, 0]
    cy = mesh.centroids[:, 1]
    for r in rects:
        inside = (cx >= r.x0) & (cx <= r.x1) & (cy >= r.y0) & (cy <= r.y1)
        values[inside] = r.value
    return CoefficientField(values=values)


def load_raster_field(mesh, raster):
    """Coefficient from a raster of cell values covering the unit square.

    Row 0 of the raster is the top of the domain; cells are half-open
    [x0, x1) x [y0, y1) with the last row/column closed at 1.
    """
    raster = np.atleast_2d(np.asarray(raster, dtype=float))
    if raster.size == 0:
        raise UsageError("raster must be nonempty")
    if np.any(raster <= 0.0):
        raise UsageError("raster values must be strictly positive")
    mr, mc = raster.shape
    col = np.minimum((mesh.centroids[:, 0] * mc).astype(int), mc - 1)
    row_from_bottom = np.minimum((mesh.centroids[:, 1] * mr).astype(int), mr - 1)
    return CoefficientField(values=raster[mr - 1 - row_from_bottom, col])


def read_raster_csv(path):
    """Read a raster from plain-text CSV; row 1 of the file is the top row."""
    raster = np.loadtxt(path, delimiter=",", ndmin=2)
    return raster
