"""Equidistant 1D/2D meshes and the edge <-> field reconstruction operators.

The 2D mesh is the (N+1) x (N+1) grid on the unit square. Node ``i`` sits at
``((i mod N+1) h, (i div N+1) h)``. Every grid cell is cut along its NW-SE
diagonal into a lower-left triangle (anchored at its SW corner, label ``NE``)
and an upper-right triangle (anchored at its NE corner, label ``SW``). Each
triangle therefore owns exactly one horizontal and one vertical graph edge,
which is what makes ``q0`` a table lookup.

Edge ordering is global: horizontal edges row-major (``a + b*N``), followed
by vertical edges row-major (``N(N+1) + a + b*(N+1)``).
"""
from dataclasses import dataclass, field

import numpy as np

from .quadrature import gauss_legendre_unit, triangle_rule

HORIZONTAL = "h"
VERTICAL = "v"

# offsets (dx, dy) of the three vertices of each triangle type adjacent to a
# node, vertex order as in the basis-function table: (X_i, second, third)
TRIANGLE_OFFSETS = {
    "NE": ((0, 0), (1, 0), (0, 1)),
    "SE": ((0, 0), (1, 0), (1, -1)),
    "S": ((0, 0), (1, -1), (0, -1)),
    "SW": ((0, 0), (0, -1), (-1, 0)),
    "NW": ((0, 0), (-1, 0), (-1, 1)),
    "N": ((0, 0), (-1, 1), (0, 1)),
}


class MeshSizeError(ValueError):
    pass


class SizeMismatch(ValueError):
    pass


def _check_n(N):
    if int(N) != N or N < 1:
        raise MeshSizeError(f"mesh size must be a positive integer, got {N!r}")
    return int(N)


@dataclass(frozen=True, eq=False)
class Mesh1D:
    n_cells: int
    h: float
    x: np.ndarray
    edges: np.ndarray  # (N, 2): edge i+1 runs x_i -> x_{i+1}

    dim = 1

    @property
    def n_nodes(self):
        return self.n_cells + 1

    @property
    def n_edges(self):
        return self.n_cells

    @property
    def boundary_edges(self):
        return np.zeros(self.n_cells, dtype=bool)

    @property
    def midpoints(self):
        return self.x[:-1] + 0.5 * self.h


def build_mesh_1d(N):
    N = _check_n(N)
    x = np.arange(N + 1) / N
    x[-1] = 1.0
    edges = np.column_stack([np.arange(N), np.arange(1, N + 1)])
    return Mesh1D(N, 1.0 / N, x, edges)


@dataclass(frozen=True, eq=False)
class Mesh2D:
    n: int
    h: float
    nodes: np.ndarray  # (n_nodes, 2)
    hedges: np.ndarray  # (N(N+1), 2) tail=W, head=E
    vedges: np.ndarray  # (N(N+1), 2) tail=S, head=N
    triangles: np.ndarray  # (2N^2, 3) counter-clockwise vertex indices
    tri_hedge: np.ndarray  # global edge index of the triangle's horizontal side
    tri_vedge: np.ndarray  # global edge index of the triangle's vertical side
    tri_anchor: np.ndarray  # right-angle vertex
    tri_label: np.ndarray  # "NE" (lower-left) or "SW" (upper-right) w.r.t. anchor
    _boundary_edges: np.ndarray = field(repr=False)

    dim = 2

    @property
    def n_cells_per_side(self):
        return self.n

    @property
    def n_nodes(self):
        return (self.n + 1) ** 2

    @property
    def n_hedges(self):
        return self.n * (self.n + 1)

    @property
    def n_edges(self):
        return 2 * self.n * (self.n + 1)

    @property
    def n_triangles(self):
        return 2 * self.n * self.n

    @property
    def edges(self):
        return np.vstack([self.hedges, self.vedges])

    @property
    def triangle_area(self):
        return 0.5 * self.h * self.h

    @property
    def boundary_edges(self):
        """Mask of edges lying on the boundary of the square."""
        return self._boundary_edges

    @property
    def edge_midpoints(self):
        e = self.edges
        return 0.5 * (self.nodes[e[:, 0]] + self.nodes[e[:, 1]])

    def node_index(self, a, b):
        return a + b * (self.n + 1)

    def node_grid(self, i):
        return i % (self.n + 1), i // (self.n + 1)

    def is_interior_node(self, i):
        a, b = self.node_grid(np.asarray(i))
        return (a > 0) & (a < self.n) & (b > 0) & (b < self.n)

    @property
    def interior_nodes(self):
        return np.flatnonzero(self.is_interior_node(np.arange(self.n_nodes)))

    def edge_index(self, orientation, a, b):
        """Global index of the edge leaving grid node (a, b) to the E or N."""
        N = self.n
        if orientation == HORIZONTAL:
            if not (0 <= a < N and 0 <= b <= N):
                raise IndexError((orientation, a, b))
            return a + b * N
        if orientation == VERTICAL:
            if not (0 <= a <= N and 0 <= b < N):
                raise IndexError((orientation, a, b))
            return N * (N + 1) + a + b * (N + 1)
        raise ValueError(f"unknown orientation {orientation!r}")

    def decode_edge(self, e):
        N = self.n
        nh = N * (N + 1)
        if e < nh:
            return HORIZONTAL, e % N, e // N
        e -= nh
        return VERTICAL, e % (N + 1), e // (N + 1)

    def adjacent_triangles(self, i):
        """Map label -> triangle index for the (up to six) triangles at node i."""
        N = self.n
        a, b = self.node_grid(i)
        out = {}
        # cell (ca, cb) -> lower triangle 2k, upper triangle 2k+1
        def cell(ca, cb):
            return ca + cb * N if 0 <= ca < N and 0 <= cb < N else None

        k = cell(a, b)
        if k is not None:
            out["NE"] = 2 * k
        k = cell(a, b - 1)
        if k is not None:
            out["SE"] = 2 * k + 1
            out["S"] = 2 * k
        k = cell(a - 1, b - 1)
        if k is not None:
            out["SW"] = 2 * k + 1
        k = cell(a - 1, b)
        if k is not None:
            out["NW"] = 2 * k
            out["N"] = 2 * k + 1
        return out


def build_mesh_2d(N):
    N = _check_n(N)
    h = 1.0 / N
    idx = np.arange((N + 1) ** 2)
    a, b = idx % (N + 1), idx // (N + 1)
    nodes = np.column_stack([a * h, b * h])
    nodes[a == N, 0] = 1.0
    nodes[b == N, 1] = 1.0

    def nid(a, b):
        return a + b * (N + 1)

    ha, hb = np.meshgrid(np.arange(N), np.arange(N + 1), indexing="xy")
    ha, hb = ha.ravel(), hb.ravel()
    hedges = np.column_stack([nid(ha, hb), nid(ha + 1, hb)])
    va, vb = np.meshgrid(np.arange(N + 1), np.arange(N), indexing="xy")
    va, vb = va.ravel(), vb.ravel()
    vedges = np.column_stack([nid(va, vb), nid(va, vb + 1)])

    nh = N * (N + 1)

    def hid(a, b):
        return a + b * N

    def vid(a, b):
        return nh + a + b * (N + 1)

    ca, cb = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
    ca, cb = ca.ravel(), cb.ravel()
    sw, se, ne, nw = nid(ca, cb), nid(ca + 1, cb), nid(ca + 1, cb + 1), nid(ca, cb + 1)
    n_tri = 2 * N * N
    triangles = np.empty((n_tri, 3), dtype=int)
    triangles[0::2] = np.column_stack([sw, se, nw])
    triangles[1::2] = np.column_stack([se, ne, nw])
    tri_hedge = np.empty(n_tri, dtype=int)
    tri_vedge = np.empty(n_tri, dtype=int)
    tri_hedge[0::2], tri_vedge[0::2] = hid(ca, cb), vid(ca, cb)
    tri_hedge[1::2], tri_vedge[1::2] = hid(ca, cb + 1), vid(ca + 1, cb)
    tri_anchor = np.empty(n_tri, dtype=int)
    tri_anchor[0::2], tri_anchor[1::2] = sw, ne
    tri_label = np.empty(n_tri, dtype="<U2")
    tri_label[0::2], tri_label[1::2] = "NE", "SW"

    boundary = np.concatenate([(hb == 0) | (hb == N), (va == 0) | (va == N)])

    for arr in (nodes, hedges, vedges, triangles, tri_hedge, tri_vedge,
                tri_anchor, tri_label, boundary):
        arr.setflags(write=False)
    return Mesh2D(N, h, nodes, hedges, vedges, triangles, tri_hedge, tri_vedge,
                  tri_anchor, tri_label, boundary)


def check_conductivities(mesh, C, name="C"):
    C = np.asarray(C, dtype=float)
    if C.shape != (mesh.n_edges,):
        raise SizeMismatch(f"{name} has shape {C.shape}, mesh has {mesh.n_edges} edges")
    return C


@dataclass(frozen=True, eq=False)
class TensorField:
    """Piecewise-constant diagonal conductivity tensor.

    In 2D ``c1``/``c2`` hold one value per triangle. In 1D only ``c1`` is
    set, one value per cell.
    """
    c1: np.ndarray
    c2: np.ndarray = None

    @property
    def c(self):
        return self.c1

    def __post_init__(self):
        object.__setattr__(self, "c1", np.asarray(self.c1, dtype=float))
        if self.c2 is not None:
            object.__setattr__(self, "c2", np.asarray(self.c2, dtype=float))

    def check(self, mesh):
        n = mesh.n_cells if mesh.dim == 1 else mesh.n_triangles
        if self.c1.shape != (n,) or (mesh.dim == 2 and (self.c2 is None or self.c2.shape != (n,))):
            raise SizeMismatch("tensor field does not match mesh")
        return self

    def min(self):
        return self.c1.min() if self.c2 is None else min(self.c1.min(), self.c2.min())


def q0(mesh, C):
    """Map edge conductivities to the piecewise-constant tensor field."""
    C = check_conductivities(mesh, C)
    if mesh.dim == 1:
        return TensorField(C.copy())
    return TensorField(C[mesh.tri_hedge], C[mesh.tri_vedge])


def average_onto_edges(mesh, field):
    """Average a tensor field back onto edges (inverse direction of ``q0``).

    Horizontal edges get the mean of ``c1`` over the triangles having the
    edge as horizontal side, vertical edges the mean of ``c2``. Boundary
    edges have a single such triangle.
    """
    field.check(mesh)
    if mesh.dim == 1:
        return field.c1.copy()
    ne = mesh.n_edges
    count = np.bincount(mesh.tri_hedge, minlength=ne) + np.bincount(mesh.tri_vedge, minlength=ne)
    total = (np.bincount(mesh.tri_hedge, weights=field.c1, minlength=ne)
             + np.bincount(mesh.tri_vedge, weights=field.c2, minlength=ne))
    return total / count


def cell_averages(mesh, f, order=6):
    """Exact-to-quadrature cell averages of a function of x on a 1D mesh."""
    u, w = gauss_legendre_unit(order)
    pts = mesh.x[:-1, None] + mesh.h * u[None, :]
    return f(pts) @ w


def triangle_averages(mesh, f, order=6):
    """Per-triangle averages of f(x, y) by a collapsed Gauss rule."""
    bary, w = triangle_rule(order)
    verts = mesh.nodes[mesh.triangles]  # (T, 3, 2)
    pts = np.einsum("qv,tvd->tqd", bary, verts)
    return f(pts[..., 0], pts[..., 1]) @ w


def tensor_field_from_functions(mesh, f1, f2=None, order=6):
    """Project a smooth (c1, c2) field onto per-triangle (or per-cell) averages."""
    if mesh.dim == 1:
        return TensorField(cell_averages(mesh, f1, order))
    if f2 is None:
        f2 = f1
    return TensorField(triangle_averages(mesh, f1, order), triangle_averages(mesh, f2, order))


class Q1Field1D:
    """Continuous interpolant of cell values through the cell midpoints."""

    def __init__(self, mesh, C):
        self.mesh = mesh
        self.values = check_conductivities(mesh, C).copy()

    def __call__(self, x):
        return np.interp(x, self.mesh.midpoints, self.values)


def q1_1d(mesh, C):
    return Q1Field1D(mesh, C)


class _MidpointInterpolant:
    """Piecewise-linear field through horizontal-edge midpoints.

    ``grid[i, j]`` is the value at ``((i + 1/2) h, j h)``, i < N, j <= N.
    Linear on the two triangles of each midpoint square, constant in x on
    the two boundary stripes of width h/2.
    """

    def __init__(self, N, grid):
        self.N = N
        self.h = 1.0 / N
        self.grid = grid

    def evaluate(self, x, y):
        N, h, g = self.N, self.h, self.grid
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        j = np.clip(np.floor(y / h).astype(int), 0, N - 1)
        t = y / h - j
        # shift by half a cell so that square i spans midpoints i-1/2 .. i+1/2
        xs = x / h + 0.5
        i = np.clip(np.floor(xs).astype(int), 1, max(N - 1, 1))
        s = xs - i
        out = np.empty(x.shape)

        if N == 1:
            left = x <= 0.5
            right = ~left
        else:
            left = x < 0.5 * h
            right = x > 1.0 - 0.5 * h
        stripe = left | right
        col = np.where(left, 0, N - 1)
        out[stripe] = (g[col, j] + t * (g[col, j + 1] - g[col, j]))[stripe]

        if N > 1:
            inner = ~stripe
            A = g[i - 1, j]
            B = g[i, j]
            Cc = g[i - 1, j + 1]
            D = g[i, j + 1]
            lower = s + t <= 1.0
            v_low = A + s * (B - A) + t * (Cc - A)
            v_up = D + (1.0 - s) * (Cc - D) + (1.0 - t) * (B - D)
            out[inner] = np.where(lower, v_low, v_up)[inner]
        return out


class Q1Field2D:
    """Reconstruction of horizontal-edge conductivities (first diagonal entry)."""

    def __init__(self, mesh, C_horizontal):
        C_horizontal = np.asarray(C_horizontal, dtype=float)
        N = mesh.n
        if C_horizontal.shape != (N * (N + 1),):
            raise SizeMismatch("expected one value per horizontal edge")
        # horizontal edge a + b*N  ->  grid[a, b]
        self._interp = _MidpointInterpolant(N, C_horizontal.reshape(N + 1, N).T.copy())

    def __call__(self, x, y):
        return self._interp.evaluate(x, y)


class Q2Field2D:
    """Reconstruction of vertical-edge conductivities: q1 with x and y swapped."""

    def __init__(self, mesh, C_vertical):
        C_vertical = np.asarray(C_vertical, dtype=float)
        N = mesh.n
        if C_vertical.shape != (N * (N + 1),):
            raise SizeMismatch("expected one value per vertical edge")
        # vertical edge a + b*(N+1) -> value at (a h, (b+1/2) h); swapped grid[b, a]
        self._interp = _MidpointInterpolant(N, C_vertical.reshape(N, N + 1).copy())

    def __call__(self, x, y):
        return self._interp.evaluate(y, x)


def q1_2d(mesh, C_horizontal):
    return Q1Field2D(mesh, C_horizontal)


def q2_2d(mesh, C_vertical):
    return Q2Field2D(mesh, C_vertical)


def split_edges(mesh, C):
    """Split a 2D edge vector into (horizontal, vertical) parts."""
    C = check_conductivities(mesh, C)
    nh = mesh.n_hedges
    return C[:nh], C[nh:]
