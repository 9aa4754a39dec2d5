"""P1 finite elements for -div((r I + c) grad p) = S with no-flux boundaries.

Basis functions are the usual hats on the Courant triangulation of
:mod:`netform.mesh`. Their gradients on the six triangle types around a
node are tabulated in ``BASIS_GRADIENTS`` (units of 1/h); assembly reads
the two types that occur as mesh triangles from that table.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .kirchhoff import DiscreteSources, stencil_residual
from .linsolve import DEFAULT_REL_TOL, SparseSymSystem, solve_zero_mean
from .mesh import TRIANGLE_OFFSETS, TensorField, q0
from .quadrature import gauss_legendre_unit, triangle_rule
from .sources import SourceSpec

# gradients (times h) of the three local basis functions, vertex order as in
# mesh.TRIANGLE_OFFSETS
BASIS_GRADIENTS = {
    "NE": np.array([[-1, -1], [1, 0], [0, 1]], dtype=float),
    "SE": np.array([[-1, 0], [1, 1], [0, -1]], dtype=float),
    "S": np.array([[0, 1], [1, 0], [-1, -1]], dtype=float),
    "SW": np.array([[1, 1], [0, -1], [-1, 0]], dtype=float),
    "NW": np.array([[1, 0], [-1, -1], [0, 1]], dtype=float),
    "N": np.array([[0, -1], [-1, 0], [1, 1]], dtype=float),
}

SOURCE_ORDER_1D = 8
SOURCE_ORDER_2D = 6


def hat_on_triangle(vertices, k, points):
    """Value of the linear function equal to 1 at vertex k, 0 at the others."""
    v = np.asarray(vertices, dtype=float)
    M = np.column_stack([v[1] - v[0], v[2] - v[0]])
    lam = np.linalg.solve(M, (np.asarray(points, dtype=float) - v[0]).T).T
    bary = np.column_stack([1.0 - lam.sum(axis=1), lam])
    return bary[:, k]


def reference_triangle(label, h, origin=(0.0, 0.0)):
    """Vertex coordinates of the triangle of type ``label`` at ``origin``."""
    o = np.asarray(origin, dtype=float)
    return o + h * np.asarray(TRIANGLE_OFFSETS[label], dtype=float)


def triangle_basis_gradients(mesh):
    """(n_tri, 3, 2) basis gradients in mesh vertex order.

    Lower-left triangles (SW, SE, NW) are ``NE`` triangles of their SW
    corner. Upper-right triangles (SE, NE, NW) are ``SW`` triangles of their
    NE corner, whose table order is (NE, SE, NW).
    """
    G = np.empty((mesh.n_triangles, 3, 2))
    G[0::2] = BASIS_GRADIENTS["NE"]
    sw = BASIS_GRADIENTS["SW"]
    G[1::2] = sw[[1, 0, 2]]
    return G / mesh.h


def _as_sources(S, mesh):
    if isinstance(S, DiscreteSources):
        return S.check(mesh)
    S = SourceSpec.parse(S)
    return project_source_1d(S, mesh) if mesh.dim == 1 else project_source_2d(S, mesh)


def project_source_1d(S, mesh, order=SOURCE_ORDER_1D):
    """S_i = (1/h) int (S - mean S) phi_i dx by Gauss-Legendre per cell."""
    S = SourceSpec.parse(S)
    u, w = gauss_legendre_unit(order)
    h = mesh.h
    pts = mesh.x[:-1, None] + h * u[None, :]
    vals = S(pts)
    cell_int = h * (vals @ w)
    mean = cell_int.sum()
    vals = vals - mean
    right = h * (vals @ (w * u))  # int S phi_i over the cell left of node i
    left = h * (vals @ (w * (1.0 - u)))
    out = np.zeros(mesh.n_nodes)
    out[:-1] += left
    out[1:] += right
    return DiscreteSources(out / h, h, 1)


def source_quadrature_points(mesh, order=SOURCE_ORDER_2D):
    """Quadrature points (T, q, 2), barycentrics (q, 3), weights (q,)."""
    bary, w = triangle_rule(order)
    verts = mesh.nodes[mesh.triangles]
    pts = np.einsum("qv,tvd->tqd", bary, verts)
    return pts, bary, w


def project_source_2d(S, mesh, order=SOURCE_ORDER_2D):
    """S_i^h = (1/h^2) int (S - mean S) psi_i dx, per-triangle quadrature."""
    S = SourceSpec.parse(S)
    pts, bary, w = source_quadrature_points(mesh, order)
    area = mesh.triangle_area
    vals = S(pts[..., 0], pts[..., 1])  # (T, q)
    mean = area * (vals @ w).sum()
    vals = vals - mean
    local = area * (vals * w) @ bary  # (T, 3)
    out = np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)
    return DiscreteSources(out / mesh.h ** 2, mesh.h, 2)


def partition_of_unity_defect(mesh, order=SOURCE_ORDER_2D):
    """max |sum_i psi_i - 1| over all source quadrature points."""
    pts, bary, _ = source_quadrature_points(mesh, order)
    total = np.zeros(pts.shape[:2])
    verts = mesh.nodes[mesh.triangles]
    for t in range(mesh.n_triangles):
        for k in range(3):
            total[t] += hat_on_triangle(verts[t], k, pts[t])
    return float(np.abs(total - 1.0).max())


def _check_field(mesh, c, r):
    if not r > 0:
        raise ValueError(f"regularisation r must be positive, got {r!r}")
    c.check(mesh)
    if c.min() < 0:
        raise ValueError("tensor entries must be nonnegative")


def assemble_stiffness(mesh, c, r):
    """Global P1 stiffness matrix of the bilinear form int grad u.(rI+c) grad v."""
    _check_field(mesh, c, r)
    if mesh.dim == 1:
        k = (r + c.c1) / mesh.h
        e = mesh.edges
        rows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
        data = np.concatenate([k, k, -k, -k])
        return sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_nodes,) * 2)
    G = triangle_basis_gradients(mesh)
    a1 = r + c.c1
    a2 = r + c.c2
    area = mesh.triangle_area
    Kloc = area * (a1[:, None, None] * G[:, :, None, 0] * G[:, None, :, 0]
                   + a2[:, None, None] * G[:, :, None, 1] * G[:, None, :, 1])
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return sp.csr_matrix((Kloc.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2)


@dataclass
class FemSolution:
    P: np.ndarray  # vertex values, zero mean
    gradients: np.ndarray  # (n_tri, 2) in 2D, (n_cells,) in 1D
    sources: DiscreteSources
    iterations: int
    residual: float

    def energy_flux(self, mesh, c, r):
        """int grad p . (rI + c) grad p, triangle by triangle."""
        return pumping_from_gradients(mesh, c, r, self.gradients)


def pressure_gradients(mesh, P):
    if mesh.dim == 1:
        return (P[1:] - P[:-1]) / mesh.h
    G = triangle_basis_gradients(mesh)
    return np.einsum("tkd,tk->td", G, P[mesh.triangles])


def pumping_from_gradients(mesh, c, r, grads):
    if mesh.dim == 1:
        return float(mesh.h * np.sum((r + c.c1) * grads ** 2))
    return float(mesh.triangle_area * np.sum((r + c.c1) * grads[:, 0] ** 2
                                             + (r + c.c2) * grads[:, 1] ** 2))


def solve_poisson_fem(mesh, c, r, S, rel_tol=DEFAULT_REL_TOL):
    """Zero-mean P1 solution; S is a SourceSpec, spec string or DiscreteSources."""
    K = assemble_stiffness(mesh, c, r)
    src = _as_sources(S, mesh)
    rhs = mesh.h ** mesh.dim * src.values  # int S psi_i
    report = solve_zero_mean(SparseSymSystem(K, rhs), rel_tol=rel_tol)
    P = report.solution
    return FemSolution(P, pressure_gradients(mesh, P), src, report.iterations, report.residual)


def verify_kirchhoff_equivalence(mesh, C, r, S, rel_tol=DEFAULT_REL_TOL):
    """Max interior residual of the Kirchhoff stencil at FEM vertex values."""
    sol = solve_poisson_fem(mesh, q0(mesh, C), r, S, rel_tol=rel_tol)
    res = stencil_residual(mesh, C, r, sol.P, sol.sources)
    if mesh.dim == 1:
        return float(np.abs(res).max())
    inner = mesh.interior_nodes
    return float(np.abs(res[inner]).max()) if inner.size else 0.0


def literal_boundary_residual(mesh, C, r, S, rel_tol=DEFAULT_REL_TOL):
    """Max boundary-node residual of the full-weight stencil at FEM values.

    Nonzero in general: documents why the assembled Kirchhoff system uses
    half weights on boundary edges.
    """
    sol = solve_poisson_fem(mesh, q0(mesh, C), r, S, rel_tol=rel_tol)
    res = stencil_residual(mesh, C, r, sol.P, sol.sources)
    boundary = ~mesh.is_interior_node(np.arange(mesh.n_nodes))
    return float(np.abs(res[boundary]).max())
