"""Discrete Kirchhoff laws on the equidistant 1D/2D graphs.

Row i of the assembled system reads

    sum over edges e at i of  w_e (r + C_e) (P_i - P_other) / h  =  h S_i

with ``w_e = 1`` for every 1D edge and every interior 2D edge, and
``w_e = 1/2`` for 2D edges on the boundary of the square. The half weights
are what the P1 finite element test functions produce at boundary nodes,
so that FEM vertex values satisfy this system at every node. The literal
full-weight stencil is available as ``boundary="literal"``; on interior
nodes both coincide.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linsolve import DEFAULT_REL_TOL, IncompatibleRhs, SparseSymSystem, solve_zero_mean
from .mesh import check_conductivities

SOURCE_COMPAT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DiscreteSources:
    """Nodal source values S_i (the Kirchhoff right-hand side is ``h * S``)."""
    values: np.ndarray
    h: float
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def rhs(self):
        return self.h * self.values

    @property
    def weighted_sum(self):
        """Discrete total mass: sum h S_i (1D) or sum h^2 S_i (2D)."""
        return self.h ** self.dim * self.values.sum()

    def scaled(self, factor):
        return DiscreteSources(factor * self.values, self.h, self.dim)

    def check(self, mesh, tol=SOURCE_COMPAT_TOL):
        if self.values.shape != (mesh.n_nodes,):
            raise ValueError(f"sources have shape {self.values.shape}, mesh has "
                             f"{mesh.n_nodes} nodes")
        scale = max(np.abs(self.values).sum() * self.h ** self.dim, 1e-300)
        wsum = self.weighted_sum
        if abs(wsum) > tol * scale and wsum != 0.0:
            raise IncompatibleRhs(f"discrete sources are not mass-conserving: "
                                  f"weighted sum {wsum:.3e}")
        return self


def sources_from_values(mesh, values):
    return DiscreteSources(np.asarray(values, dtype=float), mesh.h, mesh.dim).check(mesh)


def edge_weights(mesh, boundary="fem"):
    """Kirchhoff weight w_e per edge (1 interior, 1/2 on the 2D boundary)."""
    w = np.ones(mesh.n_edges)
    if mesh.dim == 2 and boundary == "fem":
        w[mesh.boundary_edges] = 0.5
    elif boundary not in ("fem", "literal"):
        raise ValueError(f"boundary must be 'fem' or 'literal', got {boundary!r}")
    return w


def _validate(C, r):
    if not r > 0:
        raise ValueError(f"regularisation r must be positive, got {r!r}")
    if np.any(C < 0):
        raise ValueError("conductivities must be nonnegative")


def incidence_matrix(mesh):
    """Oriented edge-node incidence: +1 at the tail (W/S), -1 at the head."""
    e = mesh.edges
    ne = e.shape[0]
    rows = np.concatenate([np.arange(ne), np.arange(ne)])
    cols = np.concatenate([e[:, 0], e[:, 1]])
    data = np.concatenate([np.ones(ne), -np.ones(ne)])
    return sp.csr_matrix((data, (rows, cols)), shape=(ne, mesh.n_nodes))


def laplacian(mesh, edge_coefficients):
    """B^T diag(k) B, assembled directly from the edge list."""
    e = mesh.edges
    k = np.asarray(edge_coefficients, dtype=float)
    rows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
    data = np.concatenate([k, k, -k, -k])
    return sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_nodes,) * 2)


def assemble_kirchhoff(mesh, C, r, sources, boundary="fem"):
    C = check_conductivities(mesh, C)
    _validate(C, r)
    sources.check(mesh)
    coeff = edge_weights(mesh, boundary) * (r + C) / mesh.h
    return SparseSymSystem(laplacian(mesh, coeff), sources.rhs)


def solve_pressures(mesh, C, r, sources, rel_tol=DEFAULT_REL_TOL, boundary="fem",
                    return_report=False):
    system = assemble_kirchhoff(mesh, C, r, sources, boundary)
    report = solve_zero_mean(system, rel_tol=rel_tol)
    return (report.solution, report) if return_report else report.solution


def pressure_drops(mesh, P):
    """P_tail - P_head per edge."""
    e = mesh.edges
    return P[e[:, 0]] - P[e[:, 1]]


def edge_fluxes(mesh, C, r, P):
    """Oriented fluxes (r + C)(P_tail - P_head)/h; positive means W->E / S->N.

    These are the physical edge fluxes. In 2D the node balance uses them with
    the boundary half weights, see :func:`flux_divergence`.
    """
    C = check_conductivities(mesh, C)
    return (r + C) * pressure_drops(mesh, P) / mesh.h


def flux_divergence(mesh, Q, boundary="fem"):
    """Net weighted outflow per node; equals h S_i for a solved system."""
    B = incidence_matrix(mesh)
    return B.T @ (edge_weights(mesh, boundary) * Q)


def stencil_residual(mesh, C, r, P, sources):
    """Residual of the literal full-weight stencil at every node.

    ``sum_* (r + C_i^*)(P_i - P_{i,*})/h - h S_i`` over the existing
    neighbours. Evaluated on grid arrays, independently of the assembly.
    """
    C = check_conductivities(mesh, C)
    h = mesh.h
    if mesh.dim == 1:
        k = r + C
        dP = P[:-1] - P[1:]  # P_{i-1} - P_i per edge
        out = np.zeros(mesh.n_nodes)
        out[:-1] += k * dP
        out[1:] -= k * dP
        return out / h - h * sources.values
    N = mesh.n
    Pg = P.reshape(N + 1, N + 1)  # [b, a]
    nh = N * (N + 1)
    kh = (r + C[:nh]).reshape(N + 1, N)  # edge (a,b)->(a+1,b) at [b, a]
    kv = (r + C[nh:]).reshape(N, N + 1)  # edge (a,b)->(a,b+1) at [b, a]
    out = np.zeros((N + 1, N + 1))
    out[:, :-1] += kh * (Pg[:, :-1] - Pg[:, 1:])  # east neighbour
    out[:, 1:] += kh * (Pg[:, 1:] - Pg[:, :-1])  # west neighbour
    out[:-1, :] += kv * (Pg[:-1, :] - Pg[1:, :])  # north neighbour
    out[1:, :] += kv * (Pg[1:, :] - Pg[:-1, :])  # south neighbour
    return out.ravel() / h - h * sources.values


def fluxes_1d_explicit(sources):
    """Closed-form 1D fluxes Q_i = h * sum_{j < i} S_j, i = 1..N."""
    if sources.dim != 1:
        raise ValueError("explicit fluxes exist only in 1D")
    S = sources.values
    if S.size < 2:
        raise ValueError("need at least two nodes")
    h = sources.h
    scale = max(np.abs(S).sum() * h, 1e-300)
    if abs(h * S.sum()) > SOURCE_COMPAT_TOL * scale:
        raise IncompatibleRhs(f"sum h S_i = {h * S.sum():.3e} is not zero")
    return h * np.cumsum(S)[:-1]
