"""Energy functionals: pumping + metabolic (+ diffusive) parts.

Pumping terms are evaluated in the variational form ``2 b.P - P.A P``,
which equals ``P.A P`` for an exact solve and has an error quadratic (not
linear) in the solver residual. This keeps energy comparisons between two
assembly paths, and the backtracking tests in :mod:`netform.dynamics`,
at round-off level.
"""
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fem import _as_sources, assemble_stiffness, pressure_gradients
from .kirchhoff import assemble_kirchhoff, edge_weights
from .linsolve import SparseSymSystem, solve_zero_mean
from .mesh import build_mesh_1d, build_mesh_2d, check_conductivities

ENERGY_REL_TOL = 1e-12
REPORT_KEYS = ("pumping", "metabolic", "diffusive", "total", "mode", "N", "gamma", "nu", "r", "d2")


@dataclass(frozen=True)
class Params:
    gamma: float = 1.5
    nu: float = 1.0
    r: float = 0.1
    d2: float = 0.0

    def __post_init__(self):
        for k in ("gamma", "nu", "r", "d2"):
            v = float(getattr(self, k))
            if not np.isfinite(v):
                raise ValueError(f"{k} must be finite, got {v!r}")
            object.__setattr__(self, k, v)
        if self.nu <= 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.r <= 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if self.d2 < 0:
            raise ValueError(f"d2 must be nonnegative, got {self.d2}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return Params(**d)


@dataclass(frozen=True)
class EnergyReport:
    pumping: float
    metabolic: float
    diffusive: float
    total: float
    mode: str
    N: int
    gamma: float
    nu: float
    r: float
    d2: float

    @classmethod
    def build(cls, pumping, metabolic, diffusive, mode, N, params):
        pumping, metabolic, diffusive = float(pumping), float(metabolic), float(diffusive)
        return cls(pumping, metabolic, diffusive, pumping + metabolic + diffusive, mode,
                   int(N), params.gamma, params.nu, params.r, params.d2)

    def as_record(self):
        return {k: getattr(self, k) for k in REPORT_KEYS}


def _mesh_n(mesh):
    return mesh.n_cells if mesh.dim == 1 else mesh.n


def energy_weights(mesh, boundary_mode="integral"):
    """Per-edge area weight: h in 1D; h^2 (interior) or h^2/2 (boundary) in 2D."""
    if mesh.dim == 1:
        return np.full(mesh.n_edges, mesh.h)
    if boundary_mode not in ("integral", "literal"):
        raise ValueError(f"boundary_mode must be 'integral' or 'literal', got {boundary_mode!r}")
    kb = "fem" if boundary_mode == "integral" else "literal"
    return mesh.h ** 2 * edge_weights(mesh, kb)


def metabolic_term(weights, values, params):
    return float(np.sum(weights * (params.nu / params.gamma) * (params.r + values) ** params.gamma))


def variational_pumping(system, P, scale):
    b = system.rhs
    return scale * (2.0 * (b @ P) - P @ (system.matrix @ P))


def discrete_pressures(mesh, C, params, sources, rel_tol=ENERGY_REL_TOL, x0=None):
    """Solve the Kirchhoff system; returns (P, system)."""
    system = assemble_kirchhoff(mesh, C, params.r, sources)
    return solve_zero_mean(system, rel_tol=rel_tol, x0=x0).solution, system


def _discrete(mesh, C, params, sources, boundary_mode, rel_tol, x0=None):
    C = check_conductivities(mesh, C)
    P, system = discrete_pressures(mesh, C, params, sources, rel_tol, x0)
    # the Kirchhoff matrix carries (r+C)/h, so pumping = h^(d-1) P.A P
    pumping = variational_pumping(system, P, mesh.h ** (mesh.dim - 1))
    w = energy_weights(mesh, boundary_mode)
    if boundary_mode == "literal":
        # full h^2 weight on boundary edges: add the missing half explicitly
        b = mesh.boundary_edges
        drops = P[mesh.edges[b, 0]] - P[mesh.edges[b, 1]]
        pumping += 0.5 * mesh.h ** 2 * float(np.sum((params.r + C[b]) * (drops / mesh.h) ** 2))
    return pumping, metabolic_term(w, C, params), P


def discrete_energy_1d(mesh, C, params, sources, rel_tol=ENERGY_REL_TOL):
    if mesh.dim != 1:
        raise ValueError("discrete_energy_1d needs a 1D mesh")
    pumping, metabolic, _ = _discrete(mesh, C, params, sources, "integral", rel_tol)
    return EnergyReport.build(pumping, metabolic, 0.0, "discrete-1d", _mesh_n(mesh), params)


def discrete_energy_2d(mesh, C, params, sources, boundary_mode="integral", rel_tol=ENERGY_REL_TOL):
    """Per-triangle ("integral") or full-edge-weight ("literal") 2D energy."""
    if mesh.dim != 2:
        raise ValueError("discrete_energy_2d needs a 2D mesh")
    pumping, metabolic, _ = _discrete(mesh, C, params, sources, boundary_mode, rel_tol)
    return EnergyReport.build(pumping, metabolic, 0.0, f"discrete-2d-{boundary_mode}",
                              _mesh_n(mesh), params)


def discrete_energy(mesh, C, params, sources, rel_tol=ENERGY_REL_TOL):
    if mesh.dim == 1:
        return discrete_energy_1d(mesh, C, params, sources, rel_tol)
    return discrete_energy_2d(mesh, C, params, sources, "integral", rel_tol)


def literal_boundary_excess(mesh, C, params, P):
    """Analytic literal-minus-integral difference: h^2/2 times boundary-edge terms."""
    C = check_conductivities(mesh, C)
    b = mesh.boundary_edges
    drops = P[mesh.edges[b, 0]] - P[mesh.edges[b, 1]]
    k = params.r + C[b]
    return float(0.5 * mesh.h ** 2 * np.sum(k * (drops / mesh.h) ** 2
                                            + (params.nu / params.gamma) * k ** params.gamma))


def continuum_energy(mesh, c, params, S, rel_tol=ENERGY_REL_TOL):
    """FEM energy of a piecewise-constant tensor field c.

    ``S`` may be a source spec (projected onto hats) or ready-made
    :class:`DiscreteSources`.
    """
    K = assemble_stiffness(mesh, c, params.r)
    src = _as_sources(S, mesh)
    system = SparseSymSystem(K, mesh.h ** mesh.dim * src.values)
    P = solve_zero_mean(system, rel_tol=rel_tol).solution
    pumping = variational_pumping(system, P, 1.0)
    a, g, nu = params.r, params.gamma, params.nu
    if mesh.dim == 1:
        metabolic = mesh.h * np.sum((nu / g) * np.abs(a + c.c1) ** g)
    else:
        metabolic = mesh.triangle_area * np.sum(
            (nu / g) * (np.abs(a + c.c1) ** g + np.abs(a + c.c2) ** g))
    return EnergyReport.build(pumping, metabolic, 0.0, f"continuum-{mesh.dim}d", _mesh_n(mesh), params)


def continuum_pressure(mesh, c, params, S, rel_tol=ENERGY_REL_TOL):
    """(P, per-triangle gradients) of the FEM problem behind continuum_energy."""
    K = assemble_stiffness(mesh, c, params.r)
    src = _as_sources(S, mesh)
    P = solve_zero_mean(SparseSymSystem(K, mesh.h ** mesh.dim * src.values), rel_tol=rel_tol).solution
    return P, pressure_gradients(mesh, P)


# --- diffusion -------------------------------------------------------------

def _midpoint_dirichlet_pairs(N, offset, stride_i, stride_j):
    """Difference pairs (a, b, weight) of the midpoint interpolant energy.

    Grid value (i, j), i < N, j <= N, lives at edge ``offset + i*stride_i +
    j*stride_j``. Differences along j have weight 1; differences along i
    have weight 1 on rows 0 < j < N and 1/2 on rows 0 and N.
    """
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    a1 = offset + i * stride_i + j * stride_j
    b1 = a1 + stride_j
    w1 = np.ones(a1.size)
    i, j = np.meshgrid(np.arange(1, N), np.arange(N + 1), indexing="ij")
    a2 = offset + (i - 1) * stride_i + j * stride_j
    b2 = a2 + stride_i
    w2 = np.where((j == 0) | (j == N), 0.5, 1.0)
    return (np.concatenate([a1.ravel(), a2.ravel()]), np.concatenate([b1.ravel(), b2.ravel()]),
            np.concatenate([w1, w2.ravel()]))


def diffusion_pairs(mesh):
    if mesh.dim == 1:
        n = mesh.n_edges
        a = np.arange(n - 1)
        return a, a + 1, np.full(n - 1, 1.0 / mesh.h)
    N = mesh.n
    # horizontal edge a + b*N: grid (i=a, j=b)
    ax, bx, wx = _midpoint_dirichlet_pairs(N, 0, 1, N)
    # vertical edge a + b*(N+1) sits at (a h, (b+1/2) h): swapped grid (i=b, j=a)
    ay, by, wy = _midpoint_dirichlet_pairs(N, mesh.n_hedges, N + 1, 1)
    return np.concatenate([ax, ay]), np.concatenate([bx, by]), np.concatenate([wx, wy])


@lru_cache(maxsize=32)
def _diffusion_matrix(dim, N):
    mesh = build_mesh_1d(N) if dim == 1 else build_mesh_2d(N)
    return diffusion_matrix(mesh)


def cached_diffusion_matrix(mesh):
    return _diffusion_matrix(mesh.dim, _mesh_n(mesh))


def diffusion_matrix(mesh):
    """Sparse L with C.L C equal to the diffusive quadratic form (without D^2)."""
    a, b, w = diffusion_pairs(mesh)
    n = mesh.n_edges
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    data = np.concatenate([w, w, -w, -w])
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def dirichlet_x(mesh, C):
    """Index-formula value of the horizontal-edge Dirichlet energy (2D)."""
    N = mesh.n
    g = check_conductivities(mesh, C)[: mesh.n_hedges].reshape(N + 1, N).T  # [i, j]
    along_j = np.sum((g[:, :-1] - g[:, 1:]) ** 2)
    dx = (g[:-1, :] - g[1:, :]) ** 2  # (N-1, N+1)
    rows = np.ones(N + 1)
    rows[[0, -1]] = 0.5
    return float(along_j + np.sum(dx * rows))


def dirichlet_y(mesh, C):
    N = mesh.n
    g = check_conductivities(mesh, C)[mesh.n_hedges:].reshape(N, N + 1)  # [i=b, j=a]
    along_j = np.sum((g[:, :-1] - g[:, 1:]) ** 2)
    dx = (g[:-1, :] - g[1:, :]) ** 2
    rows = np.ones(N + 1)
    rows[[0, -1]] = 0.5
    return float(along_j + np.sum(dx * rows))


def diffusive_term(mesh, C, d2):
    C = check_conductivities(mesh, C)
    if d2 == 0:
        return 0.0
    if mesh.dim == 1:
        return float(d2 * mesh.h * np.sum((np.diff(C) / mesh.h) ** 2))
    return float(d2 * (dirichlet_x(mesh, C) + dirichlet_y(mesh, C)))


def total_energy_with_diffusion(mesh, C, params, sources, rel_tol=ENERGY_REL_TOL):
    return energy_and_pressures(mesh, C, params, sources, rel_tol)[0]


def energy_and_pressures(mesh, C, params, sources, rel_tol=ENERGY_REL_TOL, x0=None):
    """Full energy (with diffusion) and the pressures it was computed from."""
    pumping, metabolic, P = _discrete(mesh, C, params, sources, "integral", rel_tol, x0)
    diff = diffusive_term(mesh, C, params.d2)
    mode = ("discrete-1d" if mesh.dim == 1 else "discrete-2d-integral") + "+diffusion"
    return EnergyReport.build(pumping, metabolic, diff, mode, _mesh_n(mesh), params), P


# --- parallelogram permeability ---------------------------------------------

@dataclass(frozen=True)
class Permeability:
    tensor: np.ndarray
    eigenvalues: np.ndarray  # (larger, smaller)
    eigenvectors: np.ndarray  # columns, matching eigenvalues


def permeability_tensor(c1, c2, theta1, theta2, r):
    """r I + c1 t1 t1^T + c2 t2 t2^T with closed-form eigenpairs."""
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    if t1.shape != (2,) or t2.shape != (2,):
        raise ValueError("directions must be 2-vectors")
    for t in (t1, t2):
        if abs(np.hypot(*t) - 1.0) > 1e-10:
            raise ValueError(f"direction {t} is not a unit vector")
    if c1 < 0 or c2 < 0:
        raise ValueError("conductivities must be nonnegative")
    if not r > 0:
        raise ValueError("r must be positive")
    cross = t1[0] * t2[1] - t1[1] * t2[0]
    if abs(cross) < 1e-12:
        raise ValueError("directions are parallel")
    T = r * np.eye(2) + c1 * np.outer(t1, t1) + c2 * np.outer(t2, t2)
    dot = t1 @ t2
    if abs(dot) <= 8 * np.finfo(float).eps:
        # orthogonal up to the rounding of the direction components: the
        # directions are eigenvectors, no rounding through the radical
        pairs = sorted([(r + c1, t1), (r + c2, t2)], key=lambda p: -p[0])
        return Permeability(T, np.array([p[0] for p in pairs]), np.column_stack([p[1] for p in pairs]))
    s = c1 + c2
    root = np.sqrt((c1 - c2) ** 2 + 4.0 * c1 * c2 * dot * dot)
    mu_hi = 0.5 * (s + root)
    # mu_hi * mu_lo = c1 c2 (1 - dot^2) = c1 c2 cross^2, avoids cancellation
    mu_lo = c1 * c2 * cross * cross / mu_hi if mu_hi > 0 else 0.0
    lam = np.array([r + mu_hi, r + mu_lo])
    vecs = np.empty((2, 2))
    for k, mu in enumerate((mu_hi, mu_lo)):
        # rows of (c t1 t1^T + c t2 t2^T - mu I); take the better-conditioned null vector
        A = T - r * np.eye(2) - mu * np.eye(2)
        v1 = np.array([-A[0, 1], A[0, 0]])
        v2 = np.array([-A[1, 1], A[1, 0]])
        v = v1 if v1 @ v1 >= v2 @ v2 else v2
        nv = np.hypot(*v)
        if nv == 0.0:  # A == 0: every vector is an eigenvector
            v = np.array([1.0, 0.0]) if k == 0 else np.array([0.0, 1.0])
        else:
            v = v / nv
        vecs[:, k] = v
    if mu_hi == mu_lo:
        vecs = np.eye(2)
    return Permeability(T, lam, vecs)
