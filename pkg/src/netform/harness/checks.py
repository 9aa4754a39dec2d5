"""Built-in verification suite behind ``netform check``.

Small, fast versions of the module invariants. Each check returns a
:class:`CheckResult`; the suite never raises on a failed property.
"""
from dataclasses import dataclass

import numpy as np

from ..dynamics import closed_form_minimizer_1d, energy_gradient, minimize
from ..energy import (Params, continuum_energy, diffusive_term, discrete_energy_1d,
                      discrete_energy_2d, discrete_pressures, literal_boundary_excess,
                      permeability_tensor, total_energy_with_diffusion)
from ..fem import (BASIS_GRADIENTS, hat_on_triangle, partition_of_unity_defect, project_source_1d,
                   project_source_2d, reference_triangle, verify_kirchhoff_equivalence)
from ..kirchhoff import edge_fluxes, fluxes_1d_explicit, solve_pressures
from ..mesh import build_mesh_1d, build_mesh_2d, q0, q1_2d, q2_2d, split_edges

DIPOLE_2D = "dipole 0.3 0.3 0.7 0.6 0.1 1"
DIPOLE_1D = "dipole 0.25 0.7 0.08 1"


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.3e} (limit {self.limit:.1e})"


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def _result(name, value, limit):
    return CheckResult(name, bool(value <= limit), float(value), float(limit))


def check_mesh_counts():
    worst = 0
    for N in (1, 2, 5):
        m = build_mesh_2d(N)
        worst = max(worst, abs(m.n_nodes - (N + 1) ** 2), abs(m.n_edges - 2 * N * (N + 1)),
                    abs(m.n_triangles - 2 * N * N), abs(int(m.boundary_edges.sum()) - 4 * N))
    return _result("mesh counting identities", worst, 0)


def check_basis_table():
    worst = 0.0
    h, d = 0.25, 1e-6
    for label, G in BASIS_GRADIENTS.items():
        verts = reference_triangle(label, h, (0.5, 0.5))
        centroid = verts.mean(axis=0)
        for k in range(3):
            pts = centroid + np.array([[d, 0], [-d, 0], [0, d], [0, -d]])
            v = hat_on_triangle(verts, k, pts)
            fd = np.array([(v[0] - v[1]) / (2 * d), (v[2] - v[3]) / (2 * d)])
            worst = max(worst, np.abs(fd - G[k] / h).max())
    return _result("basis-gradient table vs finite differences", worst, 1e-8)


def check_kirchhoff_equivalence():
    rng = _rng(1)
    worst = 0.0
    for N in (4, 8):
        m = build_mesh_2d(N)
        for S in (DIPOLE_2D, "sine2d 1 2"):
            src = project_source_2d(S, m)
            C = rng.uniform(0, 5, m.n_edges)
            res = verify_kirchhoff_equivalence(m, C, 1.0, src, rel_tol=1e-12)
            worst = max(worst, res / np.abs(m.h * src.values).max())
    return _result("Kirchhoff/FEM interior residual (relative)", worst, 1e-8)


def check_energy_identities():
    rng = _rng(2)
    p = Params(1.5, 1.0, 0.2)
    m1 = build_mesh_1d(8)
    s1 = project_source_1d(DIPOLE_1D, m1)
    C1 = rng.uniform(0, 3, m1.n_edges)
    e1 = abs(discrete_energy_1d(m1, C1, p, s1).total - continuum_energy(m1, q0(m1, C1), p, s1).total)
    m2 = build_mesh_2d(8)
    s2 = project_source_2d(DIPOLE_2D, m2)
    C2 = rng.uniform(0, 3, m2.n_edges)
    integral = discrete_energy_2d(m2, C2, p, s2)
    e2 = abs(integral.total - continuum_energy(m2, q0(m2, C2), p, s2).total)
    lit = discrete_energy_2d(m2, C2, p, s2, "literal")
    P, _ = discrete_pressures(m2, C2, p, s2)
    e3 = abs(lit.total - integral.total - literal_boundary_excess(m2, C2, p, P))
    return _result("discrete = reconstructed energy (1D, 2D, literal excess)", max(e1, e2, e3), 1e-12)


def sampled_dirichlet_energy(f, n_fine):
    """int |grad f|^2 for f piecewise linear on a NW-SE Courant grid of spacing 1/n_fine.

    Only point values of f are used.
    """
    t = np.arange(n_fine + 1) / n_fine
    X, Y = np.meshgrid(t, t, indexing="ij")
    F = f(X, Y)
    d = 1.0 / n_fine
    sw, se, nw, ne = F[:-1, :-1], F[1:, :-1], F[:-1, 1:], F[1:, 1:]
    lower = ((se - sw) / d) ** 2 + ((nw - sw) / d) ** 2
    upper = ((ne - nw) / d) ** 2 + ((ne - se) / d) ** 2
    return 0.5 * d * d * float(np.sum(lower + upper))


def check_diffusion_identity():
    rng = _rng(3)
    worst = 0.0
    for N in (2, 4):
        m = build_mesh_2d(N)
        C = rng.uniform(0, 5, m.n_edges)
        ch, cv = split_edges(m, C)
        quad = sampled_dirichlet_energy(q1_2d(m, ch), 2 * N) + sampled_dirichlet_energy(q2_2d(m, cv), 2 * N)
        val = diffusive_term(m, C, 1.0)
        worst = max(worst, abs(val - quad) / max(quad, 1.0))
    return _result("diffusive form vs interpolant Dirichlet energy", worst, 1e-10)


def check_gradient():
    rng = _rng(4)
    worst = 0.0
    m = build_mesh_2d(4)
    src = project_source_2d(DIPOLE_2D, m)
    for gamma in (0.75, 1.5, 2.0):
        p = Params(gamma, 1.0, 0.3, 0.01)
        C = rng.uniform(0.1, 3, m.n_edges)
        g = energy_gradient(m, C, p, src)
        u = g / np.linalg.norm(g)
        e = 1e-6
        fd = (total_energy_with_diffusion(m, C + e * u, p, src).total
              - total_energy_with_diffusion(m, C - e * u, p, src).total) / (2 * e)
        worst = max(worst, abs(fd - g @ u) / abs(g @ u))
    return _result("adjoint gradient vs central differences", worst, 1e-5)


def check_closed_form_1d():
    m = build_mesh_1d(16)
    src = project_source_1d(DIPOLE_1D, m)
    worst = 0.0
    for gamma in (0.5, 1.0, 2.0):
        p = Params(gamma, 1.0, 0.1)
        res = minimize(m, np.ones(m.n_edges), p, src, tol=1e-10)
        worst = max(worst, np.abs(res.C - closed_form_minimizer_1d(m, p, src)).max())
    P = solve_pressures(m, np.ones(m.n_edges), 0.1, src, rel_tol=1e-13)
    flux = np.abs(edge_fluxes(m, np.ones(m.n_edges), 0.1, P) - fluxes_1d_explicit(src)).max()
    return _result("1D closed-form minimiser and fluxes", max(worst, flux), 1e-6)


def check_conservation():
    worst = 0.0
    m1, m2 = build_mesh_1d(16), build_mesh_2d(8)
    for S in ("zero", "sine1d 2", DIPOLE_1D):
        worst = max(worst, abs(project_source_1d(S, m1).weighted_sum))
    for S in ("zero", "sine1d 1", "sine2d 1 2", DIPOLE_2D):
        worst = max(worst, abs(project_source_2d(S, m2).weighted_sum))
    return _result("zero-mean discrete sources", worst, 1e-10)


def check_partition_of_unity():
    return _result("partition of unity at quadrature points", partition_of_unity_defect(build_mesh_2d(4)), 1e-14)


def check_permeability():
    rng = _rng(5)
    worst = 0.0
    for _ in range(200):
        a, b = rng.uniform(0, 2 * np.pi, 2)
        t1, t2 = np.array([np.cos(a), np.sin(a)]), np.array([np.cos(b), np.sin(b)])
        if abs(np.sin(a - b)) < 1e-3:
            continue
        c1, c2, r = rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0.01, 1)
        out = permeability_tensor(c1, c2, t1, t2, r)
        worst = max(worst, np.abs(np.sort(out.eigenvalues) - np.linalg.eigvalsh(out.tensor)).max())
    return _result("permeability eigenvalues vs eigvalsh", worst, 1e-12)


ALL_CHECKS = (check_mesh_counts, check_basis_table, check_kirchhoff_equivalence,
              check_energy_identities, check_diffusion_identity, check_gradient,
              check_closed_form_1d, check_conservation, check_partition_of_unity,
              check_permeability)


def run_checks():
    return [c() for c in ALL_CHECKS]
