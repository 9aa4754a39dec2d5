"""1D walk-through: flux solve, closed-form optimum, and the flow reaching it.

Run with ``python notebooks/network_1d.py``.
"""
import numpy as np

from netform import (Params, build_mesh_1d, closed_form_minimizer_1d, edge_fluxes,
                     fluxes_1d_explicit, minimize, project_source_1d, run_flow, solve_pressures)

mesh = build_mesh_1d(32)
src = project_source_1d("dipole 0.25 0.7 0.08 1", mesh)
C = np.ones(mesh.n_edges)

# on a path graph Kirchhoff's law fixes the fluxes regardless of C
P = solve_pressures(mesh, C, 0.1, src)
print("flux deviation from cumulative source:",
      np.abs(edge_fluxes(mesh, C, 0.1, P) - fluxes_1d_explicit(src)).max())

for gamma in (0.5, 1.0, 2.0):
    p = Params(gamma, 1.0, 0.1)
    star = closed_form_minimizer_1d(mesh, p, src)
    res = minimize(mesh, C, p, src, tol=1e-10)
    tr = run_flow(mesh, C, p, src, t_end=1e4)
    print(f"gamma={gamma}: minimize {np.abs(res.C - star).max():.1e}, "
          f"flow {np.abs(tr.states[-1].C - star).max():.1e} ({tr.stopped}, {len(tr.states)} states)")
