"""2D walk-through: descent from uniform conductivities under a dipole source.

Smaller gamma concentrates the network onto fewer edges. Run with
``python notebooks/network_2d.py``.
"""
import numpy as np

from netform import Params, build_mesh_2d, project_source_2d, run_flow

mesh = build_mesh_2d(16)
src = project_source_2d("dipole 0.25 0.25 0.75 0.75 0.1 10", mesh)

for gamma in (0.75, 1.5):
    p = Params(gamma, 1.0, 0.1, 0.01)
    tr = run_flow(mesh, np.ones(mesh.n_edges), p, src, t_end=5.0)
    E = [s.report.total for s in tr.states]
    C = tr.states[-1].C
    print(f"gamma={gamma}: E {E[0]:.4f} -> {E[-1]:.4f} in {len(E) - 1} steps, "
          f"edges below 1e-3: {np.mean(C < 1e-3):.0%}")
