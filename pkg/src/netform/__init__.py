"""Discrete transport-network energies on 1D/2D grids and their P1 finite element limits."""
from .dynamics import (FlowState, MinimizeResult, RoundoffStall, StepCollapse, closed_form_minimizer_1d,
                       continuum_flow_step, energy_gradient, flow_step, minimize, run_continuum_flow,
                       run_flow)
from .energy import (EnergyReport, Params, continuum_energy, diffusive_term, discrete_energy_1d,
                     discrete_energy_2d, permeability_tensor, total_energy_with_diffusion)
from .fem import (assemble_stiffness, project_source_1d, project_source_2d, solve_poisson_fem,
                  verify_kirchhoff_equivalence)
from .kirchhoff import (DiscreteSources, assemble_kirchhoff, edge_fluxes, fluxes_1d_explicit,
                        solve_pressures, sources_from_values)
from .linsolve import IncompatibleRhs, NoConvergence, SolveReport, SparseSymSystem, solve_zero_mean
from .mesh import (Mesh1D, Mesh2D, MeshSizeError, SizeMismatch, TensorField, build_mesh_1d,
                   build_mesh_2d, q0, q1_1d, q1_2d, q2_2d)
from .sources import SourceError, SourceSpec

__version__ = "0.1.0"
