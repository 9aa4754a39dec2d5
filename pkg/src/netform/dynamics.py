"""Gradient flow and projected-gradient minimisation of the conductivity energy.

Both use the per-edge metric ``w_e`` (the area weight of edge e), so the
flow law is

    dC_e/dt = (dP_e/h)^2 - nu (r + C_e)^(gamma-1) - 2 D^2 (L C)_e / w_e

and stationarity is measured by the metric gradient ``g / w`` restricted to
feasible directions (components at C_e = 0 pointing below zero are dropped).
"""
from dataclasses import dataclass, field

import numpy as np

from .energy import (ENERGY_REL_TOL, EnergyReport, cached_diffusion_matrix, continuum_energy,
                     continuum_pressure, discrete_pressures, energy_and_pressures, energy_weights)
from .fem import _as_sources
from .kirchhoff import fluxes_1d_explicit, pressure_drops
from .mesh import TensorField, check_conductivities

DT_MIN = 1e-14
DT_GROW = 1.2
ROUNDOFF = 1e-13
# relative energy change a flow step must be able to resolve (a few ulps)
ENERGY_RESOLUTION = 4 * np.finfo(float).eps


class StepCollapse(RuntimeError):
    """Backtracking drove the time step below ``DT_MIN``."""


class RoundoffStall(StepCollapse):
    """The energy can no longer resolve the decrease of a rejected step."""


@dataclass
class FlowState:
    t: float
    C: object  # edge vector, or TensorField in continuum mode
    report: EnergyReport
    dt: float
    P: np.ndarray = None


@dataclass
class MinimizeResult:
    C: np.ndarray
    iterations: int
    energy: EnergyReport
    grad_norm: float
    converged: bool
    history: list = field(default_factory=list)


def energy_gradient(mesh, C, params, sources, P=None, rel_tol=ENERGY_REL_TOL):
    """dE/dC_e via the adjoint identity (the pumping derivative needs no extra solve)."""
    C = check_conductivities(mesh, C)
    if P is None:
        _, P = energy_and_pressures(mesh, C, params, sources, rel_tol)
    w = energy_weights(mesh)
    grad_p = pressure_drops(mesh, P) / mesh.h
    g = w * (-grad_p ** 2 + params.nu * (params.r + C) ** (params.gamma - 1.0))
    if params.d2 > 0:
        g = g + 2.0 * params.d2 * (cached_diffusion_matrix(mesh) @ C)
    return g


def project_direction(C, v):
    """Zero the components of a velocity that would leave C >= 0 at active bounds."""
    out = v.copy()
    out[(C <= 0.0) & (v < 0.0)] = 0.0
    return out


def projected_gradient_norm(mesh, C, g):
    w = energy_weights(mesh)
    return float(np.abs(project_direction(C, -g / w)).max(initial=0.0))


def initial_state(mesh, C0, params, sources, dt=1e-2):
    C0 = check_conductivities(mesh, C0)
    if np.any(C0 < 0):
        raise ValueError("initial conductivities must be nonnegative")
    rep, P = energy_and_pressures(mesh, C0, params, sources)
    return FlowState(0.0, C0.copy(), rep, float(dt), P)


def flow_step(state, mesh, params, sources, dt_max=np.inf, stat_tol=1e-8):
    """One explicit Euler step with energy backtracking.

    Returns ``state`` itself at a stationary point. The proposed step is
    ``min(state.dt, dt_max)``; on acceptance the next proposal is the
    accepted step times ``DT_GROW``. Raises :class:`RoundoffStall` when a
    rejected step already predicts a decrease below the round-off of the
    energy, and :class:`StepCollapse` when dt would drop below ``DT_MIN``.
    """
    C = state.C
    g = energy_gradient(mesh, C, params, sources, P=state.P)
    v = project_direction(C, -g / energy_weights(mesh))
    if np.abs(v).max(initial=0.0) <= stat_tol:
        return state
    dt = min(state.dt, dt_max)
    proposal = dt
    w = energy_weights(mesh)
    while True:
        Cn = np.maximum(0.0, C + dt * v)
        rep, P = energy_and_pressures(mesh, Cn, params, sources, x0=state.P)
        if rep.total <= state.report.total:
            return FlowState(state.t + dt, Cn, rep, _next_dt(state.dt, proposal, dt), P)
        _shrink(dt, float(w @ (v * (Cn - C))), state)
        dt *= 0.5


def _next_dt(previous, proposal, accepted):
    # a step shortened only to land on t_end keeps the earlier proposal
    if accepted == proposal < previous:
        return previous
    return accepted * DT_GROW


def _shrink(dt, predicted, state):
    """Raise if halving ``dt`` cannot lead to an accepted step."""
    if predicted <= ENERGY_RESOLUTION * abs(state.report.total):
        raise RoundoffStall(f"predicted decrease {predicted:.3e} is below energy round-off "
                            f"at t={state.t:.6g}")
    if dt * 0.5 < DT_MIN:
        raise StepCollapse(f"time step fell below {DT_MIN:g} at t={state.t:.6g}")


@dataclass
class Trajectory:
    states: list
    stopped: str  # "t_end", "stationary", "roundoff", "collapse" or "max_steps"

    def rows(self):
        out = []
        for s in self.states:
            C = s.C.c1 if isinstance(s.C, TensorField) else s.C
            if isinstance(s.C, TensorField) and s.C.c2 is not None:
                C = np.concatenate([s.C.c1, s.C.c2])
            r = s.report
            out.append((s.t, r.pumping, r.metabolic, r.diffusive, r.total, float(C.min()), float(C.max())))
        return out


TRAJECTORY_COLUMNS = ("t", "pumping", "metabolic", "diffusive", "total", "min_C", "max_C")


def _run(step, state, t_end, max_steps):
    states = [state]
    stopped = "max_steps"
    for _ in range(max_steps):
        if state.t >= t_end:
            stopped = "t_end"
            break
        try:
            new = step(state, t_end - state.t)
        except RoundoffStall:
            stopped = "roundoff"
            break
        except StepCollapse:
            stopped = "collapse"
            break
        if new is state:
            stopped = "stationary"
            break
        state = new
        states.append(state)
    else:
        if state.t >= t_end:
            stopped = "t_end"
    return Trajectory(states, stopped)


def run_flow(mesh, C0, params, sources, t_end, dt=1e-2, max_steps=100000, stat_tol=1e-8):
    state = initial_state(mesh, C0, params, sources, dt)
    return _run(lambda s, rem: flow_step(s, mesh, params, sources, dt_max=rem, stat_tol=stat_tol),
                state, t_end, max_steps)


def minimize(mesh, C0, params, sources, tol=1e-8, max_iter=20000, alpha0=None, keep_history=False):
    """Projected gradient descent, Barzilai-Borwein trial steps, Armijo backtracking.

    Converged when the metric projected gradient satisfies ``||.||_inf <= tol``.
    Hitting ``max_iter`` (or a step that can no longer decrease the energy
    in floating point) returns ``converged=False``.
    """
    C = check_conductivities(mesh, C0).copy()
    if np.any(C < 0):
        raise ValueError("initial conductivities must be nonnegative")
    w = energy_weights(mesh)
    rep, P = energy_and_pressures(mesh, C, params, sources)
    g = energy_gradient(mesh, C, params, sources, P=P)
    alpha = 1.0 if alpha0 is None else float(alpha0)
    history = [rep.total] if keep_history else []
    it = 0
    gnorm = projected_gradient_norm(mesh, C, g)
    while gnorm > tol and it < max_iter:
        step = -g / w
        a = alpha
        while True:
            Cn = np.maximum(0.0, C + a * step)
            d = Cn - C
            rep_n, Pn = energy_and_pressures(mesh, Cn, params, sources, x0=P)
            gn = energy_gradient(mesh, Cn, params, sources, P=Pn)
            if rep_n.total <= rep.total + 1e-4 * (g @ d):
                break
            # below round-off of E the Armijo test is noise; fall back to the gradient
            if (abs(rep_n.total - rep.total) <= ROUNDOFF * abs(rep.total)
                    and projected_gradient_norm(mesh, Cn, gn) < gnorm):
                break
            a *= 0.5
            if a < 1e-20:
                return MinimizeResult(C, it, rep, gnorm, False, history)
        s, y = Cn - C, gn - g
        sy = s @ y
        alpha = (s @ (w * s)) / sy if sy > 0 else a * 2.0
        alpha = float(np.clip(alpha, 1e-12, 1e12))
        C, g, P, rep = Cn, gn, Pn, rep_n
        it += 1
        gnorm = projected_gradient_norm(mesh, C, g)
        if keep_history:
            history.append(rep.total)
    return MinimizeResult(C, it, rep, gnorm, gnorm <= tol, history)


def closed_form_minimizer_1d(mesh, params, sources):
    """C_i = max(0, (Q_i^2/nu)^(1/(gamma+1)) - r) with the explicit 1D fluxes."""
    if mesh.dim != 1:
        raise ValueError("closed-form minimiser exists only in 1D")
    if params.d2 != 0:
        raise ValueError("closed-form minimiser assumes d2 = 0")
    Q = fluxes_1d_explicit(sources)
    return np.maximum(0.0, (Q * Q / params.nu) ** (1.0 / (params.gamma + 1.0)) - params.r)


def unregularized_velocity(mesh, C, params, sources, eps=1e-8):
    """Rate C' = (Q/C)^2 - nu C^(gamma-1) of the r = 0 model, C clamped to >= eps.

    Not used by the flow itself; provided for comparison with the
    regularised law.
    """
    Cc = np.maximum(check_conductivities(mesh, C), eps)
    # conductance r + C with r = eps reproduces Cc exactly
    P, _ = discrete_pressures(mesh, Cc - eps, params.replace(r=eps), sources)
    grad_p = pressure_drops(mesh, P) / mesh.h
    return grad_p ** 2 - params.nu * Cc ** (params.gamma - 1.0)


# --- continuum (per-triangle) flow -------------------------------------------

def _continuum_velocity(mesh, c, params, grads):
    nu, r, g = params.nu, params.r, params.gamma
    if mesh.dim == 1:
        return (grads ** 2 - nu * (r + c.c1) ** (g - 1.0),)
    return (grads[:, 0] ** 2 - nu * (r + c.c1) ** (g - 1.0),
            grads[:, 1] ** 2 - nu * (r + c.c2) ** (g - 1.0))


def initial_continuum_state(mesh, c0, params, S, dt=1e-2):
    if params.d2 != 0:
        raise ValueError("the continuum flow has no diffusion term; set d2 = 0")
    c0.check(mesh)
    if c0.min() < 0:
        raise ValueError("initial tensor field must be nonnegative")
    src = _as_sources(S, mesh)
    P, _ = continuum_pressure(mesh, c0, params, src)
    return FlowState(0.0, c0, continuum_energy(mesh, c0, params, src), float(dt), P), src


def continuum_flow_step(state, mesh, params, S, dt_max=np.inf, stat_tol=1e-8):
    if params.d2 != 0:
        raise ValueError("the continuum flow has no diffusion term; set d2 = 0")
    c = state.C
    src = _as_sources(S, mesh)
    _, grads = continuum_pressure(mesh, c, params, src)
    parts = (c.c1,) if mesh.dim == 1 else (c.c1, c.c2)
    vel = [project_direction(x, v) for x, v in zip(parts, _continuum_velocity(mesh, c, params, grads))]
    if max(np.abs(v).max(initial=0.0) for v in vel) <= stat_tol:
        return state
    dt = min(state.dt, dt_max)
    proposal = dt
    area = mesh.h if mesh.dim == 1 else mesh.triangle_area
    while True:
        new = [np.maximum(0.0, x + dt * v) for x, v in zip(parts, vel)]
        cn = TensorField(*new)
        rep = continuum_energy(mesh, cn, params, src)
        if rep.total <= state.report.total:
            P, _ = continuum_pressure(mesh, cn, params, src)
            return FlowState(state.t + dt, cn, rep, _next_dt(state.dt, proposal, dt), P)
        predicted = area * sum(float(v @ (y - x)) for x, y, v in zip(parts, new, vel))
        _shrink(dt, predicted, state)
        dt *= 0.5


def run_continuum_flow(mesh, c0, params, S, t_end, dt=1e-2, max_steps=100000, stat_tol=1e-8):
    state, src = initial_continuum_state(mesh, c0, params, S, dt)
    return _run(lambda s, rem: continuum_flow_step(s, mesh, params, src, dt_max=rem, stat_tol=stat_tol),
                state, t_end, max_steps)
