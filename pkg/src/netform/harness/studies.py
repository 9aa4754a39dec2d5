"""Mesh-refinement studies built on the library modules.

Every study returns a :class:`StudyResult`; failures of the checked
property are reported through ``passed``/``messages``, never raised.
Bad scenarios (wrong dimension, gamma <= 1 where the limit theory needs
gamma > 1, missing field) raise :class:`ScenarioError`.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ..dynamics import minimize
from ..energy import EnergyReport, continuum_energy, continuum_pressure, total_energy_with_diffusion
from ..fem import project_source_1d, project_source_2d
from ..mesh import TensorField, q1_1d, q1_2d, q2_2d, split_edges, tensor_field_from_functions
from .scenario import ScenarioError

RESAMPLE_2D = 256
RESAMPLE_1D = 4096
RECOVERY_RATIO = 1.5
ZERO_TOL = 1e-13


@dataclass
class LevelRecord:
    level: int
    N: int
    h: float
    report: EnergyReport
    error: float = float("nan")
    order: float = float("nan")


@dataclass
class StudyResult:
    kind: str
    records: list
    reference: float = float("nan")
    reference_kind: str = ""
    passed: bool = True
    messages: list = field(default_factory=list)
    table_columns: tuple = ()
    table: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def fail(self, msg):
        self.passed = False
        self.messages.append(msg)


def worker_count():
    env = os.environ.get("NETFORM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ScenarioError(f"NETFORM_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ScenarioError("NETFORM_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def map_levels(fn, levels):
    """fn over levels, possibly concurrently; results in level order."""
    n = min(worker_count(), len(levels))
    if n <= 1:
        return [fn(N) for N in levels]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, levels))


def scenario_sources(sc, mesh):
    return project_source_1d(sc.source, mesh) if mesh.dim == 1 else project_source_2d(sc.source, mesh)


def _tensor(sc, mesh):
    f1, f2 = sc.smooth_field().functions()
    if mesh.dim == 1:
        return tensor_field_from_functions(mesh, sc.smooth_field().functions_1d())
    return tensor_field_from_functions(mesh, f1, f2)


def observed_orders(Ns, errors):
    out = [float("nan")]
    for (n0, e0), (n1, e1) in zip(zip(Ns, errors), zip(Ns[1:], errors[1:])):
        if e0 > 0 and e1 > 0:
            out.append(math.log(e0 / e1) / math.log(n1 / n0))
        else:
            out.append(float("nan"))
    return out


def analytic_energy_1d(source, c, params):
    """Exact continuum energy for a 1D field c(x) and source S.

    With no-flux ends the flux is q(x) = int_0^x (S - mean S), so the
    pumping part is int q^2 / (r + c) and no PDE needs solving.
    """
    mean = integrate.quad(lambda x: float(source(np.array(x))), 0.0, 1.0, limit=200,
                          epsabs=1e-14, epsrel=1e-13)[0]

    def q(x):
        return integrate.quad(lambda s: float(source(np.array(s))) - mean, 0.0, x, limit=200,
                              epsabs=1e-14, epsrel=1e-13)[0]

    r, g, nu = params.r, params.gamma, params.nu
    pump = integrate.quad(lambda x: q(x) ** 2 / (r + float(c(np.array(x)))), 0.0, 1.0, limit=200,
                          epsabs=1e-14, epsrel=1e-12)[0]
    met = integrate.quad(lambda x: nu / g * (r + float(c(np.array(x)))) ** g, 0.0, 1.0, limit=200,
                         epsabs=1e-14, epsrel=1e-13)[0]
    return pump + met


def _levels_needed(sc, n, what):
    if len(sc.levels) < n:
        raise ScenarioError(f"{what} needs at least {n} mesh levels, got {list(sc.levels)}")


def refinement_study(sc):
    """Energy of a fixed smooth field along the levels, errors against a reference.

    The reference is the exact value in 1D (``reference`` = auto/analytic)
    and the finest level otherwise. The study passes when errors decay
    monotonically with observed order >= 1.
    """
    _levels_needed(sc, 3, "refinement_study")
    sc.smooth_field()

    def level(N):
        mesh = sc.mesh(N)
        return continuum_energy(mesh, _tensor(sc, mesh), sc.params, scenario_sources(sc, mesh))

    reports = map_levels(level, sc.levels)
    energies = [rep.total for rep in reports]
    use_analytic = sc.dimension == 1 and sc.reference in ("auto", "analytic")
    if sc.reference == "analytic" and sc.dimension != 1:
        raise ScenarioError("an analytic reference is available only in 1D")
    if use_analytic:
        ref = analytic_energy_1d(sc.source, sc.smooth_field().functions_1d(), sc.params)
        kind = "analytic"
    else:
        ref = energies[-1]
        kind = "finest"
    errors = [abs(e - ref) for e in energies]
    Ns = list(sc.levels)
    orders = observed_orders(Ns, errors)
    result = StudyResult("refine", [], ref, kind)
    for k, (N, rep, e, o) in enumerate(zip(Ns, reports, errors, orders)):
        result.records.append(LevelRecord(k, N, 1.0 / N, rep, e, o))
    checked = errors if kind == "analytic" else errors[:-1]
    scale = max(abs(ref), 1.0)
    if all(e <= ZERO_TOL * scale for e in checked):
        result.messages.append("all levels agree with the reference to round-off")
        return result
    for k in range(1, len(checked)):
        if not checked[k] < checked[k - 1]:
            result.fail(f"error does not decrease from N={Ns[k - 1]} to N={Ns[k]}: "
                        f"{checked[k - 1]:.3e} -> {checked[k]:.3e}")
        elif not orders[k] >= 1.0:
            result.fail(f"observed order {orders[k]:.3f} < 1 between N={Ns[k - 1]} and N={Ns[k]}")
    return result


def _l2_gradient_distance(mesh, g1, g0):
    d = g1 - g0
    if mesh.dim == 1:
        return math.sqrt(mesh.h * float(np.sum(d * d)))
    return math.sqrt(mesh.triangle_area * float(np.sum(d * d)))


def perturbation_field(mesh, k):
    """Bounded nonnegative oscillation 1 + sin(2 pi k x) sin(2 pi k y), per-cell averages."""
    if mesh.dim == 1:
        return tensor_field_from_functions(mesh, lambda x: 1.0 + np.sin(2 * np.pi * k * x))
    f = lambda x, y: 1.0 + np.sin(2 * np.pi * k * x) * np.sin(2 * np.pi * k * y)
    return tensor_field_from_functions(mesh, f, f)


def weak_strong_check(sc, epsilons=None):
    """Pumping energy and pressure gradient under shrinking perturbations c + eps*w.

    Runs on the finest scenario level. Both the energy difference and the
    L2 gradient distance must decrease with eps; consecutive energy ratios
    must be Lipschitz-like (between 1.5 and 2.5 per halving of eps).
    """
    eps = list(sc.epsilons if epsilons is None else epsilons)
    N = sc.levels[-1]
    mesh = sc.mesh(N)
    c = _tensor(sc, mesh)
    src = scenario_sources(sc, mesh)
    pert = perturbation_field(mesh, sc.perturbation)
    params = sc.params
    base = continuum_energy(mesh, c, params, src)
    _, g0 = continuum_pressure(mesh, c, params, src)
    rows = []
    for e in eps:
        parts = [np.maximum(0.0, c.c1 + e * pert.c1)]
        if mesh.dim == 2:
            parts.append(np.maximum(0.0, c.c2 + e * pert.c2))
        ce = TensorField(*parts)
        rep = continuum_energy(mesh, ce, params, src)
        _, ge = continuum_pressure(mesh, ce, params, src)
        rows.append([e, abs(rep.pumping - base.pumping), _l2_gradient_distance(mesh, ge, g0),
                     float(ce.min())])
    for k, row in enumerate(rows):
        prev = rows[k - 1] if k else None
        ratio = prev[1] / row[1] if prev and row[1] > 0 else float("nan")
        row.append(ratio)
    res = StudyResult("weakstrong", [], base.pumping, "unperturbed",
                      table_columns=("epsilon", "energy_diff", "grad_l2_diff", "min_c", "ratio"),
                      table=rows, extra={"N": N})
    order = np.argsort([-r[0] for r in rows], kind="stable")
    srt = [rows[i] for i in order]
    for a, b in zip(srt, srt[1:]):
        if b[0] == a[0]:
            continue
        if b[0] == 0.0:
            if b[1] > ZERO_TOL * max(base.pumping, 1.0) or b[2] > ZERO_TOL:
                res.fail("eps = 0 does not reproduce the unperturbed solution")
            continue
        if not (b[1] < a[1] and b[2] < a[2]):
            res.fail(f"differences do not decrease from eps={a[0]} to eps={b[0]}")
        elif abs(a[0] / b[0] - 2.0) < 1e-12:
            ratio = a[1] / b[1]
            if not 1.5 <= ratio <= 2.5:
                res.fail(f"energy ratio {ratio:.3f} for eps {a[0]} -> {b[0]} is not Lipschitz-like")
    if any(r[3] < 0 for r in rows):
        res.fail("perturbed field is negative")
    return res


def resample(mesh, C):
    """Reconstructed conductivity fields on the common lattice."""
    if mesh.dim == 1:
        x = (np.arange(RESAMPLE_1D) + 0.5) / RESAMPLE_1D
        return (q1_1d(mesh, C)(x),)
    t = (np.arange(RESAMPLE_2D) + 0.5) / RESAMPLE_2D
    X, Y = np.meshgrid(t, t, indexing="ij")
    ch, cv = split_edges(mesh, C)
    return q1_2d(mesh, ch)(X, Y), q2_2d(mesh, cv)(X, Y)


def lattice_distance(f, g):
    """L2(unit domain) distance between resampled fields (midpoint rule)."""
    return math.sqrt(sum(float(np.mean((a - b) ** 2)) for a, b in zip(f, g)))


def minimizer_convergence_study(sc):
    """Discrete minimisers of the diffusive energy on successive meshes."""
    if sc.params.d2 <= 0:
        raise ScenarioError("minimizer_convergence_study needs d2 > 0")
    if sc.dimension == 2 and sc.params.gamma <= 1:
        raise ScenarioError(f"the 2D limit theory assumes gamma > 1, got gamma={sc.params.gamma}")
    _levels_needed(sc, 2, "minimizer_convergence_study")

    def level(N):
        mesh = sc.mesh(N)
        src = scenario_sources(sc, mesh)
        out = minimize(mesh, sc.initial_conductivities(mesh), sc.params, src,
                       tol=sc.tol, max_iter=sc.max_iter)
        zero = total_energy_with_diffusion(mesh, np.zeros(mesh.n_edges), sc.params, src)
        return out, zero, resample(mesh, out.C)

    outs = map_levels(level, sc.levels)
    Ns = list(sc.levels)
    energies = [o[0].energy.total for o in outs]
    ref = energies[-1]
    res = StudyResult("minconv", [], ref, "finest",
                      table_columns=("N", "energy", "energy_zero", "iterations", "grad_norm",
                                     "converged", "distance_to_next"))
    dists = [lattice_distance(outs[k][2], outs[k + 1][2]) for k in range(len(outs) - 1)]
    for k, (N, (mr, zero, _)) in enumerate(zip(Ns, outs)):
        res.records.append(LevelRecord(k, N, 1.0 / N, mr.energy, abs(energies[k] - ref)))
        res.table.append([N, mr.energy.total, zero.total, mr.iterations, mr.grad_norm,
                          mr.converged, dists[k] if k < len(dists) else float("nan")])
        if not mr.converged:
            res.fail(f"optimizer did not converge at N={N} (|grad| = {mr.grad_norm:.3e})")
        if not mr.energy.total <= zero.total:
            res.fail(f"minimiser energy exceeds the C=0 energy at N={N}")
    orders = observed_orders(Ns, [r.error for r in res.records])
    for r, o in zip(res.records, orders):
        r.order = o
    for k in range(1, len(dists)):
        if not dists[k] < dists[k - 1]:
            res.fail(f"field distance does not decrease: {dists[k - 1]:.3e} -> {dists[k]:.3e}")
    diffs = np.abs(np.diff(energies))
    for k in range(1, len(diffs)):
        if not diffs[k] <= diffs[k - 1]:
            res.fail(f"energy increments grow: {diffs[k - 1]:.3e} -> {diffs[k]:.3e}")
    res.extra["distances"] = dists
    res.extra["fields"] = [o[0].C for o in outs]
    return res


def gamma_recovery_check(sc):
    """Constant recovery sequence c^N = c: the FEM energies must form a Cauchy sequence."""
    if not sc.params.gamma > 1:
        raise ScenarioError(f"gamma_recovery_check requires gamma > 1 (got gamma={sc.params.gamma}); "
                            "the limit theorem is stated in L^gamma with gamma > 1")
    _levels_needed(sc, 3, "gamma_recovery_check")
    sc.smooth_field()

    def level(N):
        mesh = sc.mesh(N)
        return continuum_energy(mesh, _tensor(sc, mesh), sc.params, scenario_sources(sc, mesh))

    reports = map_levels(level, sc.levels)
    Ns = list(sc.levels)
    energies = [rep.total for rep in reports]
    ref = energies[-1]
    res = StudyResult("gamma", [], ref, "finest",
                      table_columns=("N", "energy", "increment", "ratio"))
    errors = [abs(e - ref) for e in energies]
    orders = observed_orders(Ns, errors)
    for k, (N, rep) in enumerate(zip(Ns, reports)):
        res.records.append(LevelRecord(k, N, 1.0 / N, rep, errors[k], orders[k]))
    inc = [float("nan")] + [abs(b - a) for a, b in zip(energies, energies[1:])]
    scale = max(abs(ref), 1.0)
    for k, (N, e) in enumerate(zip(Ns, energies)):
        ratio = inc[k - 1] / inc[k] if k >= 2 and inc[k] > 0 else float("nan")
        res.table.append([N, e, inc[k], ratio])
        if k >= 2 and inc[k] > ZERO_TOL * scale and not inc[k] * RECOVERY_RATIO <= inc[k - 1]:
            res.fail(f"energy increments do not shrink by {RECOVERY_RATIO}: "
                     f"{inc[k - 1]:.3e} -> {inc[k]:.3e} at N={N}")
    return res
