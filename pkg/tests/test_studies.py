import numpy as np
import pytest

from netform.harness.scenario import ScenarioError, scenario_from_dict
from netform.harness.studies import (analytic_energy_1d, gamma_recovery_check, lattice_distance, map_levels,
                                     minimizer_convergence_study, observed_orders, refinement_study,
                                     resample, weak_strong_check, worker_count)
from netform.mesh import build_mesh_2d


def sc(**kw):
    d = {"dimension": 2, "source": "sine2d 1 1", "gamma": 2.0, "nu": 1.0, "r": 0.1,
         "levels": [8, 16, 32], "field": "quadratic"}
    d.update(kw)
    return scenario_from_dict(d)


def test_observed_orders():
    o = observed_orders([8, 16, 32], [1.0, 0.25, 0.0625])
    assert np.isnan(o[0]) and np.allclose(o[1:], 2.0)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("NETFORM_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("NETFORM_THREADS", "1")
    assert map_levels(lambda n: n * n, [1, 2, 3]) == [1, 4, 9]


def test_analytic_energy_constant_case():
    s = sc(dimension=1, source="zero", levels=[4, 8, 16], field="constant 2")
    p = s.params
    assert np.isclose(analytic_energy_1d(s.source, s.smooth_field().functions_1d(), p),
                      (p.nu / p.gamma) * (p.r + 2) ** p.gamma)


def test_refinement_constant_field_exact():
    res = refinement_study(sc(source="zero", field="constant 1.5"))
    assert res.passed
    assert all(r.error <= 1e-13 for r in res.records)


def test_refinement_1d_and_2d():
    r1 = refinement_study(sc(dimension=1, source="sine1d 1", field="linear", levels=[8, 16, 32, 64]))
    assert r1.passed and r1.reference_kind == "analytic"
    errs = [r.error for r in r1.records]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert all(r.order >= 1 for r in r1.records[1:])
    r2 = refinement_study(sc(levels=[8, 16, 32, 64]))
    assert r2.passed and r2.reference_kind == "finest"


def test_refinement_needs_three_levels_and_field():
    with pytest.raises(ScenarioError):
        refinement_study(sc(levels=[8, 16]))
    with pytest.raises(ScenarioError):
        refinement_study(scenario_from_dict({"dimension": 2, "source": "zero", "levels": [2, 4, 8]}))


def test_weak_strong():
    res = weak_strong_check(sc(levels=[16], epsilons=[0.4, 0.2, 0.1, 0.05, 0.0]))
    assert res.passed, res.messages
    rows = res.table
    assert rows[-1][1] <= 1e-12 and rows[-1][2] <= 1e-12
    assert all(r[3] >= 0 for r in rows)
    ratios = [r[4] for r in rows[1:4]]
    assert all(1.5 <= q <= 2.5 for q in ratios)


def test_gamma_recovery():
    res = gamma_recovery_check(sc(field="bilinear", levels=[4, 8, 16, 32]))
    assert res.passed, res.messages
    zero = gamma_recovery_check(sc(source="zero", field="zero"))
    p = zero.records[0].report
    assert all(np.isclose(r.report.total, 2 * (p.nu / p.gamma) * p.r ** p.gamma) for r in zero.records)
    with pytest.raises(ScenarioError, match="gamma > 1"):
        gamma_recovery_check(sc(gamma=1.0, field="bilinear"))


def test_resample_and_distance():
    m = build_mesh_2d(4)
    f = resample(m, np.full(m.n_edges, 2.0))
    assert f[0].shape == (256, 256) and np.allclose(f[0], 2.0)
    assert np.isclose(lattice_distance(f, resample(m, np.ones(m.n_edges))), np.sqrt(2.0))


def test_minconv_zero_source_trivial():
    res = minimizer_convergence_study(sc(source="zero", d2=0.01, gamma=1.5, levels=[4, 8],
                                         init={"kind": "constant", "value": 1.0}, tol=1e-8))
    assert res.passed
    assert all(np.abs(C).max() <= 1e-6 for C in res.extra["fields"])


def test_minconv_gates():
    with pytest.raises(ScenarioError):
        minimizer_convergence_study(sc(d2=0.0))
    with pytest.raises(ScenarioError):
        minimizer_convergence_study(sc(d2=0.01, gamma=0.9))
