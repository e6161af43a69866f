import csv
import io
import json

import numpy as np
import pytest

from nullcone import tensor as tn
from nullcone.foliation import HorizontalField, TimeGrid, node_factor
from nullcone.model import (
    AffineChart,
    derenormalize,
    minkowski_exact,
    random_renormalized,
    renormalize,
    schwarzschild_exact,
)
from nullcone.spectral import SphereGrid
from nullcone.structure import (
    EQUATIONS,
    GROUPS,
    ConjugatePointError,
    budget_report,
    curvature_of,
    dictionary_check,
    evolve,
    gauss_curvature,
    group_of,
    initial_slice,
    measured_sff_error,
    physical_residual_fields,
    residuals_physical,
    residuals_renormalized,
    weight,
)

GRID = SphereGrid(8)


def _max(v):
    return float(np.abs(np.asarray(v)).max())


@pytest.fixture(scope="module")
def schw():
    return schwarzschild_exact(1.0, 4.0, GRID, TimeGrid.uniform(0.9, dt=2e-3))


@pytest.fixture(scope="module")
def noisy():
    time = TimeGrid.uniform(0.9, dt=2e-3)
    return random_renormalized(AffineChart(4.0, 1.0), time, SphereGrid(12), 0.05,
                               np.random.default_rng(3))


def _zeros(time, grid):
    z = lambda k: HorizontalField.zeros(k, time, grid)
    return {"A": z("dd"), "B": z("d"), "R": z(""), "Bbar": z("d")}


def _zero_initial(grid, **kw):
    init = {"H": np.zeros((2, 2) + grid.shape), "Z": np.zeros((2,) + grid.shape),
            "Hbar": np.zeros((2, 2) + grid.shape), "M": np.zeros(grid.shape)}
    init.update(kw)
    return init


def test_equation_table():
    assert len(EQUATIONS) == 12
    sizes = {}
    for name in EQUATIONS:
        g = group_of(name)
        sizes[g] = sizes.get(g, 0) + 1
    assert sizes == {"evolution": 3, "elliptic": 2, "gauss_codazzi": 2,
                     "derivative_evolution": 2, "bianchi": 3}
    assert set(sizes) == set(GROUPS.values())


def test_schwarzschild_residuals(schw):
    for rep in (residuals_renormalized(renormalize(schw)), residuals_physical(schw)):
        assert rep.passed, rep.failures
        assert all(v >= 0 for v in rep.values.values())


def test_minkowski_residuals():
    d = minkowski_exact(4.0, GRID, TimeGrid.uniform(0.9, dt=2e-3))
    assert residuals_renormalized(renormalize(d)).passed
    assert residuals_physical(d).passed


def test_schwarzschild_gauss_and_codazzi(schw):
    E = physical_residual_fields(schw)
    assert _max(E["gc_codazzi"].values) < 1e-12
    assert _max(E["gc_gauss"].values) < 1e-13
    K = schw.metric.gauss_curvature()
    assert _max(K - node_factor(schw.s ** -2.0)) < 1e-13


def test_inconsistent_data_detected(noisy):
    rep = residuals_renormalized(noisy)
    assert all(v > 1e-3 for v in rep.values.values())
    assert not rep.passed
    assert set(rep.failures()) == set(EQUATIONS)


def test_dictionary_weights(noisy):
    d = dictionary_check(derenormalize(noisy))
    # evd_trH needs a finer sphere grid; see the dedicated test below
    for k, v in d.items():
        if k != "evd_trH":
            assert v < 1e-6, k


def test_dictionary_weights_fine_grid():
    time = TimeGrid.uniform(0.9, dt=2e-3)
    ren = random_renormalized(AffineChart(4.0, 1.0), time, SphereGrid(24), 0.05,
                              np.random.default_rng(3))
    d = dictionary_check(derenormalize(ren))
    assert max(d.values()) < 1e-6, d


def test_weight_values():
    s, s0 = np.array([4.0, 8.0]), 4.0
    assert np.allclose(weight("nb_B", s, s0), s ** 5 / s0 ** 3)
    assert np.allclose(weight("gc_gauss", s, s0), s ** 2)


def test_report_serialization(schw):
    rep = residuals_renormalized(renormalize(schw))
    d = json.loads(rep.to_json())
    assert [r["name"] for r in d["rows"]] == list(EQUATIONS)
    assert d["passed"] is True
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert [r["name"] for r in rows] == list(EQUATIONS)
    assert set(rows[0]) == {"name", "value", "floor", "pass"}
    assert set(rep.groups) == set(GROUPS.values())


def test_evolve_zero_stays_zero():
    time = TimeGrid.uniform(0.9, dt=0.05)
    grid = SphereGrid(6)
    ren = evolve(_zero_initial(grid), _zeros(time, grid), AffineChart(4.0, 1.0))
    for k in ("H", "Z", "Hbar", "M", "dtrH"):
        assert _max(getattr(ren, k).values) == 0
    assert _max(ren.gamma.values - tn.round_metric((len(time),) + grid.shape)) == 0


def test_trace_ode_oracle():
    grid = SphereGrid(4)
    time = TimeGrid.uniform(0.9, dt=0.01)
    tau0 = 0.1
    init = _zero_initial(grid, H=0.5 * tau0 * tn.round_metric(grid.shape))
    ren = evolve(init, _zeros(time, grid), AffineChart(4.0, 0.0))
    exact = tau0 / (1 + tau0 * time.nodes / 2)
    assert _max(np.real(ren.trace_H().values) - node_factor(exact)) < 1e-10
    assert measured_sff_error(ren) < 1e-10


def test_conjugate_point_abort():
    grid = SphereGrid(4)
    time = TimeGrid.uniform(0.9, dt=0.01)
    # tr H = tau0 / (1 + tau0 t / 2) blows up at t = 0.5
    init = _zero_initial(grid, H=-2.0 * tn.round_metric(grid.shape))
    with pytest.raises(ConjugatePointError, match="conjugate-point"):
        evolve(init, _zeros(time, grid), AffineChart(4.0, 0.0), trace_ceiling=50.0)


def test_evolved_equations_are_satisfied():
    grid = SphereGrid(8)
    time = TimeGrid.uniform(0.9, dt=5e-3)
    rng = np.random.default_rng(0)
    src = random_renormalized(AffineChart(4.0, 1.0), time, grid, 1e-3, rng)
    init = initial_slice(src)
    init["gamma"] = tn.round_metric(grid.shape)
    init["dtrH"] = None
    ren = evolve(init, curvature_of(src), AffineChart(4.0, 1.0))
    rep = residuals_renormalized(ren)
    for k in ("ev_H", "ev_Z", "ev_Hbar", "evd_trH", "evd_M"):
        assert rep.values[k] < 1e-8, (k, rep.values[k])
    # the driven system keeps k = H up to the FD error of measuring it
    assert measured_sff_error(ren) < 1e-8


def test_restart_from_initial_slice_reproduces_run():
    grid = SphereGrid(6)
    time = TimeGrid.uniform(0.5, dt=0.01)
    src = random_renormalized(AffineChart(4.0, 1.0), time, grid, 1e-3, np.random.default_rng(1))
    init = initial_slice(src)
    a = evolve(init, curvature_of(src), src.chart)
    b = evolve(initial_slice(a), curvature_of(a), a.chart)
    for k in ("gamma", "H", "Z", "Hbar", "M", "dtrH"):
        assert _max(getattr(a, k).values - getattr(b, k).values) < 1e-14


def test_gauss_curvature_schwarzschild(schw):
    K, dec = gauss_curvature(renormalize(schw))
    assert _max(K.values - 1) < 1e-14
    assert _max(dec.V.values) == 0 and _max(dec.W.values) < 1e-14
    assert dec.f == 1.0


def test_gauss_curvature_trace_hbar_injection(schw):
    c = 0.02
    ren = renormalize(schw)
    ren = ren.with_fields(Hbar=ren.gamma * (0.5 * c))
    K, dec = gauss_curvature(ren)
    assert _max(K.values - 1 + c / 2) < 1e-14
    assert dec.identity_residual.max() < 1e-14


def test_k_decomposition_identity(noisy):
    K, dec = gauss_curvature(noisy)
    assert dec.identity_residual.max() < 1e-12
    assert np.all(dec.closed_form_gap >= 0)
    assert set(dec.norms) == {"V.Hinf_half", "W.Linf2_xt"}


def test_budget_schwarzschild():
    time = TimeGrid.uniform(0.9, n=31)
    ren = renormalize(schwarzschild_exact(1.0, 4.0, GRID, time))
    b = budget_report(ren)
    assert b.flux_gamma < 1e-15 and b.init_gamma < 1e-15
    assert all(abs(v) < 1e-12 for v in b.output_norms.values())
    assert np.all(np.asarray(b.refined_curvature["K-1.H_-half"]) < 1e-12)
    d = json.loads(b.to_json())
    assert "trH.Linf_inf" in d["output_norms"]
    assert b.to_csv().splitlines()[0] == "name,value,floor,pass"


def test_budget_flux_homogeneity(noisy):
    time = TimeGrid.uniform(0.9, n=31)
    ren = random_renormalized(AffineChart(4.0, 1.0), time, GRID, 1e-2, np.random.default_rng(5))
    doubled = ren.with_fields(**{k: getattr(ren, k) * 2.0 for k in ("A", "B", "R", "Bbar")})
    a = budget_report(ren, with_sum_norms=False).flux_gamma
    b = budget_report(doubled, with_sum_norms=False).flux_gamma
    assert b >= 2 * a * (1 - 1e-12)
