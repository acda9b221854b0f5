import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from axibreak.fields import Params, RadialGrid
from axibreak.radial import solve_symmetric
from axibreak.reduced import (
    ENERGY_COEFFS,
    Q_NORM,
    ReducedPoint,
    ansatz_fields,
    default_seeds,
    landscape,
    optimal_a0,
    reduced_bstar,
    reduced_constraint,
    reduced_energy,
    reduced_energy_quadrature,
    reduced_minimize,
    symmetric_reduced,
    write_landscape_csv,
    write_stationary_json,
)

from oracles import reduced_energy_symbolic


@pytest.fixture(scope="module")
def symbolic():
    return reduced_energy_symbolic()


def test_coefficients_match_exact_integration(symbolic):
    exact = {k: Fraction(int(v.p), int(v.q)) for k, v in symbolic.terms()}
    assert exact == ENERGY_COEFFS


def test_density_coefficient_by_quadrature():
    val, _ = integrate.quad(lambda r: 2 * r**3 * (1 - r / 2) ** 2, 0, 1, epsabs=1e-14, epsrel=1e-14)
    assert abs(val - float(Q_NORM)) < 1e-12
    assert Q_NORM == Fraction(11, 60)


def test_constraint_examples():
    assert reduced_constraint(ReducedPoint(1, 0)) == 1
    assert reduced_constraint(ReducedPoint(0, 1)) == pytest.approx(11 / 60, rel=1e-15)
    assert reduced_constraint(ReducedPoint(1, 1)) == pytest.approx(1 + 11 / 60, rel=1e-15)


def test_constraint_matches_disk_average():
    pt = ReducedPoint(0.7, -1.3, 0.2, 0.4)
    x, w = np.polynomial.legendre.leggauss(12)
    r = 0.5 * (x + 1)[:, None]
    theta = 2 * np.pi * np.arange(16)[None, :] / 16
    psi, _ = ansatz_fields(pt, r, theta)
    mean = np.sum(0.5 * w[:, None] * r * np.abs(psi) ** 2) * 2 / 16
    assert mean == pytest.approx(reduced_constraint(pt), rel=1e-13)


def test_energy_examples():
    assert reduced_energy(ReducedPoint(1.0, 0.0), Params(0.0, 1.0)) == 0.0
    p, b = 1.4, 0.9
    assert reduced_energy(ReducedPoint(p, 0.0), Params(b, p**2)) == pytest.approx(math.pi * p**2 * b**2 / 2, rel=1e-14)


def test_energy_with_symmetric_gauge_term():
    # magnetic term of B = 2 a0 (1 - r) plus the kinetic term |(A + b r) p|^2
    p, a0, b = 0.8, -0.3, 1.7
    f = lambda r: r - 2 * r**2 / 3  # noqa: E731
    mag, _ = integrate.quad(lambda r: (2 * a0 * (1 - r)) ** 2 * r, 0, 1)
    kin, _ = integrate.quad(lambda r: (a0 * f(r) + b * r) ** 2 * p**2 * r, 0, 1)
    exact = 2 * math.pi * (mag + kin)
    assert reduced_energy(ReducedPoint(p, 0.0, a0, 0.0), Params(b, p**2)) == pytest.approx(exact, rel=1e-13)


coord = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(p=coord, q=coord, a0=coord, a1=coord, b=st.floats(0, 6))
def test_closed_form_matches_quadrature(p, q, a0, a1, b):
    pt = ReducedPoint(p, q, a0, a1)
    closed = reduced_energy(pt, Params(b, 1.0))
    quad = reduced_energy_quadrature(pt, Params(b, 1.0))
    assert abs(closed - quad) <= 1e-10 * max(1.0, abs(closed))


@settings(max_examples=30, deadline=None)
@given(p=coord, q=coord, a0=coord, a1=coord, b=st.floats(0, 6))
def test_half_turn_symmetry(p, q, a0, a1, b):
    par = Params(b, 1.0)
    g = reduced_energy(ReducedPoint(p, q, a0, a1), par)
    assert reduced_energy(ReducedPoint(p, -q, a0, -a1), par) == pytest.approx(g, rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(p=coord, a0=coord, a1=coord, b=st.floats(0, 6))
def test_cos_mode_decouples_at_q_zero(p, a0, a1, b):
    # at q = 0 the energy is even in a1, so dG/da1 vanishes at a1 = 0
    par = Params(b, 1.0)
    eps = 1e-5
    d = (reduced_energy(ReducedPoint(p, 0, a0, eps), par) - reduced_energy(ReducedPoint(p, 0, a0, -eps), par)) / (2 * eps)
    assert abs(d) < 1e-8 * max(1.0, p**2)


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0, 5.0, 10.0])
@pytest.mark.parametrize("b", [1.0, 2.5, 4.0])
def test_variational_upper_bound(rho, b):
    par = Params(b, rho)
    trial = symmetric_reduced(par, 0)
    assert trial.a0 == pytest.approx(optimal_a0(par), rel=1e-14)
    exact = solve_symmetric(0, par, RadialGrid(512)).energy
    assert trial.energy >= exact
    assert trial.energy <= 1.2 * exact


def test_optimal_a0_is_a_minimum():
    par = Params(2.0, 3.0)
    a0 = optimal_a0(par)
    g = lambda a: reduced_energy(ReducedPoint(math.sqrt(3.0), 0.0, a, 0.0), par)  # noqa: E731
    assert g(a0) < g(a0 + 1e-3) and g(a0) < g(a0 - 1e-3)


def test_zero_field_has_uniform_global_minimum():
    points = reduced_minimize(Params(0.0, 1.0))
    best = points[0]
    assert best.kind == "minimum"
    assert best.point.q == 0 and best.point.a1 == 0
    assert best.point.energy == pytest.approx(0.0, abs=1e-12)


def _classify(points, rho):
    sym0 = [s for s in points if s.point.q == 0]
    sym1 = [s for s in points if s.point.p == 0]
    mixed = [s for s in points if s.point.p > 0 and s.point.q > 0]
    for s in points:
        assert reduced_constraint(s.point) == pytest.approx(rho, rel=1e-10)
    return sym0, sym1, mixed


@pytest.mark.parametrize("rho", [0.1, 0.5, 1.0])
def test_small_density_crossing_has_two_symmetric_minima(rho):
    par = Params(reduced_bstar(rho), rho)
    sym0, sym1, mixed = _classify(reduced_minimize(par), rho)
    assert [s.kind for s in sym0] == ["minimum"] and [s.kind for s in sym1] == ["minimum"]
    assert sym0[0].point.energy == pytest.approx(sym1[0].point.energy, rel=1e-10)
    assert mixed and all(s.point.energy > sym0[0].point.energy for s in mixed)


@pytest.mark.parametrize("rho", [5.0, 10.0])
def test_large_density_crossing_prefers_mixed_state(rho):
    par = Params(reduced_bstar(rho), rho)
    sym0, sym1, mixed = _classify(reduced_minimize(par), rho)
    g_sym = min(sym0[0].point.energy, sym1[0].point.energy)
    lowest = min(mixed, key=lambda s: s.point.energy)
    assert lowest.kind == "minimum"
    assert lowest.point.energy < g_sym
    assert lowest.point.a1 != 0


def test_seed_off_constraint_rejected():
    with pytest.raises(ValueError):
        reduced_minimize(Params(1.0, 1.0), seeds=[ReducedPoint(2.0, 0.0)])
    with pytest.raises(ValueError):
        reduced_minimize(Params(1.0, 0.0))


def test_default_seeds_on_constraint():
    seeds = default_seeds(3.0)
    assert len(seeds) == 16
    for s in seeds:
        assert reduced_constraint(s) == pytest.approx(3.0, rel=1e-14)


def test_symmetric_families():
    par = Params(2.0, 1.5)
    assert symmetric_reduced(par, 1).p == 0
    with pytest.raises(ValueError):
        symmetric_reduced(par, 2)


def test_exports(tmp_path):
    par = Params(2.0, 1.0)
    rows = landscape(par, [0.0, 0.5], [0.0], [-0.1, 0.1])
    assert len(rows) == 4
    path = write_landscape_csv(tmp_path / "land.csv", rows)
    assert path.read_text().splitlines()[0] == "phi,a0,a1,G"
    pts = reduced_minimize(par)
    data = json.loads(write_stationary_json(tmp_path / "pts.json", pts).read_text())
    assert len(data) == len(pts)
    assert {"p", "q", "a0", "a1", "energy", "kind", "hessian_eigenvalues"} <= set(data[0])
