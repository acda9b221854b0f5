import warnings

import pytest
from scipy.optimize import brentq

from axibreak.critical import (
    BracketError,
    critical_table,
    energy_gap,
    find_bstar,
    fit_bstar,
    write_critical_csv,
)
from axibreak.fields import RadialGrid

from oracles import landau_mu_exact

GRID = RadialGrid(512)


def test_fit_values():
    assert fit_bstar(0.0) == pytest.approx(1.924, abs=1e-15)
    assert fit_bstar(10.0) == pytest.approx(3.702, abs=1e-12)
    assert fit_bstar(1.0) == pytest.approx(2.096004, abs=1e-12)
    assert fit_bstar(4.0) == pytest.approx(2.622336, abs=1e-12)


def test_fit_warns_outside_range():
    with pytest.warns(UserWarning):
        assert fit_bstar(12.0) == pytest.approx(1.924 + 0.171 * 12 + 0.00104 * 144 - 0.000036 * 1728)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit_bstar(5.0)


def test_zero_density_limit_is_linear_crossing():
    exact = brentq(lambda b: landau_mu_exact(0, b) - landau_mu_exact(1, b), 1.5, 2.5, xtol=1e-12)
    assert find_bstar(0.0, GRID, tol_b=1e-6) == pytest.approx(exact, abs=1e-4)
    assert find_bstar(1e-3, GRID) == pytest.approx(1.924, rel=0.01)


@pytest.mark.parametrize("rho", [4.0, 10.0])
def test_bstar_examples(rho):
    assert find_bstar(rho, GRID) == pytest.approx(fit_bstar(rho), rel=0.02)


def test_halving_tolerance_is_consistent():
    tol = 1e-3
    a = find_bstar(3.0, GRID, tol_b=tol)
    b = find_bstar(3.0, GRID, tol_b=tol / 2)
    assert abs(a - b) <= tol
    assert find_bstar(3.0, GRID, tol_b=tol) == a


def test_gap_increases_through_crossing():
    b = find_bstar(2.0, GRID, tol_b=1e-6)
    gaps = [energy_gap(2.0, b + d, GRID).gap for d in (-0.05, -0.01, 0.01, 0.05)]
    assert gaps == sorted(gaps)
    assert gaps[1] < 0 < gaps[2]


def test_no_sign_change_in_bracket():
    with pytest.raises(BracketError):
        find_bstar(2.0, GRID, bracket=(3.0, 4.5))


def test_invalid_arguments():
    with pytest.raises(ValueError):
        find_bstar(-1.0, GRID)
    with pytest.raises(ValueError):
        find_bstar(1.0, GRID, tol_b=0.0)
    with pytest.warns(UserWarning):
        find_bstar(10.5, RadialGrid(128), tol_b=1e-2)


def test_table_and_csv(tmp_path):
    rows = critical_table([0.5, 2.0], RadialGrid(128), tol_b=1e-3)
    assert [r.rho for r in rows] == [0.5, 2.0]
    assert all(abs(r.rel_err) < 0.02 for r in rows)
    text = write_critical_csv(tmp_path / "c.csv", rows).read_text().splitlines()
    assert text[0] == "rho,bstar_numeric,bstar_fit,rel_err"
    assert len(text) == 3


def test_parallel_table_matches_serial():
    grid = RadialGrid(64)
    serial = critical_table([1.0, 3.0], grid, tol_b=1e-3)
    parallel = critical_table([1.0, 3.0], grid, tol_b=1e-3, jobs=2)
    assert serial == parallel
