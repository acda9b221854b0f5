import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axibreak.fields import (
    DegenerateFieldError,
    GridMismatchError,
    Params,
    PolarGrid,
    RadialGrid,
    State2D,
    constraint_project,
    density_mean,
    el_residuals,
    energy_and_gradient,
    energy_fields,
    energy_parts,
    energy_total,
    read_state_csv,
    write_state_csv,
)

from conftest import smooth_field


def uniform(grid, value):
    return np.full(grid.shape, value, dtype=complex), np.zeros(grid.shape)


def test_params_validation():
    with pytest.raises(ValueError):
        Params(-1.0, 1.0)
    with pytest.raises(ValueError):
        Params(1.0, -0.1)


def test_polar_grid_requires_even_angles():
    with pytest.raises(ValueError):
        PolarGrid(RadialGrid(8), 7)
    with pytest.raises(ValueError):
        PolarGrid(RadialGrid(8), 2)


def test_radial_nodes_are_half_offset():
    g = RadialGrid(10)
    np.testing.assert_allclose(g.nodes, (np.arange(10) + 0.5) / 10)
    assert 0 < g.nodes[0] and g.nodes[-1] <= 1
    np.testing.assert_allclose(np.diff(g.nodes), 0.1)


def test_energy_uniform_no_field_is_zero(small_grid):
    psi, a = uniform(small_grid, np.sqrt(2.0))
    assert energy_total(State2D(small_grid, psi, a), Params(0.0, 2.0)) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("n", [64, 128, 256])
def test_energy_uniform_in_external_field(n):
    # pi rho b^2 / 2 from 2 pi rho b^2 int r^3 dr; midpoint rule error is O(h^2)
    grid = PolarGrid(RadialGrid(n), 8)
    rho, b = 1.7, 0.8
    psi, a = uniform(grid, np.sqrt(rho))
    exact = np.pi * rho * b**2 / 2
    got = energy_total(State2D(grid, psi, a), Params(b, rho))
    assert abs(got - exact) / exact < 0.5 / n**2


def test_energy_rejects_mismatched_grid(small_grid):
    psi, a = uniform(small_grid, 1.0)
    with pytest.raises(GridMismatchError):
        State2D(small_grid, psi[:-1], a)
    with pytest.raises(GridMismatchError):
        energy_fields(small_grid, psi, a[:, :-1], 1.0)


def test_density_mean_examples(small_grid):
    psi, _ = uniform(small_grid, np.sqrt(3.2))
    assert density_mean(psi, small_grid) == pytest.approx(3.2, rel=1e-14)
    assert density_mean(np.zeros(small_grid.shape, complex), small_grid) == 0.0


def test_density_mean_linear_profile():
    # (1/pi) 2 pi c^2 int r^3 dr = c^2 / 2
    c = 1.3
    for n in (64, 256):
        grid = PolarGrid(RadialGrid(n), 8)
        psi = c * np.repeat(grid.radial.nodes[:, None], 8, axis=1).astype(complex)
        assert density_mean(psi, grid) == pytest.approx(c**2 / 2, rel=1.0 / n**2)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(-10, 10, allow_nan=False), seed=st.integers(0, 2**16))
def test_density_mean_is_quadratic(lam, seed):
    grid = PolarGrid(RadialGrid(12), 8)
    psi = smooth_field(grid, np.random.default_rng(seed))
    assert density_mean(lam * psi, grid) == pytest.approx(lam**2 * density_mean(psi, grid), rel=1e-12, abs=1e-300)


def test_constraint_project_examples(small_grid, rng):
    rho = 0.7
    psi, _ = uniform(small_grid, 2 * np.sqrt(rho))
    np.testing.assert_allclose(constraint_project(psi, rho, small_grid), np.sqrt(rho), rtol=1e-14)

    psi = smooth_field(small_grid, rng)
    same = constraint_project(psi, density_mean(psi, small_grid), small_grid)
    np.testing.assert_allclose(same, psi, rtol=1e-14)

    lin = 3.0 * np.repeat(small_grid.radial.nodes[:, None], small_grid.n_theta, axis=1).astype(complex)
    out = constraint_project(lin, rho, small_grid)
    assert density_mean(out, small_grid) == pytest.approx(rho, rel=1e-14)
    # parallel to the input, and sqrt(2 rho) r up to the quadrature error of int r^3
    np.testing.assert_allclose(out / lin, out[0, 0] / lin[0, 0], rtol=1e-14)
    np.testing.assert_allclose(out[:, 0].real, np.sqrt(2 * rho) * small_grid.radial.nodes, rtol=1e-3)


def test_constraint_project_rejects_zero(small_grid):
    with pytest.raises(DegenerateFieldError):
        constraint_project(np.zeros(small_grid.shape, complex), 1.0, small_grid)


@pytest.mark.parametrize("n, n_theta", [(8, 4), (33, 10), (200, 64)])
def test_residuals_vanish_on_exact_solution(n, n_theta):
    grid = PolarGrid(RadialGrid(n), n_theta)
    psi, a = uniform(grid, np.sqrt(2.5))
    rs, ra = el_residuals(State2D(grid, psi, a, mu=0.0), Params(0.0, 2.5))
    assert rs <= 1e-10 and ra <= 1e-10


def test_ampere_residual_for_uniform_state_in_field():
    # the current of psi = sqrt(rho) is -b r rho theta_hat; curl curl 0 = 0
    grid = PolarGrid(RadialGrid(256), 8)
    rho, b = 1.5, 0.9
    psi, a = uniform(grid, np.sqrt(rho))
    mu = b**2 * 0.5  # b^2 <r^2> with <r^2> = 1/2 on the disk
    rs, ra = el_residuals(State2D(grid, psi, a, mu=mu), Params(b, rho))
    expected = b * rho * np.sqrt(np.pi / 2)  # || b r rho || over the unit disk
    assert ra == pytest.approx(expected, rel=1e-4)
    assert rs > 0


def test_gradient_matches_finite_differences(rng):
    grid = PolarGrid(RadialGrid(24), 12)
    b = 1.3
    for _ in range(3):
        psi = 0.5 * smooth_field(grid, rng)
        a = 0.5 * smooth_field(grid, rng, complex_=False)
        dpsi = smooth_field(grid, rng)
        da = smooth_field(grid, rng, complex_=False)
        _, _, g_psi, g_a = energy_and_gradient(grid, psi, a, b)
        analytic = np.sum(g_psi.real * dpsi.real + g_psi.imag * dpsi.imag) + np.sum(g_a * da)
        eps = 1e-4
        fd = (energy_fields(grid, psi + eps * dpsi, a + eps * da, b)
              - energy_fields(grid, psi - eps * dpsi, a - eps * da, b)) / (2 * eps)
        assert abs(fd - analytic) / abs(analytic) < 1e-6


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**16), b=st.floats(0, 4))
def test_energy_non_negative(seed, b):
    grid = PolarGrid(RadialGrid(10), 8)
    r = np.random.default_rng(seed)
    psi = smooth_field(grid, r)
    a = smooth_field(grid, r, complex_=False)
    assert energy_fields(grid, psi, a, b) >= 0


def test_energy_zero_only_for_trivial_configuration(small_grid, rng):
    psi, a = uniform(small_grid, 1.0 + 0.5j)
    assert energy_fields(small_grid, psi, a, 0.0) == pytest.approx(0.0, abs=1e-14)
    assert energy_fields(small_grid, psi, a, 0.2) > 0
    assert energy_fields(small_grid, psi, a + 0.1 * smooth_field(small_grid, rng, complex_=False), 0.0) > 0
    assert energy_fields(small_grid, psi * np.exp(0.1j * small_grid.radial.nodes[:, None]), a, 0.0) > 0


@pytest.mark.parametrize("c", [1, 2, -1])
def test_gauge_shift_away_from_axis(c, rng):
    # A -> A + c/r with psi -> psi exp(-i c theta) leaves the energy unchanged
    # except for the axis value of B, which sees the flux line c/r puts on the axis
    grid = PolarGrid(RadialGrid(40), 16)
    psi = smooth_field(grid, rng, n_modes=2)
    a = smooth_field(grid, rng, complex_=False, n_modes=2)
    r = grid.radial.nodes[:, None]
    before = energy_parts(grid, psi, a, 0.7)
    after = energy_parts(grid, psi * np.exp(-1j * c * grid.theta[None, :]), a + c / r, 0.7)
    for key in ("magnetic", "kinetic_r", "kinetic_theta"):
        assert after[key] == pytest.approx(before[key], rel=1e-11)
    assert after["magnetic_axis"] > before["magnetic_axis"]


def test_state_csv_roundtrip(tmp_path, small_grid, rng):
    psi = smooth_field(small_grid, rng)
    a = smooth_field(small_grid, rng, complex_=False)
    path = write_state_csv(tmp_path / "s.csv", State2D(small_grid, psi, a))
    assert path.read_text().splitlines()[0] == "r,theta,re_psi,im_psi,a_theta"
    psi2, a2 = read_state_csv(path, small_grid)
    np.testing.assert_allclose(psi2, psi, rtol=1e-11, atol=1e-11)
    np.testing.assert_allclose(a2, a, rtol=1e-11, atol=1e-11)


def test_drop_nyquist_is_orthogonal_projector(small_grid, rng):
    f = smooth_field(small_grid, rng, n_modes=8)
    g = smooth_field(small_grid, rng, n_modes=8)
    pf = small_grid.drop_nyquist(f)
    np.testing.assert_allclose(small_grid.drop_nyquist(pf), pf, atol=1e-13)
    nyq = (-1.0) ** np.arange(small_grid.n_theta)
    assert np.max(np.abs(small_grid.drop_nyquist(nyq[None, :] * np.ones(small_grid.shape)))) < 1e-14
    # <P f, g> = <f, P g> under the uniform theta weights
    lhs = np.vdot(pf, g)
    rhs = np.vdot(f, small_grid.drop_nyquist(g))
    assert lhs == pytest.approx(rhs, rel=1e-12)
    # the spectral derivative is blind to the removed mode
    assert np.max(np.abs(small_grid.dtheta_op(nyq))) < 1e-12
