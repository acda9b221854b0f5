import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from axibreak.fields import PolarGrid, RadialGrid  # noqa: E402


@pytest.fixture
def small_grid():
    return PolarGrid(RadialGrid(48), 16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def smooth_field(grid, rng, n_modes=3, complex_=True):
    """Random band-limited field with a few angular modes and smooth radial profiles."""
    r = grid.radial.nodes[:, None]
    t = grid.theta[None, :]
    out = np.zeros(grid.shape, dtype=complex if complex_ else float)
    for k in range(-n_modes, n_modes + 1):
        coeffs = rng.normal(size=3) + (1j * rng.normal(size=3) if complex_ else 0)
        prof = coeffs[0] + coeffs[1] * r**2 + coeffs[2] * np.cos(np.pi * r)
        if complex_:
            out = out + prof * np.exp(1j * k * t)
        else:
            out = out + prof.real * np.cos(k * t + rng.uniform(0, 2 * np.pi))
    return out


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
