"""Continuation in ``rho`` along ``b = b*(rho)``: nodal-line radius and energy gap."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .critical import find_bstar
from .fields import Params, PolarGrid, RadialGrid, State2D, constraint_project, energy_fields, fmt
from .radial import ConvergenceError, solve_symmetric
from .solver2d import Seed2D, TopologyError, minimize_2d, nodal_radius, phase_winding, symmetric_state_2d

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepRow:
    rho: float
    bstar: float
    r_node: float
    g_gap: float
    converged: bool
    winding: int | None = None
    energy: float = float("nan")
    g_sym: float = float("nan")
    error: str | None = None


FIELDS = ("rho", "bstar", "r_node", "g_gap", "converged", "winding", "energy", "g_sym", "error")


def default_rho_grid() -> list[float]:
    """0.5 to 10 in steps of 0.25, refined to 0.05 on [2.2, 3.2]."""
    coarse = np.round(np.arange(0.5, 10.0 + 1e-9, 0.25), 10)
    fine = np.round(np.arange(2.2, 3.2 + 1e-9, 0.05), 10)
    return sorted(set(coarse.tolist()) | set(fine.tolist()))


def symmetric_reference(p: Params, grid: PolarGrid) -> tuple[float, float]:
    """Energies of the m=0 and m=1 states evaluated on the 2D grid."""
    out = []
    for m in (0, 1):
        st = symmetric_state_2d(solve_symmetric(m, p, grid.radial), grid)
        out.append(energy_fields(grid, st.psi, st.a, p.b))
    return out[0], out[1]


def sweep(
    rho_values,
    grid: PolarGrid | None = None,
    seed: Seed2D | None = None,
    tol: float = 1e-6,
    tol_b: float = 1e-9,
    bstar=None,
    symmetric_threshold: float | None = None,
    states: list | None = None,
) -> list[SweepRow]:
    """One row per ``rho``; failures are recorded and the sweep goes on.

    ``rho_values`` must be strictly monotone; a decreasing list gives the
    downward sweep used by :func:`hysteresis_deviation`.

    ``bstar`` maps ``rho`` to the field; by default it is ``find_bstar`` on
    the radial part of ``grid``, bisected finely enough that the two
    symmetric energies agree well below the residual tolerance.  Each row's
    minimisation starts from the previous row's state when that state is
    asymmetric, otherwise from ``seed``
    (a 5% ``m = 0`` admixture to the ``m = 1`` state by default), because a
    symmetric state is itself stationary and would never leave the axis.
    A nodal point closer to the axis than ``symmetric_threshold`` (half a
    radial cell by default) cannot be told apart from the symmetric state and
    is recorded as ``r_node = 0``.  Converged states are appended to
    ``states`` when given.
    """
    grid = grid or PolarGrid(RadialGrid(128), 64)
    seed = seed or Seed2D.mixed(0.05)
    bstar = bstar or (lambda r: find_bstar(r, grid.radial, tol_b))
    threshold = symmetric_threshold if symmetric_threshold is not None else grid.radial.h / 2
    rho_values = [float(r) for r in rho_values]
    steps = np.diff(rho_values)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("rho_values must be strictly increasing or strictly decreasing")
    rows: list[SweepRow] = []
    previous: State2D | None = None
    for rho in rho_values:
        try:
            b = float(bstar(rho))
            p = Params(b, rho)
            g0, g1 = symmetric_reference(p, grid)
            g_sym = min(g0, g1)
            if previous is not None:
                start = State2D(grid, constraint_project(previous.psi, rho, grid), previous.a)
                row_seed = Seed2D.explicit(start)
            else:
                row_seed = seed
            state = minimize_2d(row_seed, p, grid, tol=tol)
        except (ConvergenceError, ValueError) as exc:
            log.warning("sweep row rho=%g failed: %s", rho, exc)
            rows.append(SweepRow(rho, float("nan"), float("nan"), float("nan"), False, error=str(exc)))
            previous = None
            continue
        try:
            winding = phase_winding(state)
            r_node = nodal_radius(state) if abs(winding) == 1 else 0.0
            if r_node <= threshold:
                r_node = 0.0
        except TopologyError as exc:
            winding, r_node = None, float("nan")
            log.warning("rho=%g: %s", rho, exc)
        gap = (state.energy - g_sym) / rho
        rows.append(SweepRow(rho, b, r_node, gap, True, winding, state.energy, g_sym))
        if states is not None:
            states.append(state)
        previous = state if (winding == 1 and r_node > 0) else None
    return rows


@dataclass(frozen=True)
class Bifurcation:
    found: bool
    rho_c: float = float("nan")
    bracket: tuple[float, float] = (float("nan"), float("nan"))
    n_fit: int = 0


def locate_bifurcation(rows, detect: float = 1e-3, n_fit: int = 4) -> Bifurcation:
    """Onset estimated by extrapolating ``r_node^2`` linearly to zero.

    Near a pitchfork ``r_node ~ sqrt(rho - rho_c)``.  The first ``n_fit``
    rows on the branch (``r_node > detect``) are fitted; the bracket is the
    last off-branch ``rho`` and the first on-branch ``rho``.
    """
    ok = [r for r in rows if r.converged and not math.isnan(r.r_node)]
    branch_idx = next((i for i, r in enumerate(ok) if r.r_node > detect), None)
    if branch_idx is None:
        return Bifurcation(False)
    on = [r for r in ok[branch_idx:] if r.r_node > detect][:n_fit]
    lower = ok[branch_idx - 1].rho if branch_idx > 0 else float("nan")
    bracket = (lower, on[0].rho)
    if len(on) == 1:
        return Bifurcation(True, on[0].rho if math.isnan(lower) else 0.5 * (lower + on[0].rho), bracket, 1)
    x = np.array([r.rho for r in on])
    y = np.array([r.r_node**2 for r in on])
    slope, intercept = np.polyfit(x, y, 1)
    if slope <= 0:
        return Bifurcation(True, 0.5 * (bracket[0] + bracket[1]), bracket, len(on))
    return Bifurcation(True, float(-intercept / slope), bracket, len(on))


def hysteresis_deviation(rows_up, rows_down) -> float:
    """Difference of the onsets found sweeping up and down (recorded, not asserted)."""
    up = locate_bifurcation(rows_up)
    down = locate_bifurcation(sorted(rows_down, key=lambda r: r.rho))
    if not (up.found and down.found):
        return float("nan")
    return down.rho_c - up.rho_c


def write_sweep_csv(path, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELDS)
        for row in rows:
            vals = []
            for name in FIELDS:
                v = getattr(row, name)
                if isinstance(v, bool):
                    vals.append(int(v))
                elif isinstance(v, float):
                    vals.append(fmt(v))
                elif v is None:
                    vals.append("")
                else:
                    vals.append(v)
            w.writerow(vals)
    return path


def write_plot_scripts(directory, csv_name: str = "sweep.csv") -> list[Path]:
    """Gnuplot scripts for ``r_node(rho)`` and the scaled energy gap."""
    directory = Path(directory)
    common = (
        "set datafile separator ','\n"
        "set key off\n"
        "set xlabel 'rho'\n"
        "set xrange [0:10]\n"
        "set terminal pngcairo size 640,480\n"
    )
    node = directory / "fig_rnode.gp"
    node.write_text(
        common + "set output 'fig_rnode.png'\n"
        "set ylabel 'r_node / R'\n"
        "set yrange [0:1]\n"
        f"plot '{csv_name}' every ::1 using 1:($5==1 ? $3 : 1/0) with linespoints pt 7\n"
    )
    gap = directory / "fig_energy_gap.gp"
    gap.write_text(
        common + "set output 'fig_energy_gap.png'\n"
        "set ylabel '(1/rho) int (g - g_sym) dS'\n"
        "set xzeroaxis\n"
        f"plot '{csv_name}' every ::1 using 1:($5==1 ? $4 : 1/0) with linespoints pt 7\n"
    )
    return [node, gap]
