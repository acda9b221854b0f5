"""Field ``b*(rho)`` at which the ``m = 0`` and ``m = 1`` symmetric branches tie."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

from .fields import Params, RadialGrid, fmt
from .radial import SymmetricState, solve_symmetric

FIT_COEFFS = (1.924, 0.171, 0.00104, -0.000036)
BRACKET = (1.5, 4.5)


class BracketError(ValueError):
    """The energy difference does not change sign on the bracket."""


def fit_bstar(rho: float) -> float:
    """Cubic fit ``1.924 + 0.171 rho + 0.00104 rho^2 - 0.000036 rho^3``, valid for ``0 <= rho <= 10``."""
    if not 0 <= rho <= 10:
        warnings.warn(f"rho={rho} is outside the fit range [0, 10]", stacklevel=2)
    c0, c1, c2, c3 = FIT_COEFFS
    return c0 + rho * (c1 + rho * (c2 + rho * c3))


@dataclass
class _Branches:
    """Converged m=0 and m=1 states at one field, kept as continuation seeds."""

    b: float
    s0: SymmetricState
    s1: SymmetricState

    @property
    def gap(self) -> float:
        if self.s0.params.rho == 0:
            # G / (pi rho) -> mu as rho -> 0
            return self.s0.mu - self.s1.mu
        return self.s0.energy - self.s1.energy


def energy_gap(rho: float, b: float, grid: RadialGrid, seeds: _Branches | None = None) -> _Branches:
    p = Params(b, rho)
    s0 = solve_symmetric(0, p, grid, init=seeds.s0 if seeds else None)
    s1 = solve_symmetric(1, p, grid, init=seeds.s1 if seeds else None)
    return _Branches(b, s0, s1)


def find_bstar(rho: float, grid: RadialGrid | None = None, tol_b: float = 1e-4, bracket=BRACKET) -> float:
    """Bisect ``G0(b) - G1(b)`` to width ``tol_b`` and return the bracket midpoint.

    Each solve is seeded from the converged states at the nearer bracket end.
    Raises :class:`BracketError` if the gap does not change sign on
    ``bracket`` or is not increasing across the final bracket.
    """
    grid = grid or RadialGrid()
    if rho < 0:
        raise ValueError("rho must be non-negative")
    if tol_b <= 0:
        raise ValueError("tol_b must be positive")
    if rho > 10:
        warnings.warn(f"rho={rho} is outside the validated range [0, 10]", stacklevel=2)
    lo = energy_gap(rho, bracket[0], grid)
    hi = energy_gap(rho, bracket[1], grid)
    if not (lo.gap < 0 < hi.gap):
        raise BracketError(f"G0 - G1 = {lo.gap:.3g}, {hi.gap:.3g} at b = {bracket}: no sign change")
    while hi.b - lo.b > tol_b:
        mid_b = 0.5 * (lo.b + hi.b)
        mid = energy_gap(rho, mid_b, grid, seeds=lo if mid_b - lo.b <= hi.b - mid_b else hi)
        if mid.gap < 0:
            lo = mid
        else:
            hi = mid
    centre = energy_gap(rho, 0.5 * (lo.b + hi.b), grid, seeds=lo)
    if not (lo.gap <= centre.gap <= hi.gap):
        raise BracketError(f"G0 - G1 is not monotone on the final bracket [{lo.b}, {hi.b}]")
    return 0.5 * (lo.b + hi.b)


@dataclass(frozen=True)
class CriticalRow:
    rho: float
    bstar_numeric: float
    bstar_fit: float

    @property
    def rel_err(self) -> float:
        return (self.bstar_numeric - self.bstar_fit) / self.bstar_fit


def critical_table(rhos, grid: RadialGrid | None = None, tol_b: float = 1e-4, jobs: int = 1) -> list[CriticalRow]:
    """``b*`` at each ``rho``; rows come back in input order whatever ``jobs`` is."""
    grid = grid or RadialGrid()
    rhos = list(rhos)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            values = list(pool.map(find_bstar, rhos, [grid] * len(rhos), [tol_b] * len(rhos)))
    else:
        values = [find_bstar(r, grid, tol_b) for r in rhos]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return [CriticalRow(r, v, fit_bstar(r)) for r, v in zip(rhos, values)]


def write_critical_csv(path, rows: list[CriticalRow]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rho", "bstar_numeric", "bstar_fit", "rel_err"])
        for row in rows:
            w.writerow([fmt(row.rho), fmt(row.bstar_numeric), fmt(row.bstar_fit), fmt(row.rel_err)])
    return path
