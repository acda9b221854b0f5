"""Axially symmetric states ``psi = R(r) exp(-i m theta)``, ``A = A(r) theta_hat``.

The radial profiles solve

    -(1/r)(r R')' + (m/r - A - b r)^2 R = mu R
    -d/dr[(1/r)(r A)'] = (m/r - A - b r) R^2

with ``R'(1) = 0``, ``B(1) = 0`` and ``2 int R^2 r dr = rho``.  The
discretisation is the one-dimensional restriction of :mod:`axibreak.fields`,
so a symmetric state embedded on a polar grid has exactly the same energy.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sps
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import spsolve

from .fields import Params, RadialGrid, fmt

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Iteration failed; ``residual`` is the last residual norm reached."""

    def __init__(self, message, residual=float("nan"), history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history or [])


@dataclass(frozen=True)
class SymmetricState:
    m: int
    params: Params
    grid: RadialGrid
    r_profile: np.ndarray
    a_profile: np.ndarray
    mu: float
    energy: float
    residuals: tuple[float, float] = (float("nan"), float("nan"))
    iterations: int = 0

    @property
    def density(self) -> float:
        return radial_density(self.grid, self.r_profile)

    def summary(self) -> dict:
        return {
            "m": self.m,
            "b": self.params.b,
            "rho": self.params.rho,
            "mu": self.mu,
            "G": self.energy,
            "residuals": {"schrodinger": self.residuals[0], "ampere": self.residuals[1]},
            "grid_n": self.grid.n,
        }

    def write(self, stem):
        """Write ``<stem>.csv`` (r, R, A) and ``<stem>.json`` (summary)."""
        import csv
        from pathlib import Path

        stem = Path(stem)
        with stem.with_suffix(".csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "R", "A"])
            for r, rr, aa in zip(self.grid.nodes, self.r_profile, self.a_profile):
                w.writerow([fmt(r), fmt(rr), fmt(aa)])
        stem.with_suffix(".json").write_text(json.dumps(_round_json(self.summary()), indent=2) + "\n")
        return stem


def _round_json(obj):
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_json(v) for v in obj]
    return obj


# --- discrete operators -------------------------------------------------


@dataclass(frozen=True)
class _Ops:
    """Sparse radial operators, in strong form (divided by node weights)."""

    grid: RadialGrid
    lap: sps.csr_matrix = field(init=False)  # -(1/r)(r f')'
    curlcurl: sps.csr_matrix = field(init=False)  # -d/dr[(1/r)(r f)']

    def __post_init__(self):
        g = self.grid
        n, h = g.n, g.h
        diff = sps.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / h
        wf = sps.diags(g.face_weights)
        winv = sps.diags(1.0 / g.node_weights)
        axis = sps.csr_matrix(([2.0 / g.nodes[0]], ([0], [0])), shape=(1, n))
        curl = sps.vstack([axis, sps.diags(1.0 / g.faces) @ diff @ sps.diags(g.nodes)])
        wb = sps.diags(g.field_weights)
        object.__setattr__(self, "lap", (winv @ diff.T @ wf @ diff).tocsr())
        object.__setattr__(self, "curlcurl", (winv @ curl.T @ wb @ curl).tocsr())


_OPS_CACHE: dict[int, _Ops] = {}


def _ops(grid: RadialGrid) -> _Ops:
    if grid.n not in _OPS_CACHE:
        _OPS_CACHE[grid.n] = _Ops(grid)
    return _OPS_CACHE[grid.n]


def radial_density(grid: RadialGrid, r_profile) -> float:
    return float(2.0 * np.sum(grid.node_weights * r_profile**2))


def radial_energy(m: int, b: float, grid: RadialGrid, r_profile, a_profile) -> float:
    """Energy of the symmetric state with the given profiles."""
    r, h = grid.nodes, grid.h
    dr = np.diff(r_profile) / h
    bind = induced_field_profile(grid, a_profile)
    u = m / r - a_profile - b * r
    total = (
        np.sum(grid.face_weights * dr**2)
        + np.sum(grid.field_weights * bind**2)
        + np.sum(grid.node_weights * u**2 * r_profile**2)
    )
    return float(2.0 * np.pi * total)


def induced_field_profile(grid: RadialGrid, a_profile) -> np.ndarray:
    """Induced field: the axis value followed by the interior faces."""
    inner = np.diff(grid.nodes * a_profile) / grid.h / grid.faces
    return np.concatenate([[2.0 * a_profile[0] / grid.nodes[0]], inner])


def radial_residuals(m, b, grid, r_profile, a_profile, mu):
    """Pointwise Schrodinger and Ampere residuals in strong form."""
    ops = _ops(grid)
    u = m / grid.nodes - a_profile - b * grid.nodes
    res_s = ops.lap @ r_profile + (u**2 - mu) * r_profile
    res_a = ops.curlcurl @ a_profile - u * r_profile**2
    return res_s, res_a


def radial_residual_norms(m, b, grid, r_profile, a_profile, mu) -> tuple[float, float]:
    """Disk L2 norms of the residuals (same norm as the two-dimensional ones)."""
    res_s, res_a = radial_residuals(m, b, grid, r_profile, a_profile, mu)
    w = 2.0 * np.pi * grid.node_weights
    return float(np.sqrt(np.sum(w * res_s**2))), float(np.sqrt(np.sum(w * res_a**2)))


# --- linear (Landau) limit ----------------------------------------------


def _landau_tridiagonal(m, b, grid):
    """Symmetric tridiagonal form of the linear operator ``W^-1/2 K W^-1/2``."""
    n, h = grid.n, grid.h
    w = grid.node_weights
    wf = grid.face_weights
    diag = np.zeros(n)
    diag[:-1] += wf / h**2
    diag[1:] += wf / h**2
    diag = diag / w + (m / grid.nodes - b * grid.nodes) ** 2
    off = -wf / h**2 / np.sqrt(w[:-1] * w[1:])
    return diag, off


def landau_mu(m: int, b: float, grid: RadialGrid | None = None) -> float:
    """Lowest eigenvalue of the linear problem in sector ``m`` (no induced field)."""
    grid = grid or RadialGrid()
    if b < 0:
        raise ValueError("b must be non-negative")
    diag, off = _landau_tridiagonal(m, b, grid)
    vals = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))
    return float(vals[0])


def landau_mode(m: int, b: float, grid: RadialGrid) -> tuple[float, np.ndarray]:
    """Lowest eigenpair; the profile is normalised to unit mean density."""
    diag, off = _landau_tridiagonal(m, b, grid)
    vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    prof = vecs[:, 0] / np.sqrt(grid.node_weights)
    prof /= np.sqrt(radial_density(grid, prof))
    if prof[np.argmax(np.abs(prof))] < 0:
        prof = -prof
    return float(vals[0]), prof


# --- nonlinear solve ----------------------------------------------------


def _newton(m, p: Params, grid: RadialGrid, r0, a0, mu0, tol, max_iter):
    ops = _ops(grid)
    n = grid.n
    r_nodes = grid.nodes
    w = grid.node_weights
    x = np.concatenate([r0, a0, [mu0]])

    def residual(x):
        rr, aa, mu = x[:n], x[n : 2 * n], x[-1]
        res_s, res_a = radial_residuals(m, p.b, grid, rr, aa, mu)
        return np.concatenate([res_s, res_a, [radial_density(grid, rr) - p.rho]])

    def norm(f):
        return float(np.max(np.abs(f)))

    f = residual(x)
    history = [norm(f)]
    for it in range(1, max_iter + 1):
        rr, aa = x[:n], x[n : 2 * n]
        u = m / r_nodes - aa - p.b * r_nodes
        jac = sps.bmat(
            [
                [ops.lap + sps.diags(u**2 - x[-1]), sps.diags(-2 * u * rr), sps.csr_matrix(-rr[:, None])],
                [sps.diags(-2 * u * rr), ops.curlcurl + sps.diags(rr**2), None],
                [sps.csr_matrix(4 * w * rr), None, None],
            ],
            format="csc",
        )
        dx = spsolve(jac, -f)
        if not np.all(np.isfinite(dx)):
            raise ConvergenceError("singular Newton system", history[-1], history)
        # damped step: backtrack on the residual max-norm
        step = 1.0
        while True:
            trial = x + step * dx
            f_trial = residual(trial)
            if norm(f_trial) < (1 - 1e-4 * step) * history[-1] or step < 1e-3:
                break
            step *= 0.5
        x, f = trial, f_trial
        history.append(norm(f))
        update = step * norm(dx)
        log.debug("newton m=%d it=%d |f|=%.3e |dx|=%.3e step=%.3g", m, it, history[-1], update, step)
        if update <= tol * max(1.0, norm(x)) and history[-1] < 1e-6:
            return x[:n], x[n : 2 * n], float(x[-1]), it
        if step < 1e-3 and it > 5 and history[-1] > 0.99 * history[-2]:
            break
    raise ConvergenceError(
        f"radial Newton did not converge for m={m}, b={p.b}, rho={p.rho}", history[-1], history
    )


def solve_symmetric(
    m: int,
    p: Params,
    grid: RadialGrid | None = None,
    init: SymmetricState | None = None,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> SymmetricState:
    """Solve the coupled radial problem for winding number ``m``.

    Newton's method on ``(R, A, mu)`` with the density constraint as the
    bordering row.  Without ``init`` the linear-limit eigenmode scaled to
    ``rho`` is the starting point; if that fails the density is ramped up
    from a small value with each converged state seeding the next.
    """
    grid = grid or RadialGrid()
    if m < 0:
        raise ValueError("negative winding numbers are equivalent by reflection; use m >= 0")
    if p.rho < 0:
        raise ValueError("rho must be non-negative")

    if p.rho == 0:
        mu_lin, _ = landau_mode(m, p.b, grid)
        zero = np.zeros(grid.n)
        return _finish(m, p, grid, zero, zero, mu_lin, 0)

    if init is not None and init.grid.n == grid.n and init.m == m:
        r0 = init.r_profile * np.sqrt(p.rho / init.density) if init.density > 0 else init.r_profile
        a0, mu0 = init.a_profile, init.mu
        try:
            return _finish(m, p, grid, *_newton(m, p, grid, r0, a0, mu0, tol, max_iter))
        except ConvergenceError:
            log.info("seeded solve failed for m=%d b=%g rho=%g; restarting", m, p.b, p.rho)

    mu_lin, mode = landau_mode(m, p.b, grid)
    try:
        return _finish(
            m, p, grid, *_newton(m, p, grid, np.sqrt(p.rho) * mode, np.zeros(grid.n), mu_lin, tol, max_iter)
        )
    except ConvergenceError:
        if p.rho <= 0.5:
            raise
    # density continuation
    state = None
    for rho in np.linspace(0.5, p.rho, int(np.ceil(p.rho / 0.5)) + 1):
        state = solve_symmetric(m, Params(p.b, float(rho)), grid, init=state, tol=tol, max_iter=max_iter)
    return state


def _finish(m, p, grid, r_profile, a_profile, mu, iterations) -> SymmetricState:
    if r_profile[np.argmax(np.abs(r_profile))] < 0:
        r_profile = -r_profile
    energy = radial_energy(m, p.b, grid, r_profile, a_profile)
    res = radial_residual_norms(m, p.b, grid, r_profile, a_profile, mu)
    return SymmetricState(m, p, grid, r_profile, a_profile, float(mu), energy, res, iterations)


class ScanEntry(NamedTuple):
    m: int
    energy: float
    error: str | None = None


def symmetric_energy_scan(p: Params, grid: RadialGrid | None = None, m_max: int = 2) -> list[ScanEntry]:
    """Energies of the symmetric branches ``m = 0 .. m_max``; failed solves carry a message."""
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    grid = grid or RadialGrid()
    out = []
    for m in range(m_max + 1):
        try:
            out.append(ScanEntry(m, solve_symmetric(m, p, grid).energy))
        except ConvergenceError as exc:
            out.append(ScanEntry(m, float("nan"), f"{exc} (last residual {exc.residual:.3e})"))
    return out


def ground_winding(scan: list[ScanEntry]) -> int:
    ok = [e for e in scan if e.error is None]
    return min(ok, key=lambda e: (e.energy, e.m)).m
