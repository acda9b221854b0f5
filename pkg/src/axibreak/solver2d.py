"""Constrained minimisation of the thermodynamic potential on the polar grid.

The density constraint is handled by working with an unnormalised field
``phi`` and evaluating the energy at ``psi = phi * sqrt(rho / N(phi))``; after
every accepted step the iterate is rescaled back onto the constraint
surface.  At such points the gradient is ``2 w (D^2 psi - mu psi)`` with
``mu`` the Rayleigh quotient, so descent is tangent to the constraint.

Two phases, both monotone in the energy:

1. preconditioned gradient flow with an adaptive step (start 1e-3, halve on
   an energy increase, double after 50 accepted steps, cap 0.1);
2. preconditioned L-BFGS with a backtracking line search until both
   Euler-Lagrange residual norms fall below the tolerance.

The preconditioner is the inverse of ``-Laplacian + sigma`` for ``psi`` (per
angular Fourier mode) and of ``curl curl + sigma`` for ``A``; both are banded
in ``r`` and factored once.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .fields import (
    Params,
    PolarGrid,
    State2D,
    constraint_project,
    density_mean_on,
    embed_symmetric,
    energy_and_gradient,
    energy_fields,
    rayleigh_mu,
    residual_fields,
    weighted_norm,
)
from .radial import ConvergenceError, SymmetricState, solve_symmetric

log = logging.getLogger(__name__)


class StepSizeError(ConvergenceError):
    """The line search could not decrease the energy any further."""


class TopologyError(ValueError):
    """The field is not in the class with a single nodal line."""


# --- seeds --------------------------------------------------------------


@dataclass(frozen=True)
class Seed2D:
    """Initial condition: ``symmetric``, ``mixed``, ``reduced`` or ``explicit``."""

    kind: str
    m: int = 0
    weight: float = 0.0
    point: object = None
    state: State2D | None = None

    @classmethod
    def symmetric(cls, m: int) -> Seed2D:
        return cls("symmetric", m=m)

    @classmethod
    def mixed(cls, weight: float = 0.05) -> Seed2D:
        """The ``m = 1`` state plus ``weight`` times the ``m = 0`` state."""
        return cls("mixed", m=1, weight=weight)

    @classmethod
    def reduced(cls, point) -> Seed2D:
        return cls("reduced", point=point)

    @classmethod
    def explicit(cls, state: State2D) -> Seed2D:
        return cls("explicit", state=state)


def initial_fields(seed: Seed2D, p: Params, grid: PolarGrid, radial_cache: dict | None = None):
    """``(psi, a)`` for ``seed``, projected onto the density constraint."""
    if seed.kind == "symmetric":
        st = _symmetric(seed.m, p, grid, radial_cache)
        psi, a = embed_symmetric(grid, seed.m, st.r_profile, st.a_profile)
    elif seed.kind == "mixed":
        s1 = _symmetric(1, p, grid, radial_cache)
        s0 = _symmetric(0, p, grid, radial_cache)
        psi1, a1 = embed_symmetric(grid, 1, s1.r_profile, s1.a_profile)
        psi0, a0 = embed_symmetric(grid, 0, s0.r_profile, s0.a_profile)
        psi = psi1 + seed.weight * psi0
        a = (1 - seed.weight) * a1 + seed.weight * a0
    elif seed.kind == "reduced":
        from .reduced import ansatz_fields

        psi, a = ansatz_fields(seed.point, grid.radial.nodes[:, None], grid.theta[None, :])
    elif seed.kind == "explicit":
        if seed.state.grid != grid:
            raise ValueError("explicit seed lives on a different grid")
        psi, a = seed.state.psi.copy(), seed.state.a.copy()
    else:
        raise ValueError(f"unknown seed kind {seed.kind!r}")
    psi = grid.drop_nyquist(np.asarray(psi, dtype=complex))
    if p.rho == 0:
        return np.zeros(grid.shape, complex), np.zeros(grid.shape)
    return constraint_project(psi, p.rho, grid), grid.drop_nyquist(np.asarray(a, dtype=float))


def _symmetric(m, p, grid, cache) -> SymmetricState:
    key = (m, p.b, p.rho, grid.radial.n)
    if cache is not None and key in cache:
        return cache[key]
    st = solve_symmetric(m, p, grid.radial)
    if cache is not None:
        cache[key] = st
    return st


def symmetric_state_2d(st: SymmetricState, grid: PolarGrid) -> State2D:
    psi, a = embed_symmetric(grid, st.m, st.r_profile, st.a_profile)
    return State2D(grid, psi, a, st.mu, energy_fields(grid, psi, a, st.params.b))


# --- preconditioner -----------------------------------------------------


class _Preconditioner:
    def __init__(self, grid: PolarGrid, sigma_psi: float, sigma_a: float):
        rg = grid.radial
        n, h = rg.n, rg.h
        wc = rg.node_weights * grid.dtheta
        wf = rg.face_weights * grid.dtheta
        wb = rg.field_weights * grid.dtheta
        k = np.fft.fftfreq(grid.n_theta, 1.0 / grid.n_theta)
        self.n_theta = grid.n_theta
        # psi: 2 [D^T W_f D + W_c (k^2/r^2 + sigma)]
        base = np.zeros(n)
        base[:-1] += wf / h**2
        base[1:] += wf / h**2
        off = -wf / h**2
        self._psi_factors = []
        for kk in k:
            ab = np.zeros((2, n))
            ab[0, 1:] = 2 * off
            ab[1] = 2 * (base + wc * (kk**2 / rg.nodes**2 + sigma_psi))
            self._psi_factors.append(cholesky_banded(ab))
        # A: 2 [C^T W_b C + W_c sigma] with C the discrete curl (axis row + faces)
        r = rg.nodes
        diag = np.zeros(n)
        diag[:-1] += wf * (r[:-1] / (h * rg.faces)) ** 2
        diag[1:] += wf * (r[1:] / (h * rg.faces)) ** 2
        diag[0] += wb[0] * (2 / r[0]) ** 2
        offa = -wf * r[:-1] * r[1:] / (h * rg.faces) ** 2
        ab = np.zeros((2, n))
        ab[0, 1:] = 2 * offa
        ab[1] = 2 * (diag + wc * sigma_a)
        self._a_factor = cholesky_banded(ab)

    def apply(self, g_psi, g_a):
        gh = np.fft.fft(g_psi, axis=1)
        out = np.empty_like(gh)
        for i, fac in enumerate(self._psi_factors):
            col = np.stack([gh[:, i].real, gh[:, i].imag], axis=1)
            sol = cho_solve_banded((fac, False), col)
            out[:, i] = sol[:, 0] + 1j * sol[:, 1]
        return np.fft.ifft(out, axis=1), cho_solve_banded((self._a_factor, False), g_a)


# --- minimisation -------------------------------------------------------


@dataclass
class FlowLog:
    """Per-step record: step, energy, Schrodinger and Ampere residuals, step size."""

    rows: list = field(default_factory=list)

    def add(self, step, energy, res_s, res_a, step_size):
        self.rows.append((step, energy, res_s, res_a, step_size))


def _dot(x, y):
    return float(np.sum(x[0].real * y[0].real + x[0].imag * y[0].imag) + np.sum(x[1] * y[1]))


class _Problem:
    def __init__(self, p: Params, grid: PolarGrid):
        self.p, self.grid = p, grid
        self.evals = 0

    def normalize(self, psi):
        return constraint_project(self.grid.drop_nyquist(psi), self.p.rho, self.grid)

    def evaluate(self, psi, a):
        """Energy and constrained gradient at the normalised point ``psi``."""
        self.evals += 1
        g, kin, g_psi, g_a = energy_and_gradient(self.grid, psi, a, self.p.b)
        mu = kin / (np.pi * self.p.rho)
        wc = self.grid.cell_weights
        drop = self.grid.drop_nyquist
        grad = (drop(g_psi - 2 * mu * wc * psi), drop(g_a))
        res = (
            weighted_norm(self.grid, grad[0] / (2 * wc)),
            weighted_norm(self.grid, grad[1] / (2 * wc)),
        )
        return g, grad, mu, res


def minimize_2d(
    seed: Seed2D,
    p: Params,
    grid: PolarGrid,
    tol: float = 1e-6,
    max_steps: int = 200_000,
    flow_steps: int = 200,
    memory: int = 20,
    history: FlowLog | None = None,
    orient: bool = True,
    radial_cache: dict | None = None,
) -> State2D:
    """Minimise the thermodynamic potential at fixed mean density from ``seed``.

    Returns a state whose Schrodinger and Ampere residual norms are at most
    ``tol``.  Raises :class:`StepSizeError` when the energy can no longer be
    decreased and :class:`ConvergenceError` after ``max_steps``; both carry
    the residual history.
    """
    psi, a = initial_fields(seed, p, grid, radial_cache)
    if p.rho == 0:
        return State2D(grid, psi, a, 0.0, energy_fields(grid, psi, a, p.b))
    prob = _Problem(p, grid)
    prec = _Preconditioner(grid, sigma_psi=1.0 + p.b**2, sigma_a=1.0 + p.rho)
    energy, grad, mu, res = prob.evaluate(psi, a)
    hist = history if history is not None else FlowLog()
    hist.add(0, energy, *res, 0.0)
    residual_history = [max(res)]
    slack = 64 * np.finfo(float).eps

    def converged():
        return max(res) <= tol

    step = 0
    tau, streak = 1e-3, 0
    # phase 1: preconditioned gradient flow
    while not converged() and step < min(flow_steps, max_steps):
        d = prec.apply(*grad)
        while True:
            psi_t = prob.normalize(psi - tau * d[0])
            a_t = a - tau * d[1]
            e_t, grad_t, mu_t, res_t = prob.evaluate(psi_t, a_t)
            if e_t <= energy + slack * abs(energy):
                break
            tau *= 0.5
            streak = 0
            if tau < 1e-12:
                raise StepSizeError("gradient flow step collapsed", max(res), residual_history)
        step += 1
        psi, a, energy, grad, mu, res = psi_t, a_t, e_t, grad_t, mu_t, res_t
        hist.add(step, energy, *res, tau)
        residual_history.append(max(res))
        streak += 1
        if streak >= 50:
            tau, streak = min(2 * tau, 0.1), 0

    # phase 2: preconditioned L-BFGS
    pairs: deque = deque(maxlen=memory)
    failures = 0
    while not converged():
        if step >= max_steps:
            raise ConvergenceError(f"no convergence in {max_steps} steps", max(res), residual_history)
        d = _two_loop(grad, pairs, prec)
        slope = _dot(grad, d)
        if slope >= 0:
            pairs.clear()
            d = prec.apply(*grad)
            d = (-d[0], -d[1])
            slope = _dot(grad, d)
        alpha = 1.0
        while True:
            psi_t = prob.normalize(psi + alpha * d[0])
            a_t = a + alpha * d[1]
            e_t, grad_t, mu_t, res_t = prob.evaluate(psi_t, a_t)
            if e_t <= energy + 1e-4 * alpha * slope + slack * abs(energy):
                break
            alpha *= 0.5
            if alpha < 1e-10:
                break
        if alpha < 1e-10:
            failures += 1
            pairs.clear()
            if failures > 3:
                raise StepSizeError(
                    f"line search failed at residual {max(res):.3e}", max(res), residual_history
                )
            continue
        failures = 0
        s = (psi_t - psi, a_t - a)
        y = (grad_t[0] - grad[0], grad_t[1] - grad[1])
        if _dot(s, y) > 1e-14 * math.sqrt(_dot(s, s) * _dot(y, y)):
            pairs.append((s, y))
        step += 1
        psi, a, energy, grad, mu, res = psi_t, a_t, e_t, grad_t, mu_t, res_t
        hist.add(step, energy, *res, alpha)
        residual_history.append(max(res))

    log.info("minimize_2d: %d steps, %d evaluations, G=%.12g, residuals=%s", step, prob.evals, energy, res)
    state = State2D(grid, psi, a, rayleigh_mu(grid, psi, a, p.b), energy)
    if orient:
        try:
            state = orient_state(state)
        except TopologyError:
            pass
    return state


def _two_loop(grad, pairs, prec):
    q = (grad[0].copy(), grad[1].copy())
    alphas = []
    for s, y in reversed(pairs):
        rho_i = 1.0 / _dot(y, s)
        al = rho_i * _dot(s, q)
        alphas.append((al, rho_i, s, y))
        q = (q[0] - al * y[0], q[1] - al * y[1])
    z = prec.apply(*q)
    if pairs:
        s, y = pairs[-1]
        py = prec.apply(*y)
        gamma = _dot(s, y) / _dot(y, py)
        z = (gamma * z[0], gamma * z[1])
    for al, rho_i, s, y in reversed(alphas):
        beta = rho_i * _dot(y, z)
        z = (z[0] + (al - beta) * s[0], z[1] + (al - beta) * s[1])
    return (-z[0], -z[1])


def residuals_2d(state: State2D, p: Params) -> tuple[float, float]:
    res_s, res_a = residual_fields(state.grid, state.psi, state.a, p.b, state.mu)
    return weighted_norm(state.grid, res_s), weighted_norm(state.grid, res_a)


# --- nodal structure ----------------------------------------------------


def phase_winding(state: State2D) -> int:
    """Winding number of ``psi`` around the outer ring, in the ``exp(-i m theta)`` convention.

    A symmetric state ``R(r) exp(-i m theta)`` returns ``m``.
    """
    ring = state.psi[-1]
    if np.min(np.abs(ring)) <= 1e-12 * max(np.max(np.abs(ring)), 1e-300):
        raise TopologyError("psi vanishes on the boundary ring; winding undefined")
    inc = np.angle(np.roll(ring, -1) / ring)
    return -int(round(np.sum(inc) / (2 * np.pi)))


def _zero_estimate(state: State2D):
    """Cartesian position of the zero of psi from a local linear fit."""
    grid = state.grid
    amp = np.abs(state.psi)
    j, k = np.unravel_index(np.argmin(amp), amp.shape)
    n, nt = grid.shape
    rows = range(max(j - 1, 0), min(j + 2, n))
    cols = [(k + dk) % nt for dk in (-1, 0, 1)]
    pts, vals = [], []
    for jj in rows:
        for kk in cols:
            r, t = grid.radial.nodes[jj], grid.theta[kk]
            pts.append((1.0, r * np.cos(t), r * np.sin(t)))
            vals.append(state.psi[jj, kk])
    if j == 0:
        # ring 0 surrounds the axis: include the opposite side as well
        for kk in ((k + nt // 2 + dk) % nt for dk in (-1, 0, 1)):
            r, t = grid.radial.nodes[0], grid.theta[kk]
            pts.append((1.0, r * np.cos(t), r * np.sin(t)))
            vals.append(state.psi[0, kk])
    mat = np.array(pts)
    coef, *_ = np.linalg.lstsq(mat, np.array(vals), rcond=None)
    c0, cx, cy = coef
    lin = np.array([[cx.real, cy.real], [cx.imag, cy.imag]])
    try:
        x, y = np.linalg.solve(lin, [-c0.real, -c0.imag])
    except np.linalg.LinAlgError:
        r, t = grid.radial.nodes[j], grid.theta[k]
        x, y = r * np.cos(t), r * np.sin(t)
    return float(x), float(y), j


def _axis_symmetric(state: State2D) -> bool:
    ring = np.abs(state.psi[0])
    return float(np.ptp(ring)) <= 1e-8 * max(float(np.max(np.abs(state.psi))), 1e-300)


def orient_state(state: State2D) -> State2D:
    """Rotate so the nodal point lies on ``theta = pi`` and fix the global phase.

    The phase is chosen so ``psi`` is real and positive on the outer ring at
    ``theta = 0``.  Symmetric states are returned unrotated.
    """
    if abs(phase_winding(state)) != 1:
        raise TopologyError("orientation needs a single nodal point")
    grid = state.grid
    psi, a = state.psi, state.a
    if not _axis_symmetric(state):
        x, y, _ = _zero_estimate(state)
        angle = np.pi - math.atan2(y, x)
        psi = grid.rotate(psi, angle)
        a = grid.rotate(a, angle)
    ref = psi[-1, 0]
    if abs(ref) > 0:
        psi = psi * (abs(ref) / ref)
    return replace(state, psi=psi, a=a)


def nodal_radius(state: State2D) -> float:
    """Distance of the nodal point from the axis.

    The state is rotated so the zero lies on the ``theta = pi`` ray, and the
    zero is located by a parabola through the three samples of ``|psi|^2``
    around its minimum along the diameter ``theta in {0, pi}``.
    """
    if abs(phase_winding(state)) != 1:
        raise TopologyError(f"boundary winding is {phase_winding(state)}, expected a single nodal line")
    if _axis_symmetric(state):
        return 0.0
    grid = state.grid
    st = orient_state(state)
    nt = grid.n_theta
    r = grid.radial.nodes
    xs = np.concatenate([-r[::-1], r])
    line = np.concatenate([np.abs(st.psi[::-1, nt // 2]) ** 2, np.abs(st.psi[:, 0]) ** 2])
    i = int(np.argmin(line))
    i = min(max(i, 1), len(xs) - 2)
    x0, x1, x2 = xs[i - 1 : i + 2]
    f0, f1, f2 = line[i - 1 : i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    ca = (x2 * (f1 - f0) + x1 * (f0 - f2) + x0 * (f2 - f1)) / denom
    cb = (x2**2 * (f0 - f1) + x1**2 * (f2 - f0) + x0**2 * (f1 - f2)) / denom
    xv = -cb / (2 * ca) if ca > 0 else xs[i]
    return float(abs(xv))


def state_energy(state: State2D, p: Params) -> float:
    return energy_fields(state.grid, state.psi, state.a, p.b)


def constraint_error(state: State2D, rho: float) -> float:
    return abs(density_mean_on(state.grid, state.psi) - rho)
