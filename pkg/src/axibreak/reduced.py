"""Four-parameter variational model.

    psi = p + q r (1 - r/2) exp(-i theta)
    A_theta = a0 (r - 2 r^2/3) + a1 (r^2 - 3 r^3/4) cos(theta)

Both ``psi`` basis functions have ``d/dr = 0`` at ``r = 1`` and both gauge
basis functions give ``B(1) = 0`` (``B = 2 a0 (1 - r) + 3 a1 (1 - r) r cos(theta)``),
so every point of the family satisfies the boundary conditions.

The energy is a polynomial in ``(p, q, a0, a1, b)``; its coefficients below
were obtained by exact symbolic integration over the unit disk and are
checked against direct quadrature in the test suite.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import optimize

from .fields import Params, fmt

# G / pi = sum coeff * p^i q^j a0^k a1^l b^m
ENERGY_COEFFS: dict[tuple[int, int, int, int, int], Fraction] = {
    (0, 0, 0, 2, 0): Fraction(3, 20),
    (0, 0, 2, 0, 0): Fraction(2, 3),
    (0, 2, 0, 0, 0): Fraction(5, 8),
    (0, 2, 0, 0, 1): Fraction(-11, 30),
    (0, 2, 0, 0, 2): Fraction(37, 336),
    (0, 2, 0, 2, 0): Fraction(629, 126720),
    (0, 2, 1, 0, 0): Fraction(-23, 126),
    (0, 2, 1, 0, 1): Fraction(149, 1512),
    (0, 2, 2, 0, 0): Fraction(149, 6480),
    (1, 1, 0, 1, 0): Fraction(-1, 8),
    (1, 1, 0, 1, 1): Fraction(47, 336),
    (1, 1, 1, 1, 0): Fraction(65, 1008),
    (2, 0, 0, 0, 2): Fraction(1, 2),
    (2, 0, 0, 2, 0): Fraction(61, 2688),
    (2, 0, 1, 0, 1): Fraction(7, 15),
    (2, 0, 2, 0, 0): Fraction(31, 270),
}
Q_NORM = Fraction(11, 60)  # (1/pi) int |r (1 - r/2)|^2 dS

_EXP = np.array(list(ENERGY_COEFFS), dtype=int)
_COEF = np.array([float(c) for c in ENERGY_COEFFS.values()])


@dataclass(frozen=True)
class ReducedPoint:
    p: float
    q: float
    a0: float = 0.0
    a1: float = 0.0
    energy: float = float("nan")

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.p, self.q, self.a0, self.a1])


def _energy_coords(x, b) -> float:
    v = np.append(np.asarray(x, dtype=float), b)
    return float(math.pi * np.sum(_COEF * np.prod(v**_EXP, axis=1)))


def _gradient_coords(x, b) -> np.ndarray:
    v = np.append(np.asarray(x, dtype=float), b)
    out = np.zeros(4)
    for i in range(4):
        e = _EXP.copy()
        c = _COEF * e[:, i]
        e[:, i] = np.maximum(e[:, i] - 1, 0)
        out[i] = np.sum(c * np.prod(v**e, axis=1))
    return math.pi * out


def reduced_energy(pt: ReducedPoint, p: Params) -> float:
    """Closed-form energy of the ansatz."""
    return _energy_coords(pt.coords, p.b)


def ansatz_fields(pt: ReducedPoint, r, theta):
    """``psi`` and ``A_theta`` of the ansatz on broadcastable ``r``, ``theta``."""
    psi = pt.p + pt.q * r * (1 - r / 2) * np.exp(-1j * theta)
    a = pt.a0 * (r - 2 * r**2 / 3) + pt.a1 * (r**2 - 3 * r**3 / 4) * np.cos(theta)
    return psi, a


def reduced_energy_quadrature(pt: ReducedPoint, p: Params, n_r: int = 16, n_theta: int = 16) -> float:
    """Energy of the ansatz by Gauss-Legendre (r) x rectangle (theta) quadrature."""
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (x + 1)[:, None]
    wr = 0.5 * w[:, None]
    theta = 2 * np.pi * np.arange(n_theta)[None, :] / n_theta
    c = np.cos(theta)
    e = np.exp(-1j * theta)
    f = r * (1 - r / 2)
    psi = pt.p + pt.q * f * e
    dpsi_dr = pt.q * (1 - r) * e
    dpsi_dth = -1j * pt.q * f * e
    a = pt.a0 * (r - 2 * r**2 / 3) + pt.a1 * (r**2 - 3 * r**3 / 4) * c
    bind = 2 * pt.a0 * (1 - r) + 3 * pt.a1 * r * (1 - r) * c
    cov = 1j * dpsi_dth / r - (a + p.b * r) * psi
    g = bind**2 + np.abs(dpsi_dr) ** 2 + np.abs(cov) ** 2
    return float(np.sum(wr * r * g) * 2 * np.pi / n_theta)


def reduced_constraint(pt: ReducedPoint) -> float:
    """Mean density ``p^2 + (11/60) q^2`` of the ansatz."""
    return pt.p**2 + float(Q_NORM) * pt.q**2


# --- stationary points on the constraint surface ------------------------


def _from_angle(y, rho):
    phi, a0, a1 = y
    return np.array([math.sqrt(rho) * math.cos(phi), math.sqrt(rho / float(Q_NORM)) * math.sin(phi), a0, a1])


def _angle_gradient(y, rho, b):
    x = _from_angle(y, rho)
    g = _gradient_coords(x, b)
    dphi = g[0] * -math.sqrt(rho) * math.sin(y[0]) + g[1] * math.sqrt(rho / float(Q_NORM)) * math.cos(y[0])
    return np.array([dphi, g[2], g[3]])


def _fd_hessian(y, rho, b, eps=1e-6):
    hess = np.zeros((3, 3))
    for i in range(3):
        d = np.zeros(3)
        d[i] = eps
        hess[:, i] = (_angle_gradient(y + d, rho, b) - _angle_gradient(y - d, rho, b)) / (2 * eps)
    return 0.5 * (hess + hess.T)


def _canonical(x):
    p, q, a0, a1 = x
    # (p, q, a1) ~ (-p, -q, a1) [global phase] ~ (p, -q, -a1) [theta -> theta + pi]
    sign = np.sign(p) * np.sign(q) if p != 0 and q != 0 else 1.0
    return np.array([abs(p), abs(q), a0, a1 * sign])


def default_seeds(rho: float) -> list[ReducedPoint]:
    """Sixteen lattice seeds in (phi, a0, a1) mapped onto the constraint surface."""
    seeds = []
    for phi in (0.0, 0.5, 1.0, math.pi / 2):
        for a0 in (-0.5, 0.5):
            for a1 in (-0.5, 0.5):
                p_, q_, _, _ = _from_angle((phi, a0, a1), rho)
                seeds.append(ReducedPoint(float(p_), float(q_), a0, a1))
    return seeds


@dataclass(frozen=True)
class StationaryPoint:
    point: ReducedPoint
    kind: str  # "minimum" or "saddle"
    hessian_eigenvalues: tuple[float, ...]

    def __iter__(self):
        return iter((self.point, self.kind))


class SeedFailure(RuntimeError):
    pass


def reduced_minimize(p: Params, seeds: list[ReducedPoint] | None = None, failures: list | None = None):
    """Stationary points of the ansatz energy restricted to fixed density.

    Each seed is driven to a zero of the constrained gradient (so saddles are
    found as well as minima) and classified by the eigenvalues of the
    finite-difference Hessian in ``(phi, a0, a1)`` where
    ``p = sqrt(rho) cos(phi)`` and ``q = sqrt(60 rho / 11) sin(phi)``.
    Seeds that fail are appended to ``failures`` when given.
    """
    rho, b = p.rho, p.b
    if rho <= 0:
        raise ValueError("rho must be positive for the constrained reduced model")
    seeds = default_seeds(rho) if seeds is None else seeds
    found: list[StationaryPoint] = []
    for seed in seeds:
        if abs(reduced_constraint(seed) - rho) > 1e-8 * max(1.0, rho):
            raise ValueError(f"seed {seed} violates the density constraint")
        phi0 = math.atan2(seed.q * math.sqrt(float(Q_NORM)), seed.p)
        y0 = np.array([phi0, seed.a0, seed.a1])
        sol = optimize.root(
            _angle_gradient, y0, args=(rho, b), jac=lambda y, *a: _fd_hessian(y, *a), method="hybr", tol=1e-13
        )
        if not sol.success or np.max(np.abs(_angle_gradient(sol.x, rho, b))) > 1e-8:
            if failures is not None:
                failures.append((seed, sol.message))
            continue
        y = sol.x
        x = _canonical(_from_angle(y, rho))
        # snap numerically-symmetric points onto the symmetric families
        x[np.abs(x) < 1e-10] = 0.0
        if x[1] == 0.0:
            x[3] = 0.0 if abs(x[3]) < 1e-8 else x[3]
        eig = np.linalg.eigvalsh(_fd_hessian(y, rho, b))
        kind = "minimum" if np.all(eig > 0) else "saddle"
        pt = ReducedPoint(*map(float, x), energy=_energy_coords(x, b))
        if not any(np.allclose(pt.coords, s.point.coords, atol=1e-7) for s in found):
            found.append(StationaryPoint(pt, kind, tuple(float(v) for v in eig)))
    found.sort(key=lambda s: (round(s.point.energy, 12), tuple(s.point.coords)))
    return found


def optimal_a0(p: Params, amplitude: float | None = None) -> float:
    """Minimiser over ``a0`` at ``q = a1 = 0`` (the energy is quadratic in ``a0``)."""
    amp = math.sqrt(p.rho) if amplitude is None else amplitude
    # G/pi = 2/3 a0^2 + 31/270 p^2 a0^2 + 7/15 p^2 b a0 + ...
    return -(7 / 15) * amp**2 * p.b / (2 * (2 / 3 + (31 / 270) * amp**2))


def symmetric_reduced(p: Params, m: int) -> ReducedPoint:
    """Best ansatz point in the pure ``m = 0`` (``q = 0``) or ``m = 1`` (``p = 0``) family."""
    if m == 0:
        amp = math.sqrt(p.rho)
        x = (amp, 0.0, optimal_a0(p, amp), 0.0)
    elif m == 1:
        q = math.sqrt(p.rho / float(Q_NORM))
        quad = 2 / 3 + (149 / 6480) * q**2
        lin = (-23 / 126 + (149 / 1512) * p.b) * q**2
        x = (0.0, q, -lin / (2 * quad), 0.0)
    else:
        raise ValueError("the ansatz only contains m = 0 and m = 1")
    return ReducedPoint(*map(float, x), energy=_energy_coords(x, p.b))


def reduced_bstar(rho: float, bracket=(1.0, 6.0)) -> float:
    """Field where the ansatz gives equal energy to its two symmetric families."""
    def gap(b):
        return symmetric_reduced(Params(b, rho), 0).energy - symmetric_reduced(Params(b, rho), 1).energy

    return optimize.brentq(gap, *bracket, xtol=1e-12)


def landscape(p: Params, phis, a0s, a1s) -> list[tuple[float, float, float, float]]:
    rows = []
    for phi in phis:
        for a0 in a0s:
            for a1 in a1s:
                rows.append((phi, a0, a1, _energy_coords(_from_angle((phi, a0, a1), p.rho), p.b)))
    return rows


def write_landscape_csv(path, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi", "a0", "a1", "G"])
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_stationary_json(path, points: list[StationaryPoint]) -> Path:
    path = Path(path)
    data = []
    for s in points:
        d = {k: float(fmt(v)) for k, v in asdict(s.point).items()}
        d["kind"] = s.kind
        d["hessian_eigenvalues"] = [float(fmt(v)) for v in s.hessian_eigenvalues]
        data.append(d)
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path
