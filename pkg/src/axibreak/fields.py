"""Grids, field containers and the discrete thermodynamic potential.

Fields live on a cell-centred polar grid: ``psi`` and ``a`` (the azimuthal
component of the induced vector potential) are sampled at radii
``r_j = (j + 1/2) / n`` and angles ``theta_k = 2 pi k / n_theta``.  Radial
derivatives and the induced field ``B = (1/r) d(r A)/dr`` are evaluated on the
interior cell faces ``r = k / n``; the face at ``r = 1`` is fixed by the
boundary conditions (``d psi/dr = 0`` and ``B = 0``).  On the axis ``B`` is
taken from regularity, ``B(0) = 2 A(r_0) / r_0``, with the product-trapezoid
weight ``h^2/6``; without it ``A = c/r`` (a flux line on the axis) would cost
no magnetic energy.  Angular derivatives are spectral.

The discrete energy is a sum of squares, so its exact gradient is available
and the Euler-Lagrange residuals are that gradient divided by the quadrature
weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

ANGULAR_DERIVATIVE = "spectral-fft"
RADIAL_DERIVATIVE = "finite-volume-2nd-order"


class GridMismatchError(ValueError):
    """Raised when arrays do not match the grid they are evaluated on."""


class DegenerateFieldError(ValueError):
    """Raised when a field carries no density and cannot be rescaled."""


@dataclass(frozen=True)
class Params:
    """External field ``b`` and mean density ``rho``."""

    b: float
    rho: float

    def __post_init__(self):
        if not (np.isfinite(self.b) and np.isfinite(self.rho)):
            raise ValueError("b and rho must be finite")
        if self.b < 0:
            raise ValueError(f"b must be non-negative, got {self.b}")
        if self.rho < 0:
            raise ValueError(f"rho must be non-negative, got {self.rho}")


@dataclass(frozen=True)
class RadialGrid:
    n: int = 512

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("radial grid needs at least 2 points")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) / self.n

    @cached_property
    def faces(self) -> np.ndarray:
        """Interior faces ``k/n`` for ``k = 1 .. n-1``."""
        return np.arange(1, self.n) / self.n

    @cached_property
    def node_weights(self) -> np.ndarray:
        """Midpoint weights ``h r_j`` for ``int_0^1 f r dr``."""
        return self.h * self.nodes

    @cached_property
    def face_weights(self) -> np.ndarray:
        """Trapezoid weights ``h r_k`` on interior faces."""
        return self.h * self.faces

    @cached_property
    def field_weights(self) -> np.ndarray:
        """Weights for ``B``: the axis value first, then the interior faces."""
        return np.concatenate([[self.h**2 / 6.0], self.face_weights])


@dataclass(frozen=True)
class PolarGrid:
    radial: RadialGrid
    n_theta: int = 64

    def __post_init__(self):
        if self.n_theta < 4 or self.n_theta % 2:
            raise ValueError(f"n_theta must be even and >= 4, got {self.n_theta}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.radial.n, self.n_theta)

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @cached_property
    def theta(self) -> np.ndarray:
        return self.dtheta * np.arange(self.n_theta)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n_theta, 1.0 / self.n_theta)
        k[self.n_theta // 2] = 0.0  # Nyquist mode has no odd derivative
        return k

    @cached_property
    def cell_weights(self) -> np.ndarray:
        """Area weights at nodes, shape ``(n, 1)``, broadcasting over theta."""
        return (self.radial.node_weights * self.dtheta)[:, None]

    @cached_property
    def face_weights(self) -> np.ndarray:
        return (self.radial.face_weights * self.dtheta)[:, None]

    @cached_property
    def field_weights(self) -> np.ndarray:
        return (self.radial.field_weights * self.dtheta)[:, None]

    def dtheta_op(self, f: np.ndarray) -> np.ndarray:
        """Spectral d/dtheta along the last axis."""
        return np.fft.ifft(1j * self.wavenumbers * np.fft.fft(f, axis=-1), axis=-1)

    def drop_nyquist(self, f: np.ndarray) -> np.ndarray:
        """Remove the ``k = n_theta/2`` Fourier mode along the last axis.

        The spectral derivative cannot see that mode, so a field carrying it
        would oscillate from ray to ray at no angular cost.  Discrete states
        live in the complement, which is orthogonal under the uniform theta
        weights.
        """
        nyq = (-1.0) ** np.arange(self.n_theta)
        coeff = np.mean(f * nyq, axis=-1, keepdims=True)
        return f - coeff * nyq

    def rotate(self, f: np.ndarray, angle: float) -> np.ndarray:
        """Return ``f(theta - angle)`` by Fourier phase shift (exact when band-limited)."""
        k = np.fft.fftfreq(self.n_theta, 1.0 / self.n_theta)
        shifted = np.fft.ifft(np.fft.fft(f, axis=-1) * np.exp(-1j * k * angle), axis=-1)
        return shifted if np.iscomplexobj(f) else shifted.real


@dataclass(frozen=True)
class State2D:
    """A ``(psi, A_theta)`` pair on a polar grid with its multiplier and energy.

    ``psi`` is complex and ``a`` real, both of shape ``grid.shape``.  Only the
    azimuthal component of the induced potential is stored, so ``A_r = 0``
    holds by construction.
    """

    grid: PolarGrid
    psi: np.ndarray
    a: np.ndarray
    mu: float = float("nan")
    energy: float = float("nan")

    def __post_init__(self):
        check_shapes(self.grid, self.psi, self.a)


def check_shapes(grid: PolarGrid, psi: np.ndarray, a: np.ndarray | None = None):
    if psi.shape != grid.shape:
        raise GridMismatchError(f"psi has shape {psi.shape}, grid is {grid.shape}")
    if a is not None and a.shape != grid.shape:
        raise GridMismatchError(f"a has shape {a.shape}, grid is {grid.shape}")


def _radial_diff(grid: PolarGrid, f):
    return (f[1:] - f[:-1]) / grid.radial.h


def _radial_diff_adjoint(grid: PolarGrid, q):
    """Transpose of ``_radial_diff``."""
    h = grid.radial.h
    out = np.zeros((q.shape[0] + 1,) + q.shape[1:], dtype=q.dtype)
    out[:-1] -= q / h
    out[1:] += q / h
    return out


def induced_field(grid: PolarGrid, a: np.ndarray) -> np.ndarray:
    """``B = (1/r) d(r A)/dr``: axis value, then the interior faces."""
    r = grid.radial.nodes[:, None]
    axis = 2.0 * a[:1] / r[0]
    return np.concatenate([axis, _radial_diff(grid, r * a) / grid.radial.faces[:, None]])


def _curl_adjoint(grid: PolarGrid, q):
    r = grid.radial.nodes[:, None]
    out = r * _radial_diff_adjoint(grid, q[1:] / grid.radial.faces[:, None])
    out[0] += 2.0 * q[0] / r[0]
    return out


def covariant_theta(grid: PolarGrid, psi, a, b):
    """Azimuthal part of ``(i grad - A - b r theta_hat) psi`` at the nodes."""
    r = grid.radial.nodes[:, None]
    return 1j * grid.dtheta_op(psi) / r - (a + b * r) * psi


def _covariant_theta_adjoint(grid: PolarGrid, v, a, b):
    # the operator is self-adjoint ring by ring
    return covariant_theta(grid, v, a, b)


def energy_parts(grid: PolarGrid, psi, a, b) -> dict[str, float]:
    """Magnetic, radial-kinetic and azimuthal-kinetic parts of the potential."""
    check_shapes(grid, psi, a)
    wf, wc, wb = grid.face_weights, grid.cell_weights, grid.field_weights
    dpsi = _radial_diff(grid, psi)
    bind = induced_field(grid, a)
    v = covariant_theta(grid, psi, a, b)
    return {
        "magnetic_axis": float(np.sum(wb[:1] * bind[:1] ** 2)),
        "magnetic": float(np.sum(wb[1:] * bind[1:] ** 2)),
        "kinetic_r": float(np.sum(wf * (dpsi.real**2 + dpsi.imag**2))),
        "kinetic_theta": float(np.sum(wc * (v.real**2 + v.imag**2))),
    }


def energy_fields(grid: PolarGrid, psi, a, b) -> float:
    return sum(energy_parts(grid, psi, a, b).values())


def energy_total(state: State2D, p: Params) -> float:
    """Quadrature of ``|curl A|^2 + |(i grad - A - b r theta_hat) psi|^2`` over the disk."""
    return energy_fields(state.grid, state.psi, state.a, p.b)


def energy_and_gradient(grid: PolarGrid, psi, a, b):
    """Energy, gradient w.r.t. ``psi`` and gradient w.r.t. ``a``.

    The ``psi`` gradient is packed as ``dG/dRe + i dG/dIm``.  Also returns the
    kinetic part, which the constrained flow uses for the Rayleigh quotient.
    """
    wf, wc, wb = grid.face_weights, grid.cell_weights, grid.field_weights
    dpsi = _radial_diff(grid, psi)
    bind = induced_field(grid, a)
    v = covariant_theta(grid, psi, a, b)
    kin = np.sum(wf * (dpsi.real**2 + dpsi.imag**2)) + np.sum(wc * (v.real**2 + v.imag**2))
    mag = np.sum(wb * bind**2)
    g_psi = 2.0 * _radial_diff_adjoint(grid, wf * dpsi)
    g_psi += 2.0 * _covariant_theta_adjoint(grid, wc * v, a, b)
    g_a = 2.0 * _curl_adjoint(grid, wb * bind) - 2.0 * wc * np.real(np.conj(psi) * v)
    return float(kin + mag), float(kin), g_psi, g_a


def density_mean_on(grid: PolarGrid, psi: np.ndarray) -> float:
    check_shapes(grid, psi)
    return float(np.sum(grid.cell_weights * np.abs(psi) ** 2) / np.pi)


def density_mean(psi: np.ndarray, grid: PolarGrid) -> float:
    """Mean density ``(1/pi) int |psi|^2 dS``."""
    return density_mean_on(grid, psi)


def constraint_project(psi: np.ndarray, rho: float, grid: PolarGrid) -> np.ndarray:
    """Rescale ``psi`` globally so that its mean density equals ``rho``."""
    n = density_mean_on(grid, psi)
    if not n > 0:
        raise DegenerateFieldError("cannot rescale a field with zero density")
    return psi * np.sqrt(rho / n)


def rayleigh_mu(grid: PolarGrid, psi, a, b) -> float:
    """``int conj(psi) D^2 psi / int |psi|^2``, i.e. the kinetic energy per particle."""
    parts = energy_parts(grid, psi, a, b)
    norm = np.sum(grid.cell_weights * np.abs(psi) ** 2)
    if norm == 0:
        return 0.0
    return (parts["kinetic_r"] + parts["kinetic_theta"]) / float(norm)


def residual_fields(grid: PolarGrid, psi, a, b, mu):
    """Pointwise discrete residuals of the Schrodinger and Ampere equations.

    Both are projected off the Nyquist mode, which is not a discrete unknown.
    """
    _, _, g_psi, g_a = energy_and_gradient(grid, psi, a, b)
    wc = grid.cell_weights
    return grid.drop_nyquist(g_psi / (2.0 * wc) - mu * psi), grid.drop_nyquist(g_a / (2.0 * wc))


def weighted_norm(grid: PolarGrid, f) -> float:
    return float(np.sqrt(np.sum(grid.cell_weights * np.abs(f) ** 2)))


def el_residuals(state: State2D, p: Params) -> tuple[float, float]:
    """L2 norms of the Schrodinger and Ampere residuals of ``state``."""
    res_s, res_a = residual_fields(state.grid, state.psi, state.a, p.b, state.mu)
    return weighted_norm(state.grid, res_s), weighted_norm(state.grid, res_a)


def embed_symmetric(grid: PolarGrid, m: int, r_profile, a_profile):
    """Fields ``R(r) exp(-i m theta)`` and ``A(r)`` sampled on ``grid``."""
    if len(r_profile) != grid.radial.n or len(a_profile) != grid.radial.n:
        raise GridMismatchError("profile length does not match the radial grid")
    phase = np.exp(-1j * m * grid.theta)[None, :]
    psi = np.asarray(r_profile)[:, None] * phase
    a = np.repeat(np.asarray(a_profile, dtype=float)[:, None], grid.n_theta, axis=1)
    return psi, a


def write_state_csv(path, state: State2D) -> Path:
    """Snapshot with columns ``r, theta, re_psi, im_psi, a_theta``."""
    path = Path(path)
    grid = state.grid
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "theta", "re_psi", "im_psi", "a_theta"])
        for j, r in enumerate(grid.radial.nodes):
            for k, t in enumerate(grid.theta):
                z = state.psi[j, k]
                w.writerow([fmt(r), fmt(t), fmt(z.real), fmt(z.imag), fmt(state.a[j, k])])
    return path


def read_state_csv(path, grid: PolarGrid) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.radial.n * grid.n_theta:
        raise GridMismatchError(f"{path} has {data.shape[0]} rows, grid needs {grid.radial.n * grid.n_theta}")
    psi = (data[:, 2] + 1j * data[:, 3]).reshape(grid.shape)
    a = data[:, 4].reshape(grid.shape)
    return psi, a


def fmt(x: float) -> str:
    """Twelve significant digits, the precision used for every written number."""
    return f"{float(x):.12g}"
