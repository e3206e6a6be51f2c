"""Conserved and characteristic quantities of Schrodinger-Newton fields."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.integrate import simpson

from .errors import ShapeError, SingularityError, UndefinedError
from .grid import Grid3, integrate, laplacian, laplacian_fd4
from .radial import GroundStateProfile


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float  # I1 = 1/2 int |grad psi|^2
    potential: float  # I2 = 1/4 int phi |psi|^2
    total: float
    norm: float


def norm(psi: np.ndarray, g: Grid3) -> float:
    g.check(psi)
    return float(integrate(psi.real**2 + psi.imag**2, g))


def energy(psi: np.ndarray, phi: np.ndarray, g: Grid3, psi_hat=None) -> EnergyReport:
    """E = int (1/2 |grad psi|^2 + 1/4 phi |psi|^2), gradient taken spectrally.

    ``phi`` must be the potential of |psi|^2; it is not re-derived here.
    """
    g.check(psi, phi)
    ph = sfft.fftn(psi) if psi_hat is None else psi_hat
    w = ph.real**2 + ph.imag**2
    # Parseval: int |grad psi|^2 = h^3 / N sum k^2 |psi_hat|^2
    grad2 = float(np.sum(g.ksq * w)) * g.dV / psi.size
    rho = psi.real**2 + psi.imag**2
    i1 = 0.5 * grad2
    i2 = 0.25 * float(integrate(phi * rho, g))
    return EnergyReport(i1, i2, i1 + i2, float(integrate(rho, g)))


def _radial_integral(p: GroundStateProfile, f: np.ndarray) -> float:
    r = p.grid.nodes
    return 4.0 * math.pi * float(simpson(r * r * f, x=r))


def virial_check(p: GroundStateProfile) -> tuple[float, float]:
    """(int |grad psi0|^2, int phi0 psi0^2) over E0 * norm; -1/3 and 4/3 for the ground state.

    Dividing by the norm as well keeps both ratios invariant under rescaling
    (numerators and E0 * norm all scale as lambda^3); for a unit-norm profile
    this is the plain ratio to E0.
    """
    if p.E0 == 0:
        raise UndefinedError("virial ratios need a non-zero eigenvalue")
    kin = _radial_integral(p, p.dpsi0**2)
    pot = _radial_integral(p, p.phi0 * p.psi0**2)
    den = p.E0 * p.norm
    return kin / den, pot / den


def radial_energy(p: GroundStateProfile) -> EnergyReport:
    """Energy functional of a profile by radial quadrature."""
    i1 = 0.5 * _radial_integral(p, p.dpsi0**2)
    i2 = 0.25 * _radial_integral(p, p.phi0 * p.psi0**2)
    return EnergyReport(i1, i2, i1 + i2, _radial_integral(p, p.psi0**2))


@dataclass(frozen=True)
class Residuals:
    H1: float
    H2: float
    H3: float

    def __iter__(self):
        return iter((self.H1, self.H2, self.H3))


def residual_fields(psi_prev, psi_now, psi_next, phi, dt: float, g: Grid3):
    """Pointwise H1, H2, H3 at the middle snapshot.

    psi_t by centred difference, Lap psi spectrally, Lap phi by fourth-order
    differences (phi is not periodic), so H3 is NaN on the two outer layers.
    """
    g.check(psi_prev, psi_now, psi_next, phi)
    if not dt > 0:
        raise ShapeError(f"snapshot spacing must be positive, got {dt}")
    u_t = (psi_next - psi_prev) / (2.0 * dt)
    lap_u = laplacian(np.asarray(psi_now, dtype=complex), g)
    h1 = 1j * u_t + lap_u - phi * psi_now
    v = np.conj(psi_now)
    h2 = 1j * np.conj(u_t) - np.conj(lap_u) + phi * v
    h3 = laplacian_fd4(np.asarray(phi, dtype=float), g) - (psi_now * v).real
    return h1, h2, h3


def residual_H(psi_prev, psi_now, psi_next, phi, dt: float, g: Grid3) -> Residuals:
    """Sup norms of the three Schrodinger-Newton residuals at the middle snapshot."""
    h1, h2, h3 = residual_fields(psi_prev, psi_now, psi_next, phi, dt, g)
    return Residuals(float(np.max(np.abs(h1))), float(np.max(np.abs(h2))),
                     float(np.nanmax(np.abs(h3))) if np.isfinite(h3).any() else 0.0)


def _check_separations(a: np.ndarray):
    for i in range(len(a)):
        for j in range(i + 1, len(a)):
            if not np.linalg.norm(a[i] - a[j]) > 0:
                raise SingularityError(f"lumps {i} and {j} coincide")


def interaction_energy(masses, positions, ordered: bool = True) -> float:
    """-(1/16 pi) sum over ordered pairs m_i m_j / |a_i - a_j|.

    ``ordered=False`` sums each pair once, halving the result.
    """
    m = np.asarray(masses, dtype=float)
    a = np.asarray(positions, dtype=float).reshape(len(m), 3)
    _check_separations(a)
    s = 0.0
    for i in range(len(m)):
        for j in range(len(m)):
            if i != j:
                s += m[i] * m[j] / float(np.linalg.norm(a[i] - a[j]))
    if not ordered:
        s *= 0.5
    return -s / (16.0 * math.pi)


def predicted_energy(sys, E0: float, ordered: bool = True) -> float:
    """Wide-separation energy of a lump system, before dropping the E0 terms."""
    m = np.array([l.m for l in sys.lumps])
    v = np.array([l.v for l in sys.lumps], dtype=float).reshape(len(m), 3)
    diag = float(np.sum(m**3 * E0 / 6.0 + m * np.sum(v * v, axis=1) / 8.0))
    return diag + interaction_energy(m, [l.a for l in sys.lumps], ordered)
