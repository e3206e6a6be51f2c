"""Poisson solvers for Lap(phi) = rho on a Grid3.

The free-space solver convolves rho with the Green function -1/(4 pi |r|)
on a doubled (2n)^3 box (Hockney's method), which is exact for the aperiodic
discrete convolution over the whole original box. The singular cell uses the
cube average of -1/(4 pi |r|), which is -CUBE_INV_R / (4 pi h).
"""
from __future__ import annotations

import math
import warnings
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import BoundaryWarning
from .grid import Grid3

# integral of 1/|r| over the unit cube centred at the origin
CUBE_INV_R = 3.0 * math.log(2.0 + math.sqrt(3.0)) - math.pi / 2.0

FREE_SPACE = "FREE_SPACE"
PERIODIC_ZERO_MEAN = "PERIODIC_ZERO_MEAN"


def green_kernel(g: Grid3) -> np.ndarray:
    """-1/(4 pi |r|) on the doubled box, wrapped so index 0 is zero displacement."""
    m = 2 * g.n
    d = np.arange(m)
    d = np.where(d <= g.n, d, d - m).astype(float) * g.h
    r = np.sqrt(d[:, None, None] ** 2 + d[None, :, None] ** 2 + d[None, None, :] ** 2)
    r[0, 0, 0] = 1.0
    G = -1.0 / (4.0 * math.pi * r)
    G[0, 0, 0] = -CUBE_INV_R / (4.0 * math.pi * g.h)
    return G


@lru_cache(maxsize=4)
def _kernel_hat(g: Grid3) -> np.ndarray:
    # the kernel is even, so its transform is real
    return sfft.rfftn(green_kernel(g)).real * g.dV


def _convolve(rho: np.ndarray, g: Grid3) -> np.ndarray:
    n, m = g.n, 2 * g.n
    # pruned transforms: rho occupies one octant of the doubled box
    a = sfft.rfft(rho, n=m, axis=2)
    a = sfft.fft(a, n=m, axis=1, overwrite_x=True)
    a = sfft.fft(a, n=m, axis=0, overwrite_x=True)
    a *= _kernel_hat(g)
    a = sfft.ifft(a, axis=0, overwrite_x=True)[:n]
    a = sfft.ifft(a, axis=1, overwrite_x=True)[:, :n]
    return sfft.irfft(a, n=m, axis=2)[:, :, :n]


def boundary_fraction(rho: np.ndarray, g: Grid3) -> float:
    """max |rho| outside the inner half-box relative to max |rho|."""
    peak = float(np.max(np.abs(rho)))
    if peak == 0.0:
        return 0.0
    outside = np.abs(rho[~g.inner_half_mask()])
    return float(outside.max()) / peak if outside.size else 0.0


def poisson_free_space(rho: np.ndarray, g: Grid3, check: bool = True) -> np.ndarray:
    """phi with Lap(phi) = rho and phi -> -(int rho)/(4 pi r) far away."""
    g.check(rho)
    rho = np.asarray(rho, dtype=float)
    if check:
        frac = boundary_fraction(rho, g)
        if frac > 1e-10:
            warnings.warn(
                f"density outside the inner half-box reaches {frac:.2e} of its peak",
                BoundaryWarning, stacklevel=2)
    if not rho.any():
        return np.zeros(g.shape)
    return _convolve(rho, g)


def poisson_periodic(rho: np.ndarray, g: Grid3) -> np.ndarray:
    """Zero-mean periodic solution; for solver cross-checks only."""
    g.check(rho)
    rh = sfft.rfftn(rho)
    kz = g.k[: g.n // 2 + 1] ** 2
    k2 = g.k[:, None, None] ** 2 + g.k[None, :, None] ** 2 + kz[None, None, :]
    k2[0, 0, 0] = 1.0
    rh = -rh / k2
    rh[0, 0, 0] = 0.0
    return sfft.irfftn(rh, s=g.shape)


def solve(rho: np.ndarray, g: Grid3, mode: str = FREE_SPACE, check: bool = True) -> np.ndarray:
    if mode == FREE_SPACE:
        return poisson_free_space(rho, g, check=check)
    if mode == PERIODIC_ZERO_MEAN:
        return poisson_periodic(rho, g)
    raise ValueError(f"unknown Poisson mode {mode!r}")
