"""Spherically symmetric stationary state of the Schrodinger-Newton system.

With psi(r, t) = psi0(r) exp(-i E t) and V = phi - E the stationary problem is

    psi'' = -(2/r) psi' + V psi
    V''   = -(2/r) V'   + psi^2

integrated outward from psi(0) = A, psi'(0) = V'(0) = 0 by fixed-step RK4.
The nodeless solution is found by bisection on V(0); the scaling symmetry
then maps it to unit probability.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from numba import njit
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    IntegrationError,
    ResolutionError,
)

BLOWUP = 1e6
SCAN_LO = -3.0
SCAN_STEP = 0.05
# relative disagreement of the two bracketing shots at which the table is
# handed over to the analytic tail
CUT_REL = 1e-3
EIGEN_R_FRACTION = 0.9


class Divergence(str, enum.Enum):
    DIVERGES_UP = "DIVERGES_UP"
    DIVERGES_DOWN = "DIVERGES_DOWN"
    BOUND_CANDIDATE = "BOUND_CANDIDATE"


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid r_k = k * r_max / n, k = 0..n (n steps, n + 1 nodes)."""

    r_max: float = 40.0
    n: int = 20000

    def __post_init__(self):
        if not (self.r_max > 0 and math.isfinite(self.r_max)):
            raise ConfigurationError(f"r_max must be positive, got {self.r_max}")
        if int(self.n) != self.n or self.n < 1000:
            raise ConfigurationError(f"n must be an integer >= 1000, got {self.n}")

    @property
    def h(self) -> float:
        return self.r_max / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h


@dataclass(frozen=True)
class ShootResult:
    classification: Divergence
    node_count: int
    V0: float
    r: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    V: np.ndarray
    dV: np.ndarray

    @property
    def stop_radius(self) -> float:
        return float(self.r[-1])


@dataclass(frozen=True, eq=False)
class GroundStateProfile:
    """Radial tables of psi0 and phi0 with their first derivatives.

    ``dpsi0`` and ``dphi0`` are carried so that interpolation can be cubic
    Hermite and the gradient integral does not need numerical differentiation.
    """

    grid: RadialGrid
    psi0: np.ndarray
    phi0: np.ndarray
    E0: float
    norm: float
    dpsi0: np.ndarray
    dphi0: np.ndarray

    @cached_property
    def _psi_spline(self):
        return CubicHermiteSpline(self.grid.nodes, self.psi0, self.dpsi0)

    @cached_property
    def _phi_spline(self):
        return CubicHermiteSpline(self.grid.nodes, self.phi0, self.dphi0)

    @cached_property
    def tail_kappa(self) -> float:
        """Decay rate of the A exp(-kappa r)/r extension fitted at r_max."""
        r, p, dp = self.grid.r_max, self.psi0[-1], self.dpsi0[-1]
        if p > 0 and dp < 0:
            kappa = -(dp / p) - 1.0 / r
            if kappa > 0:
                return float(kappa)
        return math.sqrt(-self.E0) if self.E0 < 0 else 1.0 / r


@njit(cache=True)
def _rhs(r, p, dp, V, dV):
    if r == 0.0:
        return dp, V * p / 3.0, dV, p * p / 3.0
    return dp, -2.0 / r * dp + V * p, dV, -2.0 / r * dV + p * p


@njit(cache=True)
def _integrate(V0, amp, h, n, blowup):
    """RK4 from the origin; returns (table, last index, nodes, status).

    status: 0 reached r_max, +1 / -1 blew up with that sign, 2 non-finite.
    """
    out = np.empty((n + 1, 4))
    out[0, 0] = amp
    out[0, 1] = 0.0
    out[0, 2] = V0
    out[0, 3] = 0.0
    # second-order series over the first step
    out[1, 0] = amp + V0 * amp * h * h / 6.0
    out[1, 1] = V0 * amp * h / 3.0
    out[1, 2] = V0 + amp * amp * h * h / 6.0
    out[1, 3] = amp * amp * h / 3.0
    nodes = 0
    if out[1, 0] * out[0, 0] < 0.0:
        nodes += 1
    for k in range(1, n):
        r = k * h
        p, dp, V, dV = out[k, 0], out[k, 1], out[k, 2], out[k, 3]
        a1, b1, c1, d1 = _rhs(r, p, dp, V, dV)
        a2, b2, c2, d2 = _rhs(r + 0.5 * h, p + 0.5 * h * a1, dp + 0.5 * h * b1,
                              V + 0.5 * h * c1, dV + 0.5 * h * d1)
        a3, b3, c3, d3 = _rhs(r + 0.5 * h, p + 0.5 * h * a2, dp + 0.5 * h * b2,
                              V + 0.5 * h * c2, dV + 0.5 * h * d2)
        a4, b4, c4, d4 = _rhs(r + h, p + h * a3, dp + h * b3, V + h * c3, dV + h * d3)
        pn = p + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        out[k + 1, 0] = pn
        out[k + 1, 1] = dp + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        out[k + 1, 2] = V + h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        out[k + 1, 3] = dV + h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        for j in range(4):
            if not np.isfinite(out[k + 1, j]):
                return out, k + 1, nodes, 2
        if pn * p < 0.0:
            nodes += 1
        if abs(pn) > blowup:
            return out, k + 1, nodes, 1 if pn > 0 else -1
    return out, n, nodes, 0


def radial_rhs(r: float, state) -> tuple[float, float, float, float]:
    """Derivative of (psi, psi', V, V') at radius r, with the regular limit at r = 0."""
    if not r >= 0:
        raise DomainError(f"radius must be non-negative, got {r}")
    p, dp, V, dV = (float(x) for x in state)
    return _rhs(float(r), p, dp, V, dV)


def shoot(V0: float, grid: RadialGrid, amplitude: float = 1.0) -> ShootResult:
    """Integrate from psi(0) = amplitude, V(0) = V0 until blow-up or r_max."""
    table, last, nodes, status = _integrate(float(V0), float(amplitude), grid.h,
                                            grid.n, BLOWUP * abs(amplitude))
    r = np.arange(last + 1) * grid.h
    if status == 2:
        raise IntegrationError(f"non-finite state at r = {r[-1]:.6g} (V0 = {V0!r})",
                               radius=float(r[-1]))
    if status == 1:
        cls = Divergence.DIVERGES_UP
    elif status == -1:
        cls = Divergence.DIVERGES_DOWN
    else:
        cls = Divergence.BOUND_CANDIDATE
    t = table[: last + 1]
    return ShootResult(cls, int(nodes), float(V0), r, t[:, 0].copy(), t[:, 1].copy(),
                       t[:, 2].copy(), t[:, 3].copy())


def _overbound(s: ShootResult) -> bool:
    return s.node_count > 0 or s.classification is Divergence.DIVERGES_DOWN


def find_bracket(grid: RadialGrid, amplitude: float = 1.0) -> tuple[float, float]:
    """Scan V0 downward from 0 to -3 (in units of amplitude) for the first node."""
    steps = int(round(-SCAN_LO / SCAN_STEP))
    prev = None
    for k in range(steps + 1):
        V0 = -k * SCAN_STEP * amplitude
        s = shoot(V0, grid, amplitude)
        if _overbound(s):
            if prev is None:
                break
            return V0, prev
        prev = V0
    raise ConfigurationError(
        f"no ground-state bracket in V0 in [{SCAN_LO * amplitude}, 0] on r_max={grid.r_max}"
    )


def bisect_v0(grid: RadialGrid, amplitude: float = 1.0, v0_tol: float = 0.0):
    """Bisect V0 down to v0_tol (0: to adjacent floats); returns the final shots."""
    lo, hi = find_bracket(grid, amplitude)
    s_lo, s_hi = shoot(lo, grid, amplitude), shoot(hi, grid, amplitude)
    while hi - lo > v0_tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s = shoot(mid, grid, amplitude)
        if _overbound(s):
            lo, s_lo = mid, s
        else:
            hi, s_hi = mid, s
    return s_lo, s_hi


def solve_stationary(grid: RadialGrid | None = None, amplitude: float = 1.0,
                     v0_tol: float = 0.0) -> GroundStateProfile:
    """Nodeless stationary state with psi(0) = amplitude, not normalised.

    The table is the mean of the two bracketing shots up to the radius where
    they disagree by CUT_REL; beyond it psi continues with its asymptotic form
    r^(s-1) exp(-kappa r) and V = V_inf - C/r, which is exact once psi^2 is
    negligible.
    """
    grid = grid or RadialGrid()
    s_lo, s_hi = bisect_v0(grid, amplitude, v0_tol)
    m = min(len(s_lo.r), len(s_hi.r))
    p_lo, p_hi = s_lo.psi[:m], s_hi.psi[:m]
    bad = (np.abs(p_hi - p_lo) > CUT_REL * np.abs(p_hi)) | (p_lo <= 0) | (s_hi.dpsi[:m] > 0)
    bad[0] = False
    cut = int(np.argmax(bad)) - 1 if bad.any() else m - 1
    if cut < 4:
        raise ConvergenceError("bracketing shots separate immediately; no usable table")

    r = grid.nodes
    psi = np.empty(grid.n + 1)
    dpsi = np.empty_like(psi)
    V = np.empty_like(psi)
    dV = np.empty_like(psi)
    sl = slice(0, cut + 1)
    psi[sl] = 0.5 * (s_lo.psi[sl] + s_hi.psi[sl])
    dpsi[sl] = 0.5 * (s_lo.dpsi[sl] + s_hi.dpsi[sl])
    V[sl] = 0.5 * (s_lo.V[sl] + s_hi.V[sl])
    dV[sl] = 0.5 * (s_lo.dV[sl] + s_hi.dV[sl])

    rc = r[cut]
    V_inf = V[cut] + rc * dV[cut]
    C = rc * rc * dV[cut]
    if V_inf <= 0:
        raise ConvergenceError(f"no bound state: V_inf = {V_inf} at the cut radius {rc}")
    kappa = math.sqrt(V_inf)
    s = C / (2.0 * kappa)
    rt = r[cut + 1:]
    psi[cut + 1:] = psi[cut] * (rt / rc) ** (s - 1.0) * np.exp(-kappa * (rt - rc))
    dpsi[cut + 1:] = psi[cut + 1:] * ((s - 1.0) / rt - kappa)
    V[cut + 1:] = V_inf - C / rt
    dV[cut + 1:] = C / rt**2

    # exact for a pure V_inf - C/r tail
    k = int(round(EIGEN_R_FRACTION * grid.n))
    E0 = -(V[k] + r[k] * dV[k])
    phi = V + E0
    return GroundStateProfile(grid, psi, phi, float(E0), radial_norm(grid, psi), dpsi, dV.copy())


def radial_norm(grid: RadialGrid, psi: np.ndarray) -> float:
    r = grid.nodes
    return float(4.0 * math.pi * simpson(r * r * psi * psi, x=r))


def rescale_profile(p: GroundStateProfile, lam: float,
                    grid: RadialGrid | None = None) -> GroundStateProfile:
    """Apply psi -> lam^2 psi(lam r), phi -> lam^2 phi(lam r), E -> lam^2 E.

    Without ``grid`` the node positions are mapped exactly (r_max -> r_max/lam)
    and no interpolation happens. With ``grid`` the profile is resampled.
    """
    if not lam > 0:
        raise DomainError(f"scale factor must be positive, got {lam}")
    l2, l3 = lam * lam, lam**3
    if grid is None:
        grid = RadialGrid(p.grid.r_max / lam, p.grid.n)
        psi, phi = l2 * p.psi0, l2 * p.phi0
        dpsi, dphi = l3 * p.dpsi0, l3 * p.dphi0
    else:
        r_half = half_radius(p) / lam
        if r_half < 8 * grid.h:
            raise ResolutionError(
                f"rescaled core radius {r_half:.3g} spans fewer than 8 steps of {grid.h:.3g}"
            )
        x = lam * grid.nodes
        psi, phi = (l2 * f for f in sample_profile(p, x))
        dpsi, dphi = (l3 * f for f in _sample_derivatives(p, x))
    return GroundStateProfile(grid, psi, phi, l2 * p.E0, radial_norm(grid, psi), dpsi, dphi)


def normalize(p: GroundStateProfile) -> GroundStateProfile:
    return rescale_profile(p, 1.0 / p.norm)


def half_radius(p: GroundStateProfile) -> float:
    """Radius at which psi0 falls to half its central value."""
    idx = int(np.argmax(p.psi0 < 0.5 * p.psi0[0]))
    return float(p.grid.nodes[idx])


def _tail_psi(p: GroundStateProfile, r):
    rm = p.grid.r_max
    return p.psi0[-1] * (rm / r) * np.exp(-p.tail_kappa * (r - rm))


def sample_profile(p: GroundStateProfile, r):
    """(psi0(r), phi0(r)); cubic Hermite inside the table, analytic tails beyond."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("radius must be non-negative")
    rm = p.grid.r_max
    inside = r <= rm
    psi = np.empty_like(r)
    phi = np.empty_like(r)
    if inside.all():
        return p._psi_spline(r), p._phi_spline(r)
    psi[inside] = p._psi_spline(r[inside])
    phi[inside] = p._phi_spline(r[inside])
    ro = r[~inside]
    psi[~inside] = _tail_psi(p, ro)
    phi[~inside] = -p.norm / (4.0 * math.pi * ro)
    return psi, phi


def _sample_derivatives(p: GroundStateProfile, r):
    r = np.asarray(r, dtype=float)
    rm = p.grid.r_max
    inside = r <= rm
    dpsi = np.empty_like(r)
    dphi = np.empty_like(r)
    dpsi[inside] = p._psi_spline(r[inside], 1)
    dphi[inside] = p._phi_spline(r[inside], 1)
    ro = r[~inside]
    dpsi[~inside] = -_tail_psi(p, ro) * (p.tail_kappa + 1.0 / ro)
    dphi[~inside] = p.norm / (4.0 * math.pi * ro * ro)
    return dpsi, dphi


def stationary_residual(p: GroundStateProfile) -> np.ndarray:
    """-Lap psi0 + phi0 psi0 - E0 psi0 at interior nodes (second-order differences)."""
    r = p.grid.nodes
    h = p.grid.h
    psi = p.psi0
    d2 = (psi[2:] - 2.0 * psi[1:-1] + psi[:-2]) / h**2
    d1 = (psi[2:] - psi[:-2]) / (2.0 * h)
    lap = d2 + 2.0 / r[1:-1] * d1
    return -lap + (p.phi0[1:-1] - p.E0) * psi[1:-1]


def find_ground_state(tol: float = 1e-6, grid: RadialGrid | None = None,
                      v0_tol: float = 0.0) -> GroundStateProfile:
    """Unit-probability nodeless ground state.

    Raises ConvergenceError if the virial identities or the 1/(4 pi r) tail of
    phi0 miss their targets by more than 10 * tol.
    """
    if not tol > 0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    raw = solve_stationary(grid, 1.0, v0_tol)
    p = normalize(raw)
    if v0_tol == 0.0:
        _check_ground_state(p, 10.0 * tol)
    return p


def _check_ground_state(p: GroundStateProfile, bound: float) -> None:
    r = p.grid.nodes
    k = int(round(EIGEN_R_FRACTION * p.grid.n))
    kin = 4.0 * math.pi * simpson(r * r * p.dpsi0**2, x=r)
    pot = 4.0 * math.pi * simpson(r * r * p.phi0 * p.psi0**2, x=r)
    problems = []
    if abs(kin / p.E0 + 1.0 / 3.0) > bound:
        problems.append(f"kinetic virial ratio {kin / p.E0!r}")
    if abs(pot / p.E0 - 4.0 / 3.0) > bound:
        problems.append(f"potential virial ratio {pot / p.E0!r}")
    tail = 4.0 * math.pi * r[k] * p.phi0[k]
    if abs(tail + 1.0) > bound:
        problems.append(f"4 pi r phi0 = {tail!r} at r = {r[k]:.6g}")
    if abs(p.norm - 1.0) > 1e-10:
        problems.append(f"norm {p.norm!r}")
    if problems:
        raise ConvergenceError("ground state misses tolerance: " + "; ".join(problems))


def write_profile(p: GroundStateProfile, path) -> tuple[Path, Path]:
    """CSV ``r,psi0,phi0`` plus a ``key=value`` sidecar next to it."""
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write("r,psi0,phi0\n")
        for r, a, b in zip(p.grid.nodes, p.psi0, p.phi0):
            fh.write(f"{r:.17g},{a:.17g},{b:.17g}\n")
    meta = path.with_suffix(".meta")
    meta.write_text(
        f"E0={p.E0:.17g}\nnorm={p.norm:.17g}\nn={p.grid.n}\nr_max={p.grid.r_max:.17g}\n"
    )
    return path, meta


def read_profile(path) -> GroundStateProfile:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = {}
    for line in path.with_suffix(".meta").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    grid = RadialGrid(float(meta["r_max"]), int(meta["n"]))
    if data.shape[0] != grid.n + 1:
        raise ConfigurationError(f"{path}: expected {grid.n + 1} rows, found {data.shape[0]}")
    r, psi, phi = data.T
    # derivatives are not stored; spline estimates clamped to zero slope at r = 0
    dpsi = CubicSpline(r, psi, bc_type=((1, 0.0), "not-a-knot"))(r, 1)
    dphi = CubicSpline(r, phi, bc_type=((1, 0.0), "not-a-knot"))(r, 1)
    return GroundStateProfile(grid, psi, phi, float(meta["E0"]), float(meta["norm"]),
                              dpsi, dphi)
