"""Strang-split spectral evolution of i psi_t = -Lap psi + phi psi, Lap phi = |psi|^2."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import poisson
from .errors import BoundaryWarning, ConfigurationError, DivergenceError, UndefinedError
from .grid import Grid3, integrate

DIAG_COLUMNS = ("t", "norm", "energy", "cx", "cy", "cz", "px", "py", "pz")
BOUNDARY_TOL = 1e-10


@dataclass
class EvolveConfig:
    dt: float
    steps: int
    diag_every: int = 100
    poisson: str = poisson.FREE_SPACE
    snapshot_every: int = 0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError(f"steps must be a positive integer, got {self.steps}")
        if self.diag_every < 1:
            raise ConfigurationError(f"diag_every must be >= 1, got {self.diag_every}")
        if self.poisson not in (poisson.FREE_SPACE, poisson.PERIODIC_ZERO_MEAN):
            raise ConfigurationError(f"unknown poisson mode {self.poisson!r}")


def _phase(phi: np.ndarray, tau: float) -> np.ndarray:
    """exp(-i tau phi) without going through complex exp."""
    x = tau * phi
    e = np.empty(phi.shape, dtype=complex)
    np.cos(x, out=e.real)
    np.sin(x, out=e.imag)
    np.negative(e.imag, out=e.imag)
    return e


def density(psi: np.ndarray) -> np.ndarray:
    return psi.real**2 + psi.imag**2


def potential(psi: np.ndarray, g: Grid3, mode: str = poisson.FREE_SPACE,
              check: bool = False) -> np.ndarray:
    return poisson.solve(density(psi), g, mode, check=check)


def strang_step(psi: np.ndarray, dt: float, g: Grid3, cfg: EvolveConfig | None = None,
                external=None) -> np.ndarray:
    """One symmetric step: half potential kick, full kinetic drift, half kick.

    The potential is recomputed from |psi|^2 before each half kick.
    ``external`` replaces the self-consistent potential (e.g. zeros for the
    free Schrodinger equation).
    """
    mode = cfg.poisson if cfg is not None else poisson.FREE_SPACE
    g.check(psi)

    def pot(p):
        return external if external is not None else potential(p, g, mode)

    out = psi * _phase(pot(psi), 0.5 * dt)
    out = sfft.ifftn(np.exp(-1j * g.ksq * dt) * sfft.fftn(out), overwrite_x=True)
    out *= _phase(pot(out), 0.5 * dt)
    if not np.isfinite(out).all():
        raise DivergenceError("non-finite field after Strang step", step=0)
    return out


class SplitStepper:
    """Repeated Strang steps with the potential cached between steps.

    A half kick leaves |psi| unchanged, so the potential closing one step is
    the one opening the next, and two adjacent half kicks merge into one full
    kick. This needs one Poisson solve per step and is algebraically identical
    to repeating ``strang_step``.
    """

    def __init__(self, g: Grid3, dt: float, mode: str = poisson.FREE_SPACE, external=None):
        self.g = g
        self.dt = dt
        self.mode = mode
        self.external = external
        self.kinetic = np.exp(-1j * g.ksq * dt)
        self.steps_done = 0

    def potential(self, psi):
        if self.external is not None:
            return self.external
        return potential(psi, self.g, self.mode)

    def run(self, psi: np.ndarray, steps: int, phi: np.ndarray | None = None):
        """Advance ``steps`` Strang steps; returns (psi, phi) with phi from the final psi."""
        if steps < 1:
            return psi, (self.potential(psi) if phi is None else phi)
        if phi is None:
            phi = self.potential(psi)
        psi = psi * _phase(phi, 0.5 * self.dt)
        for s in range(steps):
            psi = sfft.fftn(psi, overwrite_x=True)
            psi *= self.kinetic
            psi = sfft.ifftn(psi, overwrite_x=True)
            phi = self.potential(psi)
            if not math.isfinite(phi.flat[0]):
                raise DivergenceError(
                    f"non-finite potential at step {self.steps_done + s + 1}",
                    step=self.steps_done + s + 1)
            psi *= _phase(phi, self.dt if s < steps - 1 else 0.5 * self.dt)
        self.steps_done += steps
        return psi, phi


def centroid(psi: np.ndarray, g: Grid3) -> np.ndarray:
    rho = density(psi)
    m = float(np.sum(rho))
    if m == 0.0:
        raise UndefinedError("centroid of a zero field")
    mx = rho.sum(axis=(1, 2))
    my = rho.sum(axis=(0, 2))
    mz = rho.sum(axis=(0, 1))
    return np.array([mx @ g.x, my @ g.x, mz @ g.x]) / m


def momentum(psi: np.ndarray, g: Grid3, psi_hat: np.ndarray | None = None) -> np.ndarray:
    """Spectral first moment: integral of conj(psi) (-i grad) psi."""
    ph = sfft.fftn(psi) if psi_hat is None else psi_hat
    w = density(ph)
    if not w.any():
        raise UndefinedError("momentum of a zero field")
    scale = g.dV / psi.size
    return np.array([w.sum(axis=(1, 2)) @ g.k_odd, w.sum(axis=(0, 2)) @ g.k_odd,
                     w.sum(axis=(0, 1)) @ g.k_odd]) * scale


def edge_amplitude(psi: np.ndarray) -> float:
    """max |psi| on the outer face layer relative to max |psi|."""
    a = np.abs(psi)
    peak = a.max()
    if peak == 0:
        return 0.0
    faces = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max(),
                a[:, :, 0].max(), a[:, :, -1].max())
    return float(faces / peak)


@dataclass
class Evolution:
    grid: Grid3
    psi: np.ndarray
    phi: np.ndarray
    t: float
    diagnostics: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    edge_max: float = 0.0

    def column(self, name: str) -> np.ndarray:
        i = DIAG_COLUMNS.index(name)
        return np.array([row[i] for row in self.diagnostics])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(DIAG_COLUMNS) + "\n")
            for row in self.diagnostics:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def diagnostics_row(psi: np.ndarray, phi: np.ndarray, g: Grid3, t: float) -> tuple:
    from .diagnostics import energy

    ph = sfft.fftn(psi)
    e = energy(psi, phi, g, psi_hat=ph)
    c = centroid(psi, g)
    p = momentum(psi, g, psi_hat=ph)
    return (t, e.norm, e.total, *c, *p)


def evolve(psi0: np.ndarray, g: Grid3, cfg: EvolveConfig, t0: float = 0.0,
           external=None, callback=None) -> Evolution:
    """Time loop over Strang steps with diagnostics every ``cfg.diag_every`` steps.

    ``callback(t, psi, phi)`` is called at every diagnostics point.
    """
    g.check(psi0)
    stepper = SplitStepper(g, cfg.dt, cfg.poisson, external)
    psi = np.array(psi0, dtype=complex)
    phi = stepper.potential(psi)
    res = Evolution(g, psi, phi, t0)
    warned = False

    def record(step):
        nonlocal warned
        t = t0 + step * cfg.dt
        res.diagnostics.append(diagnostics_row(psi, phi, g, t))
        edge = edge_amplitude(psi)
        res.edge_max = max(res.edge_max, edge)
        if edge > BOUNDARY_TOL and not warned and cfg.poisson == poisson.FREE_SPACE:
            warnings.warn(f"field at the box boundary reaches {edge:.2e} of its peak "
                          f"(t = {t:.6g}); periodic kinetic step assumes <= {BOUNDARY_TOL:g}",
                          BoundaryWarning, stacklevel=3)
            warned = True
        if callback is not None:
            callback(t, psi, phi)

    def snap(step):
        if cfg.snapshot_every and step % cfg.snapshot_every == 0:
            res.snapshots.append((t0 + step * cfg.dt, psi.copy()))

    record(0)
    snap(0)
    stops = sorted({*range(cfg.diag_every, cfg.steps, cfg.diag_every), cfg.steps,
                    *((range(cfg.snapshot_every, cfg.steps, cfg.snapshot_every))
                      if cfg.snapshot_every else ())})
    done = 0
    for stop in stops:
        try:
            psi, phi = stepper.run(psi, stop - done, phi)
        except DivergenceError as exc:
            raise DivergenceError(f"{exc} (t0 = {t0}, dt = {cfg.dt})", step=exc.step) from exc
        done = stop
        if stop % cfg.diag_every == 0 or stop == cfg.steps:
            record(stop)
        snap(stop)
    res.psi, res.phi, res.t = psi, phi, t0 + cfg.steps * cfg.dt
    return res


@dataclass
class Relaxation:
    psi: np.ndarray
    phi: np.ndarray
    mu: float
    norm: float
    steps: int
    functional: float  # int |grad psi|^2 + 1/2 int phi |psi|^2

    @property
    def unit_eigenvalue(self) -> float:
        """Eigenvalue of the unit-norm state from the stationary functional.

        At the ground state of norm N the functional equals N^3 E0 / 3 and is
        stationary, so errors in psi enter only quadratically.
        """
        return 3.0 * self.functional / self.norm**3

    @property
    def unit_eigenvalue_rayleigh(self) -> float:
        """mu / N^2; first-order sensitive to the relaxation step bias."""
        return self.mu / self.norm**2


def _quadratic_forms(psi, phi, g: Grid3) -> tuple[float, float]:
    ph = sfft.fftn(psi)
    kin = float(np.sum(g.ksq * density(ph))) * g.dV / psi.size
    return kin, float(integrate(phi * density(psi), g))


def rayleigh_quotient(psi, phi, g: Grid3) -> float:
    kin, pot = _quadratic_forms(psi, phi, g)
    return (kin + pot) / float(integrate(density(psi), g))


def relax_ground_state(g: Grid3, norm: float = 1.0, dtaus=(0.4, 0.2, 0.1),
                       tol: float = 1e-8, max_steps: int = 5000, psi=None,
                       check_every: int = 20) -> Relaxation:
    """Imaginary-time relaxation to the nodeless state of the given norm.

    Each step applies exp(-phi dtau), then exp(Lap dtau) spectrally, then
    rescales to the target norm, with phi re-solved once per step. Each stage
    runs until the stationary functional changes by less than ``tol``
    (relative) between checks; later stages start from the previous one.
    """
    if psi is None:
        X, Y, Z = g.mesh()
        sigma = g.L / 10
        psi = np.exp(-(X**2 + Y**2 + Z**2) / (2 * sigma**2)) + 0j
    psi = psi * math.sqrt(norm / float(integrate(density(psi), g)))
    phi = potential(psi, g)
    total = 0
    for dtau in dtaus:
        kin = np.exp(-g.ksq * dtau)
        prev = math.inf
        for step in range(max_steps):
            psi = psi * np.exp(-dtau * phi)
            psi = sfft.ifftn(kin * sfft.fftn(psi, overwrite_x=True), overwrite_x=True)
            psi *= math.sqrt(norm / float(integrate(density(psi), g)))
            phi = potential(psi, g)
            total += 1
            if step % check_every == 0:
                k, w = _quadratic_forms(psi, phi, g)
                f = k + 0.5 * w
                if abs(f - prev) <= tol * abs(f):
                    break
                prev = f
        else:
            warnings.warn(f"imaginary-time stage dtau={dtau} hit max_steps", RuntimeWarning)
    k, w = _quadratic_forms(psi, phi, g)
    return Relaxation(psi, phi, (k + w) / norm, norm, total, k + 0.5 * w)
