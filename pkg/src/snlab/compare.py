"""Full field evolution of a lump system against its point-particle reduction.

Each lump is followed through the probability in its Voronoi cell (cells of
the initial positions). Per cell the centroid and the mean momentum
int conj(psi)(-i grad)psi are recorded; Ehrenfest gives
d<p>/dt = -int |psi|^2 grad(phi), so 2 dP_i/dt / m_i is the acceleration of
lump i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import evolve as ev
from . import nbody as nb
from .errors import ConfigurationError
from .grid import Grid3
from .lumps import LumpSystem, superpose
from .radial import GroundStateProfile

EARLY_FRACTION = 0.25  # share of the run used for the early-time acceleration fit


def cell_labels(g: Grid3, centres: np.ndarray) -> np.ndarray:
    """Index of the nearest centre for every node."""
    X, Y, Z = g.mesh()
    best = None
    labels = np.zeros(g.shape, dtype=np.int8)
    for i, c in enumerate(centres):
        d2 = (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2
        if best is None:
            best = d2
        else:
            closer = d2 < best
            labels[closer] = i
            best = np.where(closer, d2, best)
    return labels


def cell_moments(psi: np.ndarray, g: Grid3, labels: np.ndarray, count: int):
    """(mass, centroid, momentum) per cell."""
    rho = ev.density(psi)
    ph = sfft.fftn(psi)
    grads = [sfft.ifftn(1j * g.kvec(a) * ph) for a in range(3)]
    # conj(psi) (-i d psi) has real part equal to the local momentum density
    jd = [(np.conj(psi) * (-1j) * gr).real for gr in grads]
    X, Y, Z = g.mesh()
    mass = np.zeros(count)
    cen = np.zeros((count, 3))
    mom = np.zeros((count, 3))
    for i in range(count):
        sel = labels == i
        w = rho * sel
        m = float(np.sum(w))
        mass[i] = m * g.dV
        cen[i] = [float(np.sum(w * X)) / m, float(np.sum(w * Y)) / m, float(np.sum(w * Z)) / m]
        mom[i] = [float(np.sum(j[sel])) * g.dV for j in jd]
    return mass, cen, mom


@dataclass
class ComparisonReport:
    t: np.ndarray  # (K,)
    pde_positions: np.ndarray  # (K, N, 3)
    pde_momenta: np.ndarray  # (K, N, 3)
    pde_masses: np.ndarray  # (K, N)
    nbody_positions: np.ndarray  # (K, N, 3)
    masses: np.ndarray
    kappa: float
    edge_max: float
    boundary_flag: bool
    extra: dict = field(default_factory=dict)

    def separation(self, source: str = "pde") -> np.ndarray:
        a = self.pde_positions if source == "pde" else self.nbody_positions
        return np.linalg.norm(a[:, 1] - a[:, 0], axis=1)

    def relative_acceleration(self, window: float = EARLY_FRACTION) -> float:
        """Early-time |d^2 (a_1 - a_0)/dt^2| along the initial separation, from momenta."""
        self._need_pair()
        k = max(3, int(np.ceil(window * (len(self.t) - 1))) + 1)
        t = self.t[:k]
        acc = []
        for i in range(2):
            slope = np.polyfit(t, self.pde_momenta[:k, i], 1)[0]  # (3,)
            acc.append(2.0 * slope / self.masses[i])
        e = self.pde_positions[0, 1] - self.pde_positions[0, 0]
        e = e / np.linalg.norm(e)
        return float(-(acc[1] - acc[0]) @ e)

    def kappa_measured(self, window: float = EARLY_FRACTION) -> float:
        """|a_rel''| r^2 / M at the start of the run."""
        d0 = float(self.separation()[0])
        return self.relative_acceleration(window) * d0**2 / float(np.sum(self.masses))

    def infall(self, source: str = "pde") -> np.ndarray:
        s = self.separation(source)
        return s[0] - s

    def trajectory_error(self, start_fraction: float = 0.5) -> float:
        """max relative infall mismatch over the later part of the run.

        Early infall is tiny, so the relative comparison starts at
        ``start_fraction`` of the run.
        """
        self._need_pair()
        k0 = int(start_fraction * (len(self.t) - 1))
        a, b = self.infall("pde")[k0:], self.infall("nbody")[k0:]
        if not np.all(b > 0):
            raise ConfigurationError("no infall in the comparison window")
        return float(np.max(np.abs(a - b) / b))

    def position_error(self) -> float:
        """max |pde - nbody| centroid distance over the run."""
        return float(np.max(np.linalg.norm(self.pde_positions - self.nbody_positions, axis=2)))

    def _need_pair(self):
        if self.pde_positions.shape[1] != 2:
            raise ConfigurationError("pair diagnostics need exactly two lumps")

    def write_csv(self, path) -> None:
        n = self.masses.size
        cols = ["t"]
        for i in range(n):
            cols += [f"pde{i}_x", f"pde{i}_y", f"pde{i}_z"]
        for i in range(n):
            cols += [f"nb{i}_x", f"nb{i}_y", f"nb{i}_z"]
        for i in range(n):
            cols += [f"p{i}_x", f"p{i}_y", f"p{i}_z"]
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for k in range(len(self.t)):
                row = [self.t[k], *self.pde_positions[k].ravel(), *self.nbody_positions[k].ravel(),
                       *self.pde_momenta[k].ravel()]
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def compare(p: GroundStateProfile, sys: LumpSystem, g: Grid3, dt: float, steps: int,
            diag_every: int = 10, kappa: float = nb.KAPPA_ORDERED) -> ComparisonReport:
    """Evolve the superposed lumps and integrate the point particles in step."""
    cfg = ev.EvolveConfig(dt=dt, steps=steps, diag_every=diag_every)
    f = superpose(sys, p, 0.0, g)
    labels = cell_labels(g, sys.positions)
    rows = []

    def grab(t, psi, phi):
        rows.append((t, *cell_moments(psi, g, labels, len(sys))))

    import warnings
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ev.BoundaryWarning)
        res = ev.evolve(f.psi, g, cfg, callback=grab)
    t = np.array([r[0] for r in rows])
    masses = np.array([r[1] for r in rows])
    cen = np.array([r[2] for r in rows])
    mom = np.array([r[3] for r in rows])

    state = nb.NBodyState.from_system(sys)
    nb_pos = [state.a]
    for k in range(1, steps + 1):
        state = nb.leapfrog_step(state, dt, kappa)
        if k % diag_every == 0 or k == steps:
            nb_pos.append(state.a)
    return ComparisonReport(t, cen, mom, masses, np.array(nb_pos), sys.masses, kappa,
                            res.edge_max, res.edge_max > ev.BOUNDARY_TOL,
                            {"warnings": [str(w.message) for w in caught]})


def nbody_track(sys: LumpSystem, t: np.ndarray, dt: float, kappa: float) -> np.ndarray:
    """Point-particle positions at the report times (multiples of dt)."""
    state = nb.NBodyState.from_system(sys)
    out = [state.a]
    k_prev = 0
    for tk in t[1:]:
        k = int(round(tk / dt))
        for _ in range(k - k_prev):
            state = nb.leapfrog_step(state, dt, kappa)
        k_prev = k
        out.append(state.a)
    return np.array(out)


def with_kappa(r: ComparisonReport, sys: LumpSystem, dt: float, kappa: float) -> ComparisonReport:
    """Same PDE data against point particles with another coupling."""
    return ComparisonReport(r.t, r.pde_positions, r.pde_momenta, r.pde_masses,
                            nbody_track(sys, r.t, dt, kappa), r.masses, kappa,
                            r.edge_max, r.boundary_flag, dict(r.extra))


def symmetric_pair(separation: float, m: float = 0.5, axis: int = 0) -> LumpSystem:
    from .lumps import LumpSpec

    if not separation > 0:
        raise ConfigurationError("separation must be positive")
    a = np.zeros(3)
    a[axis] = 0.5 * separation
    return LumpSystem((LumpSpec(m, tuple(-a)), LumpSpec(1.0 - m, tuple(a))))


def default_pair_setup(p: GroundStateProfile, n: int = 64, radii: float = 6.0):
    """Grid, system and timing for the head-on test: separation ``radii`` core radii."""
    from .lumps import core_radius

    r99 = core_radius(p, 0.5)
    d = radii * r99
    L = d + 6.0 * r99
    g = Grid3(n, L)
    t_end = 0.25 * nb.free_fall_time(d)
    h = g.h
    dt = min(100.0, 0.3 / (3.0 * (math.pi / h) ** 2))
    steps = int(math.ceil(t_end / dt))
    return g, symmetric_pair(d), dt, steps
