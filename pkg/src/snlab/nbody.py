"""Point-particle reduction of widely separated lumps.

Bodies of mass m_i at a_i accelerate as

    a_i'' = kappa sum_{j != i} m_j (a_j - a_i) / |a_j - a_i|^3,

and the conserved energy is

    E = (1/8) sum m_i |v_i|^2 - (1/16 pi) sum_{i != j, ordered} m_i m_j / |a_i - a_j|,

which is conserved exactly when kappa = 1/(2 pi).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, SingularityError
from .lumps import MASS_TOL, LumpSystem

KAPPA_ORDERED = 1.0 / (2.0 * math.pi)
KAPPA_UNORDERED = 1.0 / (4.0 * math.pi)


@dataclass(frozen=True)
class NBodyState:
    m: np.ndarray  # (N,)
    a: np.ndarray  # (N, 3)
    v: np.ndarray  # (N, 3)
    t: float = 0.0

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(-1)
        a = np.array(self.a, dtype=float).reshape(len(m), 3)
        v = np.array(self.v, dtype=float).reshape(len(m), 3)
        if np.any(m <= 0):
            raise ConfigurationError("masses must be positive")
        if abs(math.fsum(m) - 1.0) > MASS_TOL:
            raise ConfigurationError(f"masses must sum to 1, got {math.fsum(m)!r}")
        for arr in (m, a, v):
            arr.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "v", v)
        _separations(a)

    @classmethod
    def from_system(cls, sys: LumpSystem, t: float = 0.0) -> "NBodyState":
        return cls(sys.masses, sys.positions, sys.velocities, t)

    def momentum(self) -> np.ndarray:
        return self.m @ self.v


@dataclass(frozen=True)
class NBodyConfig:
    dt: float
    steps: int
    kappa: float = KAPPA_ORDERED
    every: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError(f"steps must be a positive integer, got {self.steps}")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ConfigurationError(f"kappa must be positive, got {self.kappa}")
        if self.every < 1:
            raise ConfigurationError(f"output cadence must be >= 1, got {self.every}")


def _separations(a: np.ndarray) -> np.ndarray:
    """(N, N, 3) displacements a_j - a_i; raises on coincident bodies."""
    d = a[None, :, :] - a[:, None, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    np.fill_diagonal(r, np.inf)
    if np.any(r == 0):
        i, j = np.argwhere(r == 0)[0]
        raise SingularityError(f"bodies {i} and {j} coincide")
    return d, r


def accelerations(s: NBodyState, kappa: float = KAPPA_ORDERED) -> np.ndarray:
    d, r = _separations(s.a)
    # pairwise terms are antisymmetric, so sum_i m_i a_i'' cancels exactly up to rounding
    return kappa * np.einsum("j,ijk->ik", s.m, d / r[:, :, None] ** 3)


def leapfrog_step(s: NBodyState, dt: float, kappa: float = KAPPA_ORDERED) -> NBodyState:
    """Kick-drift-kick; dt may be negative (exact time reversal)."""
    v = s.v + 0.5 * dt * accelerations(s, kappa)
    a = s.a + dt * v
    half = NBodyState(s.m, a, v, s.t + dt)
    v = v + 0.5 * dt * accelerations(half, kappa)
    return replace(half, v=v)


def nbody_energy(s: NBodyState) -> float:
    _, r = _separations(s.a)
    kin = 0.125 * float(s.m @ np.einsum("ij,ij->i", s.v, s.v))
    mm = s.m[:, None] * s.m[None, :]
    pot = -float(np.sum(mm / r)) / (16.0 * math.pi)  # inf diagonal contributes 0
    return kin + pot


@dataclass
class Trajectory:
    t: np.ndarray  # (K,)
    a: np.ndarray  # (K, N, 3)
    v: np.ndarray  # (K, N, 3)
    energy: np.ndarray  # (K,)
    m: np.ndarray

    def write_csv(self, path) -> None:
        n = self.a.shape[1]
        cols = ["t"]
        for i in range(n):
            cols += [f"a{i}_x", f"a{i}_y", f"a{i}_z", f"v{i}_x", f"v{i}_y", f"v{i}_z"]
        cols.append("energy")
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for k in range(len(self.t)):
                row = [self.t[k]]
                for i in range(n):
                    row += [*self.a[k, i], *self.v[k, i]]
                row.append(self.energy[k])
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def integrate(s: NBodyState, cfg: NBodyConfig) -> Trajectory:
    """Leapfrog for cfg.steps steps, recording every cfg.every steps (and the last)."""
    ts, As, Vs, Es = [s.t], [s.a], [s.v], [nbody_energy(s)]
    for k in range(1, cfg.steps + 1):
        s = leapfrog_step(s, cfg.dt, cfg.kappa)
        if k % cfg.every == 0 or k == cfg.steps:
            ts.append(s.t)
            As.append(s.a)
            Vs.append(s.v)
            Es.append(nbody_energy(s))
    return Trajectory(np.array(ts), np.array(As), np.array(Vs), np.array(Es), s.m)


def kepler_period(r: float, M: float = 1.0, kappa: float = KAPPA_ORDERED) -> float:
    """Relative circular orbit period, T = 2 pi sqrt(r^3 / (kappa M))."""
    return 2.0 * math.pi * math.sqrt(r**3 / (kappa * M))


def free_fall_time(d: float, M: float = 1.0, kappa: float = KAPPA_ORDERED) -> float:
    """Time for two bodies released at rest a distance d apart to collide."""
    return 0.5 * math.pi * math.sqrt(d**3 / (2.0 * kappa * M))


def circular_binary(r: float, m1: float = 0.5, kappa: float = KAPPA_ORDERED) -> NBodyState:
    """Two bodies on a circular orbit of separation r about their centre of mass at 0."""
    m2 = 1.0 - m1
    w = math.sqrt(kappa / r**3)  # M = 1
    a = np.array([[-m2 * r, 0.0, 0.0], [m1 * r, 0.0, 0.0]])
    v = np.array([[0.0, -m2 * r * w, 0.0], [0.0, m1 * r * w, 0.0]])
    return NBodyState(np.array([m1, m2]), a, v)


def measure_period(traj: Trajectory) -> float:
    """Mean period from upward zero crossings of the relative y coordinate."""
    y = traj.a[:, 1, 1] - traj.a[:, 0, 1]
    x = traj.a[:, 1, 0] - traj.a[:, 0, 0]
    idx = np.nonzero((y[:-1] < 0) & (y[1:] >= 0) & (x[:-1] > 0))[0]
    if len(idx) < 2:
        raise ConfigurationError("trajectory covers fewer than two crossings")
    # linear interpolation of the crossing time
    tc = traj.t[idx] - y[idx] * (traj.t[idx + 1] - traj.t[idx]) / (y[idx + 1] - y[idx])
    return float((tc[-1] - tc[0]) / (len(tc) - 1))
