"""Moving, rescaled ground-state lumps and finite symmetry transformations of fields.

A lump of mass m at a(t) = a + v t is

    Psi = m^2 psi0(m |r - a(t)|) exp(-i (m^2 E0 t - v.r/2 + |v|^2 t/4)),
    Phi = m^2 phi0(m |r - a(t)|).

Fields built from a profile carry an analytic ``source`` so later
transformations resample the profile exactly; grid-only fields are shifted by
cubic interpolation. The accelerated-frame transformation is derived in
docs/derivations.md.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.ndimage import map_coordinates
from scipy.optimize import brentq

from . import polys
from .errors import (BoundaryWarning, ConfigurationError, PlacementError, PreconditionError,
                     ResolutionError, SeparationWarning, ShapeError, SingularityError)
from .grid import Grid3, integrate
from .radial import GroundStateProfile, half_radius, sample_profile

MASS_TOL = 1e-12
SUPPORT_REL = 1e-12  # amplitude defining the nominal lump support
PLACEMENT_REL = 1e-3  # edge amplitude above which placement is refused
SUPPORT_MARGIN = 2.0
WIDE_SEPARATION = 4.0  # in core radii
CORE_FRACTION = 0.99
MIN_CORE_STEPS = 2.0  # half-amplitude radius must span this many grid steps

Source = Callable[[np.ndarray, np.ndarray, np.ndarray, float], tuple]


@dataclass(frozen=True)
class LumpSpec:
    m: float
    a: tuple = (0.0, 0.0, 0.0)
    v: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        v = tuple(float(x) for x in self.v)
        if len(a) != 3 or len(v) != 3:
            raise ConfigurationError("lump position and velocity must be 3-vectors")
        if not (self.m > 0 and math.isfinite(self.m)):
            raise ConfigurationError(f"lump mass must be positive, got {self.m}")
        if not all(math.isfinite(x) for x in a + v):
            raise ConfigurationError("lump position and velocity must be finite")
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "v", v)

    def position(self, t: float) -> np.ndarray:
        return np.asarray(self.a) + np.asarray(self.v) * t

    def to_dict(self) -> dict:
        return {"m": self.m, "a": list(self.a), "v": list(self.v)}


@dataclass(frozen=True)
class LumpSystem:
    lumps: tuple

    def __post_init__(self):
        lumps = tuple(l if isinstance(l, LumpSpec) else LumpSpec(**l) for l in self.lumps)
        if not lumps:
            raise ConfigurationError("a lump system needs at least one lump")
        total = math.fsum(l.m for l in lumps)
        if abs(total - 1.0) > MASS_TOL:
            raise ConfigurationError(f"lump masses must sum to 1, got {total!r}")
        for i in range(len(lumps)):
            for j in range(i + 1, len(lumps)):
                if not np.linalg.norm(np.subtract(lumps[i].a, lumps[j].a)) > 0:
                    raise SingularityError(f"lumps {i} and {j} share a position")
        object.__setattr__(self, "lumps", lumps)

    def __len__(self):
        return len(self.lumps)

    @property
    def masses(self) -> np.ndarray:
        return np.array([l.m for l in self.lumps])

    @property
    def positions(self) -> np.ndarray:
        return np.array([l.a for l in self.lumps])

    @property
    def velocities(self) -> np.ndarray:
        return np.array([l.v for l in self.lumps])

    def min_separation(self) -> float:
        a = self.positions
        d = [np.linalg.norm(a[i] - a[j]) for i in range(len(a)) for j in range(i + 1, len(a))]
        return float(min(d)) if d else math.inf

    def to_dict(self) -> dict:
        return {"lumps": [l.to_dict() for l in self.lumps]}

    @classmethod
    def from_dict(cls, d: dict) -> "LumpSystem":
        try:
            items = d["lumps"]
        except (KeyError, TypeError):
            raise ConfigurationError("lump system needs a 'lumps' list") from None
        try:
            return cls(tuple(LumpSpec(**item) for item in items))
        except TypeError as exc:
            raise ConfigurationError(f"bad lump entry: {exc}") from None

    @classmethod
    def read(cls, path) -> "LumpSystem":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass
class FieldPair:
    psi: np.ndarray
    phi: np.ndarray
    grid: Grid3
    t: float = 0.0
    source: Source | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid.check(self.psi, self.phi)
        if np.iscomplexobj(self.phi):
            raise ShapeError("phi must be real")

    def at_time(self, t: float) -> "FieldPair":
        """Re-evaluate a profile-backed pair at another time."""
        if self.source is None:
            raise PreconditionError("only profile-backed fields can be moved in time")
        return _from_source(self.source, self.grid, t, dict(self.meta))


def _from_source(src: Source, g: Grid3, t: float, meta: dict) -> FieldPair:
    X, Y, Z = g.mesh()
    psi, phi = src(X, Y, Z, t)
    return FieldPair(np.asarray(psi, dtype=complex), np.asarray(phi, dtype=float), g, t, src, meta)


# --- radii ----------------------------------------------------------------


@lru_cache(maxsize=8)
def _unit_amplitude_radius(p: GroundStateProfile, rel: float) -> float:
    peak = float(p.psi0[0])

    def f(r):
        return math.log(float(sample_profile(p, np.array([r]))[0][0]) / peak) - math.log(rel)

    hi = p.grid.r_max
    while f(hi) > 0:
        hi *= 2.0
    return brentq(f, 0.0, hi, xtol=1e-10 * hi, rtol=1e-14)


@lru_cache(maxsize=8)
def _unit_core_radius(p: GroundStateProfile, fraction: float) -> float:
    r = p.grid.nodes
    cum = cumulative_trapezoid(4.0 * math.pi * r * r * p.psi0**2, r, initial=0.0)
    target = fraction * cum[-1]
    k = int(np.searchsorted(cum, target))
    return float(np.interp(target, cum[k - 1:k + 1], r[k - 1:k + 1]))


def lump_radius(p: GroundStateProfile, m: float = 1.0, rel: float = SUPPORT_REL) -> float:
    """Radius where m^2 psi0(m r) falls to ``rel`` of its peak."""
    if not 0 < rel < 1:
        raise ConfigurationError(f"rel must lie in (0, 1), got {rel}")
    return _unit_amplitude_radius(p, float(rel)) / m


def core_radius(p: GroundStateProfile, m: float = 1.0, fraction: float = CORE_FRACTION) -> float:
    """Radius enclosing ``fraction`` of the lump's probability."""
    if not 0 < fraction < 1:
        raise ConfigurationError(f"fraction must lie in (0, 1), got {fraction}")
    return _unit_core_radius(p, float(fraction)) / m


# --- placement ----------------------------------------------------------------


def _face_distance(g: Grid3, centre) -> float:
    lo, hi = float(g.x[0]), float(g.x[-1])
    c = np.asarray(centre, dtype=float)
    return float(min(np.min(c - lo), np.min(hi - c)))


def check_placement(p: GroundStateProfile, m: float, centre, g: Grid3) -> None:
    """Refuse lumps whose amplitude at the box faces exceeds PLACEMENT_REL of the peak.

    The nominal 1e-12 support plus margin rarely fits a resolvable box; when it
    does not, a BoundaryWarning is issued instead of an error.
    """
    d = _face_distance(g, centre)
    if d <= 0 or d < lump_radius(p, m, PLACEMENT_REL):
        raise PlacementError(
            f"lump of mass {m} at {tuple(np.round(np.asarray(centre, float), 6))} reaches "
            f"the box faces above {PLACEMENT_REL:g} of its peak (face distance {d:.6g})")
    need = (1.0 + SUPPORT_MARGIN) * lump_radius(p, m)
    if d < need:
        warnings.warn(f"lump support ({SUPPORT_REL:g} amplitude, with margin) needs {need:.4g} "
                      f"but the nearest face is at {d:.4g}", BoundaryWarning, stacklevel=3)


def _check_edges(f: FieldPair, what: str) -> FieldPair:
    a = np.abs(f.psi)
    peak = a.max()
    if peak == 0:
        return f
    faces = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max(),
                a[:, :, 0].max(), a[:, :, -1].max())
    if faces > PLACEMENT_REL * peak:
        raise PlacementError(f"{what} pushes the field to {faces / peak:.2e} of its peak "
                             "at the box boundary")
    return f


# --- construction -------------------------------------------------------------


def lump_source(p: GroundStateProfile, s: LumpSpec) -> Source:
    m, E0 = s.m, p.E0
    a = np.asarray(s.a)
    v = np.asarray(s.v)
    v2 = float(v @ v)

    def src(X, Y, Z, t):
        c = a + v * t
        r = np.sqrt((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2)
        psi0, phi0 = sample_profile(p, m * r)
        theta = -(m * m * E0 * t - 0.5 * (v[0] * X + v[1] * Y + v[2] * Z) + 0.25 * v2 * t)
        return m * m * psi0 * np.exp(1j * theta), m * m * phi0

    return src


def make_lump(p: GroundStateProfile, s: LumpSpec, t: float, g: Grid3) -> FieldPair:
    """Sample one moving lump on the grid at time t."""
    check_placement(p, s.m, s.position(t), g)
    return _from_source(lump_source(p, s), g, t, {"lumps": [s.to_dict()], "E0": p.E0})


def superpose(sys: LumpSystem, p: GroundStateProfile, t: float, g: Grid3) -> FieldPair:
    """Sum of individual lumps and their individual potentials.

    ``meta`` records ``overlap_bound`` (2 sum_{i<j} int |Psi_i||Psi_j|, which
    bounds the norm defect from cross terms) and ``wide`` (all separations at
    least WIDE_SEPARATION core radii).
    """
    srcs = [lump_source(p, s) for s in sys.lumps]
    for s in sys.lumps:
        check_placement(p, s.m, s.position(t), g)

    def src(X, Y, Z, t):
        psi = 0.0
        phi = 0.0
        for f in srcs:
            a, b = f(X, Y, Z, t)
            psi = psi + a
            phi = phi + b
        return psi, phi

    X, Y, Z = g.mesh()
    parts = [np.abs(f(X, Y, Z, t)[0]) for f in srcs] if len(srcs) > 1 else []
    overlap = 0.0
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            overlap += 2.0 * float(integrate(parts[i] * parts[j], g))
    del parts
    wide = True
    pos = np.array([s.position(t) for s in sys.lumps])
    for i in range(len(sys)):
        for j in range(i + 1, len(sys)):
            d = float(np.linalg.norm(pos[i] - pos[j]))
            need = WIDE_SEPARATION * max(core_radius(p, sys.lumps[i].m),
                                         core_radius(p, sys.lumps[j].m))
            if d < need:
                wide = False
                warnings.warn(f"lumps {i} and {j} are {d:.4g} apart, below "
                              f"{WIDE_SEPARATION:g} core radii ({need:.4g})",
                              SeparationWarning, stacklevel=2)
    meta = {"lumps": [s.to_dict() for s in sys.lumps], "E0": p.E0,
            "overlap_bound": overlap, "wide": wide}
    return _from_source(src, g, t, meta)


# --- finite transformations ---------------------------------------------------


def _shift(values: np.ndarray, g: Grid3, shift, order: int = 3, mode: str = "constant") -> np.ndarray:
    """values(r - shift) by cubic interpolation on the grid."""
    s = np.asarray(shift, dtype=float) / g.h
    if not s.any():
        return values.copy()
    idx = np.indices(g.shape, dtype=float)
    coords = [idx[k] - s[k] for k in range(3)]
    if np.iscomplexobj(values):
        return (map_coordinates(values.real, coords, order=order, mode=mode)
                + 1j * map_coordinates(values.imag, coords, order=order, mode=mode))
    return map_coordinates(values, coords, order=order, mode=mode)


def _need_time(f: FieldPair, t):
    if t is None:
        return f.t
    if f.source is None and t != f.t:
        raise PreconditionError(f"grid-backed field is at t = {f.t}, not {t}")
    return t


def _transform(f: FieldPair, t: float, shift, phase, dphi, what: str, meta_update: dict):
    """psi(r - shift) e^{i phase(r)}, phi(r - shift) + dphi(r) at time t."""
    g = f.grid
    shift = np.asarray(shift, dtype=float)
    if f.source is not None:
        inner = f.source

        def src(X, Y, Z, tt, _sh=shift):
            psi, phi = inner(X - _sh[0], Y - _sh[1], Z - _sh[2], tt)
            return psi * np.exp(1j * phase(X, Y, Z, tt)), phi + dphi(X, Y, Z, tt)

        out = _from_source(src, g, t, {**f.meta, **meta_update})
    else:
        X, Y, Z = g.mesh()
        psi = _shift(f.psi, g, shift) * np.exp(1j * phase(X, Y, Z, t))
        phi = _shift(f.phi, g, shift, mode="nearest") + dphi(X, Y, Z, t)
        out = FieldPair(psi, np.asarray(phi, dtype=float), g, t, None, {**f.meta, **meta_update})
    return _check_edges(out, what)


def galilean_boost(f: FieldPair, v, t: float | None = None) -> FieldPair:
    """psi(r - v t) e^{i(v.r/2 - |v|^2 t/4)}, phi(r - v t)."""
    t = _need_time(f, t)
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ConfigurationError("velocity must be a 3-vector")
    a = tuple(polys.as_poly([0.0, vi]) for vi in v)
    return accelerated_frame(f, a, t)


def accelerated_frame(f: FieldPair, a, t: float | None = None) -> FieldPair:
    """Move to a frame displaced by the polynomial path a(t).

    psi~(r, t) = psi(r - a, t) exp(i (a'.r/2 - 1/4 int_0^t |a'|^2)),
    phi~(r, t) = phi(r - a, t) - a''.r/2.
    Profile-backed fields accept any t; the shift is always taken at t.
    """
    t = _need_time(f, t)
    a = polys.as_poly_vec(a, "a(t)")

    def phase(X, Y, Z, tt):
        ad = polys.vec_eval(a, tt, 1)
        return 0.5 * (ad[0] * X + ad[1] * Y + ad[2] * Z) - 0.25 * polys.speed_sq_integral(a, tt)

    def dphi(X, Y, Z, tt):
        add = polys.vec_eval(a, tt, 2)
        return -0.5 * (add[0] * X + add[1] * Y + add[2] * Z)

    if f.source is not None:
        # the shift depends on the evaluation time, so wrap the source directly
        inner = f.source

        def src(X, Y, Z, tt):
            c = polys.vec_eval(a, tt)
            psi, phi = inner(X - c[0], Y - c[1], Z - c[2], tt)
            return psi * np.exp(1j * phase(X, Y, Z, tt)), phi + dphi(X, Y, Z, tt)

        out = _from_source(src, f.grid, t, dict(f.meta))
        return _check_edges(out, "accelerated frame")
    return _transform(f, t, polys.vec_eval(a, t), phase, dphi, "accelerated frame", {})


def phase_gauge(f: FieldPair, omega, t: float | None = None) -> FieldPair:
    """psi e^{i Omega(t)}, phi - Omega'(t)."""
    t = _need_time(f, t)
    om = polys.as_poly(omega, "Omega(t)")
    dom = om.deriv()

    def phase(X, Y, Z, tt):
        return float(om(tt))

    def dphi(X, Y, Z, tt):
        return -float(dom(tt))

    return _transform(f, t, np.zeros(3), phase, dphi, "phase gauge", {})


def _half_width(f: FieldPair) -> float:
    a = np.abs(f.psi)
    count = int(np.count_nonzero(a >= 0.5 * a.max()))
    return (3.0 * count * f.grid.dV / (4.0 * math.pi)) ** (1.0 / 3.0)


def scale_fields(f: FieldPair, lam: float, profile: GroundStateProfile | None = None) -> FieldPair:
    """lam^2 psi(lam x), lam^2 phi(lam x); time relabelled t -> t / lam^2.

    ``profile`` supplies the half-amplitude radius for the resolution check of
    profile-backed input; otherwise it is estimated from the grid.
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise ConfigurationError(f"scale factor must be positive, got {lam}")
    g = f.grid
    width = half_radius(profile) if profile is not None else _half_width(f)
    if width / lam < MIN_CORE_STEPS * g.h:
        raise ResolutionError(f"scaled half-amplitude radius {width / lam:.4g} is below "
                              f"{MIN_CORE_STEPS:g} grid steps ({g.h:.4g})")
    meta = {**f.meta, "scale": f.meta.get("scale", 1.0) * lam, "time_from": f.t}
    if lam == 1.0:
        return replace(f, psi=f.psi.copy(), phi=f.phi.copy(), meta=meta)
    t_new = f.t / lam**2
    if f.source is not None:
        inner = f.source

        def src(X, Y, Z, tt):
            psi, phi = inner(lam * X, lam * Y, lam * Z, lam**2 * tt)
            return lam**2 * psi, lam**2 * phi

        return _check_edges(_from_source(src, g, t_new, meta), "scaling")
    idx = np.indices(g.shape, dtype=float)
    c = g.n // 2
    coords = [lam * (idx[k] - c) + c for k in range(3)]
    psi = lam**2 * (map_coordinates(f.psi.real, coords, order=3, mode="constant")
                    + 1j * map_coordinates(f.psi.imag, coords, order=3, mode="constant"))
    phi = lam**2 * map_coordinates(f.phi, coords, order=3, mode="nearest")
    return _check_edges(FieldPair(psi, phi, g, t_new, None, meta), "scaling")
