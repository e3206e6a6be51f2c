"""Cubic periodic grid, spectral operators and the SNF1 snapshot format."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, ShapeError

SNF_MAGIC = b"SNF1"
SNF_HEADER = struct.Struct("<4sIddI4x")  # 32 bytes
KIND_COMPLEX = 0
KIND_REAL = 1


@dataclass(frozen=True, eq=True)
class Grid3:
    """n^3 nodes on a box of edge L, centred so that the origin is a node.

    Node coordinates along each axis are (k - n/2) h for k = 0..n-1.
    Arrays are indexed [ix, iy, iz].
    """

    n: int
    L: float

    def __post_init__(self):
        n = self.n
        if isinstance(n, bool) or int(n) != n or n < 32 or int(n) & (int(n) - 1):
            raise ConfigurationError(f"grid n must be a power of two >= 32, got {n}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ConfigurationError(f"box length L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def dV(self) -> float:
        return self.h**3

    @cached_property
    def x(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.h

    def mesh(self, sparse: bool = True):
        return np.meshgrid(self.x, self.x, self.x, indexing="ij", sparse=sparse)

    @cached_property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    @cached_property
    def k_odd(self) -> np.ndarray:
        """Wavenumbers with the Nyquist mode zeroed, for odd-order derivatives."""
        k = self.k.copy()
        k[self.n // 2] = 0.0
        return k

    @cached_property
    def ksq(self) -> np.ndarray:
        k2 = self.k**2
        return k2[:, None, None] + k2[None, :, None] + k2[None, None, :]

    def kvec(self, axis: int, odd: bool = True) -> np.ndarray:
        k = self.k_odd if odd else self.k
        s = [1, 1, 1]
        s[axis] = self.n
        return k.reshape(s)

    def inner_half_mask(self) -> np.ndarray:
        """True on nodes inside the central cube of edge L/2."""
        inside = np.abs(self.x) < self.L / 4
        return inside[:, None, None] & inside[None, :, None] & inside[None, None, :]

    def check(self, *fields) -> None:
        for f in fields:
            if np.shape(f) != self.shape:
                raise ShapeError(f"field shape {np.shape(f)} does not match grid {self.shape}")


def integrate(f: np.ndarray, g: Grid3):
    """h^3 * sum(f); numpy's pairwise summation over a contiguous array."""
    return np.sum(np.ascontiguousarray(f)) * g.dV


def gradient(psi: np.ndarray, g: Grid3) -> list[np.ndarray]:
    """Spectral gradient (three arrays)."""
    ph = sfft.fftn(psi)
    return [sfft.ifftn(1j * g.kvec(a) * ph) for a in range(3)]


def laplacian(psi: np.ndarray, g: Grid3) -> np.ndarray:
    out = sfft.ifftn(-g.ksq * sfft.fftn(psi))
    return out if np.iscomplexobj(psi) else out.real


def laplacian_fd4(f: np.ndarray, g: Grid3) -> np.ndarray:
    """Fourth-order central-difference Laplacian; the outer two layers are NaN."""
    out = np.full(f.shape, np.nan, dtype=f.dtype)
    c = (slice(2, -2),) * 3
    acc = -3 * 2.5 * f[c]
    for a in range(3):
        for off, w in ((-2, -1 / 12), (-1, 4 / 3), (1, 4 / 3), (2, -1 / 12)):
            sl = [slice(2, -2)] * 3
            sl[a] = slice(2 + off, f.shape[a] - 2 + off)
            acc = acc + w * f[tuple(sl)]
    out[c] = acc / g.h**2
    return out


def write_snapshot(path, values: np.ndarray, g: Grid3, t: float) -> Path:
    """Little-endian SNF1 file: 32-byte header then f64 data with x fastest."""
    g.check(values)
    path = Path(path)
    kind = KIND_COMPLEX if np.iscomplexobj(values) else KIND_REAL
    header = SNF_HEADER.pack(SNF_MAGIC, g.n, float(g.L), float(t), kind)
    flat = np.asarray(values).ravel(order="F")
    if kind == KIND_COMPLEX:
        data = np.empty(2 * flat.size, dtype="<f8")
        data[0::2] = flat.real
        data[1::2] = flat.imag
    else:
        data = flat.astype("<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())
    return path


def read_snapshot(path) -> tuple[np.ndarray, Grid3, float]:
    raw = Path(path).read_bytes()
    if len(raw) < SNF_HEADER.size:
        raise ShapeError(f"{path}: truncated header")
    magic, n, L, t, kind = SNF_HEADER.unpack_from(raw)
    if magic != SNF_MAGIC:
        raise ShapeError(f"{path}: bad magic {magic!r}")
    g = Grid3(n, L)
    data = np.frombuffer(raw, dtype="<f8", offset=SNF_HEADER.size)
    count = n**3 * (2 if kind == KIND_COMPLEX else 1)
    if data.size != count:
        raise ShapeError(f"{path}: expected {count} values, found {data.size}")
    if kind == KIND_COMPLEX:
        flat = data[0::2] + 1j * data[1::2]
    elif kind == KIND_REAL:
        flat = data.copy()
    else:
        raise ShapeError(f"{path}: unknown kind {kind}")
    return flat.reshape(g.shape, order="F"), g, t
