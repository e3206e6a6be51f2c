"""Low-degree polynomials of t used for gauge phases and frame trajectories."""
from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigurationError

MAX_DEGREE = 4


def as_poly(c, name: str = "polynomial") -> Polynomial:
    """Polynomial from an instance or a low-to-high coefficient list."""
    p = c if isinstance(c, Polynomial) else Polynomial(np.atleast_1d(np.asarray(c, dtype=float)))
    if not np.all(np.isfinite(p.coef)):
        raise ConfigurationError(f"{name} has non-finite coefficients")
    if p.degree() > MAX_DEGREE:
        raise ConfigurationError(f"{name} degree {p.degree()} exceeds {MAX_DEGREE}")
    return p


def as_poly_vec(c, name: str = "trajectory") -> tuple[Polynomial, Polynomial, Polynomial]:
    """Three polynomials, from three coefficient lists or three Polynomial objects."""
    if isinstance(c, Polynomial) or len(c) != 3:
        raise ConfigurationError(f"{name} needs exactly three components")
    return tuple(as_poly(ci, f"{name}[{i}]") for i, ci in enumerate(c))


def zero_vec() -> tuple[Polynomial, Polynomial, Polynomial]:
    return (Polynomial([0.0]),) * 3


def vec_eval(a, t: float, order: int = 0) -> np.ndarray:
    """Value of the ``order``-th derivative of a polynomial 3-vector at t."""
    return np.array([ai.deriv(order)(t) if order else ai(t) for ai in a], dtype=float)


def speed_sq_integral(a, t: float) -> float:
    """int_0^t |a'(s)|^2 ds, exactly."""
    total = Polynomial([0.0])
    for ai in a:
        d = ai.deriv()
        total = total + d * d
    F = total.integ()
    return float(F(t) - F(0.0))
