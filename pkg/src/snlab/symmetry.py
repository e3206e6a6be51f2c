"""Second prolongation of Schrodinger-Newton point symmetries at jet points.

Coordinates are x^0 = t, x^1..x^3 = (x, y, z) and u^0 = u = psi,
u^1 = v = conj(psi), u^2 = w = phi, with u and v independent. The equations
are

    H1 = i u_0 + Lap u - u w,   H2 = i v_0 - Lap v + v w,   H3 = Lap w - u v.

Every generator is a member of one assembled family with constants a1..a8,
a phase polynomial Omega(t) and a trajectory A(t):

    xi^0 = 2 a1 t + a5,   xi^j = a1 x^j + (R x)^j + a_{5+j} + A_j(t),
    eta^u = u (i x.A'/2 - 2 a1 + i Omega),
    eta^v = -v (i x.A'/2 + 2 a1 + i Omega),
    eta^w = -2 a1 w - x.A''/2 - Omega',

with R antisymmetric, R_12 = a2, R_13 = a3, R_23 = a4. The prolongation uses
the general point-transformation formulas with closed-form partials of xi and
eta; no derivative is taken numerically.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from . import polys
from .errors import ConfigurationError, PreconditionError

KINDS = tuple(f"X{k}" for k in range(1, 11)) + ("general",)
BREAK_TERMS = {
    "X9:eta_w": "omega_w",  # drop -Omega' from eta^w
    "X10:phase": "frame_phase",  # drop i x.A'/2 from eta^u and eta^v
    "X10:eta_w": "frame_w",  # drop -x.A''/2 from eta^w
}
PAIRS = tuple((n, m) for n in range(4) for m in range(n, 4))  # 00, 01, ..., 33
PAIR_INDEX = {}
for _i, (_n, _m) in enumerate(PAIRS):
    PAIR_INDEX[_n, _m] = PAIR_INDEX[_m, _n] = _i
U, V, W = 0, 1, 2
CONSTRAINT_TOL = 1e-13
ELIMINATIONS = ("w33", "w11")


def pair(n: int, m: int) -> int:
    """Index of the symmetric derivative pair (n, m) in a length-10 row."""
    return PAIR_INDEX[n, m]


@dataclass(frozen=True)
class JetPoint:
    x: np.ndarray  # (4,) real
    u: np.ndarray  # (3,) complex
    du: np.ndarray  # (3, 4) complex
    ddu: np.ndarray  # (3, 10) complex, rows indexed by pair(n, m)

    def __post_init__(self):
        for name, shape, dt in (("x", (4,), float), ("u", (3,), complex),
                                ("du", (3, 4), complex), ("ddu", (3, 10), complex)):
            a = np.array(getattr(self, name), dtype=dt)
            if a.shape != shape:
                raise ConfigurationError(f"jet {name} must have shape {shape}, got {a.shape}")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def second(self) -> np.ndarray:
        """Full symmetric (3, 4, 4) array of second derivatives."""
        out = np.empty((3, 4, 4), dtype=complex)
        for n in range(4):
            for m in range(4):
                out[:, n, m] = self.ddu[:, pair(n, m)]
        return out

    def laplacian(self, alpha: int) -> complex:
        return self.ddu[alpha, pair(1, 1)] + self.ddu[alpha, pair(2, 2)] + self.ddu[alpha, pair(3, 3)]

    def scale(self) -> float:
        """1 + (largest coordinate magnitude)^3."""
        m = max(np.abs(self.x).max(), np.abs(self.u).max(), np.abs(self.du).max(),
                np.abs(self.ddu).max())
        return 1.0 + float(m) ** 3

    @classmethod
    def zero(cls, x=(0.0, 0.0, 0.0, 0.0)) -> "JetPoint":
        return cls(np.asarray(x, float), np.zeros(3), np.zeros((3, 4)), np.zeros((3, 10)))


def _disk(rng: np.random.Generator, shape) -> np.ndarray:
    r = np.sqrt(rng.random(shape))
    return r * np.exp(2j * np.pi * rng.random(shape))


def random_jet(rng: np.random.Generator, x_range: float = 1.0) -> JetPoint:
    """Coordinates uniform in [-x_range, x_range], jet values uniform in the unit disk."""
    x = rng.uniform(-x_range, x_range, 4)
    return JetPoint(x, _disk(rng, 3), _disk(rng, (3, 4)), _disk(rng, (3, 10)))


def equations(p: JetPoint) -> np.ndarray:
    """(H1, H2, H3) at a jet point."""
    u, v, w = p.u
    return np.array([
        1j * p.du[U, 0] + p.laplacian(U) - u * w,
        1j * p.du[V, 0] - p.laplacian(V) + v * w,
        p.laplacian(W) - u * v,
    ])


def constrain_jet(p: JetPoint, eliminate: str = "w33") -> JetPoint:
    """Solve H1, H2 for u_0, v_0 and H3 for w_33 (or w_11), keeping all else."""
    if eliminate not in ELIMINATIONS:
        raise ConfigurationError(f"eliminate must be one of {ELIMINATIONS}")
    u, v, w = p.u
    du = p.du.copy()
    ddu = p.ddu.copy()
    if eliminate == "w33":
        ddu[W, pair(3, 3)] = u * v - ddu[W, pair(1, 1)] - ddu[W, pair(2, 2)]
    else:
        ddu[W, pair(1, 1)] = u * v - ddu[W, pair(2, 2)] - ddu[W, pair(3, 3)]
    lap_u = ddu[U, pair(1, 1)] + ddu[U, pair(2, 2)] + ddu[U, pair(3, 3)]
    lap_v = ddu[V, pair(1, 1)] + ddu[V, pair(2, 2)] + ddu[V, pair(3, 3)]
    du[U, 0] = -1j * (u * w - lap_u)
    du[V, 0] = 1j * (v * w - lap_v)
    return JetPoint(p.x, p.u, du, ddu)


def is_constrained(p: JetPoint, tol: float = CONSTRAINT_TOL) -> bool:
    return bool(np.max(np.abs(equations(p))) <= tol * p.scale())


# --- generators -------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    """One generator X1..X10, or ``general`` for an arbitrary combination.

    ``params`` holds a1..a8; Xk for k <= 8 uses only a_k. ``omega`` (X9) and
    ``a_vec`` (X10) are polynomials of t of degree at most 4. ``drop`` removes
    named terms (see BREAK_TERMS) to build negative controls.
    """

    kind: str
    params: tuple = (0.0,) * 8
    omega: Polynomial = field(default_factory=lambda: Polynomial([0.0]))
    a_vec: tuple = field(default_factory=polys.zero_vec)
    drop: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown generator kind {self.kind!r}")
        params = tuple(float(a) for a in self.params)
        if len(params) != 8 or not all(np.isfinite(params)):
            raise ConfigurationError("params must be eight finite reals a1..a8")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "omega", polys.as_poly(self.omega, "Omega(t)"))
        object.__setattr__(self, "a_vec", polys.as_poly_vec(self.a_vec, "a(t)"))
        drop = frozenset(BREAK_TERMS.get(d, d) for d in self.drop)
        unknown = drop - set(BREAK_TERMS.values())
        if unknown:
            raise ConfigurationError(f"unknown break terms {sorted(unknown)}")
        object.__setattr__(self, "drop", drop)

    @classmethod
    def unit(cls, kind: str, omega=None, a_vec=None, drop=()) -> "GeneratorSpec":
        """Xk exactly as listed: a_k = 1, or the given Omega / A for X9 / X10."""
        params = [0.0] * 8
        k = int(kind[1:]) if kind != "general" else 0
        if 1 <= k <= 8:
            params[k - 1] = 1.0
        return cls(kind, tuple(params),
                   omega if omega is not None else Polynomial([0.0]),
                   a_vec if a_vec is not None else polys.zero_vec(), frozenset(drop))

    @classmethod
    def random(cls, kind: str, rng: np.random.Generator, degree: int = 4, drop=()) -> "GeneratorSpec":
        return cls(kind, tuple(rng.normal(size=8)),
                   Polynomial(rng.normal(size=degree + 1)),
                   tuple(Polynomial(rng.normal(size=degree + 1)) for _ in range(3)),
                   frozenset(drop))

    def effective(self):
        """(a1..a8, Omega, A) after masking parameters the kind does not use."""
        zero = Polynomial([0.0])
        if self.kind == "general":
            return np.array(self.params), self.omega, self.a_vec
        k = int(self.kind[1:])
        a = np.zeros(8)
        if k <= 8:
            a[k - 1] = self.params[k - 1]
        return (a, self.omega if k == 9 else zero,
                self.a_vec if k == 10 else polys.zero_vec())

    def __add__(self, other: "GeneratorSpec") -> "GeneratorSpec":
        if self.drop or other.drop:
            raise ConfigurationError("cannot combine generators with dropped terms")
        a1, o1, A1 = self.effective()
        a2, o2, A2 = other.effective()
        return GeneratorSpec("general", tuple(a1 + a2), o1 + o2,
                             tuple(p + q for p, q in zip(A1, A2)))


@dataclass(frozen=True)
class _Tensors:
    """Values and partials of the generator coefficients at one (x, u)."""

    xi: np.ndarray  # (4,)
    eta: np.ndarray  # (3,)
    xi_x: np.ndarray  # (4, 4) d xi^i / d x^n  [i, n]
    xi_xx: np.ndarray  # (4, 4, 4) [i, n, m]
    eta_x: np.ndarray  # (3, 4)
    eta_xx: np.ndarray  # (3, 4, 4)
    eta_u: np.ndarray  # (3, 3) d eta^a / d u^b
    eta_xu: np.ndarray  # (3, 4, 3)
    eta_uu: np.ndarray  # (3, 3, 3)
    xi_u: np.ndarray  # (4, 3)
    xi_xu: np.ndarray  # (4, 4, 3)
    xi_uu: np.ndarray  # (4, 3, 3)


def _rotation(a: np.ndarray) -> np.ndarray:
    a2, a3, a4 = a[1], a[2], a[3]
    return np.array([[0.0, a2, a3], [-a2, 0.0, a4], [-a3, -a4, 0.0]])


def _tensors(s: GeneratorSpec, x, u) -> _Tensors:
    a, om, A = s.effective()
    t = float(x[0])
    r = np.asarray(x[1:], dtype=float)
    uu = np.asarray(u, dtype=complex)
    Ad = [polys.vec_eval(A, t, k) for k in range(5)]  # A, A', ..., A''''
    Om = [float(om.deriv(k)(t)) if k else float(om(t)) for k in range(4)]
    a1 = a[0]
    R = _rotation(a)
    phase = "frame_phase" not in s.drop
    frame_w = "frame_w" not in s.drop
    omega_w = "omega_w" not in s.drop

    xi = np.empty(4)
    xi[0] = 2 * a1 * t + a[4]
    xi[1:] = a1 * r + R @ r + a[5:8] + Ad[0]
    xi_x = np.zeros((4, 4))
    xi_x[0, 0] = 2 * a1
    xi_x[1:, 0] = Ad[1]
    xi_x[1:, 1:] = a1 * np.eye(3) + R
    xi_xx = np.zeros((4, 4, 4))
    xi_xx[1:, 0, 0] = Ad[2]

    # eta^u = c_u u, eta^v = c_v v, eta^w = -2 a1 w + d(x)
    # c_u = i g - 2 a1 + i Omega with g = x.A'/2; c_v = -(i g + 2 a1 + i Omega)
    pf = 1.0 if phase else 0.0
    g = pf * 0.5 * (r @ Ad[1])
    g_t = pf * 0.5 * (r @ Ad[2])
    g_tt = pf * 0.5 * (r @ Ad[3])
    g_j = pf * 0.5 * Ad[1]
    g_tj = pf * 0.5 * Ad[2]
    c = np.array([1j * g - 2 * a1 + 1j * Om[0], -(1j * g + 2 * a1 + 1j * Om[0])])
    c_t = np.array([1j * (g_t + Om[1]), -1j * (g_t + Om[1])])
    c_tt = np.array([1j * (g_tt + Om[2]), -1j * (g_tt + Om[2])])
    c_j = np.array([1j * g_j, -1j * g_j])
    c_tj = np.array([1j * g_tj, -1j * g_tj])
    wf = 1.0 if frame_w else 0.0
    of = 1.0 if omega_w else 0.0
    d = -wf * 0.5 * (r @ Ad[2]) - of * Om[1]
    d_t = -wf * 0.5 * (r @ Ad[3]) - of * Om[2]
    d_tt = -wf * 0.5 * (r @ Ad[4]) - of * Om[3]
    d_j = -wf * 0.5 * Ad[2]
    d_tj = -wf * 0.5 * Ad[3]

    eta = np.array([c[0] * uu[U], c[1] * uu[V], -2 * a1 * uu[W] + d])
    eta_u = np.diag([c[0], c[1], -2 * a1]).astype(complex)
    eta_x = np.zeros((3, 4), dtype=complex)
    eta_xx = np.zeros((3, 4, 4), dtype=complex)
    eta_xu = np.zeros((3, 4, 3), dtype=complex)
    for k in (U, V):
        eta_x[k, 0] = c_t[k] * uu[k]
        eta_x[k, 1:] = c_j[k] * uu[k]
        eta_xx[k, 0, 0] = c_tt[k] * uu[k]
        eta_xx[k, 0, 1:] = eta_xx[k, 1:, 0] = c_tj[k] * uu[k]
        eta_xu[k, 0, k] = c_t[k]
        eta_xu[k, 1:, k] = c_j[k]
    eta_x[W, 0] = d_t
    eta_x[W, 1:] = d_j
    eta_xx[W, 0, 0] = d_tt
    eta_xx[W, 0, 1:] = eta_xx[W, 1:, 0] = d_tj
    return _Tensors(xi, eta, xi_x, xi_xx, eta_x, eta_xx, eta_u, eta_xu,
                    np.zeros((3, 3, 3), dtype=complex), np.zeros((4, 3)),
                    np.zeros((4, 4, 3)), np.zeros((4, 3, 3)))


def eval_generator(s: GeneratorSpec, x, u) -> tuple[np.ndarray, np.ndarray]:
    """(xi, eta) of the generator at coordinates x and field values u."""
    T = _tensors(s, np.asarray(x, dtype=float), np.asarray(u, dtype=complex))
    return T.xi.copy(), T.eta.copy()


def generator_jacobian(s: GeneratorSpec, x, u) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (xi, eta) as one 7-vector and their 7x7 Jacobian in (x, u)."""
    T = _tensors(s, np.asarray(x, dtype=float), np.asarray(u, dtype=complex))
    coef = np.concatenate([T.xi.astype(complex), T.eta])
    J = np.zeros((7, 7), dtype=complex)
    J[:4, :4] = T.xi_x
    J[:4, 4:] = T.xi_u
    J[4:, :4] = T.eta_x
    J[4:, 4:] = T.eta_u
    return coef, J


def commutator(s1: GeneratorSpec, s2: GeneratorSpec, x, u) -> np.ndarray:
    """Coefficients of [X1, X2] as first-order operators on (t, x, y, z, u, v, w)."""
    c1, J1 = generator_jacobian(s1, x, u)
    c2, J2 = generator_jacobian(s2, x, u)
    return J2 @ c1 - J1 @ c2


@dataclass(frozen=True)
class ProlongedEval:
    xi: np.ndarray  # (4,)
    eta: np.ndarray  # (3,)
    eta1: np.ndarray  # (3, 4)
    eta2: np.ndarray  # (3, 10)

    def second(self, alpha: int, n: int, m: int) -> complex:
        return self.eta2[alpha, pair(n, m)]


def prolong(s: GeneratorSpec, p: JetPoint) -> ProlongedEval:
    """Second prolongation of ``s`` at ``p`` (valid on all of jet space)."""
    T = _tensors(s, p.x, p.u)
    du = p.du  # [a, n]
    dd = p.second()  # [a, n, m]
    # first order: eta_n = eta_,n + eta_,b u^b_n - xi^i_,n u_i - xi^i_,b u^b_n u_i
    eta1 = (T.eta_x + np.einsum("ab,bn->an", T.eta_u, du)
            - np.einsum("in,ai->an", T.xi_x, du)
            - np.einsum("ib,bn,ai->an", T.xi_u, du, du))
    eta2 = np.empty((3, 10), dtype=complex)
    for idx, (n, m) in enumerate(PAIRS):
        val = (T.eta_xx[:, n, m]
               + T.eta_xu[:, n, :] @ du[:, m] + T.eta_xu[:, m, :] @ du[:, n]
               - du @ T.xi_xx[:, n, m]
               + np.einsum("abc,b,c->a", T.eta_uu, du[:, n], du[:, m])
               - du @ (T.xi_xu[:, n, :] @ du[:, m] + T.xi_xu[:, m, :] @ du[:, n])
               - du @ np.einsum("kbc,b,c->k", T.xi_uu, du[:, n], du[:, m])
               + T.eta_u @ dd[:, n, m]
               - dd[:, m, :] @ T.xi_x[:, n] - dd[:, n, :] @ T.xi_x[:, m]
               - du @ (T.xi_u @ dd[:, n, m])
               - dd[:, m, :] @ (T.xi_u @ du[:, n]) - dd[:, n, :] @ (T.xi_u @ du[:, m]))
        eta2[:, idx] = val
    return ProlongedEval(T.xi, T.eta, eta1, eta2)


def symmetry_residual_raw(s: GeneratorSpec, p: JetPoint) -> np.ndarray:
    """(XH1, XH2, XH3) at any jet point, without imposing H_A = 0."""
    P = prolong(s, p)
    u, v, w = p.u
    eu, ev, ew = P.eta

    def lap(a):
        return P.second(a, 1, 1) + P.second(a, 2, 2) + P.second(a, 3, 3)

    return np.array([
        1j * P.eta1[U, 0] + lap(U) - eu * w - ew * u,
        1j * P.eta1[V, 0] - lap(V) + ev * w + ew * v,
        lap(W) - eu * v - ev * u,
    ])


def symmetry_residual(s: GeneratorSpec, p: JetPoint) -> np.ndarray:
    """(XH1, XH2, XH3) at a point of the solution manifold."""
    if not is_constrained(p):
        h = np.max(np.abs(equations(p)))
        raise PreconditionError(f"jet point is off-shell (max |H| = {h:.3e}); "
                                "apply constrain_jet first")
    return symmetry_residual_raw(s, p)


@dataclass
class VerificationRow:
    generator: str
    point_index: int
    residual: np.ndarray  # |XH1|, |XH2|, |XH3|
    scale: float

    @property
    def relative(self) -> float:
        return float(self.residual.max() / self.scale)


def verify(kinds=KINDS[:10], points: int = 100, seed: int = 7, drop=(),
           eliminate: str = "w33") -> list[VerificationRow]:
    """Residuals of seeded random generators at seeded random constrained points.

    One generator draw per family (random a1..a8, Omega, A); all draws come
    from a single generator seeded with ``seed``.
    """
    if points < 1:
        raise ConfigurationError(f"points must be >= 1, got {points}")
    rng = np.random.default_rng(seed)
    jets = [constrain_jet(random_jet(rng), eliminate) for _ in range(points)]
    rows = []
    for kind in kinds:
        spec = GeneratorSpec.random(kind, rng, drop=drop)
        for i, p in enumerate(jets):
            rows.append(VerificationRow(kind, i, np.abs(symmetry_residual(spec, p)), p.scale()))
    return rows


def applicable_breaks(kind: str) -> list[str]:
    return [k for k in BREAK_TERMS if k.split(":")[0] == kind]

